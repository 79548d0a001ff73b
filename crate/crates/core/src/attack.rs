//! End-to-end attack experiments and the modulation-variance monitor.
//!
//! An attack scenario fixes the impact factor `M` (directly or from
//! per-device modulator settings) and whether a full intercept-resend
//! attack rides under it. Running the experiment produces the key rate
//! Alice and Bob *believe* they have, `K_est = K(V_A, T_est, eps_est)`,
//! next to the rate they actually have, `K_pra = K(M*V_A, T_pra, eps_pra)`;
//! the gap between the two is the key information leaked to Eve. The
//! countermeasure estimates `M` as the ratio of monitored to nominal
//! modulation variance and raises an alarm above a threshold calibrated
//! on the chi-square null distribution.

use crate::channel::{
    effective_excess_noise, generate_quadratures, sample_variance, ChannelParams, SystemParams,
};
use crate::error::{ensure_finite, Error, Result};
use crate::estimation::{
    analytic_fit, estimate_channel, mle_fit, normal_upper_quantile, predicted_bias,
    worst_case_bounds, ChannelEstimate,
};
use crate::keyrate::{finite_size_key_rate, secret_key_rate, KeyRateReport};
use crate::modulator::{cascade_impact, gain_factor, ModulatorConfig};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

/// How the adversary reaches the target impact factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioMode {
    /// No attack; `M = 1`.
    None,
    /// Response curve preset before the session; `M` holds from step 0.
    Pretreatment,
    /// Pulsed irradiation ramps `M` up over a number of steps, then a
    /// reduced duty cycle holds it against photorefractive decay.
    PulseInjection,
    /// Sagnac-loop intensity modulator: perturbations hit both interfering
    /// beams identically, so the differential phase and hence `M` stay 1.
    SagnacBaseline,
}

/// One modulator of the cascade together with its loaded voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOperatingPoint {
    pub config: ModulatorConfig,
    pub v_mod: f64,
}

/// Impact factor given directly or derived from device settings.
#[derive(Debug, Clone, PartialEq)]
pub enum ImpactSpec {
    Direct(f64),
    PerDevice(Vec<DeviceOperatingPoint>),
}

/// The adversary's knobs for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackScenario {
    pub mode: ScenarioMode,
    pub m_spec: ImpactSpec,
    pub intercept_resend: bool,
    /// Steps of the pulse-injection ramp; 0 jumps straight to the
    /// stabilized value. Ignored by the other modes.
    pub ramp_steps: u64,
}

impl AttackScenario {
    pub fn none() -> Self {
        Self {
            mode: ScenarioMode::None,
            m_spec: ImpactSpec::Direct(1.0),
            intercept_resend: false,
            ramp_steps: 0,
        }
    }

    pub fn sagnac_baseline() -> Self {
        Self {
            mode: ScenarioMode::SagnacBaseline,
            m_spec: ImpactSpec::Direct(1.0),
            intercept_resend: false,
            ramp_steps: 0,
        }
    }

    pub fn pretreatment(m_spec: ImpactSpec, intercept_resend: bool) -> Self {
        Self {
            mode: ScenarioMode::Pretreatment,
            m_spec,
            intercept_resend,
            ramp_steps: 0,
        }
    }

    pub fn pulse_injection(m_spec: ImpactSpec, ramp_steps: u64, intercept_resend: bool) -> Self {
        Self {
            mode: ScenarioMode::PulseInjection,
            m_spec,
            intercept_resend,
            ramp_steps,
        }
    }

    /// Stabilized impact factor of this scenario.
    pub fn m_total(&self) -> Result<f64> {
        let m = match &self.m_spec {
            ImpactSpec::Direct(m) => {
                ensure_finite("m_total", *m)?;
                if *m <= 0.0 {
                    return Err(Error::OutOfRange {
                        name: "m_total",
                        constraint: "> 0",
                        value: *m,
                    });
                }
                *m
            }
            ImpactSpec::PerDevice(devices) => {
                let factors = devices
                    .iter()
                    .map(|d| gain_factor(&d.config, 1.0, d.v_mod))
                    .collect::<Result<Vec<_>>>()?;
                cascade_impact(&factors)?.m_total
            }
        };
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m_total()?;
        match self.mode {
            ScenarioMode::None => {
                if (m - 1.0).abs() > 1e-12 {
                    return Err(Error::OutOfRange {
                        name: "m_total",
                        constraint: "= 1 when mode is none",
                        value: m,
                    });
                }
                if self.intercept_resend {
                    return Err(Error::OutOfRange {
                        name: "intercept_resend",
                        constraint: "false when mode is none",
                        value: 1.0,
                    });
                }
            }
            ScenarioMode::SagnacBaseline => {
                if (m - 1.0).abs() > 1e-12 {
                    return Err(Error::OutOfRange {
                        name: "m_total",
                        constraint: "= 1 for a Sagnac baseline (common-mode PE only)",
                        value: m,
                    });
                }
            }
            ScenarioMode::Pretreatment | ScenarioMode::PulseInjection => {}
        }
        Ok(())
    }

    /// One-line description for provenance digests.
    pub fn describe(&self) -> String {
        let m = self
            .m_total()
            .map(|m| m.to_string())
            .unwrap_or_else(|_| "?".into());
        format!(
            "mode={:?};m_total={m};intercept_resend={};ramp_steps={}",
            self.mode, self.intercept_resend, self.ramp_steps
        )
    }
}

/// Impact factor in force at a given step of the scenario's trajectory.
///
/// `none` and `sagnac_baseline` stay at 1; `pretreatment` holds the
/// stabilized value from step 0; `pulse_injection` ramps linearly from 1
/// to the stabilized value over `ramp_steps` and holds it afterwards.
pub fn scenario_impact_trajectory(scenario: &AttackScenario, step: u64) -> Result<f64> {
    scenario.validate()?;
    let m = scenario.m_total()?;
    Ok(match scenario.mode {
        ScenarioMode::None | ScenarioMode::SagnacBaseline => 1.0,
        ScenarioMode::Pretreatment => m,
        ScenarioMode::PulseInjection => {
            if step >= scenario.ramp_steps {
                m
            } else {
                1.0 + (m - 1.0) * step as f64 / scenario.ramp_steps as f64
            }
        }
    })
}

/// Estimated vs practical key rate for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// What Alice and Bob compute from their biased estimates.
    pub k_est: KeyRateReport,
    /// What the channel actually supports.
    pub k_pra: KeyRateReport,
    /// `k_est.k - k_pra.k`: key information available to Eve.
    pub gap: f64,
    /// The channel estimate (with worst-case bounds) behind `k_est`.
    pub estimates: ChannelEstimate,
    pub scenario: AttackScenario,
}

/// Whether an experiment runs on closed forms or on generated samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Analytic,
    MonteCarlo,
}

/// Run one attack experiment.
///
/// Analytic mode substitutes the expected-value estimators into the bias
/// closed forms; Monte Carlo mode generates `params.m_est` quadrature
/// pairs with the given seed and estimates from them. Either way the
/// practical rate is evaluated at `(M * V_A, T_pra, eps_pra)` with the
/// intercept-resend contribution folded into `eps_pra`.
pub fn run_attack_experiment(
    params: &SystemParams,
    chan: &ChannelParams,
    scenario: &AttackScenario,
    seed: u64,
    mode: EvalMode,
) -> Result<ExperimentReport> {
    params.validate()?;
    chan.validate()?;
    scenario.validate()?;
    let m = scenario.m_total()?;
    let eps_pra = effective_excess_noise(chan.eps, scenario.intercept_resend);

    let (point, estimates) = match mode {
        EvalMode::Analytic => {
            let (t_est, eps_est) = predicted_bias(chan.t_chan, eps_pra, m)?;
            let fit = analytic_fit(t_est, eps_est, params)?;
            let mut est = worst_case_bounds(&fit, params, params.v_a * params.n0)?;
            // The closed forms *are* the expected-value estimates; keep
            // them instead of the fit round-trip, which loses a few
            // digits subtracting the shot noise back out of sigma2_hat.
            est.t_est = t_est;
            est.eps_est = eps_est;
            ((t_est, eps_est), est)
        }
        EvalMode::MonteCarlo => {
            let batch = generate_quadratures(
                params,
                chan,
                m,
                scenario.intercept_resend,
                params.m_est as usize,
                seed,
            )?;
            let fit = mle_fit(&batch)?;
            let point = estimate_channel(&fit, params)?;
            let est = worst_case_bounds(&fit, params, params.v_a * params.n0)?;
            (point, est)
        }
    };

    let k_est = secret_key_rate(params, point.0, point.1, estimates.t_min, estimates.eps_max)?;
    let k_pra = finite_size_key_rate(m * params.v_a, chan.t_chan, eps_pra, params)?;
    let gap = k_est.k - k_pra.k;
    Ok(ExperimentReport {
        k_est,
        k_pra,
        gap,
        estimates,
        scenario: scenario.clone(),
    })
}

/// Outcome of one modulation-variance monitoring round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorResult {
    /// Estimated impact factor: monitored variance over nominal `V_A * N0`.
    pub m_hat: f64,
    pub samples_used: usize,
    pub alarm: bool,
    pub threshold: f64,
}

/// Estimate the impact factor from Alice-side monitored quadratures and
/// compare against a detection threshold.
pub fn monitor_modulation_variance(
    samples: &[f64],
    v_a_nominal: f64,
    n0: f64,
    threshold: f64,
) -> Result<MonitorResult> {
    ensure_finite("v_a_nominal", v_a_nominal)?;
    ensure_finite("n0", n0)?;
    ensure_finite("threshold", threshold)?;
    if v_a_nominal <= 0.0 {
        return Err(Error::OutOfRange {
            name: "v_a_nominal",
            constraint: "> 0",
            value: v_a_nominal,
        });
    }
    if n0 <= 0.0 {
        return Err(Error::OutOfRange {
            name: "n0",
            constraint: "> 0",
            value: n0,
        });
    }
    if threshold <= 1.0 {
        return Err(Error::OutOfRange {
            name: "threshold",
            constraint: "> 1",
            value: threshold,
        });
    }
    let var = sample_variance(samples)?;
    if var <= 0.0 {
        return Err(Error::OutOfRange {
            name: "sample variance",
            constraint: "> 0 (degenerate sample set)",
            value: var,
        });
    }
    let m_hat = var / (v_a_nominal * n0);
    Ok(MonitorResult {
        m_hat,
        samples_used: samples.len(),
        alarm: m_hat > threshold,
        threshold,
    })
}

/// Detection threshold with the requested false-alarm probability under
/// the no-attack null.
///
/// With Gaussian samples, `(n-1) * m_hat` is chi-square distributed with
/// `n - 1` degrees of freedom under `M = 1`, so the threshold is the
/// `1 - false_alarm_target` chi-square quantile divided by `n - 1`. The
/// quantile is found by Newton iteration on the CDF from a
/// Wilson-Hilferty starting point; for large `n` it approaches the
/// Gaussian approximation `1 + z * sqrt(2 / n)`.
pub fn detection_operating_point(
    v_a_nominal: f64,
    sample_count: u64,
    false_alarm_target: f64,
) -> Result<f64> {
    ensure_finite("v_a_nominal", v_a_nominal)?;
    ensure_finite("false_alarm_target", false_alarm_target)?;
    if v_a_nominal <= 0.0 {
        return Err(Error::OutOfRange {
            name: "v_a_nominal",
            constraint: "> 0",
            value: v_a_nominal,
        });
    }
    if sample_count < 2 {
        return Err(Error::OutOfRange {
            name: "sample_count",
            constraint: ">= 2",
            value: sample_count as f64,
        });
    }
    if false_alarm_target <= 0.0 || false_alarm_target >= 1.0 {
        return Err(Error::OutOfRange {
            name: "false_alarm_target",
            constraint: "in (0, 1)",
            value: false_alarm_target,
        });
    }
    let df = (sample_count - 1) as f64;
    Ok(chi_square_upper_quantile(df, false_alarm_target) / df)
}

/// Upper `alpha` quantile of the chi-square distribution with `df`
/// degrees of freedom.
fn chi_square_upper_quantile(df: f64, alpha: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("df >= 1");
    // Wilson-Hilferty start.
    let z = normal_upper_quantile(alpha);
    let a = 2.0 / (9.0 * df);
    let mut q = df * (1.0 - a + z * a.sqrt()).powi(3);
    if !q.is_finite() || q <= 0.0 {
        q = df;
    }
    for _ in 0..60 {
        let f = dist.cdf(q) - (1.0 - alpha);
        let pdf = dist.pdf(q);
        if pdf <= 0.0 || !pdf.is_finite() {
            break;
        }
        let step = f / pdf;
        q -= step;
        if q <= 0.0 {
            q = f64::MIN_POSITIVE;
        }
        if step.abs() <= 1e-12 * q.abs() {
            break;
        }
    }
    q
}
