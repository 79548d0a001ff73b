//! TOML sweep configuration: parsing, defaults and validation.
//!
//! An empty document is valid and yields the standard simulation setup
//! (`V_A = 4`, `eta = 0.5`, `v_el = 0.01`, `beta = 0.95`, `N = 1e9`,
//! `n = N/2`, security epsilons `1e-10`, fiber loss 0.2 dB/km) with a
//! single no-attack scenario over a 0..150 km grid. Unknown keys are
//! rejected with the offending key named; bound violations name the field
//! and the bound.

use crate::CliError;
use cvqkd_core::{
    AttackScenario, DeviceOperatingPoint, EvalMode, ImpactSpec, ModulatorConfig, ScenarioMode,
    SystemParams,
};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::PathBuf;

/// Fully validated sweep description.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub system: SystemParams,
    /// Fiber loss coefficient in dB/km.
    pub alpha_db_per_km: f64,
    /// Distance grid in km.
    pub distances_km: Vec<f64>,
    pub scenarios: Vec<AttackScenario>,
    /// Practical excess-noise grid in shot-noise units.
    pub eps_grid: Vec<f64>,
    pub mode: EvalMode,
    pub seed: u64,
    pub output_path: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            alpha_db_per_km: 0.2,
            distances_km: linspace(0.0, 150.0, 201),
            scenarios: vec![AttackScenario::none()],
            eps_grid: vec![0.05],
            mode: EvalMode::Analytic,
            seed: 1,
            output_path: PathBuf::from("sweep.csv"),
        }
    }
}

impl SweepConfig {
    /// Canonical rendering of every resolved field; the digest hashes it.
    fn canonical_string(&self) -> String {
        let s = &self.system;
        let scenarios: Vec<String> = self.scenarios.iter().map(|sc| sc.describe()).collect();
        format!(
            "system{{v_a={:?} eta={:?} v_el={:?} n0={:?} beta={:?} n_total={} m_est={} \
             eps_pe={:?} eps_bar={:?} eps_pa={:?}}} alpha={:?} distances={:?} scenarios={:?} \
             eps_grid={:?} mode={:?} seed={}",
            s.v_a,
            s.eta,
            s.v_el,
            s.n0,
            s.beta,
            s.n_total,
            s.m_est,
            s.eps_pe,
            s.eps_bar,
            s.eps_pa,
            self.alpha_db_per_km,
            self.distances_km,
            scenarios,
            self.eps_grid,
            self.mode,
            self.seed,
        )
    }

    /// Short hex digest identifying the resolved configuration.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_string().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<RawSystem>,
    channel_law: Option<RawChannelLaw>,
    scenarios: Option<Vec<RawScenario>>,
    eps_grid: Option<Vec<f64>>,
    mode: Option<String>,
    seed: Option<u64>,
    output_path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    v_a: Option<f64>,
    eta: Option<f64>,
    v_el: Option<f64>,
    n0: Option<f64>,
    beta: Option<f64>,
    n_total: Option<u64>,
    m_est: Option<u64>,
    eps_pe: Option<f64>,
    eps_bar: Option<f64>,
    eps_pa: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannelLaw {
    alpha_db_per_km: Option<f64>,
    distances_km: Option<Vec<f64>>,
    l_start_km: Option<f64>,
    l_stop_km: Option<f64>,
    l_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    mode: Option<String>,
    m_total: Option<f64>,
    intercept_resend: Option<bool>,
    ramp_steps: Option<u64>,
    devices: Option<Vec<RawDevice>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    v_pi: f64,
    v_bias: f64,
    v_mod: f64,
    delta_theta_pe: f64,
    label: Option<String>,
}

fn invalid(msg: String) -> CliError {
    CliError::Validation(msg)
}

/// Parse and validate a TOML configuration document.
pub fn parse_config(text: &str) -> Result<SweepConfig, CliError> {
    let raw: RawConfig = toml::from_str(text)?;
    let defaults = SweepConfig::default();

    let system = {
        let r = raw.system.unwrap_or_default();
        let d = defaults.system.clone();
        let params = SystemParams {
            v_a: r.v_a.unwrap_or(d.v_a),
            eta: r.eta.unwrap_or(d.eta),
            v_el: r.v_el.unwrap_or(d.v_el),
            n0: r.n0.unwrap_or(d.n0),
            beta: r.beta.unwrap_or(d.beta),
            n_total: r.n_total.unwrap_or(d.n_total),
            m_est: r.m_est.unwrap_or(d.m_est),
            eps_pe: r.eps_pe.unwrap_or(d.eps_pe),
            eps_bar: r.eps_bar.unwrap_or(d.eps_bar),
            eps_pa: r.eps_pa.unwrap_or(d.eps_pa),
        };
        params
            .validate()
            .map_err(|e| invalid(format!("system: {e}")))?;
        params
    };

    let law = raw.channel_law.unwrap_or_default();
    let alpha_db_per_km = law.alpha_db_per_km.unwrap_or(defaults.alpha_db_per_km);
    if !alpha_db_per_km.is_finite() || alpha_db_per_km <= 0.0 {
        return Err(invalid(format!(
            "channel_law.alpha_db_per_km must satisfy > 0 (got {alpha_db_per_km})"
        )));
    }
    let distances_km = match (
        law.distances_km,
        law.l_start_km,
        law.l_stop_km,
        law.l_points,
    ) {
        (Some(_), s, e, p) if s.is_some() || e.is_some() || p.is_some() => {
            return Err(invalid(
                "channel_law: give either distances_km or l_start_km/l_stop_km/l_points, not both"
                    .into(),
            ));
        }
        (Some(d), ..) => d,
        (None, None, None, None) => defaults.distances_km.clone(),
        (None, s, e, p) => {
            let start = s.unwrap_or(0.0);
            let stop = e.unwrap_or(150.0);
            let points = p.unwrap_or(201);
            if points < 2 {
                return Err(invalid(format!(
                    "channel_law.l_points must satisfy >= 2 (got {points})"
                )));
            }
            if !(start.is_finite() && stop.is_finite()) || start < 0.0 || stop <= start {
                return Err(invalid(format!(
                    "channel_law.l_start_km/l_stop_km must satisfy 0 <= start < stop \
                     (got {start}..{stop})"
                )));
            }
            linspace(start, stop, points)
        }
    };
    if distances_km.is_empty() {
        return Err(invalid("channel_law.distances_km must not be empty".into()));
    }
    for &l in &distances_km {
        if !l.is_finite() || l < 0.0 {
            return Err(invalid(format!(
                "channel_law.distances_km entries must satisfy >= 0 (got {l})"
            )));
        }
    }

    let scenarios = match raw.scenarios {
        None => defaults.scenarios.clone(),
        Some(raws) => {
            if raws.is_empty() {
                return Err(invalid("scenarios must not be empty".into()));
            }
            raws.into_iter()
                .enumerate()
                .map(|(i, r)| {
                    build_scenario(r).map_err(|e| invalid(format!("scenarios[{i}]: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };

    let eps_grid = raw.eps_grid.unwrap_or_else(|| defaults.eps_grid.clone());
    if eps_grid.is_empty() {
        return Err(invalid("eps_grid must not be empty".into()));
    }
    for &e in &eps_grid {
        if !e.is_finite() || e < 0.0 {
            return Err(invalid(format!(
                "eps_grid entries must satisfy >= 0 (got {e})"
            )));
        }
    }

    let mode = match raw.mode.as_deref() {
        None => defaults.mode,
        Some(m) => parse_mode(m).map_err(invalid)?,
    };

    Ok(SweepConfig {
        system,
        alpha_db_per_km,
        distances_km,
        scenarios,
        eps_grid,
        mode,
        seed: raw.seed.unwrap_or(defaults.seed),
        output_path: raw
            .output_path
            .unwrap_or_else(|| defaults.output_path.clone()),
    })
}

/// Accepts `analytic`, `mc` or `monte_carlo`.
pub fn parse_mode(s: &str) -> Result<EvalMode, String> {
    match s {
        "analytic" => Ok(EvalMode::Analytic),
        "mc" | "monte_carlo" => Ok(EvalMode::MonteCarlo),
        other => Err(format!(
            "mode must be one of analytic, mc, monte_carlo (got {other:?})"
        )),
    }
}

fn build_scenario(raw: RawScenario) -> Result<AttackScenario, String> {
    let mode = match raw.mode.as_deref() {
        Some("none") => ScenarioMode::None,
        Some("pretreatment") => ScenarioMode::Pretreatment,
        Some("pulse_injection") => ScenarioMode::PulseInjection,
        Some("sagnac_baseline") => ScenarioMode::SagnacBaseline,
        Some(other) => {
            return Err(format!(
                "mode must be one of none, pretreatment, pulse_injection, \
                 sagnac_baseline (got {other:?})"
            ));
        }
        // An explicit impact factor with no mode reads as a pretreatment
        // scenario; otherwise this is the no-attack baseline.
        None if raw.m_total.is_some() || raw.devices.is_some() => ScenarioMode::Pretreatment,
        None => ScenarioMode::None,
    };

    let m_spec = match (raw.m_total, raw.devices) {
        (Some(_), Some(_)) => {
            return Err("give either m_total or devices, not both".into());
        }
        (Some(m), None) => ImpactSpec::Direct(m),
        (None, Some(devices)) => {
            if devices.is_empty() {
                return Err("devices must not be empty".into());
            }
            let points = devices
                .into_iter()
                .map(|d| {
                    let label = d.label.as_deref().unwrap_or("IM");
                    ModulatorConfig::new(d.v_pi, d.v_bias, d.delta_theta_pe, label)
                        .map(|config| DeviceOperatingPoint {
                            config,
                            v_mod: d.v_mod,
                        })
                        .map_err(|e| format!("devices: {e}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ImpactSpec::PerDevice(points)
        }
        (None, None) => ImpactSpec::Direct(1.0),
    };

    let ramp_steps = raw.ramp_steps.unwrap_or(0);
    if ramp_steps > 0 && mode != ScenarioMode::PulseInjection {
        return Err("ramp_steps only applies to pulse_injection".into());
    }

    let scenario = AttackScenario {
        mode,
        m_spec,
        intercept_resend: raw.intercept_resend.unwrap_or(false),
        ramp_steps,
    };
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.system, SystemParams::default());
        assert_eq!(c.system.v_a, 4.0);
        assert_eq!(c.system.eta, 0.5);
        assert_eq!(c.system.v_el, 0.01);
        assert_eq!(c.system.beta, 0.95);
        assert_eq!(c.system.n_total, 1_000_000_000);
        assert_eq!(c.system.m_est, 500_000_000);
        assert_eq!(c.system.eps_bar, 1e-10);
        assert_eq!(c.system.eps_pa, 1e-10);
        assert_eq!(c.alpha_db_per_km, 0.2);
        assert_eq!(c.scenarios, vec![AttackScenario::none()]);
        assert_eq!(c.eps_grid, vec![0.05]);
        assert_eq!(c.mode, EvalMode::Analytic);
        assert_eq!(c.distances_km.len(), 201);
        assert_eq!(c.distances_km[0], 0.0);
        assert_eq!(*c.distances_km.last().unwrap(), 150.0);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config("frobnicate = 3\n").unwrap_err().to_string();
        assert!(err.contains("frobnicate"), "error was: {err}");
        let err = parse_config("[system]\nv_b = 2.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("v_b"), "error was: {err}");
    }

    #[test]
    fn bound_violations_name_field_and_bound() {
        let err = parse_config("[system]\neta = 1.5\n")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("eta") && err.contains("(0, 1]"),
            "error was: {err}"
        );
        let err = parse_config("[channel_law]\nalpha_db_per_km = -0.2\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("alpha_db_per_km"), "error was: {err}");
    }

    #[test]
    fn per_device_scenario_cascades_impact() {
        let text = r#"
[[scenarios]]
mode = "pretreatment"

[[scenarios.devices]]
v_pi = 4.0
v_bias = 1.0
v_mod = 0.0
delta_theta_pe = -1.0471975511965976
label = "IM_1"

[[scenarios.devices]]
v_pi = 4.0
v_bias = 1.0
v_mod = 0.0
delta_theta_pe = 0.0
label = "IM_2"

[[scenarios.devices]]
v_pi = 4.0
v_bias = 1.0
v_mod = 0.0
delta_theta_pe = 0.0
label = "VOA"
"#;
        let c = parse_config(text).unwrap();
        let m = c.scenarios[0].m_total().unwrap();
        // (1 + cos(pi/6)) / (1 + cos(pi/2)) times two unit factors.
        assert!((m - 1.8660254037844386).abs() < 1e-10, "m = {m}");
    }

    #[test]
    fn scenario_validation_errors_are_scoped() {
        let err = parse_config("[[scenarios]]\nmode = \"none\"\nm_total = 1.5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("scenarios[0]"), "error was: {err}");
        let err = parse_config("[[scenarios]]\nm_total = 1.5\nramp_steps = 5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("ramp_steps"), "error was: {err}");
    }

    #[test]
    fn explicit_and_linspace_grids() {
        let c = parse_config("[channel_law]\ndistances_km = [0.0, 10.0, 25.0]\n").unwrap();
        assert_eq!(c.distances_km, vec![0.0, 10.0, 25.0]);
        let c = parse_config("[channel_law]\nl_start_km = 0.0\nl_stop_km = 100.0\nl_points = 5\n")
            .unwrap();
        assert_eq!(c.distances_km, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert!(parse_config("[channel_law]\ndistances_km = [1.0]\nl_points = 5\n").is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = parse_config("").unwrap();
        let b = parse_config("").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = parse_config("seed = 2\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn mode_strings() {
        assert_eq!(
            parse_config("mode = \"mc\"").unwrap().mode,
            EvalMode::MonteCarlo
        );
        assert_eq!(
            parse_config("mode = \"monte_carlo\"").unwrap().mode,
            EvalMode::MonteCarlo
        );
        assert!(parse_config("mode = \"fast\"").is_err());
    }
}
