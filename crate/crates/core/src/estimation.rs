//! Channel parameter estimation and finite-size worst-case bounds.
//!
//! Alice and Bob fit the linear model `x_B = t * x_A + z` by maximum
//! likelihood, convert the fit to `(T_est, eps_est)`, and widen it to
//! worst-case bounds `(T_min, eps_max)` that hold except with probability
//! `eps_pe`. Under an impact factor `M` the same fit applied to Alice's
//! unscaled records lands on `T_est = M * T_pra` and
//! `eps_est = eps_pra / M`: the attack inflates the transmissivity
//! estimate and masks excess noise.

use crate::channel::{QuadratureBatch, SystemParams, INTERCEPT_RESEND_EXCESS_NOISE};
use crate::error::{ensure_finite, Error, Result};
use statrs::function::erf;

/// Sample size below which the large-m bound approximations get shaky.
const BOUNDS_SAMPLE_WARN: u64 = 1_000_000;

/// Maximum-likelihood fit of the linear channel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleFit {
    /// Slope estimator `t_hat = sum(xa*xb) / sum(xa^2)`.
    pub t_hat: f64,
    /// Residual variance `sigma2_hat = mean((xb - t_hat*xa)^2)`, in
    /// absolute variance units.
    pub sigma2_hat: f64,
    /// Number of sample pairs behind the fit.
    pub m_used: u64,
}

/// Point estimates plus worst-case bounds for one estimation round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    /// Point estimate of the transmissivity.
    pub t_est: f64,
    /// Point estimate of the excess noise in shot-noise units. May come
    /// out negative from statistical fluctuation; it is reported raw.
    pub eps_est: f64,
    /// Worst-case lower transmissivity.
    pub t_min: f64,
    /// Worst-case upper excess noise.
    pub eps_max: f64,
    /// Confidence coefficient used for the bounds.
    pub z_quant: f64,
}

impl ChannelEstimate {
    /// Statistical fluctuation can push the raw excess-noise estimate
    /// below zero; callers that care can check here.
    pub fn has_negative_excess_noise(&self) -> bool {
        self.eps_est < 0.0
    }
}

/// Least-squares slope and residual variance of a quadrature batch.
pub fn mle_fit(batch: &QuadratureBatch) -> Result<MleFit> {
    let m = batch.len();
    if m < 2 {
        return Err(Error::OutOfRange {
            name: "batch length",
            constraint: ">= 2",
            value: m as f64,
        });
    }
    let sum_aa: f64 = batch.xa.iter().map(|a| a * a).sum();
    if sum_aa <= 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let sum_ab: f64 = batch.xa.iter().zip(&batch.xb).map(|(a, b)| a * b).sum();
    let t_hat = sum_ab / sum_aa;
    let sigma2_hat = batch
        .xa
        .iter()
        .zip(&batch.xb)
        .map(|(a, b)| {
            let r = b - t_hat * a;
            r * r
        })
        .sum::<f64>()
        / m as f64;
    Ok(MleFit {
        t_hat,
        sigma2_hat,
        m_used: m as u64,
    })
}

/// Expected-value fit for a known channel point; substitutes
/// `t_hat = sqrt(eta*T)` and `sigma2_hat = eta*T*eps*N0 + N0 + v_el*N0`
/// so that bound and key-rate curves can be evaluated without Monte Carlo.
pub fn analytic_fit(t_chan: f64, eps: f64, params: &SystemParams) -> Result<MleFit> {
    params.validate()?;
    ensure_finite("t_chan", t_chan)?;
    ensure_finite("eps", eps)?;
    if t_chan <= 0.0 {
        return Err(Error::OutOfRange {
            name: "t_chan",
            constraint: "> 0",
            value: t_chan,
        });
    }
    Ok(MleFit {
        t_hat: (params.eta * t_chan).sqrt(),
        sigma2_hat: params.eta * t_chan * eps * params.n0 + params.n0 + params.v_el * params.n0,
        m_used: params.m_est,
    })
}

/// Convert a fit to `(T_est, eps_est)` using Alice's calibration.
///
/// `T_est = t_hat^2 / eta` and
/// `eps_est = (sigma2_hat - N0 - v_el*N0) / (eta * T_est * N0)`.
pub fn estimate_channel(fit: &MleFit, params: &SystemParams) -> Result<(f64, f64)> {
    params.validate()?;
    if fit.t_hat == 0.0 {
        return Err(Error::ZeroTransmissivity);
    }
    let t_est = fit.t_hat * fit.t_hat / params.eta;
    let eps_est =
        (fit.sigma2_hat - params.n0 - params.v_el * params.n0) / (params.eta * t_est * params.n0);
    Ok((t_est, eps_est))
}

/// Closed-form estimates an unaware Alice/Bob obtain under impact factor
/// `m_total`: `T_est = M * T_pra`, `eps_est = eps_pra / M`.
pub fn predicted_bias(t_pra: f64, eps_pra: f64, m_total: f64) -> Result<(f64, f64)> {
    ensure_finite("t_pra", t_pra)?;
    ensure_finite("eps_pra", eps_pra)?;
    ensure_finite("m_total", m_total)?;
    if m_total <= 0.0 {
        return Err(Error::OutOfRange {
            name: "m_total",
            constraint: "> 0",
            value: m_total,
        });
    }
    Ok((m_total * t_pra, eps_pra / m_total))
}

/// Practical and estimated excess noise under a full intercept-resend
/// attack hidden by impact factor `m_total`:
/// `eps_pra_fira = eps_pra + 2`, `eps_est_fira = (eps_pra + 2) / M`.
pub fn fira_excess_noise(eps_pra: f64, m_total: f64) -> Result<(f64, f64)> {
    ensure_finite("eps_pra", eps_pra)?;
    ensure_finite("m_total", m_total)?;
    if eps_pra < 0.0 {
        return Err(Error::OutOfRange {
            name: "eps_pra",
            constraint: ">= 0",
            value: eps_pra,
        });
    }
    if m_total <= 0.0 {
        return Err(Error::OutOfRange {
            name: "m_total",
            constraint: "> 0",
            value: m_total,
        });
    }
    let eps_fira = eps_pra + INTERCEPT_RESEND_EXCESS_NOISE;
    Ok((eps_fira, eps_fira / m_total))
}

/// Confidence coefficient `z` with `erfc(z / sqrt(2)) = eps_pe`, i.e. the
/// `1 - eps_pe/2` standard-normal quantile.
///
/// Seeded from the inverse complementary error function and polished with
/// Newton steps on the tail probability; accurate well below 1e-10.
pub fn z_quantile(eps_pe: f64) -> Result<f64> {
    ensure_finite("eps_pe", eps_pe)?;
    if eps_pe <= 0.0 || eps_pe >= 1.0 {
        return Err(Error::OutOfRange {
            name: "eps_pe",
            constraint: "in (0, 1)",
            value: eps_pe,
        });
    }
    Ok(normal_upper_quantile(eps_pe / 2.0))
}

/// `z` with upper-tail probability `p`: solves `erfc(z/sqrt(2))/2 = p`.
pub(crate) fn normal_upper_quantile(p: f64) -> f64 {
    let mut z = std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    for _ in 0..3 {
        let tail = 0.5 * erf::erfc(z / std::f64::consts::SQRT_2);
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        let step = (tail - p) / pdf;
        z += step;
        if step.abs() <= 1e-14 * z.abs().max(1.0) {
            break;
        }
    }
    z
}

/// Finite-size worst-case bounds from a fit.
///
/// `delta_t = z * sqrt(sigma2_hat / (m * v_xa))`,
/// `delta_sigma2 = z * sigma2_hat * sqrt(2) / sqrt(m)`, then
/// `T_min = (t_hat - delta_t)^2 / eta` and
/// `eps_max = (sigma2_hat + delta_sigma2 - N0 - v_el*N0) / (t_hat^2 * N0)`.
///
/// `v_xa` is the regressor variance Alice uses, in absolute units; an
/// unaware Alice plugs in her nominal `V_A * N0`, which is exactly how the
/// attack bias propagates into the bounds.
pub fn worst_case_bounds(
    fit: &MleFit,
    params: &SystemParams,
    v_xa: f64,
) -> Result<ChannelEstimate> {
    params.validate()?;
    ensure_finite("v_xa", v_xa)?;
    if v_xa <= 0.0 {
        return Err(Error::OutOfRange {
            name: "v_xa",
            constraint: "> 0",
            value: v_xa,
        });
    }
    if fit.m_used < 2 {
        return Err(Error::OutOfRange {
            name: "m_used",
            constraint: ">= 2",
            value: fit.m_used as f64,
        });
    }
    if fit.m_used < BOUNDS_SAMPLE_WARN {
        log::warn!(
            "worst-case bounds computed from m = {} samples; the large-m \
             approximation is intended for m >= {BOUNDS_SAMPLE_WARN}",
            fit.m_used
        );
    }
    let (t_est, eps_est) = estimate_channel(fit, params)?;
    let z = z_quantile(params.eps_pe)?;
    let m = fit.m_used as f64;
    let delta_t = z * (fit.sigma2_hat / (m * v_xa)).sqrt();
    let delta_sigma2 = z * fit.sigma2_hat * std::f64::consts::SQRT_2 / m.sqrt();
    let reduced = fit.t_hat - delta_t;
    if reduced <= 0.0 {
        return Err(Error::BoundCollapse(reduced));
    }
    let t_min = reduced * reduced / params.eta;
    let eps_max = (fit.sigma2_hat + delta_sigma2 - params.n0 - params.v_el * params.n0)
        / (fit.t_hat * fit.t_hat * params.n0);
    Ok(ChannelEstimate {
        t_est,
        eps_est,
        t_min,
        eps_max,
        z_quant: z,
    })
}

#[cfg(test)]
mod tests {
    // Expected values below are frozen oracle output; keep their digits.
    #![allow(clippy::excessive_precision)]

    use super::*;
    use crate::channel::{generate_quadratures, ChannelParams};

    fn batch(xa: Vec<f64>, xb: Vec<f64>) -> QuadratureBatch {
        QuadratureBatch::new(xa, xb, 0, "test".into()).unwrap()
    }

    #[test]
    fn fit_recovers_exact_linear_data() {
        let f = mle_fit(&batch(vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0])).unwrap();
        assert_eq!(f.t_hat, 2.0);
        assert!(f.sigma2_hat.abs() < 1e-30);
        assert_eq!(f.m_used, 3);
    }

    #[test]
    fn fit_hand_least_squares() {
        let f = mle_fit(&batch(vec![1.0, -1.0], vec![1.0, 1.0])).unwrap();
        assert_eq!(f.t_hat, 0.0);
        assert_eq!(f.sigma2_hat, 1.0);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(matches!(
            mle_fit(&batch(vec![0.0, 0.0], vec![1.0, 2.0])),
            Err(Error::DegenerateRegressor)
        ));
    }

    #[test]
    fn fit_is_consistent_on_generated_data() {
        let params = SystemParams::default();
        let chan = ChannelParams::new(0.5, 0.0).unwrap();
        let b = generate_quadratures(&params, &chan, 1.0, false, 1_000_000, 17).unwrap();
        let f = mle_fit(&b).unwrap();
        assert!(
            (f.t_hat - 0.5).abs() < 0.01,
            "t_hat = {}, expected sqrt(0.25) +- 0.01",
            f.t_hat
        );
    }

    #[test]
    fn estimate_channel_hand_values() {
        let params = SystemParams::default();
        let fit = MleFit {
            t_hat: 0.5,
            sigma2_hat: 1.02,
            m_used: 1_000_000,
        };
        let (t, e) = estimate_channel(&fit, &params).unwrap();
        assert!((t - 0.5).abs() < 1e-15);
        assert!((e - 0.04).abs() < 1e-12);
    }

    #[test]
    fn estimate_channel_noiseless_point() {
        let params = SystemParams::default();
        let fit = MleFit {
            t_hat: params.eta.sqrt(),
            sigma2_hat: params.n0 * (1.0 + params.v_el),
            m_used: 1_000_000,
        };
        let (t, e) = estimate_channel(&fit, &params).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert!(e.abs() < 1e-15);
    }

    #[test]
    fn estimate_channel_rejects_zero_slope() {
        let params = SystemParams::default();
        let fit = MleFit {
            t_hat: 0.0,
            sigma2_hat: 1.0,
            m_used: 10,
        };
        assert!(matches!(
            estimate_channel(&fit, &params),
            Err(Error::ZeroTransmissivity)
        ));
    }

    #[test]
    fn bias_law_closed_form() {
        assert_eq!(predicted_bias(0.2, 0.05, 1.0).unwrap(), (0.2, 0.05));
        let (t, e) = predicted_bias(0.2, 0.05, 5.0).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert!((e - 0.01).abs() < 1e-15);
        let (t, e) = predicted_bias(0.3, 0.03, 2.0).unwrap();
        assert!((t - 0.6).abs() < 1e-15);
        assert!((e - 0.015).abs() < 1e-15);
        assert!(predicted_bias(0.2, 0.05, 0.0).is_err());
    }

    #[test]
    fn bias_law_is_monotone_in_impact() {
        let ms = [1.0, 1.5, 2.0, 5.0, 10.0, 25.0];
        for w in ms.windows(2) {
            let (t0, e0) = predicted_bias(0.2, 0.05, w[0]).unwrap();
            let (t1, e1) = predicted_bias(0.2, 0.05, w[1]).unwrap();
            assert!(t1 > t0);
            assert!(e1 < e0);
        }
    }

    #[test]
    fn fira_hand_values() {
        let (p, e) = fira_excess_noise(0.1, 21.0).unwrap();
        assert!((p - 2.1).abs() < 1e-15);
        assert!((e - 0.1).abs() < 1e-12);
        let (p, e) = fira_excess_noise(0.1, 1.0).unwrap();
        assert!((p - 2.1).abs() < 1e-15);
        assert!((e - 2.1).abs() < 1e-15);
        assert_eq!(fira_excess_noise(0.0, 2.0).unwrap(), (2.0, 1.0));
        assert!(fira_excess_noise(-0.1, 2.0).is_err());
    }

    #[test]
    fn fira_masking_identity() {
        // M = (eps + 2) / eps makes the estimated noise equal the
        // practical no-attack noise, for any positive eps.
        for eps in [0.01, 0.05, 0.1, 0.5, 1.0] {
            let m = (eps + 2.0) / eps;
            let (_, est) = fira_excess_noise(eps, m).unwrap();
            assert!((est - eps).abs() < 1e-12, "eps={eps}: est={est}");
        }
    }

    #[test]
    fn z_quantile_reference_values() {
        // Frozen from a 50-digit bisection on erfc(z/sqrt(2)) = eps_pe.
        assert!((z_quantile(0.01).unwrap() - 2.5758293035489004).abs() < 1e-10);
        assert!((z_quantile(1e-10).unwrap() - 6.466951087240516).abs() < 1e-10);
        assert!((z_quantile(0.5).unwrap() - 0.6744897501960817).abs() < 1e-10);
        assert!((z_quantile(1e-6).unwrap() - 4.891638475698590).abs() < 1e-10);
    }

    #[test]
    fn z_quantile_domain_and_monotonicity() {
        assert!(z_quantile(0.0).is_err());
        assert!(z_quantile(1.0).is_err());
        assert!(z_quantile(-0.5).is_err());
        let probs = [1e-12, 1e-10, 1e-6, 1e-3, 0.01, 0.1, 0.5, 0.9];
        for w in probs.windows(2) {
            assert!(z_quantile(w[0]).unwrap() > z_quantile(w[1]).unwrap());
        }
    }

    #[test]
    fn bounds_match_hand_evaluation() {
        let params = SystemParams {
            eps_pe: 1e-10,
            ..SystemParams::default()
        };
        let fit = MleFit {
            t_hat: 0.5,
            sigma2_hat: 1.02,
            m_used: 1_000_000,
        };
        let est = worst_case_bounds(&fit, &params, 4.0).unwrap();
        // Frozen from the same 50-digit evaluation as z_quantile.
        assert!((est.t_min - 0.49349002849857287).abs() < 1e-12);
        assert!((est.eps_max - 0.07731425173389820).abs() < 1e-12);
        assert!((est.z_quant - 6.466951087240516).abs() < 1e-10);
        assert!(est.t_min <= est.t_est);
        assert!(est.eps_max >= est.eps_est);
    }

    #[test]
    fn bounds_tighten_with_sample_count() {
        let params = SystemParams::default();
        let mk = |m| MleFit {
            t_hat: 0.5,
            sigma2_hat: 1.02,
            m_used: m,
        };
        let a = worst_case_bounds(&mk(1_000_000), &params, 4.0).unwrap();
        let b = worst_case_bounds(&mk(4_000_000), &params, 4.0).unwrap();
        // delta_t and delta_sigma2 scale as 1/sqrt(m): quadrupling m halves them.
        let da = 0.5 - (a.t_min * params.eta).sqrt();
        let db = 0.5 - (b.t_min * params.eta).sqrt();
        assert!((da / db - 2.0).abs() < 1e-9);
        let ea = a.eps_max - a.eps_est;
        let eb = b.eps_max - b.eps_est;
        assert!((ea / eb - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_collapse_when_interval_swallows_slope() {
        let params = SystemParams {
            eps_pe: 1e-10,
            ..SystemParams::default()
        };
        let fit = MleFit {
            t_hat: 1e-4,
            sigma2_hat: 1.02,
            m_used: 1_000_000,
        };
        assert!(matches!(
            worst_case_bounds(&fit, &params, 4.0),
            Err(Error::BoundCollapse(_))
        ));
    }

    #[test]
    fn analytic_fit_matches_generated_statistics() {
        let params = SystemParams::default();
        let fit = analytic_fit(0.5, 0.1, &params).unwrap();
        assert!((fit.t_hat - 0.5).abs() < 1e-15);
        assert!((fit.sigma2_hat - 1.035).abs() < 1e-15);
        assert_eq!(fit.m_used, params.m_est);
    }

    #[test]
    fn end_to_end_bias_on_generated_batches() {
        // Batches produced with M = 2 land on the closed-form biased
        // estimates within 5 standard errors.
        let params = SystemParams::default();
        let chan = ChannelParams::new(0.2, 0.05).unwrap();
        let n = 1_000_000usize;
        let b = generate_quadratures(&params, &chan, 2.0, false, n, 23).unwrap();
        let fit = mle_fit(&b).unwrap();
        let (t_est, eps_est) = estimate_channel(&fit, &params).unwrap();
        let (t_pred, eps_pred) = predicted_bias(chan.t_chan, chan.eps, 2.0).unwrap();

        let sigma2 = params.eta * chan.t_chan * chan.eps + 1.0 + params.v_el;
        let se_t_hat = (sigma2 / (n as f64 * params.v_a)).sqrt();
        let se_t_est = 2.0 * fit.t_hat / params.eta * se_t_hat;
        assert!(
            (t_est - t_pred).abs() < 5.0 * se_t_est,
            "t_est = {t_est}, predicted {t_pred}"
        );
        let se_s2 = sigma2 * (2.0 / n as f64).sqrt();
        let se_eps = se_s2 / (params.eta * t_pred);
        assert!(
            (eps_est - eps_pred).abs() < 5.0 * se_eps,
            "eps_est = {eps_est}, predicted {eps_pred}"
        );
    }
}
