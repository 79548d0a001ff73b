//! Finite-size secret key rate for the Gaussian-modulated coherent-state
//! protocol with homodyne detection and reverse reconciliation.
//!
//! `K = (n/N) * (beta * I_AB - S_BE - Delta(n))`, where `I_AB` is the
//! Shannon mutual information at the point channel estimate, `S_BE` the
//! Holevo bound evaluated at the worst-case bounds `(T_min, eps_max)`,
//! and `Delta(n)` the privacy-amplification penalty. The Holevo bound
//! comes from the symplectic spectrum of the two-mode covariance matrix
//! in the entanglement-based picture and of the conditional state after
//! Bob's noisy homodyne measurement.

use crate::channel::SystemParams;
use crate::error::{ensure_finite, Error, Result};
use crate::estimation::{analytic_fit, worst_case_bounds};

/// Eigenvalues may dip this far below 1 from floating-point noise at
/// degenerate points before being treated as exactly 1.
const LAMBDA_SLACK: f64 = 1e-9;
/// Switch `G((lambda-1)/2)` to its small-argument series below this.
const G_SERIES_CUTOFF: f64 = 1e-6;

/// Channel- and detection-added noise referred to the channel input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDecomposition {
    /// `chi_line = 1/T - 1 + eps`.
    pub chi_line: f64,
    /// `chi_hom = ((1 - eta) + v_el) / eta`.
    pub chi_hom: f64,
    /// `chi_tot = chi_line + chi_hom / T`.
    pub chi_tot: f64,
}

/// Covariance-matrix scalars and the five symplectic eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSummary {
    /// EB-picture variance `V = V_A + 1`.
    pub v: f64,
    pub a_term: f64,
    pub b_term: f64,
    pub c_term: f64,
    pub d_term: f64,
    /// `lambda_1..lambda_4` from the quadratic roots, `lambda_5 = 1`.
    pub lambdas: [f64; 5],
}

/// One secret-key-rate evaluation with all of its terms.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    /// Mutual information in bits per pulse.
    pub i_ab: f64,
    /// Holevo bound in bits per pulse.
    pub s_be: f64,
    /// Finite-size penalty in bits per pulse.
    pub delta_n: f64,
    /// `(n/N) * (beta * i_ab - s_be - delta_n)`, possibly negative.
    pub k_raw: f64,
    /// `max(k_raw, 0)`.
    pub k: f64,
    /// Parameter set that produced the report.
    pub inputs_digest: String,
}

/// Noise budget referred to the channel input.
pub fn noise_decomposition(
    t_chan: f64,
    eps: f64,
    eta: f64,
    v_el: f64,
) -> Result<NoiseDecomposition> {
    ensure_finite("t_chan", t_chan)?;
    ensure_finite("eps", eps)?;
    ensure_finite("eta", eta)?;
    ensure_finite("v_el", v_el)?;
    if t_chan <= 0.0 {
        return Err(Error::OutOfRange {
            name: "t_chan",
            constraint: "> 0",
            value: t_chan,
        });
    }
    if eta <= 0.0 {
        return Err(Error::OutOfRange {
            name: "eta",
            constraint: "> 0",
            value: eta,
        });
    }
    let chi_line = 1.0 / t_chan - 1.0 + eps;
    let chi_hom = ((1.0 - eta) + v_el) / eta;
    Ok(NoiseDecomposition {
        chi_line,
        chi_hom,
        chi_tot: chi_line + chi_hom / t_chan,
    })
}

/// Mutual information `log2((V + chi_tot) / (1 + chi_tot))` with
/// `V = v_a + 1`, in bits per pulse.
pub fn mutual_information(v_a: f64, t_chan: f64, eps: f64, eta: f64, v_el: f64) -> Result<f64> {
    ensure_finite("v_a", v_a)?;
    if v_a < 0.0 {
        return Err(Error::OutOfRange {
            name: "v_a",
            constraint: ">= 0",
            value: v_a,
        });
    }
    let noise = noise_decomposition(t_chan, eps, eta, v_el)?;
    let v = v_a + 1.0;
    Ok(((v + noise.chi_tot) / (1.0 + noise.chi_tot)).log2())
}

/// Bosonic entropy function `G(x) = (x+1)*log2(x+1) - x*log2(x)`, with
/// `G(0) = 0` by continuity.
pub fn g_function(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    if x < 0.0 {
        return Err(Error::OutOfRange {
            name: "x",
            constraint: ">= 0",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < G_SERIES_CUTOFF {
        // (x+1)log2(x+1) = (x + x^2/2 + O(x^3)) * log2(e)
        let log2_e = std::f64::consts::LOG2_E;
        return Ok(x * log2_e + 0.5 * x * x * log2_e - x * x.log2());
    }
    Ok((x + 1.0) * x.ln_1p() * std::f64::consts::LOG2_E - x * x.log2())
}

/// `G((lambda - 1)/2)` tolerating eigenvalues a hair below 1.
fn g_of_eigenvalue(lambda: f64) -> Result<f64> {
    if lambda < 1.0 - LAMBDA_SLACK {
        return Err(Error::NonphysicalCovariance(format!(
            "symplectic eigenvalue {lambda} below 1"
        )));
    }
    g_function(((lambda - 1.0) / 2.0).max(0.0))
}

/// Symplectic spectrum of the Alice/Bob covariance matrix and of the
/// state conditioned on Bob's noisy homodyne outcome.
///
/// With `T = t_min` and `chi = chi_line_max`:
/// `A = V^2 (1 - 2T) + 2T + T^2 (V + chi)^2`, `B = T^2 (V chi + 1)^2`,
/// `C = (A chi_hom + V sqrt(B) + T(V + chi)) / (T (V + chi + chi_hom/T))`,
/// `D = sqrt(B) (V + sqrt(B) chi_hom) / (T (V + chi + chi_hom/T))`,
/// and `lambda_{1,2}^2 = (A +- sqrt(A^2 - 4B))/2`, likewise for
/// `lambda_{3,4}` from `(C, D)`; `lambda_5 = 1`.
pub fn symplectic_spectrum(
    v: f64,
    t_min: f64,
    chi_line_max: f64,
    chi_hom: f64,
) -> Result<CovarianceSummary> {
    ensure_finite("v", v)?;
    ensure_finite("t_min", t_min)?;
    ensure_finite("chi_line_max", chi_line_max)?;
    ensure_finite("chi_hom", chi_hom)?;
    if v < 1.0 {
        return Err(Error::OutOfRange {
            name: "v",
            constraint: ">= 1",
            value: v,
        });
    }
    if t_min <= 0.0 || t_min > 1.0 {
        return Err(Error::OutOfRange {
            name: "t_min",
            constraint: "in (0, 1]",
            value: t_min,
        });
    }

    let a = v * v * (1.0 - 2.0 * t_min) + 2.0 * t_min + t_min * t_min * (v + chi_line_max).powi(2);
    let b = (t_min * (v * chi_line_max + 1.0)).powi(2);
    let sqrt_b = b.sqrt();
    let den = t_min * (v + chi_line_max + chi_hom / t_min);
    let c = (a * chi_hom + v * sqrt_b + t_min * (v + chi_line_max)) / den;
    let d = sqrt_b * (v + sqrt_b * chi_hom) / den;

    let (l1, l2) = quadratic_eigenpair(a, b)?;
    let (l3, l4) = quadratic_eigenpair(c, d)?;
    Ok(CovarianceSummary {
        v,
        a_term: a,
        b_term: b,
        c_term: c,
        d_term: d,
        lambdas: [l1, l2, l3, l4, 1.0],
    })
}

/// Positive roots of `x^2 - s*x + p = 0` interpreted as squared
/// symplectic eigenvalues. The smaller root is recovered from the product
/// to avoid the cancellation in `s - sqrt(s^2 - 4p)`.
///
/// `s^2 - 4p` cannot be resolved below the rounding noise of `s` and `p`
/// themselves; discriminants inside that floor (degenerate spectra, e.g.
/// the lossless noiseless channel) are treated as exactly zero so the
/// square root does not amplify noise into the eigenvalues.
fn quadratic_eigenpair(s: f64, p: f64) -> Result<(f64, f64)> {
    let disc = s * s - 4.0 * p;
    let noise_floor = 512.0 * f64::EPSILON * (s * s + 4.0 * p.abs()).max(1.0);
    let tol = (1e-9 * (s * s).max(1.0)).max(noise_floor);
    if disc < -tol {
        return Err(Error::NonphysicalCovariance(format!(
            "complex symplectic spectrum: discriminant {disc} for (A or C) = {s}, (B or D) = {p}"
        )));
    }
    let root = if disc.abs() <= noise_floor {
        0.0
    } else {
        disc.max(0.0).sqrt()
    };
    let big_sq = 0.5 * (s + root);
    if big_sq <= 0.0 {
        return Err(Error::NonphysicalCovariance(format!(
            "nonpositive squared eigenvalue {big_sq}"
        )));
    }
    let small_sq = if p <= 0.0 { 0.0 } else { p / big_sq };
    Ok((big_sq.sqrt(), small_sq.sqrt()))
}

/// Holevo bound `S_BE` in bits per pulse, evaluated at the worst-case
/// channel bounds.
pub fn holevo_bound(v_a: f64, t_min: f64, eps_max: f64, eta: f64, v_el: f64) -> Result<f64> {
    ensure_finite("v_a", v_a)?;
    ensure_finite("eps_max", eps_max)?;
    if v_a < 0.0 {
        return Err(Error::OutOfRange {
            name: "v_a",
            constraint: ">= 0",
            value: v_a,
        });
    }
    if eta <= 0.0 || eta > 1.0 {
        return Err(Error::OutOfRange {
            name: "eta",
            constraint: "in (0, 1]",
            value: eta,
        });
    }
    if v_el < 0.0 {
        return Err(Error::OutOfRange {
            name: "v_el",
            constraint: ">= 0",
            value: v_el,
        });
    }
    if t_min <= 0.0 || t_min > 1.0 {
        return Err(Error::OutOfRange {
            name: "t_min",
            constraint: "in (0, 1]",
            value: t_min,
        });
    }
    let chi_line_max = 1.0 / t_min - 1.0 + eps_max;
    let chi_hom = ((1.0 - eta) + v_el) / eta;
    let spec = symplectic_spectrum(v_a + 1.0, t_min, chi_line_max, chi_hom)?;
    let [l1, l2, l3, l4, l5] = spec.lambdas;
    Ok(g_of_eigenvalue(l1)? + g_of_eigenvalue(l2)?
        - g_of_eigenvalue(l3)?
        - g_of_eigenvalue(l4)?
        - g_of_eigenvalue(l5)?)
}

/// Privacy-amplification penalty
/// `Delta(n) = 7 sqrt(log2(1/eps_bar)/n) + (2/n) log2(1/eps_pa)`.
pub fn finite_size_penalty(n: u64, eps_bar: f64, eps_pa: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "n",
            constraint: ">= 1",
            value: 0.0,
        });
    }
    for (name, value) in [("eps_bar", eps_bar), ("eps_pa", eps_pa)] {
        ensure_finite(name, value)?;
        if value <= 0.0 || value >= 1.0 {
            return Err(Error::OutOfRange {
                name,
                constraint: "in (0, 1)",
                value,
            });
        }
    }
    let n = n as f64;
    Ok(7.0 * ((1.0 / eps_bar).log2() / n).sqrt() + 2.0 / n * (1.0 / eps_pa).log2())
}

/// Finite-size secret key rate
/// `K = (n/N) * (beta * I_AB(t_point, eps_point) - S_BE(t_min, eps_max) - Delta(n))`
/// using `params.v_a` as the modulation variance.
pub fn secret_key_rate(
    params: &SystemParams,
    t_point: f64,
    eps_point: f64,
    t_min: f64,
    eps_max: f64,
) -> Result<KeyRateReport> {
    params.validate()?;
    let i_ab = mutual_information(params.v_a, t_point, eps_point, params.eta, params.v_el)?;
    let s_be = holevo_bound(params.v_a, t_min, eps_max, params.eta, params.v_el)?;
    let n = params.key_pulses();
    let delta_n = finite_size_penalty(n, params.eps_bar, params.eps_pa)?;
    let ratio = n as f64 / params.n_total as f64;
    let k_raw = ratio * (params.beta * i_ab - s_be - delta_n);
    Ok(KeyRateReport {
        i_ab,
        s_be,
        delta_n,
        k_raw,
        k: k_raw.max(0.0),
        inputs_digest: format!(
            "v_a={} t_point={t_point} eps_point={eps_point} t_min={t_min} eps_max={eps_max} \
             eta={} v_el={} beta={} n={n} n_total={}",
            params.v_a, params.eta, params.v_el, params.beta, params.n_total
        ),
    })
}

/// Full analytic finite-size evaluation at a channel point: expected-value
/// estimators, worst-case bounds at `params.eps_pe`, then
/// [`secret_key_rate`]. `v_a` overrides the modulation variance (and the
/// regressor variance the bounds assume), so the same routine serves both
/// the estimated rate at nominal `V_A` and the practical rate at `M * V_A`.
pub fn finite_size_key_rate(
    v_a: f64,
    t_point: f64,
    eps_point: f64,
    params: &SystemParams,
) -> Result<KeyRateReport> {
    let p = params.with_modulation_variance(v_a);
    let fit = analytic_fit(t_point, eps_point, &p)?;
    let est = worst_case_bounds(&fit, &p, p.v_a * p.n0)?;
    secret_key_rate(&p, t_point, eps_point, est.t_min, est.eps_max)
}

/// Asymptotic-mode evaluation: worst-case bounds pinned to the point
/// values. The `n/N` prefactor and `Delta(n)` still apply.
pub fn asymptotic_key_rate(
    v_a: f64,
    t_point: f64,
    eps_point: f64,
    params: &SystemParams,
) -> Result<KeyRateReport> {
    let p = params.with_modulation_variance(v_a);
    secret_key_rate(&p, t_point, eps_point, t_point, eps_point)
}
