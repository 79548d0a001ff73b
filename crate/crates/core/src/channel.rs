//! Linear-channel quadrature generation and analytic variance predictions.
//!
//! The quantum channel is the linear model `x_B = t * x_A + z` with
//! `t = sqrt(eta * T)` and `z` a centered Gaussian of variance
//! `eta*T*xi + N0 + V_el` (all in absolute variance units, i.e. shot-noise
//! units times `N0`). Under the induced-photorefraction attack Alice's
//! prepared quadratures are scaled by `sqrt(M)` while her records keep the
//! unscaled values; a full intercept-resend attack adds two shot-noise
//! units to the practical excess noise. Batches are generated with a
//! counter-based ChaCha stream so that the output is bit-identical
//! regardless of how the sample range is chunked across workers.

use crate::error::{ensure_finite, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::io::{BufRead, Write};

/// Excess noise added by a full intercept-resend attack, in shot-noise units.
pub const INTERCEPT_RESEND_EXCESS_NOISE: f64 = 2.0;

/// Alice/Bob calibration constants and security parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Modulation variance `V_A` in shot-noise units.
    pub v_a: f64,
    /// Homodyne detector efficiency, in (0, 1].
    pub eta: f64,
    /// Electronic noise in shot-noise units, >= 0.
    pub v_el: f64,
    /// Shot-noise variance `N0` (scale factor between shot-noise units and
    /// absolute variance units; 1 by convention).
    pub n0: f64,
    /// Reverse-reconciliation efficiency, in (0, 1].
    pub beta: f64,
    /// Total number of exchanged pulses `N`.
    pub n_total: u64,
    /// Pulses sacrificed for parameter estimation, `m < N`.
    pub m_est: u64,
    /// Failure probability of parameter estimation.
    pub eps_pe: f64,
    /// Smoothing parameter of the finite-size penalty.
    pub eps_bar: f64,
    /// Failure probability of privacy amplification.
    pub eps_pa: f64,
}

impl Default for SystemParams {
    /// The simulation parameter set used throughout: `V_A = 4`,
    /// `eta = 0.5`, `v_el = 0.01`, `beta = 0.95`, `N = 1e9`, `m = N/2`,
    /// and all security epsilons at `1e-10`.
    fn default() -> Self {
        Self {
            v_a: 4.0,
            eta: 0.5,
            v_el: 0.01,
            n0: 1.0,
            beta: 0.95,
            n_total: 1_000_000_000,
            m_est: 500_000_000,
            eps_pe: 1e-10,
            eps_bar: 1e-10,
            eps_pa: 1e-10,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value, constraint, ok) in [
            ("v_a", self.v_a, "> 0", self.v_a > 0.0),
            (
                "eta",
                self.eta,
                "in (0, 1]",
                self.eta > 0.0 && self.eta <= 1.0,
            ),
            ("v_el", self.v_el, ">= 0", self.v_el >= 0.0),
            ("n0", self.n0, "> 0", self.n0 > 0.0),
            (
                "beta",
                self.beta,
                "in (0, 1]",
                self.beta > 0.0 && self.beta <= 1.0,
            ),
            (
                "eps_pe",
                self.eps_pe,
                "in (0, 1)",
                self.eps_pe > 0.0 && self.eps_pe < 1.0,
            ),
            (
                "eps_bar",
                self.eps_bar,
                "in (0, 1)",
                self.eps_bar > 0.0 && self.eps_bar < 1.0,
            ),
            (
                "eps_pa",
                self.eps_pa,
                "in (0, 1)",
                self.eps_pa > 0.0 && self.eps_pa < 1.0,
            ),
        ] {
            ensure_finite(name, value)?;
            if !ok {
                return Err(Error::OutOfRange {
                    name,
                    constraint,
                    value,
                });
            }
        }
        if self.m_est < 2 {
            return Err(Error::OutOfRange {
                name: "m_est",
                constraint: ">= 2",
                value: self.m_est as f64,
            });
        }
        if self.m_est >= self.n_total {
            return Err(Error::OutOfRange {
                name: "m_est",
                constraint: "< n_total",
                value: self.m_est as f64,
            });
        }
        Ok(())
    }

    /// Pulses left for key extraction, `n = N - m`.
    pub fn key_pulses(&self) -> u64 {
        self.n_total - self.m_est
    }

    /// Same parameter set with a different modulation variance. Used to
    /// evaluate the practical key rate at the attacked variance `M * V_A`.
    pub fn with_modulation_variance(&self, v_a: f64) -> Self {
        Self {
            v_a,
            ..self.clone()
        }
    }
}

/// Quantum-channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Channel transmissivity, in (0, 1].
    pub t_chan: f64,
    /// Excess noise in shot-noise units, >= 0.
    pub eps: f64,
}

impl ChannelParams {
    pub fn new(t_chan: f64, eps: f64) -> Result<Self> {
        let chan = Self { t_chan, eps };
        chan.validate()?;
        Ok(chan)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("t_chan", self.t_chan)?;
        ensure_finite("eps", self.eps)?;
        if self.t_chan <= 0.0 || self.t_chan > 1.0 {
            return Err(Error::OutOfRange {
                name: "t_chan",
                constraint: "in (0, 1]",
                value: self.t_chan,
            });
        }
        if self.eps < 0.0 {
            return Err(Error::OutOfRange {
                name: "eps",
                constraint: ">= 0",
                value: self.eps,
            });
        }
        Ok(())
    }
}

/// Fiber transmissivity `T = 10^(-alpha * L / 10)` for loss `alpha` in
/// dB/km and distance `L` in km.
pub fn fiber_transmissivity(alpha_db_per_km: f64, distance_km: f64) -> f64 {
    10f64.powf(-alpha_db_per_km * distance_km / 10.0)
}

/// Paired Alice/Bob quadrature samples with their generation provenance.
///
/// `xa` holds what Alice *believes* she sent (unscaled by the attack);
/// `xb` holds Bob's measurements of the attacked signal. Estimating the
/// channel from these pairs is exactly what biases the estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureBatch {
    pub xa: Vec<f64>,
    pub xb: Vec<f64>,
    pub seed: u64,
    pub scenario_digest: String,
}

impl QuadratureBatch {
    pub fn new(xa: Vec<f64>, xb: Vec<f64>, seed: u64, scenario_digest: String) -> Result<Self> {
        if xa.len() != xb.len() {
            return Err(Error::LengthMismatch {
                xa: xa.len(),
                xb: xb.len(),
            });
        }
        if xa.is_empty() {
            return Err(Error::EmptyInput("quadrature batch"));
        }
        for &v in xa.iter().chain(xb.iter()) {
            ensure_finite("quadrature sample", v)?;
        }
        Ok(Self {
            xa,
            xb,
            seed,
            scenario_digest,
        })
    }

    pub fn len(&self) -> usize {
        self.xa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xa.is_empty()
    }

    /// Write the batch as two-column text: a `#` header carrying seed and
    /// scenario digest, then one `xa xb` pair per line. Floats are printed
    /// with the shortest representation that parses back bit-exactly.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed={} scenario={}", self.seed, self.scenario_digest)?;
        for (a, b) in self.xa.iter().zip(&self.xb) {
            writeln!(w, "{a:e} {b:e}")?;
        }
        Ok(())
    }

    /// Parse a batch previously written by [`QuadratureBatch::write_text`].
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::EmptyInput("batch file"))??;
        let rest = header
            .strip_prefix("# seed=")
            .ok_or_else(|| Error::BatchParse {
                line: 1,
                message: "expected `# seed=<u64> scenario=<digest>` header".into(),
            })?;
        let (seed_str, digest) =
            rest.split_once(" scenario=")
                .ok_or_else(|| Error::BatchParse {
                    line: 1,
                    message: "missing ` scenario=` in header".into(),
                })?;
        let seed = seed_str.parse().map_err(|e| Error::BatchParse {
            line: 1,
            message: format!("bad seed: {e}"),
        })?;
        let mut xa = Vec::new();
        let mut xb = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            let mut it = line.split_whitespace();
            let (a, b) = (
                it.next().ok_or_else(|| Error::BatchParse {
                    line: lineno,
                    message: "missing xa column".into(),
                })?,
                it.next().ok_or_else(|| Error::BatchParse {
                    line: lineno,
                    message: "missing xb column".into(),
                })?,
            );
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|e| Error::BatchParse {
                    line: lineno,
                    message: format!("bad float {s:?}: {e}"),
                })
            };
            xa.push(parse(a)?);
            xb.push(parse(b)?);
        }
        Self::new(xa, xb, seed, digest.to_string())
    }
}

/// Stream index for Alice's modulation draws.
const STREAM_ALICE: u64 = 0;
/// Stream index for channel-noise draws.
const STREAM_NOISE: u64 = 1;
/// ChaCha 32-bit words consumed per standard-normal sample: two `f64`
/// uniforms feed one Box-Muller draw. Fixed consumption is what makes the
/// stream seekable per sample index.
const WORDS_PER_SAMPLE: u128 = 4;
/// Fixed chunk length for parallel generation. Chunk boundaries depend
/// only on the sample count, never on the worker count.
const PAR_CHUNK: usize = 1 << 16;

/// Counter-based standard-normal source: sample `i` of a given
/// `(seed, stream)` always comes from ChaCha word position `4 * i`.
struct NormalSource {
    rng: ChaCha12Rng,
}

impl NormalSource {
    fn at(seed: u64, stream: u64, index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(index as u128 * WORDS_PER_SAMPLE);
        Self { rng }
    }

    fn next(&mut self) -> f64 {
        let u1: f64 = self.rng.gen();
        let u2: f64 = self.rng.gen();
        // Box-Muller, cosine branch; 1 - u1 is in (0, 1] so the log is finite.
        (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
    }
}

/// Scale Alice's quadratures by `sqrt(m_total)`, the quadrature-level
/// action of an intensity gain `m_total`.
pub fn apply_attack_scaling(xa: &[f64], m_total: f64) -> Result<Vec<f64>> {
    ensure_finite("m_total", m_total)?;
    if m_total <= 0.0 {
        return Err(Error::OutOfRange {
            name: "m_total",
            constraint: "> 0",
            value: m_total,
        });
    }
    let s = m_total.sqrt();
    Ok(xa.iter().map(|x| x * s).collect())
}

/// Generate `count` correlated quadrature pairs.
///
/// Alice's records `xa` are drawn from `N(0, V_A * N0)`; the channel sees
/// the attacked `sqrt(M) * xa` and Bob receives
/// `xb = sqrt(eta*T) * sqrt(M) * xa + z` with
/// `Var(z) = eta*T*eps_eff*N0 + N0 + v_el*N0`, where `eps_eff` includes
/// two extra shot-noise units under intercept-resend. The batch keeps the
/// unscaled `xa`.
///
/// Identical arguments produce bit-identical batches, independent of the
/// number of worker threads.
pub fn generate_quadratures(
    params: &SystemParams,
    chan: &ChannelParams,
    m_total: f64,
    intercept_resend: bool,
    count: usize,
    seed: u64,
) -> Result<QuadratureBatch> {
    params.validate()?;
    chan.validate()?;
    ensure_finite("m_total", m_total)?;
    if m_total <= 0.0 {
        return Err(Error::OutOfRange {
            name: "m_total",
            constraint: "> 0",
            value: m_total,
        });
    }
    if count == 0 {
        return Err(Error::OutOfRange {
            name: "count",
            constraint: ">= 1",
            value: 0.0,
        });
    }

    let eps_eff = effective_excess_noise(chan.eps, intercept_resend);
    let sd_alice = (params.v_a * params.n0).sqrt();
    let gain = (params.eta * chan.t_chan * m_total).sqrt();
    let noise_var =
        params.eta * chan.t_chan * eps_eff * params.n0 + params.n0 + params.v_el * params.n0;
    let sd_noise = noise_var.sqrt();

    let mut xa = vec![0.0; count];
    let mut xb = vec![0.0; count];
    xa.par_chunks_mut(PAR_CHUNK)
        .zip(xb.par_chunks_mut(PAR_CHUNK))
        .enumerate()
        .for_each(|(chunk_idx, (ca, cb))| {
            let start = (chunk_idx * PAR_CHUNK) as u64;
            let mut alice = NormalSource::at(seed, STREAM_ALICE, start);
            let mut noise = NormalSource::at(seed, STREAM_NOISE, start);
            for (a, b) in ca.iter_mut().zip(cb.iter_mut()) {
                let x = sd_alice * alice.next();
                *a = x;
                *b = gain * x + sd_noise * noise.next();
            }
        });

    let digest = format!(
        "m_total={m_total};intercept_resend={intercept_resend};t_chan={};eps={}",
        chan.t_chan, chan.eps
    );
    QuadratureBatch::new(xa, xb, seed, digest)
}

/// Alice-side attacked quadratures `sqrt(M) * xa` for variance monitoring.
/// Uses the same draw stream as [`generate_quadratures`], so for equal
/// seeds the samples are the scaled counterparts of a batch's `xa`.
pub fn sample_alice_quadratures(
    params: &SystemParams,
    m_total: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    params.validate()?;
    ensure_finite("m_total", m_total)?;
    if m_total <= 0.0 {
        return Err(Error::OutOfRange {
            name: "m_total",
            constraint: "> 0",
            value: m_total,
        });
    }
    if count == 0 {
        return Err(Error::OutOfRange {
            name: "count",
            constraint: ">= 1",
            value: 0.0,
        });
    }
    let sd = (m_total * params.v_a * params.n0).sqrt();
    let mut out = vec![0.0; count];
    out.par_chunks_mut(PAR_CHUNK)
        .enumerate()
        .for_each(|(ci, chunk)| {
            let mut src = NormalSource::at(seed, STREAM_ALICE, (ci * PAR_CHUNK) as u64);
            for v in chunk.iter_mut() {
                *v = sd * src.next();
            }
        });
    Ok(out)
}

/// Analytic variance of Bob's quadrature and Alice/Bob covariance, in
/// absolute variance units (shot-noise units times `N0`).
///
/// `v_b = eta*T*M*V_A*N0 + eta*T*eps_eff*N0 + N0 + v_el*N0` and
/// `cov_ab = sqrt(eta*T*M) * V_A * N0`, the covariance between Alice's
/// *unscaled* records and Bob's measurements.
pub fn theoretical_variance(
    params: &SystemParams,
    chan: &ChannelParams,
    m_total: f64,
    intercept_resend: bool,
) -> Result<(f64, f64)> {
    params.validate()?;
    chan.validate()?;
    ensure_finite("m_total", m_total)?;
    if m_total <= 0.0 {
        return Err(Error::OutOfRange {
            name: "m_total",
            constraint: "> 0",
            value: m_total,
        });
    }
    let eps_eff = effective_excess_noise(chan.eps, intercept_resend);
    let eta_t = params.eta * chan.t_chan;
    let v_b = eta_t * m_total * params.v_a * params.n0
        + eta_t * eps_eff * params.n0
        + params.n0
        + params.v_el * params.n0;
    let cov_ab = (eta_t * m_total).sqrt() * params.v_a * params.n0;
    Ok((v_b, cov_ab))
}

/// Practical excess noise including the intercept-resend contribution.
pub fn effective_excess_noise(eps: f64, intercept_resend: bool) -> f64 {
    if intercept_resend {
        eps + INTERCEPT_RESEND_EXCESS_NOISE
    } else {
        eps
    }
}

/// Unbiased sample variance (mean subtracted, `n - 1` denominator).
pub fn sample_variance(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::OutOfRange {
            name: "sample count",
            constraint: ">= 2",
            value: samples.len() as f64,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    Ok(ss / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_params() -> SystemParams {
        SystemParams::default()
    }

    fn var(xs: &[f64]) -> f64 {
        // population variance around zero; generation is centered
        xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
    }

    fn cov(xs: &[f64], ys: &[f64]) -> f64 {
        xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn lossless_noiseless_channel_variance() {
        let params = SystemParams {
            eta: 1.0,
            v_el: 0.0,
            ..small_params()
        };
        let chan = ChannelParams::new(1.0, 0.0).unwrap();
        let batch = generate_quadratures(&params, &chan, 1.0, false, 1_000_000, 7).unwrap();
        let vb = var(&batch.xb);
        assert!(
            (vb - 5.0).abs() < 0.05,
            "Var(xb) = {vb}, expected 5 +- 0.05"
        );
    }

    #[test]
    fn lossy_noisy_channel_variance() {
        let params = small_params();
        let chan = ChannelParams::new(0.5, 0.1).unwrap();
        let batch = generate_quadratures(&params, &chan, 1.0, false, 1_000_000, 11).unwrap();
        let vb = var(&batch.xb);
        assert!(
            (vb - 2.035).abs() < 0.02,
            "Var(xb) = {vb}, expected 2.035 +- 0.02"
        );
    }

    #[test]
    fn intercept_resend_adds_two_snu() {
        let params = small_params();
        let chan = ChannelParams::new(0.5, 0.1).unwrap();
        let batch = generate_quadratures(&params, &chan, 1.0, true, 1_000_000, 11).unwrap();
        let vb = var(&batch.xb);
        assert!(
            (vb - 2.535).abs() < 0.02,
            "Var(xb) = {vb}, expected 2.535 +- 0.02"
        );
    }

    #[test]
    fn sample_moments_match_theoretical_variance() {
        // 5 standard errors at 10^6 samples for variance and covariance.
        let params = small_params();
        let chan = ChannelParams::new(0.35, 0.08).unwrap();
        let n = 1_000_000;
        for (m_total, ir) in [(1.0, false), (1.5, false), (2.0, true)] {
            let (vb, cab) = theoretical_variance(&params, &chan, m_total, ir).unwrap();
            let batch = generate_quadratures(&params, &chan, m_total, ir, n, 5).unwrap();
            let se_var = vb * (2.0 / n as f64).sqrt();
            let got_vb = var(&batch.xb);
            assert!(
                (got_vb - vb).abs() < 5.0 * se_var,
                "M={m_total} ir={ir}: Var(xb)={got_vb}, want {vb} +- {}",
                5.0 * se_var
            );
            let va = params.v_a * params.n0;
            let se_cov = ((va * vb + cab * cab) / n as f64).sqrt();
            let got_cov = cov(&batch.xa, &batch.xb);
            assert!(
                (got_cov - cab).abs() < 5.0 * se_cov,
                "M={m_total} ir={ir}: Cov={got_cov}, want {cab} +- {}",
                5.0 * se_cov
            );
        }
    }

    #[test]
    fn attack_scaling_scales_variance() {
        let params = small_params();
        let chan = ChannelParams::new(1.0, 0.0).unwrap();
        let batch = generate_quadratures(&params, &chan, 1.0, false, 1_000_000, 3).unwrap();
        let scaled = apply_attack_scaling(&batch.xa, 1.5).unwrap();
        let v = var(&scaled);
        assert!((v - 6.0).abs() < 0.05, "Var = {v}, expected 6 +- 0.05");
    }

    #[test]
    fn attack_scaling_identity_and_simple_values() {
        assert_eq!(apply_attack_scaling(&[2.0], 1.0).unwrap(), vec![2.0]);
        assert_eq!(apply_attack_scaling(&[2.0], 4.0).unwrap(), vec![4.0]);
        assert!(apply_attack_scaling(&[1.0], 0.0).is_err());
        assert!(apply_attack_scaling(&[1.0], -1.0).is_err());
    }

    #[test]
    fn theoretical_variance_hand_values() {
        let params = SystemParams {
            eta: 1.0,
            v_el: 0.0,
            ..small_params()
        };
        let chan = ChannelParams::new(1.0, 0.0).unwrap();
        let (vb, cab) = theoretical_variance(&params, &chan, 1.0, false).unwrap();
        assert_eq!(vb, 5.0);
        assert_eq!(cab, 4.0);

        let params = small_params();
        let chan = ChannelParams::new(0.2, 0.05).unwrap();
        let (vb, _) = theoretical_variance(&params, &chan, 2.0, false).unwrap();
        assert!((vb - 1.815).abs() < 1e-12);
    }

    #[test]
    fn attack_off_reduces_to_plain_linear_model() {
        let params = small_params();
        let chan = ChannelParams::new(0.5, 0.1).unwrap();
        let (vb, cab) = theoretical_variance(&params, &chan, 1.0, false).unwrap();
        // eta*T*V_A + eta*T*eps + N0 + V_el and sqrt(eta*T)*V_A
        assert!((vb - (0.25 * 4.0 + 0.25 * 0.1 + 1.01)).abs() < 1e-15);
        assert!((cab - 0.25f64.sqrt() * 4.0).abs() < 1e-15);
    }

    #[test]
    fn determinism_same_seed_same_batch() {
        let params = small_params();
        let chan = ChannelParams::new(0.6, 0.02).unwrap();
        let a = generate_quadratures(&params, &chan, 1.3, true, 40_000, 99).unwrap();
        let b = generate_quadratures(&params, &chan, 1.3, true, 40_000, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_quadratures(&params, &chan, 1.3, true, 40_000, 100).unwrap();
        assert_ne!(a.xa, c.xa);
    }

    #[test]
    fn generation_is_chunking_independent() {
        // Serial reference against the chunked parallel path, across
        // several PAR_CHUNK boundaries.
        let params = small_params();
        let chan = ChannelParams::new(0.5, 0.05).unwrap();
        let count = 3 * PAR_CHUNK + 12_345;
        let batch = generate_quadratures(&params, &chan, 2.0, false, count, 42).unwrap();

        let sd_alice = (params.v_a * params.n0).sqrt();
        let gain = (params.eta * chan.t_chan * 2.0).sqrt();
        let noise_var =
            params.eta * chan.t_chan * chan.eps * params.n0 + params.n0 + params.v_el * params.n0;
        let sd_noise = noise_var.sqrt();
        let mut alice = NormalSource::at(42, STREAM_ALICE, 0);
        let mut noise = NormalSource::at(42, STREAM_NOISE, 0);
        for i in 0..count {
            let x = sd_alice * alice.next();
            let b = gain * x + sd_noise * noise.next();
            assert_eq!(batch.xa[i], x, "xa[{i}]");
            assert_eq!(batch.xb[i], b, "xb[{i}]");
        }
    }

    #[test]
    fn normal_source_is_seekable() {
        let mut serial = NormalSource::at(5, 0, 0);
        let first: Vec<f64> = (0..100).map(|_| serial.next()).collect();
        for (i, want) in first.iter().enumerate() {
            let got = NormalSource::at(5, 0, i as u64).next();
            assert_eq!(got, *want, "sample {i}");
        }
    }

    #[test]
    fn monitor_samples_are_scaled_alice_records() {
        let params = small_params();
        let chan = ChannelParams::new(0.5, 0.05).unwrap();
        let batch = generate_quadratures(&params, &chan, 1.5, false, 1000, 8).unwrap();
        let monitored = sample_alice_quadratures(&params, 1.5, 1000, 8).unwrap();
        let scaled = apply_attack_scaling(&batch.xa, 1.5).unwrap();
        for (m, s) in monitored.iter().zip(&scaled) {
            assert!((m - s).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_invalid_arguments() {
        let params = small_params();
        let chan = ChannelParams::new(0.5, 0.0).unwrap();
        assert!(generate_quadratures(&params, &chan, 1.0, false, 0, 1).is_err());
        assert!(generate_quadratures(&params, &chan, 0.0, false, 10, 1).is_err());
        assert!(ChannelParams::new(0.0, 0.0).is_err());
        assert!(ChannelParams::new(1.5, 0.0).is_err());
        assert!(ChannelParams::new(0.5, -0.1).is_err());
        let bad = SystemParams { eta: 1.5, ..params };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn batch_text_round_trip() {
        let params = small_params();
        let chan = ChannelParams::new(0.4, 0.03).unwrap();
        let batch = generate_quadratures(&params, &chan, 1.2, false, 257, 21).unwrap();
        let mut buf = Vec::new();
        batch.write_text(&mut buf).unwrap();
        let back = QuadratureBatch::read_text(buf.as_slice()).unwrap();
        assert_eq!(batch, back);
    }

    #[test]
    fn batch_read_rejects_malformed_input() {
        assert!(matches!(
            QuadratureBatch::read_text("no header\n1 2\n".as_bytes()),
            Err(Error::BatchParse { line: 1, .. })
        ));
        let text = "# seed=3 scenario=x\n1.0\n";
        assert!(matches!(
            QuadratureBatch::read_text(text.as_bytes()),
            Err(Error::BatchParse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn scaling_round_trip_recovers_input(
            xs in proptest::collection::vec(-50.0f64..50.0, 1..40),
            m in 0.01f64..50.0,
        ) {
            let fwd = apply_attack_scaling(&xs, m).unwrap();
            let back = apply_attack_scaling(&fwd, 1.0 / m).unwrap();
            for (orig, rec) in xs.iter().zip(&back) {
                prop_assert!((orig - rec).abs() <= 1e-12 * orig.abs().max(1.0));
            }
        }
    }
}
