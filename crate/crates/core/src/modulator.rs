//! Intensity transfer model of LN-based Mach-Zehnder modulators.
//!
//! A lithium-niobate Mach-Zehnder device maps an input intensity to
//! `(I_in / 2) * (1 + cos(phi0 + k * V))` where `phi0 = 2*pi*V_bias/V_pi`
//! is the inherent bias phase and `k = 2*pi/V_pi` converts the loaded
//! modulation voltage to phase. An irradiation beam injected into the
//! device shifts the response curve by an extra photorefractive phase
//! `delta_theta_pe`, which multiplies the output intensity of each device
//! by a gain factor `M_i`. The cascaded product `M = prod M_i` is the
//! impact factor seen by the rest of the system.

use crate::error::{ensure_finite, Error, Result};
use std::f64::consts::TAU;

/// Baseline intensities below `BASELINE_FLOOR * i_in` are treated as a
/// singular operating point: the gain factor would blow up there.
pub const BASELINE_FLOOR: f64 = 1e-9;

/// Electro-optic transfer-curve parameters of one LN-based MZ device.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatorConfig {
    /// Half-wave voltage `V_pi` in volts, strictly positive.
    pub v_pi: f64,
    /// Bias voltage `V_bias` in volts.
    pub v_bias: f64,
    /// Photorefractive phase bias in radians. The transfer curve is
    /// 2*pi-periodic in this value; zero means an unperturbed device.
    pub delta_theta_pe: f64,
    /// Device identifier, e.g. "IM_1", "IM_2", "VOA".
    pub label: String,
}

impl ModulatorConfig {
    pub fn new(v_pi: f64, v_bias: f64, delta_theta_pe: f64, label: &str) -> Result<Self> {
        let config = Self {
            v_pi,
            v_bias,
            delta_theta_pe,
            label: label.to_string(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("v_pi", self.v_pi)?;
        ensure_finite("v_bias", self.v_bias)?;
        ensure_finite("delta_theta_pe", self.delta_theta_pe)?;
        if self.v_pi <= 0.0 {
            return Err(Error::OutOfRange {
                name: "v_pi",
                constraint: "> 0",
                value: self.v_pi,
            });
        }
        // phi0 and k must stay finite for any admissible v_pi.
        ensure_finite("phi0", self.initial_phase())?;
        ensure_finite("k", self.voltage_coefficient())?;
        Ok(())
    }

    /// Inherent bias phase `phi0 = 2*pi*V_bias/V_pi`.
    pub fn initial_phase(&self) -> f64 {
        TAU * self.v_bias / self.v_pi
    }

    /// Voltage-to-phase coefficient `k = 2*pi/V_pi`.
    pub fn voltage_coefficient(&self) -> f64 {
        TAU / self.v_pi
    }

    /// The same device with the photorefractive bias removed.
    pub fn unperturbed(&self) -> Self {
        Self {
            delta_theta_pe: 0.0,
            ..self.clone()
        }
    }
}

/// Per-device gain factors and their cascaded product.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactFactors {
    /// Gain factor of each device in cascade order.
    pub m_per_device: Vec<f64>,
    /// Product of all per-device factors.
    pub m_total: f64,
}

/// Output intensity of one device at the given operating point.
///
/// Returns `(i_in / 2) * (1 + cos(phi0 + k*v_mod + delta_theta_pe))`,
/// which lies in `[0, i_in]` for any finite arguments.
pub fn transfer_intensity(config: &ModulatorConfig, i_in: f64, v_mod: f64) -> Result<f64> {
    config.validate()?;
    ensure_finite("i_in", i_in)?;
    ensure_finite("v_mod", v_mod)?;
    if i_in < 0.0 {
        return Err(Error::OutOfRange {
            name: "i_in",
            constraint: ">= 0",
            value: i_in,
        });
    }
    let phase =
        config.initial_phase() + config.voltage_coefficient() * v_mod + config.delta_theta_pe;
    Ok(0.5 * i_in * (1.0 + phase.cos()))
}

/// Gain factor of one device: perturbed output over unperturbed output at
/// the same operating point.
///
/// Fails with a singular-operating-point error when the unperturbed
/// output is below [`BASELINE_FLOOR`] relative to `i_in`.
pub fn gain_factor(config: &ModulatorConfig, i_in: f64, v_mod: f64) -> Result<f64> {
    if i_in <= 0.0 {
        return Err(Error::OutOfRange {
            name: "i_in",
            constraint: "> 0",
            value: i_in,
        });
    }
    let baseline = transfer_intensity(&config.unperturbed(), i_in, v_mod)?;
    let floor = BASELINE_FLOOR * i_in;
    if baseline < floor {
        return Err(Error::SingularOperatingPoint { baseline, floor });
    }
    let perturbed = transfer_intensity(config, i_in, v_mod)?;
    Ok(perturbed / baseline)
}

/// Cascade per-device gain factors into an impact factor.
pub fn cascade_impact(factors: &[f64]) -> Result<ImpactFactors> {
    if factors.is_empty() {
        return Err(Error::EmptyInput("gain factor list"));
    }
    for &m in factors {
        ensure_finite("gain factor", m)?;
        if m <= 0.0 {
            return Err(Error::OutOfRange {
                name: "gain factor",
                constraint: "> 0",
                value: m,
            });
        }
    }
    Ok(ImpactFactors {
        m_per_device: factors.to_vec(),
        m_total: factors.iter().product(),
    })
}
