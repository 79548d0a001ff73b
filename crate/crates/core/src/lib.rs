//! Desk-scale simulator and analysis library for a Gaussian-modulated
//! coherent-state CVQKD system under the induced-photorefraction attack.
//!
//! The library models the attacked LN-based Mach-Zehnder modulators,
//! generates correlated quadrature data through the linear channel,
//! performs (biased) maximum-likelihood parameter estimation with
//! finite-size worst-case bounds, computes the finite-size secret key
//! rate from the Holevo bound, and evaluates the modulation-variance
//! monitoring countermeasure.
//!
//! Modules follow the signal path:
//!
//! - [`modulator`]: Mach-Zehnder transfer curves, photorefractive phase
//!   bias, per-device gain factors and the cascaded impact factor `M`.
//! - [`channel`]: seeded quadrature generation through the linear channel
//!   with `sqrt(M)` attack scaling and intercept-resend excess noise.
//! - [`estimation`]: maximum-likelihood fits, the `(M*T, eps/M)` bias
//!   closed forms, and finite-size worst-case bounds.
//! - [`keyrate`]: mutual information, symplectic spectra, Holevo bound
//!   and the finite-size secret key rate.
//! - [`attack`]: end-to-end experiments comparing the estimated and
//!   practical key rates, plus the variance-monitoring countermeasure.

pub mod attack;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod keyrate;
pub mod modulator;

pub use attack::{
    detection_operating_point, monitor_modulation_variance, run_attack_experiment,
    scenario_impact_trajectory, AttackScenario, DeviceOperatingPoint, EvalMode, ExperimentReport,
    ImpactSpec, MonitorResult, ScenarioMode,
};
pub use channel::{
    apply_attack_scaling, effective_excess_noise, fiber_transmissivity, generate_quadratures,
    sample_alice_quadratures, sample_variance, theoretical_variance, ChannelParams,
    QuadratureBatch, SystemParams, INTERCEPT_RESEND_EXCESS_NOISE,
};
pub use error::{Error, Result};
pub use estimation::{
    analytic_fit, estimate_channel, fira_excess_noise, mle_fit, predicted_bias, worst_case_bounds,
    z_quantile, ChannelEstimate, MleFit,
};
pub use keyrate::{
    asymptotic_key_rate, finite_size_key_rate, finite_size_penalty, g_function, holevo_bound,
    mutual_information, noise_decomposition, secret_key_rate, symplectic_spectrum,
    CovarianceSummary, KeyRateReport, NoiseDecomposition,
};
pub use modulator::{
    cascade_impact, gain_factor, transfer_intensity, ImpactFactors, ModulatorConfig,
};
