//! Grid evaluation: one row per (scenario, excess noise, distance) point.

use crate::config::SweepConfig;
use crate::CliError;
use cvqkd_core::{
    effective_excess_noise, fiber_transmissivity, run_attack_experiment, ChannelParams,
    ExperimentReport,
};
use rayon::prelude::*;

/// One grid point of a sweep. Numeric outputs are NaN on rows whose
/// evaluation failed; `error` then carries the diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub distance_km: f64,
    pub m_total: f64,
    pub eps_pra: f64,
    pub eps_est: f64,
    pub t_pra: f64,
    pub t_est: f64,
    pub i_ab: f64,
    pub s_be: f64,
    pub delta_n: f64,
    pub k_est_raw: f64,
    pub k_est: f64,
    pub k_pra_raw: f64,
    pub k_pra: f64,
    pub gap: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_report(
        distance_km: f64,
        m_total: f64,
        eps_pra: f64,
        t_pra: f64,
        r: &ExperimentReport,
    ) -> Self {
        Self {
            distance_km,
            m_total,
            eps_pra,
            eps_est: r.estimates.eps_est,
            t_pra,
            t_est: r.estimates.t_est,
            i_ab: r.k_est.i_ab,
            s_be: r.k_est.s_be,
            delta_n: r.k_est.delta_n,
            k_est_raw: r.k_est.k_raw,
            k_est: r.k_est.k,
            k_pra_raw: r.k_pra.k_raw,
            k_pra: r.k_pra.k,
            gap: r.gap,
            error: None,
        }
    }

    fn from_error(distance_km: f64, m_total: f64, eps_pra: f64, t_pra: f64, error: String) -> Self {
        Self {
            distance_km,
            m_total,
            eps_pra,
            eps_est: f64::NAN,
            t_pra,
            t_est: f64::NAN,
            i_ab: f64::NAN,
            s_be: f64::NAN,
            delta_n: f64::NAN,
            k_est_raw: f64::NAN,
            k_est: f64::NAN,
            k_pra_raw: f64::NAN,
            k_pra: f64::NAN,
            gap: f64::NAN,
            error: Some(error),
        }
    }
}

/// Distinct per-row seed derived from the sweep seed and the row index.
fn row_seed(base: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the combined value.
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluate every grid point of the configuration.
///
/// Rows are ordered by (scenario, eps, distance) and are deterministic for
/// a given seed, independent of how many worker threads evaluate the grid.
/// Per-row failures (e.g. a worst-case transmissivity bound above 1 at
/// short distance under a strong attack) are recorded in the row's error
/// column instead of aborting the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, CliError> {
    config.system.validate().map_err(CliError::Core)?;

    struct Point {
        index: u64,
        m_total: f64,
        intercept_resend: bool,
        scenario_idx: usize,
        eps: f64,
        distance_km: f64,
    }

    let mut points = Vec::new();
    let mut index = 0u64;
    for (scenario_idx, scenario) in config.scenarios.iter().enumerate() {
        scenario.validate().map_err(CliError::Core)?;
        let m_total = scenario.m_total().map_err(CliError::Core)?;
        for &eps in &config.eps_grid {
            for &distance_km in &config.distances_km {
                points.push(Point {
                    index,
                    m_total,
                    intercept_resend: scenario.intercept_resend,
                    scenario_idx,
                    eps,
                    distance_km,
                });
                index += 1;
            }
        }
    }

    let rows = points
        .par_iter()
        .map(|p| {
            let scenario = &config.scenarios[p.scenario_idx];
            let t_pra = fiber_transmissivity(config.alpha_db_per_km, p.distance_km);
            let eps_pra = effective_excess_noise(p.eps, p.intercept_resend);
            let result = ChannelParams::new(t_pra, p.eps).and_then(|chan| {
                run_attack_experiment(
                    &config.system,
                    &chan,
                    scenario,
                    row_seed(config.seed, p.index),
                    config.mode,
                )
            });
            match result {
                Ok(report) => {
                    SweepRow::from_report(p.distance_km, p.m_total, eps_pra, t_pra, &report)
                }
                Err(e) => {
                    SweepRow::from_error(p.distance_km, p.m_total, eps_pra, t_pra, e.to_string())
                }
            }
        })
        .collect();
    Ok(rows)
}
