//! `cvqkd` command-line front end.

use clap::{Args, Parser, Subcommand};
use cvqkd_cli::{config, emit_report, run_sweep, CliError, SweepConfig};
use cvqkd_core::{
    detection_operating_point, estimate_channel, fiber_transmissivity, generate_quadratures,
    mle_fit, monitor_modulation_variance, run_attack_experiment, sample_alice_quadratures,
    worst_case_bounds, AttackScenario, ChannelParams, EvalMode, ExperimentReport, ImpactSpec,
    KeyRateReport, ScenarioMode,
};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "GMCS CVQKD simulator under the induced-photorefraction attack",
    after_help = "Run `cvqkd sweep --config sweep.toml` to reproduce the key-rate curves; \
                  see the repository README for the configuration schema."
)]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed override for data generation.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output path override.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Evaluation mode: analytic or mc.
    #[arg(long, global = true, value_name = "analytic|mc")]
    mode: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PointArgs {
    /// Transmission distance in km (converted with the configured fiber loss).
    #[arg(long, value_name = "KM")]
    distance_km: Option<f64>,

    /// Channel transmissivity; alternative to --distance-km.
    #[arg(long, value_name = "T")]
    transmissivity: Option<f64>,

    /// Practical excess noise in shot-noise units.
    #[arg(long, default_value_t = 0.05, value_name = "SNU")]
    eps: f64,

    /// Impact factor of the induced photorefraction.
    #[arg(long, default_value_t = 1.0, value_name = "M")]
    m_total: f64,

    /// Hide a full intercept-resend attack under the impact factor.
    #[arg(long)]
    intercept_resend: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the secret key rate at a single channel point.
    Keyrate(PointArgs),

    /// Run the configured scenario sweep and write a CSV report.
    Sweep,

    /// Generate a Monte Carlo quadrature batch and estimate the channel.
    Simulate {
        #[command(flatten)]
        point: PointArgs,

        /// Number of quadrature pairs to generate.
        #[arg(long, default_value_t = 100_000, value_name = "N")]
        count: usize,
    },

    /// Run the modulation-variance monitoring countermeasure.
    Monitor {
        /// Impact factor applied to the monitored samples.
        #[arg(long, default_value_t = 1.5, value_name = "M")]
        m_total: f64,

        /// Monitored samples per trial.
        #[arg(long, default_value_t = 10_000, value_name = "N")]
        samples: usize,

        /// Null false-alarm probability used to set the threshold.
        #[arg(long, default_value_t = 0.01, value_name = "P")]
        false_alarm: f64,

        /// Number of seeded detection trials.
        #[arg(long, default_value_t = 1000, value_name = "N")]
        trials: u64,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<SweepConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => config::parse_config(&fs::read_to_string(path)?)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = out.clone();
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = config::parse_mode(mode).map_err(CliError::Validation)?;
    }
    Ok(cfg)
}

fn resolve_point(cfg: &SweepConfig, point: &PointArgs) -> Result<(f64, ChannelParams), CliError> {
    let t = match (point.distance_km, point.transmissivity) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "give either --distance-km or --transmissivity, not both".into(),
            ));
        }
        (Some(l), None) => fiber_transmissivity(cfg.alpha_db_per_km, l),
        (None, Some(t)) => t,
        (None, None) => {
            return Err(CliError::Validation(
                "one of --distance-km or --transmissivity is required".into(),
            ));
        }
    };
    let distance = point
        .distance_km
        .unwrap_or_else(|| -10.0 * t.log10() / cfg.alpha_db_per_km);
    Ok((distance, ChannelParams::new(t, point.eps)?))
}

fn scenario_for(point: &PointArgs) -> AttackScenario {
    if point.m_total == 1.0 && !point.intercept_resend {
        AttackScenario::none()
    } else {
        AttackScenario {
            mode: ScenarioMode::Pretreatment,
            m_spec: ImpactSpec::Direct(point.m_total),
            intercept_resend: point.intercept_resend,
            ramp_steps: 0,
        }
    }
}

fn print_key_rate(label: &str, r: &KeyRateReport) {
    println!("{label}:");
    println!("  I_AB     = {:.6} bits/pulse", r.i_ab);
    println!("  S_BE     = {:.6} bits/pulse", r.s_be);
    println!("  Delta(n) = {:.6e} bits/pulse", r.delta_n);
    println!("  K_raw    = {:.6e} bits/pulse", r.k_raw);
    println!("  K        = {:.6e} bits/pulse", r.k);
}

fn print_experiment(distance_km: f64, report: &ExperimentReport) {
    println!(
        "scenario: {} at L = {distance_km:.3} km",
        report.scenario.describe()
    );
    println!(
        "estimates: T_est = {:.6}, eps_est = {:.6}, T_min = {:.6}, eps_max = {:.6}",
        report.estimates.t_est,
        report.estimates.eps_est,
        report.estimates.t_min,
        report.estimates.eps_max
    );
    if report.estimates.has_negative_excess_noise() {
        println!("note: raw excess-noise estimate is negative (statistical fluctuation)");
    }
    print_key_rate("estimated key rate", &report.k_est);
    print_key_rate("practical key rate", &report.k_pra);
    println!("gap (K_est - K_pra) = {:.6e} bits/pulse", report.gap);
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Keyrate(point) => {
            let (distance, chan) = resolve_point(&cfg, point)?;
            let scenario = scenario_for(point);
            let report =
                run_attack_experiment(&cfg.system, &chan, &scenario, cfg.seed, EvalMode::Analytic)?;
            if scenario.mode == ScenarioMode::None {
                print_key_rate("key rate", &report.k_est);
            } else {
                print_experiment(distance, &report);
            }
            Ok(())
        }

        Command::Sweep => {
            let rows = run_sweep(&cfg)?;
            emit_report(&rows, &cfg.digest(), cfg.seed, &cfg.output_path)?;
            let errors = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "wrote {} rows ({} with per-row errors) to {}",
                rows.len(),
                errors,
                cfg.output_path.display()
            );
            Ok(())
        }

        Command::Simulate { point, count } => {
            let (distance, chan) = resolve_point(&cfg, point)?;
            let scenario = scenario_for(point);
            let m = scenario.m_total()?;
            let batch = generate_quadratures(
                &cfg.system,
                &chan,
                m,
                scenario.intercept_resend,
                *count,
                cfg.seed,
            )?;
            if let Some(path) = &cli.out {
                let mut file = std::io::BufWriter::new(fs::File::create(path)?);
                batch.write_text(&mut file)?;
                println!(
                    "wrote {} quadrature pairs to {}",
                    batch.len(),
                    path.display()
                );
            }
            let fit = mle_fit(&batch)?;
            let (t_est, eps_est) = estimate_channel(&fit, &cfg.system)?;
            let bounds = worst_case_bounds(&fit, &cfg.system, cfg.system.v_a * cfg.system.n0)?;
            println!(
                "simulated {} pairs at L = {distance:.3} km (T = {:.6}, eps = {}, M = {m}, \
                 intercept_resend = {})",
                batch.len(),
                chan.t_chan,
                chan.eps,
                scenario.intercept_resend
            );
            println!(
                "t_hat = {:.6}, sigma2_hat = {:.6}",
                fit.t_hat, fit.sigma2_hat
            );
            println!("T_est = {t_est:.6}, eps_est = {eps_est:.6}");
            println!(
                "T_min = {:.6}, eps_max = {:.6} (z = {:.4})",
                bounds.t_min, bounds.eps_max, bounds.z_quant
            );
            Ok(())
        }

        Command::Monitor {
            m_total,
            samples,
            false_alarm,
            trials,
        } => {
            let threshold =
                detection_operating_point(cfg.system.v_a, *samples as u64, *false_alarm)?;
            let mut alarms = 0u64;
            let mut m_hat_sum = 0.0;
            for trial in 0..*trials {
                let data = sample_alice_quadratures(
                    &cfg.system,
                    *m_total,
                    *samples,
                    cfg.seed.wrapping_add(trial),
                )?;
                let r =
                    monitor_modulation_variance(&data, cfg.system.v_a, cfg.system.n0, threshold)?;
                alarms += r.alarm as u64;
                m_hat_sum += r.m_hat;
            }
            println!(
                "threshold = {threshold:.6} ({} samples, false-alarm target {false_alarm})",
                samples
            );
            println!(
                "alarm rate = {:.4} over {trials} trials (mean m_hat = {:.4}, true M = {m_total})",
                alarms as f64 / *trials as f64,
                m_hat_sum / *trials as f64
            );
            Ok(())
        }
    }
}
