//! Command line front end: run one scenario, sweep a threshold grid, or
//! dump debug CSVs (orbits, antenna pattern, reference scenario).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use coexsim_core::engine;

use coexsim::export;
use coexsim::scenario::{ModeKey, Overrides, PolicyKey, Scenario, PRESET_DEFAULT};

#[derive(Parser)]
#[command(
    name = "coexsim",
    version,
    about = "Two-constellation spectrum coexistence simulator",
    long_about = "Simulates a primary and a secondary LEO constellation serving the same \
                  region in the same band, either unconstrained (baseline) or with the \
                  secondary system's satellite assignments solved under interference \
                  budgets (protected)."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and export traces plus a summary.
    Run(RunArgs),
    /// Run a grid of instantaneous-threshold and beam-count combinations.
    Sweep(SweepArgs),
    /// Dump propagated satellite positions as CSV.
    DumpOrbits(DumpOrbitsArgs),
    /// Dump antenna gain samples as CSV.
    DumpPattern(DumpPatternArgs),
    /// Print the fully commented reference scenario.
    PrintDefaultScenario,
}

/// Scenario selection plus the keys that may be overridden per invocation.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file path, or a bundled preset name
    /// (starlink_kuiper_texas, small_region).
    #[arg(long, default_value = "starlink_kuiper_texas")]
    scenario: String,
    #[arg(long, value_enum)]
    mode: Option<ModeKey>,
    #[arg(long, value_enum)]
    policy_primary: Option<PolicyKey>,
    #[arg(long, value_enum)]
    policy_secondary: Option<PolicyKey>,
    /// Beams per serving satellite.
    #[arg(long)]
    beams: Option<u32>,
    /// Average INR budget, dB.
    #[arg(long, allow_hyphen_values = true)]
    inr_avg_th_db: Option<f64>,
    /// Instantaneous INR cap, dB; accepts inf.
    #[arg(long, allow_hyphen_values = true)]
    inr_max_th_db: Option<f64>,
    /// Handover period, seconds.
    #[arg(long)]
    th_s: Option<f64>,
    /// Trailing history window, seconds.
    #[arg(long)]
    tw_s: Option<f64>,
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            mode: self.mode,
            policy_primary: self.policy_primary,
            policy_secondary: self.policy_secondary,
            beams: self.beams,
            inr_avg_th_db: self.inr_avg_th_db,
            inr_max_th_db: self.inr_max_th_db,
            th_s: self.th_s,
            tw_s: self.tw_s,
            duration_s: self.duration_s,
            seed: self.seed,
        }
    }

    fn scenario(&self) -> Result<Scenario> {
        let mut sc = Scenario::resolve(&self.scenario)?;
        sc.apply(&self.overrides())?;
        Ok(sc)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory for the result files.
    #[arg(long)]
    out: PathBuf,
    /// Replace the output directory if it exists.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Instantaneous INR caps to sweep, dB (comma separated; accepts inf).
    /// Overrides --inr-max-th-db.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-6,-3,0,3,inf")]
    max_grid: Vec<f64>,
    /// Beam counts to sweep (comma separated). Overrides --beams.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    beams_grid: Vec<u32>,
    /// Output directory; one subdirectory per grid point plus sweep.csv.
    #[arg(long)]
    out: PathBuf,
    /// Replace the output directory if it exists.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct DumpOrbitsArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// First sample time, seconds.
    #[arg(long, default_value_t = 0.0)]
    t0_s: f64,
    /// Sample spacing, seconds; defaults to the scenario slot length.
    #[arg(long)]
    step_s: Option<f64>,
    /// Number of sample times.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpPatternArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Off-boresight sample spacing, degrees.
    #[arg(long, default_value_t = 0.1)]
    step_deg: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match Cli::parse().cmd {
        Cmd::Run(args) => run(args),
        Cmd::Sweep(args) => sweep(args),
        Cmd::DumpOrbits(args) => dump_orbits(args),
        Cmd::DumpPattern(args) => dump_pattern(args),
        Cmd::PrintDefaultScenario => {
            io::stdout().write_all(PRESET_DEFAULT.as_bytes())?;
            Ok(())
        }
    }
}

fn execute(scenario: &Scenario, out_dir: &Path) -> Result<export::Summary> {
    let built = scenario.build()?;
    let run = engine::run(&built.world, &built.run_cfg, &built.extras)
        .map_err(|e| anyhow::anyhow!("simulation: {e}"))?;
    export::export_run(out_dir, scenario, &built.world, &run, &built.extras)
}

fn run(args: RunArgs) -> Result<()> {
    let scenario = args.scenario.scenario()?;
    export::prepare_out_dir(&args.out, args.overwrite)?;
    log::info!(
        "running {} ({}, {} beams, {} s)",
        scenario.file.name,
        scenario.file.mode.label(),
        scenario.file.beams.count,
        scenario.file.duration_s
    );
    let summary = execute(&scenario, &args.out)?;
    log::info!(
        "done: {} windows, violation rate {} above the average threshold, results in {}",
        summary.windows,
        summary.violation_rate_avg_th,
        args.out.display()
    );
    Ok(())
}

/// Directory-name fragment for one f64 grid value: `-6.5` -> `m6p5`.
fn slug(v: f64) -> String {
    v.to_string().replace('-', "m").replace('.', "p")
}

fn sweep(args: SweepArgs) -> Result<()> {
    let base = args.scenario.scenario()?;
    export::prepare_out_dir(&args.out, args.overwrite)?;
    let csv_path = args.out.join("sweep.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(
        csv,
        "inr_avg_th_db,inr_max_th_db,n_beams,violation_rate_avg_th,violation_rate_max_th,utilization_secondary"
    )?;
    for &beams in &args.beams_grid {
        for &max_db in &args.max_grid {
            let mut sc = base.clone();
            sc.apply(&Overrides {
                beams: Some(beams),
                inr_max_th_db: Some(max_db),
                ..Overrides::default()
            })?;
            let sub = args.out.join(format!("max{}_b{}", slug(max_db), beams));
            export::prepare_out_dir(&sub, false)?;
            log::info!("sweep point: max {} dB, {} beams", max_db, beams);
            let s = execute(&sc, &sub)?;
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                s.inr_avg_th_db,
                s.inr_max_th_db,
                beams,
                s.violation_rate_avg_th,
                s.violation_rate_max_th,
                s.utilization_secondary
            )?;
        }
    }
    csv.flush()?;
    log::info!("sweep table in {}", csv_path.display());
    Ok(())
}

/// Opens `--out` or falls back to stdout.
fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn dump_orbits(args: DumpOrbitsArgs) -> Result<()> {
    let scenario = args.scenario.scenario()?;
    let built = scenario.build()?;
    let step = args.step_s.unwrap_or(scenario.file.slot_s);
    export::write_positions(sink(&args.out)?, &built.world, args.t0_s, step, args.samples)
}

fn dump_pattern(args: DumpPatternArgs) -> Result<()> {
    let scenario = args.scenario.scenario()?;
    let built = scenario.build()?;
    export::write_pattern(sink(&args.out)?, &built.world, args.step_deg)
}
