use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qredist::measures::TangleEstimator;
use qredist::pipeline::{
    check_invariants, run_sweep, sweep, thresholds, tomo_roundtrip, write_json, GridSpec, Manifest, SweepConfig,
};
use qredist::Error;

/// Entanglement redistribution under local amplitude damping.
#[derive(Parser)]
#[command(name = "qredist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep p and write the per-p report, figure data and thresholds.
    Sweep(Common),
    /// Print sudden-death / sudden-birth thresholds as JSON.
    Thresholds(Common),
    /// Simulate tomography of the evolved pure state and reconstruct it.
    TomoRoundtrip {
        #[command(flatten)]
        common: Common,
        /// Damping strength of the state to reconstruct.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
    },
    /// Re-verify conservation, decomposition, symmetry and monogamy identities.
    CheckInvariants(Common),
}

#[derive(Args)]
struct Common {
    /// JSON sweep configuration; defaults to the α² = 1/7 family on 101 points.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tomography seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per setting; for `sweep` and `thresholds` this turns on tomography in the loop.
    #[arg(long)]
    shots: Option<u64>,
    /// Estimator for the mixed-state pair-cut tangle.
    #[arg(long, value_parser = ["lb", "qp"])]
    estimator: Option<String>,
}

impl Common {
    fn config(&self, shots_enable_tomography: bool) -> qredist::Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::from_file(path)?,
            None => SweepConfig::pure_family(1.0 / 7.0, GridSpec::default()),
        };
        if let Some(seed) = self.seed {
            cfg.tomography.seed = seed;
        }
        if let Some(shots) = self.shots {
            cfg.tomography.shots = shots;
            cfg.tomography.enabled |= shots_enable_tomography;
        }
        if let Some(est) = &self.estimator {
            cfg.estimator = est.parse::<TangleEstimator>()?;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &SweepConfig) -> Option<&Path> {
    cfg.output_dir.as_deref()
}

fn print_json<T: serde::Serialize>(value: &T) -> qredist::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// `Ok(true)` when every check passed.
fn run(command: Command) -> qredist::Result<bool> {
    match command {
        Command::Sweep(common) => {
            let cfg = common.config(true)?;
            let out = out_dir(&cfg).ok_or_else(|| Error::Argument("sweep needs --out or output_dir".into()))?;
            let result = run_sweep(&cfg, out)?;
            let failed = result.rows.iter().filter(|r| !r.is_ok()).count();
            eprintln!(
                "{} rows written to {} ({failed} failed)",
                result.rows.len(),
                out.display()
            );
            print_json(&result.thresholds)?;
            Ok(true)
        }
        Command::Thresholds(common) => {
            let cfg = common.config(true)?;
            let th = thresholds(&sweep(&cfg)?, cfg.threshold_tol())?;
            if let Some(out) = out_dir(&cfg) {
                std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.into(), source: e })?;
                write_json(&out.join("thresholds.json"), &th)?;
                let mut manifest = Manifest::new("thresholds", &cfg, cfg.tomography.enabled.then_some(cfg.tomography.seed));
                manifest.artifacts.push("thresholds.json".into());
                manifest.write(out)?;
            }
            print_json(&th)?;
            Ok(true)
        }
        Command::TomoRoundtrip { common, p } => {
            let cfg = common.config(false)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Argument(format!("--p {p} outside [0, 1]")));
            }
            let report = tomo_roundtrip(&cfg, p, cfg.tomography.shots, cfg.tomography.seed, out_dir(&cfg))?;
            print_json(&report)?;
            Ok(true)
        }
        Command::CheckInvariants(common) => {
            let cfg = common.config(true)?;
            let report = check_invariants(&cfg)?;
            for c in &report.checks {
                eprintln!(
                    "{} {:<28} worst = {:.3e} (tol {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tol
                );
            }
            if let Some(out) = out_dir(&cfg) {
                std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.into(), source: e })?;
                write_json(&out.join("invariants.json"), &report)?;
                let mut manifest =
                    Manifest::new("check-invariants", &cfg, cfg.tomography.enabled.then_some(cfg.tomography.seed));
                manifest.artifacts.push("invariants.json".into());
                manifest.write(out)?;
            }
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e @ Error::Identity { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
