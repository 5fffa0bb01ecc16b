//! Parameter sweeps over the damping strength, threshold detection and
//! artifact emission.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::{evolve, initial_state, InitialSpec, InitialSpecConfig, RegisterState};
use crate::error::{Error, Result};
use crate::measures::{
    concurrence, decompose_residual, monogamy_check, pair_marginal, tangle_report, TangleEstimator, TangleReport,
    DICKE_WITNESS_THRESHOLD,
};
use crate::qcore::{fidelity_pure, SubsystemLabel, SubsystemLabel::*};
use crate::tomography::{
    linear_inversion, mle_reconstruct, project_physical, settings_json, simulate_counts, write_counts_csv,
    ProjectorFrame,
};

/// Tolerance below which a tangle counts as zero in noiseless sweeps.
pub const THRESHOLD_TOL: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 101;
/// Magnitudes below this are written as `0` so round-off does not leak into
/// byte-compared artifacts.
pub const CSV_ZERO_SNAP: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range { start: f64, stop: f64, steps: usize },
    Points { points: Vec<f64> },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Range {
            start: 0.0,
            stop: 1.0,
            steps: DEFAULT_GRID_POINTS,
        }
    }
}

impl GridSpec {
    pub fn uniform(steps: usize) -> Self {
        GridSpec::Range {
            start: 0.0,
            stop: 1.0,
            steps,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match self {
            GridSpec::Range { start, stop, steps } => {
                if *steps < 2 {
                    return Err(Error::arg(format!("grid needs at least 2 steps, got {steps}")));
                }
                let h = (stop - start) / (*steps - 1) as f64;
                let mut v: Vec<f64> = (0..*steps).map(|k| start + k as f64 * h).collect();
                v[steps - 1] = *stop;
                v
            }
            GridSpec::Points { points } => {
                if points.is_empty() {
                    return Err(Error::arg("grid has no points"));
                }
                points.clone()
            }
        };
        if let Some(bad) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::arg(format!("grid value {bad} outside [0, 1]")));
        }
        Ok(values)
    }
}

fn default_shots() -> u64 {
    100_000
}

fn default_max_iter() -> usize {
    5_000
}

fn default_mle_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_mle_tol")]
    pub tol: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            shots: default_shots(),
            seed: 0,
            max_iter: default_max_iter(),
            tol: default_mle_tol(),
        }
    }
}

fn default_estimator() -> TangleEstimator {
    TangleEstimator::LowerBound
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub initial: InitialSpecConfig,
    #[serde(default)]
    pub grid: GridSpec,
    /// Estimator for the mixed-state `C²_{S1E1|S2E2}`.
    #[serde(default = "default_estimator")]
    pub estimator: TangleEstimator,
    #[serde(default)]
    pub tomography: TomographyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Directory that relative paths in the config resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SweepConfig {
    /// `√a|00⟩ + √(1−a)|11⟩` on `grid`.
    pub fn pure_family(alpha2: f64, grid: GridSpec) -> Self {
        Self {
            initial: InitialSpecConfig::Amplitudes {
                alpha_re: alpha2.sqrt(),
                alpha_im: 0.0,
                beta_re: (1.0 - alpha2).sqrt(),
                beta_im: 0.0,
            },
            grid,
            estimator: default_estimator(),
            tomography: TomographyConfig::default(),
            output_dir: None,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.values()?;
        if self.tomography.enabled && self.tomography.shots == 0 {
            return Err(Error::arg("tomography.shots must be positive"));
        }
        if self.estimator == TangleEstimator::Pure {
            return Err(Error::arg("estimator must be lb or qp"));
        }
        Ok(())
    }

    pub fn resolve_initial(&self) -> Result<InitialSpec> {
        self.initial.resolve(&self.base_dir)
    }

    /// Zero-tangle tolerance matching the noise level of the run.
    pub fn threshold_tol(&self) -> f64 {
        if self.tomography.enabled {
            3.0 / (self.tomography.shots as f64).sqrt()
        } else {
            THRESHOLD_TOL
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-row seed: distinct streams for every grid point of one run.
pub fn row_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub report: Option<TangleReport>,
    pub tomography: bool,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.report.is_some()
    }
}

fn sweep_point(initial: &RegisterState, p: f64, index: usize, cfg: &SweepConfig) -> Result<(TangleReport, Option<u64>)> {
    let evolved = evolve(initial, p, p)?;
    if !cfg.tomography.enabled {
        return Ok((tangle_report(&evolved, p, cfg.estimator)?, None));
    }
    let seed = row_seed(cfg.tomography.seed, index);
    let counts = simulate_counts(&evolved.to_density(), cfg.tomography.shots, seed)?;
    let fit = mle_reconstruct(&counts, cfg.tomography.max_iter, cfg.tomography.tol)?;
    let mut report = tangle_report(&RegisterState::Mixed(fit.rho), p, cfg.estimator)?;
    if !fit.converged {
        report.flags.push("mle_not_converged".into());
    }
    Ok((report, Some(seed)))
}

/// Evaluate the full report at every grid point. Points are processed in
/// parallel; rows come back in grid order. A failing point yields a row with
/// `error` set instead of aborting the sweep.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let grid = cfg.grid.values()?;
    let initial = initial_state(&cfg.resolve_initial()?)?;
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let shots = cfg.tomography.enabled.then_some(cfg.tomography.shots);
            match sweep_point(&initial, p, k, cfg) {
                Ok((report, seed)) => SweepRow {
                    p,
                    report: Some(report),
                    tomography: cfg.tomography.enabled,
                    seed,
                    shots,
                    error: None,
                },
                Err(e) => {
                    log::error!("p = {p}: {e}");
                    SweepRow {
                        p,
                        report: None,
                        tomography: cfg.tomography.enabled,
                        seed: cfg.tomography.enabled.then(|| row_seed(cfg.tomography.seed, k)),
                        shots,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdKind {
    /// Sudden death: the series falls to zero.
    Esd,
    /// Sudden birth: the series rises from zero.
    Esb,
}

/// Locate a zero-crossing in `(p, value)` samples sorted by `p`.
///
/// ESD is the largest crossing from `> tol` to `≤ tol`; ESB the smallest
/// crossing from `≤ tol` to `> tol`. The crossing is placed by linear
/// interpolation of `value − tol` between the bracketing samples. A series
/// that only reaches zero at its last sample (e.g. a Bell state, whose
/// concurrence vanishes only at `p = 1`) reports a crossing inside the last
/// interval, close to that boundary.
pub fn find_threshold(series: &[(f64, f64)], kind: ThresholdKind, tol: f64) -> Result<Option<f64>> {
    if let Some(w) = series.windows(2).find(|w| !(w[0].0 <= w[1].0)) {
        return Err(Error::arg(format!("series not sorted by p near {} / {}", w[0].0, w[1].0)));
    }
    let interp = |(p0, v0): (f64, f64), (p1, v1): (f64, f64)| {
        if v0 == v1 {
            p1
        } else {
            p0 + (v0 - tol) / (v0 - v1) * (p1 - p0)
        }
    };
    let found = match kind {
        ThresholdKind::Esd => series
            .windows(2)
            .rev()
            .find(|w| w[0].1 > tol && w[1].1 <= tol)
            .map(|w| interp(w[0], w[1])),
        ThresholdKind::Esb => series
            .windows(2)
            .find(|w| w[0].1 <= tol && w[1].1 > tol)
            .map(|w| interp(w[0], w[1])),
    };
    Ok(found)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub esd: Option<f64>,
    pub esb: Option<f64>,
    pub tol: f64,
}

/// ESD of `C²_{S1S2}` and ESB of `C²_{E1E2}` over the successful rows.
pub fn thresholds(rows: &[SweepRow], tol: f64) -> Result<Thresholds> {
    let series = |f: fn(&TangleReport) -> f64| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| r.report.as_ref().map(|t| (r.p, f(t)))).collect()
    };
    Ok(Thresholds {
        esd: find_threshold(&series(|t| t.c2_s1s2), ThresholdKind::Esd, tol)?,
        esb: find_threshold(&series(|t| t.c2_e1e2), ThresholdKind::Esb, tol)?,
        tol,
    })
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed.
pub fn format_sig12(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.abs() < CSV_ZERO_SNAP {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Column order of the sweep CSV.
pub const CSV_COLUMNS: [&str; 29] = [
    "p",
    "c2_s1s2",
    "c2_e1e2",
    "c2_s1e2",
    "c2_s2e1",
    "c2_s1e1",
    "c2_s2e2",
    "gamma_s1s2",
    "gamma_e1e2",
    "c2_s1e1_s2e2",
    "residual_s1e1_s2e2",
    "r_s1",
    "r_s2",
    "r_e1",
    "r_e2",
    "tau_u_s1",
    "tau_u_s2",
    "tau_u_e1",
    "tau_u_e2",
    "tau_eff_s1e1",
    "tau_eff_s2e2",
    "dicke_fidelity",
    "genuine4",
    "pair_estimator",
    "split_estimator",
    "tomography",
    "seed",
    "flags",
    "error",
];

fn opt_num(x: Option<f64>) -> String {
    x.map(format_sig12).unwrap_or_default()
}

fn csv_record(row: &SweepRow) -> Vec<String> {
    let num = format_sig12;
    let mut out = vec![num(row.p)];
    match &row.report {
        Some(t) => {
            out.extend(
                [
                    t.c2_s1s2,
                    t.c2_e1e2,
                    t.c2_s1e2,
                    t.c2_s2e1,
                    t.c2_s1e1,
                    t.c2_s2e2,
                    t.gamma_s1s2,
                    t.gamma_e1e2,
                    t.c2_pair,
                    t.residual_pair,
                    t.residual_i.s1,
                    t.residual_i.s2,
                    t.residual_i.e1,
                    t.residual_i.e2,
                ]
                .map(num),
            );
            for l in SubsystemLabel::ALL {
                out.push(opt_num(t.tau_underline.as_ref().map(|u| u[l])));
            }
            out.push(opt_num(t.tau_effective.s1e1_s2e2));
            out.push(opt_num(t.tau_effective.s2e2_s1e1));
            out.push(num(t.dicke_fidelity));
            out.push(t.genuine4.to_string());
            out.push(t.pair_estimator.name().into());
            out.push(t.split_estimator.name().into());
        }
        None => out.extend(std::iter::repeat_n(String::new(), 23)),
    }
    out.push(row.tomography.to_string());
    out.push(row.seed.map(|s| s.to_string()).unwrap_or_default());
    out.push(row.report.as_ref().map(|t| t.flags.join(";")).unwrap_or_default());
    out.push(row.error.clone().unwrap_or_default());
    debug_assert_eq!(out.len(), CSV_COLUMNS.len());
    out
}

fn write_table(path: &Path, header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(file);
    w.write_record(header)?;
    for rec in records {
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write one line per row with the fixed [`CSV_COLUMNS`] header.
pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_table(path, &CSV_COLUMNS, rows.iter().map(csv_record))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    /// Pairwise tangles, pair-cut residual and Γ.
    Fig2,
    /// Single-underline 3-tangles.
    Fig3,
    /// Dicke fidelity against the 2/3 bound.
    Fig4,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Fig2, Figure::Fig3, Figure::Fig4];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Figure::Fig2 => &["p", "c2_s1s2", "c2_e1e2", "residual_s1e1_s2e2", "gamma_s1s2", "gamma_e1e2"],
            Figure::Fig3 => &["p", "tau_u_s1", "tau_u_s2", "tau_u_e1", "tau_u_e2"],
            Figure::Fig4 => &["p", "dicke_fidelity", "witness_threshold"],
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown figure `{s}` (expected fig2, fig3 or fig4)")))
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-figure column subset; rows without a report are skipped.
pub fn emit_plotdata(rows: &[SweepRow], figure: Figure, path: &Path) -> Result<()> {
    let records = rows.iter().filter_map(|r| {
        let t = r.report.as_ref()?;
        let num = format_sig12;
        Some(match figure {
            Figure::Fig2 => vec![
                num(r.p),
                num(t.c2_s1s2),
                num(t.c2_e1e2),
                num(t.residual_pair),
                num(t.gamma_s1s2),
                num(t.gamma_e1e2),
            ],
            Figure::Fig3 => {
                let mut v = vec![num(r.p)];
                v.extend(SubsystemLabel::ALL.map(|l| opt_num(t.tau_underline.as_ref().map(|u| u[l]))));
                v
            }
            Figure::Fig4 => vec![num(r.p), num(t.dicke_fidelity), num(DICKE_WITNESS_THRESHOLD)],
        })
    });
    write_table(path, figure.columns(), records)
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub qredist: &'static str,
}

impl Manifest {
    pub fn new(command: &str, cfg: &SweepConfig, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config_sha256: cfg.hash(),
            seed,
            versions: Versions {
                qredist: env!("CARGO_PKG_VERSION"),
            },
            artifacts: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Outcome of [`run_sweep`].
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub thresholds: Thresholds,
}

/// Sweep and write `sweep.csv`, `sweep.json`, `fig{2,3,4}.csv`,
/// `thresholds.json` and `manifest.json` into `out`.
pub fn run_sweep(cfg: &SweepConfig, out: &Path) -> Result<SweepOutput> {
    ensure_dir(out)?;
    let rows = sweep(cfg)?;
    let th = thresholds(&rows, cfg.threshold_tol())?;
    let seed = cfg.tomography.enabled.then_some(cfg.tomography.seed);
    let mut manifest = Manifest::new("sweep", cfg, seed);

    emit_csv(&rows, &out.join("sweep.csv"))?;
    write_json(&out.join("sweep.json"), &rows)?;
    manifest.artifacts.extend(["sweep.csv".into(), "sweep.json".into()]);
    for fig in Figure::ALL {
        let name = format!("{fig}.csv");
        emit_plotdata(&rows, fig, &out.join(&name))?;
        manifest.artifacts.push(name);
    }
    write_json(&out.join("thresholds.json"), &th)?;
    manifest.artifacts.push("thresholds.json".into());
    manifest.write(out)?;
    Ok(SweepOutput { rows, thresholds: th })
}

/// Result of one simulated tomography round trip.
#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub p: f64,
    pub shots: u64,
    pub seed: u64,
    pub mle_fidelity: f64,
    pub mle_iterations: usize,
    pub mle_log_likelihood: f64,
    pub mle_converged: bool,
    pub linear_fidelity: f64,
    pub concurrence_true: f64,
    pub concurrence_mle: f64,
    pub concurrence_error: f64,
}

/// Evolve the pure initial state to `p`, simulate counts, reconstruct both
/// ways and compare with the true state. When `out` is given, counts, the
/// settings description, the reconstructed state and the report are written.
pub fn tomo_roundtrip(
    cfg: &SweepConfig,
    p: f64,
    shots: u64,
    seed: u64,
    out: Option<&Path>,
) -> Result<RoundTripReport> {
    let initial = initial_state(&cfg.resolve_initial()?)?;
    let evolved = evolve(&initial, p, p)?;
    let psi = evolved
        .as_pure()
        .ok_or_else(|| Error::arg("tomography round trip needs a pure initial state"))?
        .clone();
    let rho = psi.to_density();
    let counts = simulate_counts(&rho, shots, seed)?;
    let fit = mle_reconstruct(&counts, cfg.tomography.max_iter.max(30_000), cfg.tomography.tol.min(1e-8))?;
    let linear = project_physical(&linear_inversion(&counts)?)?;

    let c_true = concurrence(&pair_marginal(&evolved, S1, S2)?)?;
    let fitted = RegisterState::Mixed(fit.rho.clone());
    let c_mle = concurrence(&pair_marginal(&fitted, S1, S2)?)?;
    let report = RoundTripReport {
        p,
        shots,
        seed,
        mle_fidelity: fidelity_pure(&fit.rho, &psi)?,
        mle_iterations: fit.iterations,
        mle_log_likelihood: fit.log_likelihood,
        mle_converged: fit.converged,
        linear_fidelity: fidelity_pure(&linear, &psi)?,
        concurrence_true: c_true,
        concurrence_mle: c_mle,
        concurrence_error: (c_mle - c_true).abs(),
    };
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut manifest = Manifest::new("tomo-roundtrip", cfg, Some(seed));
        write_counts_csv(&dir.join("counts.csv"), &counts)?;
        fs::write(dir.join("settings.json"), settings_json(&ProjectorFrame::default())?)
            .map_err(|e| Error::io(dir.join("settings.json"), e))?;
        crate::qcore::write_density_json(&dir.join("reconstruction.json"), &fit.rho)?;
        write_json(&dir.join("roundtrip.json"), &report)?;
        manifest.artifacts.extend(
            ["counts.csv", "settings.json", "reconstruction.json", "roundtrip.json"].map(String::from),
        );
        manifest.write(dir)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Re-verify the structural identities over a sweep. Identities that need
/// a pure global state are only checked when the initial state is pure and
/// tomography is off.
pub fn check_invariants(cfg: &SweepConfig) -> Result<InvariantReport> {
    const TOL: f64 = 1e-6;
    let rows = sweep(cfg)?;
    let initial = initial_state(&cfg.resolve_initial()?)?;
    let mut checks = Vec::new();
    let mut push = |name: &str, worst: f64, tol: f64, passed: bool| {
        checks.push(InvariantCheck {
            name: name.into(),
            passed,
            worst,
            tol,
        })
    };

    let failed_rows = rows.iter().filter(|r| !r.is_ok()).count();
    push("rows_evaluated", failed_rows as f64, 0.0, failed_rows == 0);

    let mut min_slack = f64::INFINITY;
    for r in rows.iter().filter(|r| r.is_ok()) {
        let state = evolve(&initial, r.p, r.p)?;
        min_slack = min_slack.min(monogamy_check(&state, cfg.estimator)?.min_slack());
    }
    push("monogamy_slack", min_slack, -TOL, min_slack >= -TOL);

    let pure_initial = initial.as_pure();
    if pure_initial.is_some() && !cfg.tomography.enabled {
        let reports: Vec<&TangleReport> = rows.iter().filter_map(|r| r.report.as_ref()).collect();
        let c0 = reports.first().map(|t| t.c2_pair).unwrap_or(0.0);
        let drift = reports.iter().map(|t| (t.c2_pair - c0).abs()).fold(0.0, f64::max);
        push("pair_cut_tangle_conserved", drift, 1e-9, drift < 1e-9);

        let mut identity_gap: f64 = 0.0;
        for r in rows.iter().filter(|r| r.is_ok()) {
            let state = evolve(&initial, r.p, r.p)?;
            let psi = state.as_pure().expect("pure evolution");
            match decompose_residual(psi) {
                Ok(d) => identity_gap = identity_gap.max((d.residual - d.half_sum).abs()),
                Err(e) => {
                    log::error!("p = {}: {e}", r.p);
                    identity_gap = f64::INFINITY;
                }
            }
        }
        push("residual_decomposition", identity_gap, TOL, identity_gap < TOL);

        let eff = reports
            .iter()
            .flat_map(|t| [t.tau_effective.s1e1_s2e2, t.tau_effective.s2e2_s1e1])
            .map(|v| v.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        push("effective_taus_vanish", eff, TOL, eff < TOL);

        let asym = reports
            .iter()
            .map(|t| match &t.tau_underline {
                Some(u) => (u.s1 - u.s2).abs().max((u.e1 - u.e2).abs()),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max);
        push("underline_symmetry", asym, TOL, asym < TOL);

        let th = thresholds(&rows, THRESHOLD_TOL)?;
        if let (Some(esd), Some(esb)) = (th.esd, th.esb) {
            let dead: Vec<&TangleReport> = reports.iter().copied().filter(|t| t.p > esd && t.p < esb).collect();
            let worst_pair = dead.iter().map(|t| t.c2_s1s2.max(t.c2_e1e2)).fold(0.0, f64::max);
            push("dead_zone_pairs_vanish", worst_pair, THRESHOLD_TOL, worst_pair <= THRESHOLD_TOL);
            let min_res = dead.iter().map(|t| t.residual_pair).fold(f64::INFINITY, f64::min);
            push("dead_zone_multipartite", min_res, 0.0, dead.is_empty() || min_res > 0.0);
        }
    }
    Ok(InvariantReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(steps: usize) -> SweepConfig {
        SweepConfig::pure_family(1.0 / 7.0, GridSpec::uniform(steps))
    }

    #[test]
    fn grid_values() {
        let g = GridSpec::uniform(101).values().unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 1.0);
        assert!((g[50] - 0.5).abs() < 1e-15);
        assert!(GridSpec::uniform(1).values().is_err());
        assert!(GridSpec::Points { points: vec![0.2, 1.5] }.values().is_err());
    }

    #[test]
    fn config_parsing() {
        let cfg = SweepConfig::from_json(
            r#"{"initial": {"alpha_re": 0.6, "beta_re": 0.8}, "grid": {"points": [0.1, 0.5]}, "estimator": "qp"}"#,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.estimator, TangleEstimator::QuasiPure);
        assert_eq!(cfg.grid.values().unwrap(), vec![0.1, 0.5]);
        assert!(!cfg.tomography.enabled);
        assert_eq!(cfg.threshold_tol(), THRESHOLD_TOL);
        let bad = SweepConfig::from_json(r#"{"initial": {"alpha_re": 0.6, "beta_re": 0.8}, "grid": {"start": 0, "stop": 1, "steps": 1}}"#, Path::new("."));
        assert!(matches!(bad, Err(Error::Argument(_))));
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_ne!(cfg.hash(), canonical(101).hash());
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(1e-15), "0");
        assert_eq!(format_sig12(-3e-14), "0");
        assert_eq!(format_sig12(1.0), "1");
        assert_eq!(format_sig12(24.0 / 49.0), "0.489795918367");
        assert_eq!(format_sig12(-0.5), "-0.5");
        assert_eq!(format_sig12(1.0 / 3.0 * 1e-7), "3.33333333333e-08");
        assert_eq!(format_sig12(123456.0), "123456");
        assert_eq!(format_sig12(0.01), "0.01");
        assert_eq!(format_sig12(2e12), "2e+12");
    }

    #[test]
    fn threshold_examples() {
        let s = [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)];
        let p = find_threshold(&s, ThresholdKind::Esd, 0.0).unwrap().unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let s = [(0.0, 0.0), (0.25, 0.0), (0.5, 0.5)];
        let p = find_threshold(&s, ThresholdKind::Esb, 0.0).unwrap().unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        assert_eq!(find_threshold(&s, ThresholdKind::Esd, 0.0).unwrap(), None);
        let unsorted = [(0.5, 1.0), (0.1, 0.0)];
        assert!(find_threshold(&unsorted, ThresholdKind::Esd, 0.0).is_err());
    }

    #[test]
    fn canonical_sweep_rows() {
        let rows = sweep(&canonical(101)).unwrap();
        assert_eq!(rows.len(), 101);
        assert!(rows.windows(2).all(|w| w[0].p < w[1].p));
        let first = rows[0].report.as_ref().unwrap();
        assert!((first.c2_s1s2 - 24.0 / 49.0).abs() < 1e-12);
        assert!(first.residual_pair.abs() < 1e-9);
        let last = rows[100].report.as_ref().unwrap();
        assert!((last.c2_e1e2 - 24.0 / 49.0).abs() < 1e-12);
        assert!(last.c2_s1s2.abs() < 1e-12);
        let c2: Vec<f64> = rows.iter().map(|r| r.report.as_ref().unwrap().c2_s1s2).collect();
        assert!(c2.windows(2).all(|w| w[1] <= w[0] + 1e-15));

        let th = thresholds(&rows, THRESHOLD_TOL).unwrap();
        let esd = th.esd.unwrap();
        let esb = th.esb.unwrap();
        assert!((esd - 1.0 / 6f64.sqrt()).abs() < 0.01);
        assert!((esb - (1.0 - 1.0 / 6f64.sqrt())).abs() < 0.01);
    }

    #[test]
    fn bell_state_dies_only_at_the_end() {
        let cfg = SweepConfig::pure_family(0.5, GridSpec::uniform(101));
        let th = thresholds(&sweep(&cfg).unwrap(), THRESHOLD_TOL).unwrap();
        assert!(th.esd.unwrap() > 0.99);
    }

    #[test]
    fn csv_and_plotdata() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sweep(&SweepConfig::pure_family(1.0 / 7.0, GridSpec::Points { points: vec![0.2, 0.7] })).unwrap();
        let path = dir.path().join("rows.csv");
        emit_csv(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(&CSV_COLUMNS.join(",")));
        emit_csv(&rows, &dir.path().join("again.csv")).unwrap();
        assert_eq!(text, fs::read_to_string(dir.path().join("again.csv")).unwrap());

        let fig4 = dir.path().join("fig4.csv");
        emit_plotdata(&rows, Figure::Fig4, &fig4).unwrap();
        let text = fs::read_to_string(&fig4).unwrap();
        assert!(text.starts_with("p,dicke_fidelity,witness_threshold"));
        assert!(text.lines().nth(1).unwrap().ends_with("0.666666666667"));
        assert!("fig5".parse::<Figure>().is_err());
    }

    #[test]
    fn run_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig::pure_family(0.3, GridSpec::uniform(5));
        run_sweep(&cfg, dir.path()).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_sha256"], cfg.hash());
        assert_eq!(manifest["versions"]["qredist"], env!("CARGO_PKG_VERSION"));
        for f in ["sweep.csv", "fig2.csv", "fig3.csv", "fig4.csv", "thresholds.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn failing_rows_are_flagged_not_fatal() {
        // Noisy tomography with a tiny iteration budget still yields rows.
        let mut cfg = SweepConfig::pure_family(0.3, GridSpec::Points { points: vec![0.3] });
        cfg.tomography = TomographyConfig {
            enabled: true,
            shots: 500,
            seed: 4,
            max_iter: 3,
            tol: 0.0,
        };
        let rows = sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!(r.seed.is_some());
        assert!(r.report.as_ref().map(|t| t.flags.iter().any(|f| f == "mle_not_converged")).unwrap_or(r.error.is_some()));
        assert!((cfg.threshold_tol() - 3.0 / 500f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invariants_hold_on_pure_family() {
        let report = check_invariants(&canonical(21)).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
    }
}
