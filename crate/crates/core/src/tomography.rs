//! Simulated four-qubit state tomography.
//!
//! Each of the 256 settings projects every qubit onto one of `|0⟩`, `|1⟩`,
//! `|+⟩`, `|+i⟩` and records how many of `shots` trials click. Counts are
//! drawn binomially per setting. Reconstruction is either a direct linear
//! inversion of the Born rule or a maximum-likelihood fit with the diluted
//! `RρR` iteration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::linalg::{eig_hermitian_unchecked, hermitize, identity};
use crate::qcore::{c, CMatrix, CVector, DensityMatrix, C64, HERMITIAN_TOL};

pub const N_QUBITS: usize = 4;
pub const DIM: usize = 16;
pub const N_SETTINGS: usize = 256;

/// Single-qubit projector selector. The discriminant is the base-4 digit
/// used in setting ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectorKind {
    /// `|0⟩`
    #[serde(rename = "Z")]
    Zero = 0,
    /// `|1⟩`
    #[serde(rename = "Z'")]
    One = 1,
    /// `|+⟩ = (|0⟩ + |1⟩)/√2`
    #[serde(rename = "X")]
    Plus = 2,
    /// `|+i⟩ = (|0⟩ + i|1⟩)/√2`
    #[serde(rename = "Y")]
    PlusI = 3,
}

impl ProjectorKind {
    pub const ALL: [ProjectorKind; 4] = [Self::Zero, Self::One, Self::Plus, Self::PlusI];

    pub fn from_digit(d: usize) -> Self {
        Self::ALL[d]
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Zero => "Z",
            Self::One => "Z'",
            Self::Plus => "X",
            Self::PlusI => "Y",
        }
    }

    pub fn ket(self) -> CVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = match self {
            Self::Zero => [c(1.0, 0.0), c(0.0, 0.0)],
            Self::One => [c(0.0, 0.0), c(1.0, 0.0)],
            Self::Plus => [c(h, 0.0), c(h, 0.0)],
            Self::PlusI => [c(h, 0.0), c(0.0, h)],
        };
        CVector::from_row_slice(&v)
    }
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub id: usize,
    /// Per-qubit selector in slot order.
    pub selectors: [ProjectorKind; N_QUBITS],
}

impl MeasurementSetting {
    pub fn from_id(id: usize) -> Result<Self> {
        if id >= N_SETTINGS {
            return Err(Error::arg(format!("setting id {id} out of range 0..256")));
        }
        let mut selectors = [ProjectorKind::Zero; N_QUBITS];
        for (q, sel) in selectors.iter_mut().enumerate() {
            *sel = ProjectorKind::from_digit((id >> (2 * (N_QUBITS - 1 - q))) & 3);
        }
        Ok(Self { id, selectors })
    }
}

/// All 256 settings ordered by id. Qubit 0 is the most significant base-4 digit.
pub fn enumerate_settings() -> Vec<MeasurementSetting> {
    (0..N_SETTINGS)
        .map(|id| MeasurementSetting::from_id(id).expect("id in range"))
        .collect()
}

/// Single-qubit kets used for each selector on each qubit. The canonical
/// frame uses the same four kets everywhere; a rotated frame applies a
/// local unitary per qubit.
#[derive(Clone, Debug)]
pub struct ProjectorFrame {
    kets: [[CVector; 4]; N_QUBITS],
}

impl Default for ProjectorFrame {
    fn default() -> Self {
        let row = ProjectorKind::ALL.map(|k| k.ket());
        Self {
            kets: std::array::from_fn(|_| row.clone()),
        }
    }
}

impl ProjectorFrame {
    /// Frame whose qubit-`q` kets are `u[q]` applied to this frame's kets.
    pub fn rotated(&self, u: &[CMatrix; N_QUBITS]) -> Self {
        Self {
            kets: std::array::from_fn(|q| std::array::from_fn(|k| &u[q] * &self.kets[q][k])),
        }
    }

    pub fn ket(&self, qubit: usize, kind: ProjectorKind) -> &CVector {
        &self.kets[qubit][kind as usize]
    }

    /// Product vector `|v_s⟩` with `Π_s = |v_s⟩⟨v_s|`.
    pub fn projector_vector(&self, s: &MeasurementSetting) -> CVector {
        let mut v = CVector::from_element(1, c(1.0, 0.0));
        for (q, kind) in s.selectors.iter().enumerate() {
            v = v.kronecker(self.ket(q, *kind));
        }
        v
    }

    /// 256 × 16 matrix whose row `s` is `⟨v_s|`.
    fn bra_rows(&self) -> CMatrix {
        let mut rows = CMatrix::zeros(N_SETTINGS, DIM);
        for s in enumerate_settings() {
            let v = self.projector_vector(&s);
            for k in 0..DIM {
                rows[(s.id, k)] = v[k].conj();
            }
        }
        rows
    }

    /// Operators `D_k` on qubit `q` with `tr(Π_j D_k) = δ_jk`.
    fn dual_operators(&self, q: usize) -> Result<[CMatrix; 4]> {
        // row j: vec(Π_jᵀ), so row · vec(D) = tr(Π_j D)
        let mut f = CMatrix::zeros(4, 4);
        for j in 0..4 {
            let v = &self.kets[q][j];
            let proj = v * v.adjoint();
            for a in 0..2 {
                for b in 0..2 {
                    f[(j, 2 * a + b)] = proj[(b, a)];
                }
            }
        }
        let inv = f
            .try_inverse()
            .ok_or_else(|| Error::arg(format!("projector frame on qubit {q} is not informationally complete")))?;
        Ok(std::array::from_fn(|k| {
            let col = inv.column(k);
            CMatrix::from_fn(2, 2, |a, b| col[2 * a + b])
        }))
    }
}

/// `tr(ρ Π_s)` in the canonical frame, clamped to `[0, 1]`.
pub fn born_probability(rho: &DensityMatrix, s: &MeasurementSetting) -> f64 {
    born_probability_in(rho, s, &ProjectorFrame::default())
}

pub fn born_probability_in(rho: &DensityMatrix, s: &MeasurementSetting, frame: &ProjectorFrame) -> f64 {
    let v = frame.projector_vector(s);
    v.dotc(&(rho.matrix() * &v)).re.clamp(0.0, 1.0)
}

/// Born probabilities of all 256 settings, indexed by id.
pub fn probabilities(rho: &DensityMatrix, frame: &ProjectorFrame) -> Vec<f64> {
    raw_probabilities(rho.matrix(), &frame.bra_rows())
        .into_iter()
        .map(|p| p.clamp(0.0, 1.0))
        .collect()
}

fn raw_probabilities(rho: &CMatrix, bras: &CMatrix) -> Vec<f64> {
    let w = bras * rho;
    (0..N_SETTINGS)
        .map(|s| {
            (0..DIM)
                .map(|k| w[(s, k)] * bras[(s, k)].conj())
                .sum::<C64>()
                .re
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_id: usize,
    pub shots: u64,
    pub count: u64,
}

/// Binomial counts for every setting; reproducible for a fixed `seed`.
pub fn simulate_counts(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<Vec<CountRecord>> {
    if shots == 0 {
        return Err(Error::arg("shots must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    probabilities(rho, &ProjectorFrame::default())
        .into_iter()
        .enumerate()
        .map(|(setting_id, p)| {
            let dist = Binomial::new(shots, p)
                .map_err(|e| Error::arg(format!("binomial({shots}, {p}): {e}")))?;
            Ok(CountRecord {
                setting_id,
                shots,
                count: dist.sample(&mut rng),
            })
        })
        .collect()
}

/// Order records by setting id, rejecting gaps, duplicates and bad counts.
fn index_records(records: &[CountRecord]) -> Result<Vec<CountRecord>> {
    let mut by_id: BTreeMap<usize, CountRecord> = BTreeMap::new();
    for r in records {
        if r.setting_id >= N_SETTINGS {
            return Err(Error::arg(format!("unknown setting id {}", r.setting_id)));
        }
        if r.shots == 0 || r.count > r.shots {
            return Err(Error::arg(format!(
                "setting {}: count {} with {} shots",
                r.setting_id, r.count, r.shots
            )));
        }
        if by_id.insert(r.setting_id, *r).is_some() {
            return Err(Error::arg(format!("setting {} recorded twice", r.setting_id)));
        }
    }
    let missing: Vec<usize> = (0..N_SETTINGS).filter(|id| !by_id.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(Error::arg(format!("missing settings: {missing:?}")));
    }
    Ok(by_id.into_values().collect())
}

/// Invert the Born rule for the canonical frame. The 256 product projectors
/// form a basis of the 4-qubit operator space, so the least-squares solution
/// is the exact dual-frame expansion `ρ = Σ_s f_s ⊗_q D_{s_q}`. Output is
/// Hermitian with unit trace but may have negative eigenvalues.
pub fn linear_inversion(records: &[CountRecord]) -> Result<CMatrix> {
    linear_inversion_in(records, &ProjectorFrame::default())
}

pub fn linear_inversion_in(records: &[CountRecord], frame: &ProjectorFrame) -> Result<CMatrix> {
    let recs = index_records(records)?;
    let freqs: Vec<f64> = recs.iter().map(|r| r.count as f64 / r.shots as f64).collect();
    invert_frequencies(&freqs, frame)
}

/// Linear inversion from exact (or estimated) setting probabilities.
pub fn invert_frequencies(freqs: &[f64], frame: &ProjectorFrame) -> Result<CMatrix> {
    if freqs.len() != N_SETTINGS {
        return Err(Error::arg(format!("expected 256 frequencies, got {}", freqs.len())));
    }
    let duals: Vec<[CMatrix; 4]> = (0..N_QUBITS)
        .map(|q| frame.dual_operators(q))
        .collect::<Result<_>>()?;
    let mut m = CMatrix::zeros(DIM, DIM);
    for s in enumerate_settings() {
        let f = freqs[s.id];
        if f == 0.0 {
            continue;
        }
        let mut op = CMatrix::from_element(1, 1, c(f, 0.0));
        for (q, kind) in s.selectors.iter().enumerate() {
            op = op.kronecker(&duals[q][*kind as usize]);
        }
        m += op;
    }
    let m = hermitize(&m);
    let tr = m.trace().re;
    if tr.abs() < 1e-300 {
        return Err(Error::arg("linear inversion produced a traceless matrix"));
    }
    Ok(m.unscale(tr))
}

/// Nearest (Frobenius) unit-trace PSD matrix: eigenvalues are projected onto
/// the probability simplex, eigenvectors are kept.
pub fn project_physical(m: &CMatrix) -> Result<DensityMatrix> {
    let dev = crate::qcore::linalg::hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::arg(format!("project_physical: input not Hermitian ({dev:.3e})")));
    }
    let eig = eig_hermitian_unchecked(&hermitize(m));
    let clipped = simplex_projection(&eig.values);
    let n = clipped.len();
    let mut d = CMatrix::zeros(n, n);
    for (k, &v) in clipped.iter().enumerate() {
        d[(k, k)] = c(v, 0.0);
    }
    let rho = hermitize(&(&eig.vectors * d * eig.vectors.adjoint()));
    Ok(DensityMatrix::from_matrix_unchecked(rho))
}

/// Euclidean projection of descending `values` onto `{x ≥ 0, Σx = 1}`.
fn simplex_projection(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut shift = 0.0;
    for (k, &v) in values.iter().enumerate() {
        acc += v;
        let candidate = (acc - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Outcome of [`mle_reconstruct`].
#[derive(Clone, Debug)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after each accepted iteration, starting with the initial iterate.
    pub history: Vec<f64>,
    /// `true` when the gain dropped below `tol` before `max_iter`.
    pub converged: bool,
}

const PROB_FLOOR: f64 = 1e-300;

/// Cap on the step length `t` after repeated accepted iterations. Any `t`
/// keeps `R_t ρ R_t†` positive; over-relaxing past the plain `RρR` step
/// cuts the iteration count for near-pure states roughly tenfold.
pub const MLE_MAX_STEP: f64 = 8.0;

fn log_likelihood(probs: &[f64], recs: &[CountRecord]) -> f64 {
    probs
        .iter()
        .zip(recs)
        .map(|(&p, r)| {
            let p = p.clamp(PROB_FLOOR, 1.0 - 1e-16);
            let hit = if r.count > 0 { r.count as f64 * p.ln() } else { 0.0 };
            let miss = r.shots - r.count;
            let miss = if miss > 0 { miss as f64 * (1.0 - p).ln() } else { 0.0 };
            hit + miss
        })
        .sum()
}

/// Maximum-likelihood reconstruction under the per-setting binomial model.
///
/// Iterates `ρ ← R_t ρ R_t / tr(·)` from `I/16`, where `R` is the normalized
/// likelihood gradient operator and `R_t = (1 − t)𝟙 + tR`. Starting from
/// `t = 1` (plain `RρR`), `t` is halved until the likelihood increases and
/// doubled (up to [`MLE_MAX_STEP`]) after each accepted step. Stops when
/// the gain drops below `tol` (converged) or after `max_iter` iterations (a
/// warning is logged).
pub fn mle_reconstruct(records: &[CountRecord], max_iter: usize, tol: f64) -> Result<MleResult> {
    mle_reconstruct_in(records, max_iter, tol, &ProjectorFrame::default())
}

pub fn mle_reconstruct_in(
    records: &[CountRecord],
    max_iter: usize,
    tol: f64,
    frame: &ProjectorFrame,
) -> Result<MleResult> {
    let recs = index_records(records)?;
    let bras = frame.bra_rows();
    let total_shots: f64 = recs.iter().map(|r| r.shots as f64).sum();
    let id = identity(DIM);

    let mut rho = id.unscale(DIM as f64);
    let mut probs = raw_probabilities(&rho, &bras);
    let mut ll = log_likelihood(&probs, &recs);
    let mut history = vec![ll];
    let mut converged = false;
    let mut t = 1.0;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        // R = Σ_s [n/p Π_s + (N−n)/(1−p)(1 − Π_s)] / Σ N
        let mut hit_w = Vec::with_capacity(N_SETTINGS);
        let mut miss_total = 0.0;
        for (p, r) in probs.iter().zip(&recs) {
            let p = p.clamp(PROB_FLOOR, 1.0 - 1e-16);
            let miss = (r.shots - r.count) as f64 / (1.0 - p);
            hit_w.push(r.count as f64 / p - miss);
            miss_total += miss;
        }
        let weighted = CMatrix::from_fn(N_SETTINGS, DIM, |s, k| bras[(s, k)] * hit_w[s]);
        let r_op = (bras.adjoint() * weighted + id.scale(miss_total)).unscale(total_shots);

        let mut accepted = None;
        while t > 1e-10 {
            let step = id.scale(1.0 - t) + r_op.scale(t);
            let cand = hermitize(&(&step * &rho * step.adjoint()));
            let cand = cand.unscale(cand.trace().re);
            let cand_probs = raw_probabilities(&cand, &bras);
            let cand_ll = log_likelihood(&cand_probs, &recs);
            if cand_ll > ll {
                accepted = Some((cand, cand_probs, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_probs, cand_ll)) = accepted else {
            converged = true;
            break;
        };
        let gain = cand_ll - ll;
        t = (2.0 * t).min(MLE_MAX_STEP);
        rho = cand;
        probs = cand_probs;
        ll = cand_ll;
        history.push(ll);
        if gain < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("mle_reconstruct: no convergence after {max_iter} iterations (log-likelihood {ll:.6})");
    }
    Ok(MleResult {
        rho: DensityMatrix::from_matrix_unchecked(rho),
        iterations,
        log_likelihood: ll,
        history,
        converged,
    })
}

pub fn write_counts_csv(path: &Path, records: &[CountRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_counts_csv(path: &Path) -> Result<Vec<CountRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

#[derive(Serialize)]
struct SettingDoc {
    id: usize,
    selectors: [ProjectorKind; N_QUBITS],
    /// Per-qubit ket as `[[re0, im0], [re1, im1]]`.
    kets: Vec<[[f64; 2]; 2]>,
}

#[derive(Serialize)]
struct SettingsDoc<'a> {
    description: &'a str,
    qubit_order: [&'a str; N_QUBITS],
    settings: Vec<SettingDoc>,
}

/// Companion description of the projector behind every setting id.
pub fn settings_json(frame: &ProjectorFrame) -> Result<String> {
    let settings = enumerate_settings()
        .into_iter()
        .map(|s| SettingDoc {
            id: s.id,
            selectors: s.selectors,
            kets: s
                .selectors
                .iter()
                .enumerate()
                .map(|(q, k)| {
                    let v = frame.ket(q, *k);
                    [[v[0].re, v[0].im], [v[1].re, v[1].im]]
                })
                .collect(),
        })
        .collect();
    let doc = SettingsDoc {
        description: "rank-1 product projector per setting; count = clicks of that projector out of shots",
        qubit_order: ["S1", "S2", "E1", "E2"],
        settings,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}
