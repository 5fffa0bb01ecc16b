//! Quantum-state primitives on registers of up to four qubits.
//!
//! Basis indices are big-endian in slot order: slot 0 is the most significant
//! bit. For the four-qubit register the slots are `(S1, S2, E1, E2)`, so the
//! ket `|1100⟩` lives at index 12.

pub mod linalg;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use linalg::{
    c, eig_hermitian, hermitize, kron, CMatrix, CVector, HermitianEigen, C64, EIGEN_CLAMP,
    HERMITIAN_TOL,
};

pub const MAX_QUBITS: usize = 4;
pub const NORM_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;

/// Named subsystems of the four-qubit system+environment register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubsystemLabel {
    S1,
    S2,
    E1,
    E2,
}

/// Label ↔ slot table. Fixed for the whole program.
pub const LABEL_SLOTS: [(SubsystemLabel, usize); 4] = [
    (SubsystemLabel::S1, 0),
    (SubsystemLabel::S2, 1),
    (SubsystemLabel::E1, 2),
    (SubsystemLabel::E2, 3),
];

impl SubsystemLabel {
    pub const ALL: [SubsystemLabel; 4] = [Self::S1, Self::S2, Self::E1, Self::E2];

    pub fn slot(self) -> usize {
        LABEL_SLOTS.iter().find(|(l, _)| *l == self).unwrap().1
    }

    pub fn from_slot(slot: usize) -> Option<Self> {
        LABEL_SLOTS.iter().find(|(_, s)| *s == slot).map(|(l, _)| *l)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::E1 => "E1",
            Self::E2 => "E2",
        }
    }

    /// The system/environment partner: S1↔E1, S2↔E2.
    pub fn partner(self) -> Self {
        match self {
            Self::S1 => Self::E1,
            Self::E1 => Self::S1,
            Self::S2 => Self::E2,
            Self::E2 => Self::S2,
        }
    }
}

impl fmt::Display for SubsystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubsystemLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::arg(format!("unknown subsystem label `{s}`")))
    }
}

pub fn slots_of(labels: &[SubsystemLabel]) -> Vec<usize> {
    labels.iter().map(|l| l.slot()).collect()
}

/// A bipartition of the slots of an `n_qubits` register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    n_qubits: usize,
    side_a: Vec<usize>,
    side_b: Vec<usize>,
}

impl Partition {
    pub fn new(n_qubits: usize, side_a: &[usize], side_b: &[usize]) -> Result<Self> {
        check_qubits(n_qubits)?;
        let a: BTreeSet<usize> = side_a.iter().copied().collect();
        let b: BTreeSet<usize> = side_b.iter().copied().collect();
        if a.is_empty() || b.is_empty() {
            return Err(Error::arg("partition sides must be non-empty"));
        }
        if a.len() != side_a.len() || b.len() != side_b.len() {
            return Err(Error::arg("partition side lists a slot twice"));
        }
        if !a.is_disjoint(&b) {
            return Err(Error::arg("partition sides overlap"));
        }
        if a.len() + b.len() != n_qubits || a.iter().chain(&b).any(|&s| s >= n_qubits) {
            return Err(Error::arg(format!(
                "partition {side_a:?}|{side_b:?} does not cover the {n_qubits}-qubit register"
            )));
        }
        Ok(Self {
            n_qubits,
            side_a: a.into_iter().collect(),
            side_b: b.into_iter().collect(),
        })
    }

    /// `side_a` against its complement.
    pub fn split(n_qubits: usize, side_a: &[usize]) -> Result<Self> {
        let side_b: Vec<usize> = (0..n_qubits).filter(|s| !side_a.contains(s)).collect();
        Self::new(n_qubits, side_a, &side_b)
    }

    pub fn from_labels(side_a: &[SubsystemLabel], side_b: &[SubsystemLabel]) -> Result<Self> {
        Self::new(MAX_QUBITS, &slots_of(side_a), &slots_of(side_b))
    }

    /// `labels` against the rest of the four-qubit register.
    pub fn labels_vs_rest(labels: &[SubsystemLabel]) -> Result<Self> {
        Self::split(MAX_QUBITS, &slots_of(labels))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn side_a(&self) -> &[usize] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[usize] {
        &self.side_b
    }

    pub(crate) fn mask_a(&self) -> usize {
        self.side_a
            .iter()
            .fold(0, |m, &s| m | bit_of(self.n_qubits, s))
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::arg(format!(
            "register of {n} qubits unsupported (1..={MAX_QUBITS})"
        )));
    }
    Ok(())
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::arg(format!("dimension {dim} is not a power of two ≥ 2")));
    }
    let n = dim.trailing_zeros() as usize;
    check_qubits(n)?;
    Ok(n)
}

/// Bit mask of `slot` inside a basis index of an `n`-qubit register.
pub fn bit_of(n_qubits: usize, slot: usize) -> usize {
    1 << (n_qubits - 1 - slot)
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: CVector,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())?;
        let amps = CVector::from_vec(amps);
        let norm2 = amps.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::arg(format!(
                "state has squared norm {norm2:.12}, expected 1"
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Build from an arbitrary non-zero vector, rescaling to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())?;
        let mut amps = CVector::from_vec(amps);
        let norm = amps.norm();
        if norm < 1e-14 {
            return Err(Error::arg("cannot normalize the zero vector"));
        }
        amps.unscale_mut(norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_vector(amps: CVector) -> Result<Self> {
        Self::new(amps.as_slice().to_vec())
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(Error::arg(format!("basis index {index} out of range")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self::new(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits,
            m: &self.amps * self.amps.adjoint(),
        }
    }

    /// Reduced density matrix on `keep` (slot order preserved).
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let keep = validate_keep(self.n_qubits, keep)?;
        let traced: Vec<usize> = (0..self.n_qubits).filter(|s| !keep.contains(s)).collect();
        let n = self.n_qubits;
        let dk = 1 << keep.len();
        let dt = 1 << traced.len();
        // psi as a dk × dt matrix, then ρ = M M†
        let mut mat = CMatrix::zeros(dk, dt);
        for i in 0..dk {
            for t in 0..dt {
                let idx = compose(n, &keep, i, &traced, t);
                mat[(i, t)] = self.amps[idx];
            }
        }
        Ok(DensityMatrix {
            n_qubits: keep.len(),
            m: &mat * mat.adjoint(),
        })
    }

    pub fn reduced_labels(&self, keep: &[SubsystemLabel]) -> Result<DensityMatrix> {
        self.require_register()?;
        self.reduced(&slots_of(keep))
    }

    pub fn apply(&self, u: &CMatrix) -> Result<PureState> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::arg("operator dimension does not match state"));
        }
        PureState::normalized((u * &self.amps).as_slice().to_vec())
    }

    fn require_register(&self) -> Result<()> {
        if self.n_qubits != MAX_QUBITS {
            return Err(Error::arg(format!(
                "labels address the 4-qubit register, state has {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::arg("density matrix must be square"));
        }
        let n_qubits = qubits_for_dim(m.nrows())?;
        let dev = linalg::hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::arg(format!(
                "density matrix not Hermitian (max deviation {dev:.3e})"
            )));
        }
        let tr = linalg::trace_real(&m);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::arg(format!("density matrix trace {tr:.12}, expected 1")));
        }
        let m = hermitize(&m);
        let lowest = *linalg::eig_hermitian_unchecked(&m).values.last().unwrap();
        if lowest < -EIGEN_CLAMP {
            return Err(Error::arg(format!(
                "density matrix has negative eigenvalue {lowest:.3e}"
            )));
        }
        Ok(Self { n_qubits, m })
    }

    /// Skip validation. Callers guarantee the invariants by construction.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        let n_qubits = m.nrows().trailing_zeros() as usize;
        Self { n_qubits, m }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1 << n_qubits;
        Ok(Self {
            n_qubits,
            m: linalg::identity(d).unscale(d as f64),
        })
    }

    /// Convex combination `Σ w_k ρ_k`; weights must sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::arg("empty mixture"))?.1;
        let mut m = CMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if rho.dim() != first.dim() || *w < 0.0 {
                return Err(Error::arg("mixture components must share dimension and have w ≥ 0"));
            }
            m += rho.m.scale(*w);
        }
        Self::new(m)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        check_qubits(self.n_qubits + other.n_qubits)?;
        Ok(DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            m: kron(&self.m, &other.m),
        })
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &CMatrix) -> Result<DensityMatrix> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::arg("operator dimension does not match state"));
        }
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            m: hermitize(&(u * &self.m * u.adjoint())),
        })
    }

    pub fn eigen(&self) -> HermitianEigen {
        linalg::eig_hermitian_unchecked(&self.m)
    }

    /// Eigenvalues, descending, with round-off negatives clamped to zero.
    pub fn spectrum(&self) -> Vec<f64> {
        self.eigen().values.into_iter().map(|v| v.max(0.0)).collect()
    }
}

fn validate_keep(n_qubits: usize, keep: &[usize]) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::arg("partial trace: keep set is empty"));
    }
    let set: BTreeSet<usize> = keep.iter().copied().collect();
    if set.len() != keep.len() {
        return Err(Error::arg(format!("partial trace: duplicate slot in {keep:?}")));
    }
    if let Some(bad) = set.iter().find(|&&s| s >= n_qubits) {
        return Err(Error::arg(format!(
            "partial trace: slot {bad} not present in a {n_qubits}-qubit state"
        )));
    }
    Ok(set.into_iter().collect())
}

/// Full-register index from a sub-index `i` over `keep` slots and `t` over
/// `traced` slots. Both sub-indices are big-endian in their slot lists.
pub(crate) fn compose(n: usize, keep: &[usize], i: usize, traced: &[usize], t: usize) -> usize {
    let mut idx = 0;
    for (pos, &s) in keep.iter().enumerate() {
        if (i >> (keep.len() - 1 - pos)) & 1 == 1 {
            idx |= bit_of(n, s);
        }
    }
    for (pos, &s) in traced.iter().enumerate() {
        if (t >> (traced.len() - 1 - pos)) & 1 == 1 {
            idx |= bit_of(n, s);
        }
    }
    idx
}

/// Reduced density matrix over the `keep` slots, in ascending slot order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let keep = validate_keep(rho.n_qubits, keep)?;
    let n = rho.n_qubits;
    let traced: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
    let dk = 1 << keep.len();
    let dt = 1 << traced.len();
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += rho.m[(compose(n, &keep, i, &traced, t), compose(n, &keep, j, &traced, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix {
        n_qubits: keep.len(),
        m: out,
    })
}

pub fn partial_trace_labels(rho: &DensityMatrix, keep: &[SubsystemLabel]) -> Result<DensityMatrix> {
    if rho.n_qubits != MAX_QUBITS {
        return Err(Error::arg("labels address the 4-qubit register"));
    }
    partial_trace(rho, &slots_of(keep))
}

/// `tr ρ²`, clamped to `[0, 1]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
    rho.m.iter().map(|z| z.norm_sqr()).sum::<f64>().clamp(0.0, 1.0)
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::arg(format!(
            "fidelity: density matrix dim {} vs state dim {}",
            rho.dim(),
            psi.dim()
        )));
    }
    let v = psi.amps.dotc(&(&rho.m * &psi.amps));
    Ok(v.re.clamp(0.0, 1.0))
}

/// Number of eigenvalues above `eps` times the largest one.
pub fn numerical_rank(rho: &DensityMatrix, eps: f64) -> usize {
    let spec = rho.spectrum();
    let top = spec[0];
    spec.iter().filter(|&&v| v > eps * top).count()
}

/// Wire format shared by pure states (vectors) and density matrices
/// (row-major matrices).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateJson {
    pub n_qubits: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl StateJson {
    fn parts(&self) -> Result<Vec<C64>> {
        if self.re.len() != self.im.len() {
            return Err(Error::arg("json state: `re` and `im` lengths differ"));
        }
        Ok(self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)).collect())
    }
}

impl From<&PureState> for StateJson {
    fn from(s: &PureState) -> Self {
        StateJson {
            n_qubits: s.n_qubits,
            re: s.amps.iter().map(|z| z.re).collect(),
            im: s.amps.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<StateJson> for PureState {
    type Error = Error;

    fn try_from(j: StateJson) -> Result<Self> {
        let s = PureState::new(j.parts()?)?;
        if s.n_qubits != j.n_qubits {
            return Err(Error::arg("json state: n_qubits disagrees with vector length"));
        }
        Ok(s)
    }
}

impl From<&DensityMatrix> for StateJson {
    fn from(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(rho.m[(i, j)].re);
                im.push(rho.m[(i, j)].im);
            }
        }
        StateJson {
            n_qubits: rho.n_qubits,
            re,
            im,
        }
    }
}

impl TryFrom<StateJson> for DensityMatrix {
    type Error = Error;

    fn try_from(j: StateJson) -> Result<Self> {
        let parts = j.parts()?;
        let d = 1usize << j.n_qubits.min(MAX_QUBITS);
        if parts.len() != d * d {
            return Err(Error::arg(format!(
                "json density matrix: expected {} entries for {} qubits, got {}",
                d * d,
                j.n_qubits,
                parts.len()
            )));
        }
        let m = CMatrix::from_row_slice(d, d, &parts);
        // Keep the stored entries verbatim so a write/read cycle is bit-exact.
        if !m.is_square() || linalg::hermitian_deviation(&m) > HERMITIAN_TOL {
            return Err(Error::arg("json density matrix is not Hermitian"));
        }
        let checked = DensityMatrix::new(m.clone())?;
        Ok(DensityMatrix {
            n_qubits: checked.n_qubits,
            m,
        })
    }
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = StateJson::deserialize(d)?;
        PureState::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = StateJson::deserialize(d)?;
        DensityMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

pub fn read_density_json(path: &std::path::Path) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_density_json(path: &std::path::Path, rho: &DensityMatrix) -> Result<()> {
    let text = serde_json::to_string_pretty(rho)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
