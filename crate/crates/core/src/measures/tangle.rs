//! Bipartite tangles `C²_{A|B}` across an arbitrary cut.
//!
//! For pure states the tangle is `2(1 − tr ρ_A²)`. Mixed states need the
//! convex roof over all pure-state decompositions, which is not computed
//! here; instead two estimators are provided, both exact on pure states and
//! both lower bounds on the roof:
//!
//! * [`tangle_lower_bound`]: `2[tr ρ² − tr ρ_A²]`, clamped at zero.
//! * [`tangle_quasipure`]: the quasi-pure approximation, which replaces the
//!   two-copy concurrence operator by its rank-one projection on the
//!   dominant eigenvector of `ρ` and then solves the resulting convex roof
//!   in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::linalg::eig_hermitian_unchecked;
use crate::qcore::{purity, CMatrix, DensityMatrix, Partition, PureState, C64};

/// Estimator used for a mixed-state tangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TangleEstimator {
    /// Exact pure-state tangle.
    #[serde(rename = "pure")]
    Pure,
    #[serde(rename = "lb")]
    LowerBound,
    #[serde(rename = "qp")]
    QuasiPure,
}

impl TangleEstimator {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pure => "pure",
            Self::LowerBound => "lb",
            Self::QuasiPure => "qp",
        }
    }
}

impl std::str::FromStr for TangleEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lb" => Ok(Self::LowerBound),
            "qp" => Ok(Self::QuasiPure),
            "pure" => Ok(Self::Pure),
            _ => Err(Error::arg(format!("unknown estimator `{s}` (expected lb or qp)"))),
        }
    }
}

fn check_partition(n_qubits: usize, part: &Partition) -> Result<()> {
    if part.n_qubits() != n_qubits {
        return Err(Error::arg(format!(
            "partition addresses {} qubits, state has {n_qubits}",
            part.n_qubits()
        )));
    }
    Ok(())
}

/// `2(1 − tr ρ_A²)` for a pure state.
pub fn tangle_pure(psi: &PureState, part: &Partition) -> Result<f64> {
    check_partition(psi.n_qubits(), part)?;
    let rho_a = psi.reduced(part.side_a())?;
    Ok((2.0 * (1.0 - purity(&rho_a))).max(0.0))
}

/// `max(0, 2[tr ρ² − tr ρ_A²])`.
pub fn tangle_lower_bound(rho: &DensityMatrix, part: &Partition) -> Result<f64> {
    Ok(tangle_lower_bound_raw(rho, part)?.max(0.0))
}

/// Unclamped value of [`tangle_lower_bound`].
pub fn tangle_lower_bound_raw(rho: &DensityMatrix, part: &Partition) -> Result<f64> {
    check_partition(rho.n_qubits(), part)?;
    let rho_a = crate::qcore::partial_trace(rho, part.side_a())?;
    Ok(2.0 * (purity(rho) - purity(&rho_a)))
}

/// Eigenvalues below this (relative to the trace of one) are dropped from
/// the quasi-pure decomposition.
const QP_SUPPORT_TOL: f64 = 1e-12;

/// Quasi-pure estimate of the tangle of `rho` across `part`.
pub fn tangle_quasipure(rho: &DensityMatrix, part: &Partition) -> Result<f64> {
    check_partition(rho.n_qubits(), part)?;
    let eig = eig_hermitian_unchecked(rho.matrix());
    let dim = rho.dim();
    let mask_a = part.mask_a();

    let lead = eig.vector(0);
    let chi = match two_copy_projection(lead.as_slice(), mask_a, dim) {
        Some(chi) => chi,
        // dominant eigenvector is a product across the cut
        None => return Ok(0.0),
    };

    let support: Vec<usize> = (0..dim)
        .filter(|&k| eig.values[k] > QP_SUPPORT_TOL)
        .collect();
    let r = support.len().max(1);
    let mut phi = CMatrix::zeros(dim, r);
    for (col, &k) in support.iter().enumerate() {
        let w = eig.values[k].max(0.0).sqrt();
        phi.set_column(col, &eig.vectors.column(k).scale(w));
    }
    // T_jk = Σ_xy conj(χ(x,y)) φ_j(x) φ_k(y)
    let t = phi.transpose() * chi.map(|z| z.conj()) * &phi;
    let mut s: Vec<f64> = t.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let c_qp = (s[0] - s[1..].iter().sum::<f64>()).max(0.0);
    Ok(c_qp * c_qp)
}

/// `A|ψψ⟩ / √⟨ψψ|A|ψψ⟩` as a `dim × dim` matrix over the two copies, where
/// `A = 4 P₋(A) ⊗ P₋(B)` is the two-copy concurrence operator. `None` when
/// `ψ` is a product across the cut.
fn two_copy_projection(psi: &[C64], mask_a: usize, dim: usize) -> Option<CMatrix> {
    let mask_b = (dim - 1) & !mask_a;
    let pair = |x: usize, y: usize| psi[x] * psi[y];
    let mut a_phi = CMatrix::zeros(dim, dim);
    let mut norm2 = 0.0;
    for x in 0..dim {
        for y in 0..dim {
            // swap the A-parts, resp. the B-parts, of the two copies
            let (xa, ya) = ((x & mask_b) | (y & mask_a), (y & mask_b) | (x & mask_a));
            let (xb, yb) = ((x & mask_a) | (y & mask_b), (y & mask_a) | (x & mask_b));
            let v = pair(x, y) - pair(xa, ya) - pair(xb, yb) + pair(y, x);
            norm2 += (pair(x, y).conj() * v).re;
            a_phi[(x, y)] = v;
        }
    }
    if norm2 < 1e-14 {
        return None;
    }
    Some(a_phi.unscale(norm2.sqrt()))
}
