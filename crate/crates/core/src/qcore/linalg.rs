//! Small dense complex linear algebra used throughout the crate.
//!
//! Everything here operates on matrices of dimension at most 16 (four qubits),
//! so plain `nalgebra::DMatrix` storage is used with no attempt at blocking.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Maximum element deviation tolerated when checking Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Eigenvalues in `[-EIGEN_CLAMP, 0)` are treated as round-off and clamped to zero.
pub const EIGEN_CLAMP: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace_real(m: &CMatrix) -> f64 {
    m.trace().re
}

/// Spectral decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Column `k` of `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut d = CMatrix::zeros(n, n);
        for (k, &v) in self.values.iter().enumerate() {
            d[(k, k)] = c(v, 0.0);
        }
        &self.vectors * d * self.vectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is hermitized before
/// the solve so asymmetric round-off below [`HERMITIAN_TOL`] has no effect.
pub fn eig_hermitian(m: &CMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::arg(format!(
            "eig_hermitian: matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::arg(format!(
            "eig_hermitian: matrix is not Hermitian (max deviation {dev:.3e})"
        )));
    }
    Ok(eig_hermitian_unchecked(&hermitize(m)))
}

pub(crate) fn eig_hermitian_unchecked(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Slightly negative eigenvalues are clamped to zero.
pub fn sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    let eig = eig_hermitian(m)?;
    let n = eig.values.len();
    let mut d = CMatrix::zeros(n, n);
    for (k, &v) in eig.values.iter().enumerate() {
        d[(k, k)] = c(v.max(0.0).sqrt(), 0.0);
    }
    Ok(&eig.vectors * d * eig.vectors.adjoint())
}

/// Multiply a vector by a phase so its largest-magnitude component is real
/// and positive. Ties resolve to the lowest index.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (k, z) in v.iter().enumerate() {
        let n = z.norm();
        if n > best_norm + 1e-12 {
            best = k;
            best_norm = n;
        }
    }
    if best_norm > 0.0 {
        let phase = v[best].conj() / best_norm;
        v.apply(|z| *z *= phase);
    }
}
