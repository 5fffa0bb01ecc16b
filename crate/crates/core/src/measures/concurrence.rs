//! Wootters concurrence of two-qubit states.

use crate::error::{Error, Result};
use crate::qcore::linalg::{eig_hermitian_unchecked, hermitize, kron, pauli_y};
use crate::qcore::{DensityMatrix, EIGEN_CLAMP};

/// Relative eigenvalue cutoff for the support of `ρ`.
pub const SUPPORT_TOL: f64 = 1e-13;

/// `Γ = √λ₁ − √λ₂ − √λ₃ − √λ₄`, with `λ` the descending eigenvalues of
/// `ρ (σy⊗σy) ρ* (σy⊗σy)`.
///
/// The `√λ` are computed directly as the singular values of the complex
/// symmetric matrix `τ_ij = ⟨v_i| σy⊗σy |v_j*⟩` built from the subnormalized
/// eigenvectors `v_i = √μ_i e_i` of `ρ`. Eigenvalues below
/// [`SUPPORT_TOL`] relative to the largest are round-off and are dropped
/// rather than square-rooted, which would turn `1e-17` noise into `1e-8`.
pub fn gamma(rho2: &DensityMatrix) -> Result<f64> {
    if rho2.n_qubits() != 2 {
        return Err(Error::arg(format!(
            "concurrence needs a 2-qubit state, got {} qubits",
            rho2.n_qubits()
        )));
    }
    let eig = eig_hermitian_unchecked(&hermitize(rho2.matrix()));
    let mut v = eig.vectors.clone();
    let cutoff = SUPPORT_TOL * eig.values[0].max(0.0);
    for (k, &mu) in eig.values.iter().enumerate() {
        if mu < -EIGEN_CLAMP {
            return Err(Error::arg(format!(
                "concurrence: state has eigenvalue {mu:.3e} < 0"
            )));
        }
        let w = if mu > cutoff { mu.sqrt() } else { 0.0 };
        v.column_mut(k).scale_mut(w);
    }
    let yy = kron(&pauli_y(), &pauli_y());
    let tau = v.adjoint() * yy * v.map(|z| z.conj());
    let mut roots: Vec<f64> = tau.singular_values().iter().copied().collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok(roots[0] - roots[1] - roots[2] - roots[3])
}

/// `C = max(0, Γ)`.
pub fn concurrence(rho2: &DensityMatrix) -> Result<f64> {
    Ok(gamma(rho2)?.max(0.0))
}
