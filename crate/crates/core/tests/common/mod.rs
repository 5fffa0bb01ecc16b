//! Test-side reference implementations. Nothing here calls into the
//! library's measure code; states are built with the library only where the
//! construction itself is under test elsewhere.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qredist::channels::{evolve, initial_state, InitialSpec};
use qredist::qcore::{DensityMatrix, PureState};

pub type Mat = DMatrix<C64>;
pub type Vector = DVector<C64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn haar_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    let v = Vector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

pub fn haar_state(n_qubits: usize, rng: &mut ChaCha8Rng) -> PureState {
    PureState::from_vector(haar_vector(1 << n_qubits, rng)).unwrap()
}

/// QR of a complex Ginibre matrix with the phases of `R`'s diagonal removed.
pub fn haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> Mat {
    let g = Mat::from_fn(dim, dim, |_, _| gaussian(rng));
    let (q, r) = g.qr().unpack();
    let mut q = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let col = q.column(k) * phase;
        q.set_column(k, &col);
    }
    q
}

pub fn kron_all(ops: &[Mat]) -> Mat {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, m| acc.kronecker(m))
}

/// Random `α|00⟩ + β|11⟩` (complex α, β) evolved with independent `p1 ≠ p2`.
pub fn channel_family_state(rng: &mut ChaCha8Rng) -> PureState {
    let ab = haar_vector(2, rng);
    let p1: f64 = rng.random();
    let mut p2: f64 = rng.random();
    while (p2 - p1).abs() < 1e-3 {
        p2 = rng.random();
    }
    let s = initial_state(&InitialSpec::pure(ab[0], ab[1])).unwrap();
    evolve(&s, p1, p2).unwrap().as_pure().unwrap().clone()
}

/// `w|ψ1⟩⟨ψ1| + (1 − w)|ψ2⟩⟨ψ2|` with Haar `ψ`s and `w ∈ [0.05, 0.95]`.
pub fn random_rank2(n_qubits: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let a = haar_state(n_qubits, rng).to_density();
    let b = haar_state(n_qubits, rng).to_density();
    let w = 0.05 + 0.9 * rng.random::<f64>();
    DensityMatrix::mixture(&[(w, &a), (1.0 - w, &b)]).unwrap()
}

/// Coefficient matrix `M[a, b] = ψ(a ⊕ b)` for the split `side_a | rest`.
fn coefficient_matrix(psi: &[C64], n_qubits: usize, side_a: &[usize]) -> Mat {
    let side_b: Vec<usize> = (0..n_qubits).filter(|q| !side_a.contains(q)).collect();
    let bit = |slot: usize| 1usize << (n_qubits - 1 - slot);
    let mut m = Mat::zeros(1 << side_a.len(), 1 << side_b.len());
    for (idx, amp) in psi.iter().enumerate() {
        let pick = |slots: &[usize]| {
            slots
                .iter()
                .fold(0usize, |acc, &s| (acc << 1) | usize::from(idx & bit(s) != 0))
        };
        m[(pick(side_a), pick(&side_b))] = *amp;
    }
    m
}

/// Reduced state of `psi` on `side_a` (slots in the order given).
pub fn oracle_reduced(psi: &[C64], n_qubits: usize, side_a: &[usize]) -> Mat {
    let m = coefficient_matrix(psi, n_qubits, side_a);
    &m * m.adjoint()
}

pub fn oracle_purity(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `2(1 − tr ρ_A²)` for an unnormalized `psi` (normalized internally).
pub fn oracle_pure_tangle(psi: &[C64], n_qubits: usize, side_a: &[usize]) -> f64 {
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let rho_a = oracle_reduced(psi, n_qubits, side_a).unscale(norm2);
    2.0 * (1.0 - oracle_purity(&rho_a))
}

/// Upper estimate of the convex roof of the tangle: the minimum average pure
/// tangle over the spectral decomposition and `samples` decompositions
/// obtained by mixing it with Haar unitaries of size `r..=8`.
pub fn convex_roof_oracle(rho: &Mat, n_qubits: usize, side_a: &[usize], samples: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let eig = nalgebra::SymmetricEigen::new(rho.clone());
    let mut cols: Vec<Vector> = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-12 {
            cols.push(eig.eigenvectors.column(k).scale(lambda.sqrt()));
        }
    }
    let r = cols.len();
    let average = |vectors: &[Vector]| -> f64 {
        vectors
            .iter()
            .map(|v| {
                let w = v.norm_squared();
                if w < 1e-300 {
                    0.0
                } else {
                    w * oracle_pure_tangle(v.as_slice(), n_qubits, side_a)
                }
            })
            .sum()
    };
    let mut best = average(&cols);
    let k_max = 8.max(r);
    for _ in 0..samples {
        let k = rng.random_range(r..=k_max);
        let u = haar_unitary(k, &mut rng);
        let mixed: Vec<Vector> = (0..k)
            .map(|row| {
                let mut v = Vector::zeros(rho.nrows());
                for (j, col) in cols.iter().enumerate() {
                    v += col * u[(row, j)];
                }
                v
            })
            .collect();
        best = best.min(average(&mixed));
    }
    best
}

/// `2|ad − bc|` for `a|00⟩ + b|01⟩ + c|10⟩ + d|11⟩`.
pub fn oracle_pure_concurrence(psi: &[C64]) -> f64 {
    2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm()
}

/// Wootters concurrence via `√ρ ρ̃ √ρ`, independent of the library route.
pub fn oracle_wootters(rho: &Mat) -> f64 {
    let yy = Mat::from_fn(4, 4, |r, c| match (r, c) {
        (0, 3) | (3, 0) => C64::new(-1.0, 0.0),
        (1, 2) | (2, 1) => C64::new(1.0, 0.0),
        _ => C64::new(0.0, 0.0),
    });
    let tilde = &yy * rho.map(|z| z.conj()) * &yy;
    let e = nalgebra::SymmetricEigen::new(rho.clone());
    let sqrt_d = Mat::from_diagonal(&e.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    let s = &e.eigenvectors * sqrt_d * e.eigenvectors.adjoint();
    let m = &s * tilde * &s;
    let m = (&m + m.adjoint()).unscale(2.0);
    let mut roots: Vec<f64> = nalgebra::SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    (roots[0] - roots[1] - roots[2] - roots[3]).max(0.0)
}

/// `v|Φ⁺⟩⟨Φ⁺| + (1 − v)𝟙/4`.
pub fn werner(v: f64) -> Mat {
    let mut m = Mat::identity(4, 4).scale((1.0 - v) / 4.0);
    for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(r, c)] += C64::new(v / 2.0, 0.0);
    }
    m
}

/// X-state closed forms for the pure family: `(C_{S1S2}, C_{E1E2})`.
pub fn oracle_pair_concurrences(alpha: f64, beta: f64, p: f64) -> (f64, f64) {
    let s = 2.0 * beta * (1.0 - p) * (alpha - beta * p).max(0.0);
    let e = 2.0 * beta * p * (alpha - beta * (1.0 - p)).max(0.0);
    (s, e)
}

/// Fidelity of the pure family with the Dicke-type witness state.
pub fn oracle_dicke_fidelity(alpha: f64, beta: f64, p: f64) -> f64 {
    (alpha + beta + 2.0 * beta * (p * (1.0 - p)).sqrt()).powi(2) / 6.0
}

/// Bisection root of `f` on `[lo, hi]` given a sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn max_abs(a: &Mat, b: &Mat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
