//! Initial states and the local amplitude-damping dilations.
//!
//! Each system qubit `S_i` is coupled to its own environment qubit `E_i`
//! through a two-qubit unitary. The environment starts in `|0⟩`, so tracing it
//! out recovers the amplitude-damping channel on `S_i`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    bit_of, c, partial_trace, purity, CMatrix, CVector, DensityMatrix, PureState,
    SubsystemLabel, C64, MAX_QUBITS, NORM_TOL,
};

/// Decoherence strength `p ∈ [0, 1]`, a monotone stand-in for time.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ChannelParam(f64);

impl ChannelParam {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg(format!("channel parameter p = {p} outside [0, 1]")));
        }
        Ok(Self(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ChannelParam {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ChannelParam> for f64 {
    fn from(p: ChannelParam) -> f64 {
        p.0
    }
}

/// Wave-plate angle to damping strength: `p = sin²(2θ)`.
pub fn theta_to_p(theta: f64) -> f64 {
    (2.0 * theta).sin().powi(2)
}

/// Initial system state: either `α|00⟩ + β|11⟩` or an explicit two-qubit
/// density matrix for `(S1, S2)`.
#[derive(Clone, Debug)]
pub enum InitialSpec {
    Pure { alpha: C64, beta: C64 },
    Mixed(DensityMatrix),
}

impl InitialSpec {
    pub fn pure(alpha: C64, beta: C64) -> Self {
        InitialSpec::Pure { alpha, beta }
    }

    /// Real amplitudes `α = √(α²)`, `β = √(1 − α²)`.
    pub fn from_alpha_squared(alpha2: f64) -> Self {
        InitialSpec::Pure {
            alpha: c(alpha2.sqrt(), 0.0),
            beta: c((1.0 - alpha2).sqrt(), 0.0),
        }
    }
}

/// A four-qubit register state in either representation.
#[derive(Clone, Debug, PartialEq)]
pub enum RegisterState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl RegisterState {
    pub fn to_density(&self) -> DensityMatrix {
        match self {
            RegisterState::Pure(psi) => psi.to_density(),
            RegisterState::Mixed(rho) => rho.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            RegisterState::Pure(psi) => Some(psi),
            RegisterState::Mixed(_) => None,
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            RegisterState::Pure(psi) => psi.n_qubits(),
            RegisterState::Mixed(rho) => rho.n_qubits(),
        }
    }
}

/// Register `(S1, S2, E1, E2)` with both environments in `|0⟩`.
pub fn initial_state(spec: &InitialSpec) -> Result<RegisterState> {
    match spec {
        InitialSpec::Pure { alpha, beta } => {
            let norm2 = alpha.norm_sqr() + beta.norm_sqr();
            if (norm2 - 1.0).abs() > NORM_TOL {
                return Err(Error::arg(format!(
                    "|α|² + |β|² = {norm2:.12}, expected 1"
                )));
            }
            let mut amps = vec![C64::new(0.0, 0.0); 16];
            amps[0b0000] = *alpha;
            amps[0b1100] = *beta;
            Ok(RegisterState::Pure(PureState::new(amps)?))
        }
        InitialSpec::Mixed(rho) => {
            if rho.n_qubits() != 2 {
                return Err(Error::arg("mixed initial state must be a 2-qubit density matrix"));
            }
            let env = PureState::basis(2, 0)?.to_density();
            Ok(RegisterState::Mixed(rho.tensor(&env)?))
        }
    }
}

/// Two-qubit dilation on one `(S, E)` pair, local basis order `|s e⟩`.
///
/// `|00⟩` and `|11⟩` are fixed; `span{|10⟩, |01⟩}` is rotated so that
/// `|10⟩ → √(1−p)|10⟩ + √p|01⟩` and `|01⟩ → √(1−p)|01⟩ − √p|10⟩`.
pub fn ad_unitary(p: f64) -> Result<CMatrix> {
    let p = ChannelParam::new(p)?.value();
    let keep = (1.0 - p).sqrt();
    let leak = p.sqrt();
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    #[rustfmt::skip]
    let u = CMatrix::from_row_slice(4, 4, &[
        one, z,             z,              z,
        z,   c(keep, 0.0),  c(leak, 0.0),   z,
        z,   c(-leak, 0.0), c(keep, 0.0),   z,
        z,   z,             z,              one,
    ]);
    Ok(u)
}

/// Lift a two-qubit operator acting on `(slot_a, slot_b)` (in that order)
/// to the full `n_qubits` register.
pub fn embed_two_qubit(u: &CMatrix, slot_a: usize, slot_b: usize, n_qubits: usize) -> CMatrix {
    let dim = 1 << n_qubits;
    let ba = bit_of(n_qubits, slot_a);
    let bb = bit_of(n_qubits, slot_b);
    let local = |idx: usize| ((idx & ba != 0) as usize) << 1 | (idx & bb != 0) as usize;
    let mut out = CMatrix::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            // other bits must agree
            if (row & !(ba | bb)) != (col & !(ba | bb)) {
                continue;
            }
            out[(row, col)] = u[(local(row), local(col))];
        }
    }
    out
}

/// Full-register unitary `U_{S2E2}(p2) · U_{S1E1}(p1)`.
pub fn register_unitary(p1: f64, p2: f64) -> Result<CMatrix> {
    let s1 = SubsystemLabel::S1.slot();
    let e1 = SubsystemLabel::E1.slot();
    let s2 = SubsystemLabel::S2.slot();
    let e2 = SubsystemLabel::E2.slot();
    let u1 = embed_two_qubit(&ad_unitary(p1)?, s1, e1, MAX_QUBITS);
    let u2 = embed_two_qubit(&ad_unitary(p2)?, s2, e2, MAX_QUBITS);
    Ok(u2 * u1)
}

/// Population of states with an excited environment qubit.
fn environment_excitation(rho: &DensityMatrix) -> f64 {
    let env = partial_trace(rho, &[SubsystemLabel::E1.slot(), SubsystemLabel::E2.slot()])
        .expect("register has environment slots");
    1.0 - env.matrix()[(0, 0)].re
}

fn check_register(state: &RegisterState) -> Result<()> {
    if state.n_qubits() != MAX_QUBITS {
        return Err(Error::arg("evolve expects the 4-qubit (S1,S2,E1,E2) register"));
    }
    let excited = match state {
        RegisterState::Pure(psi) => {
            let mask = bit_of(MAX_QUBITS, 2) | bit_of(MAX_QUBITS, 3);
            psi.amplitudes()
                .iter()
                .enumerate()
                .filter(|(k, _)| k & mask != 0)
                .map(|(_, z)| z.norm_sqr())
                .sum()
        }
        RegisterState::Mixed(rho) => environment_excitation(rho),
    };
    if excited > 1e-9 {
        log::warn!("evolve: environments not in |0⟩ (excited population {excited:.3e})");
    }
    Ok(())
}

/// Apply the AD dilation with strength `p1` on `(S1, E1)` and `p2` on `(S2, E2)`.
pub fn evolve(state: &RegisterState, p1: f64, p2: f64) -> Result<RegisterState> {
    check_register(state)?;
    let u = register_unitary(p1, p2)?;
    apply_register_unitary(state, &u)
}

/// Undo [`evolve`]: applies `U†`. Used to run measured end-point states
/// backwards along the channel.
pub fn evolve_backward(state: &RegisterState, p1: f64, p2: f64) -> Result<RegisterState> {
    if state.n_qubits() != MAX_QUBITS {
        return Err(Error::arg("evolve expects the 4-qubit (S1,S2,E1,E2) register"));
    }
    let u = register_unitary(p1, p2)?.adjoint();
    apply_register_unitary(state, &u)
}

fn apply_register_unitary(state: &RegisterState, u: &CMatrix) -> Result<RegisterState> {
    Ok(match state {
        RegisterState::Pure(psi) => RegisterState::Pure(psi.apply(u)?),
        RegisterState::Mixed(rho) => RegisterState::Mixed(rho.conjugate(u)?),
    })
}

/// Closed-form evolved state for real `α, β` and `p1 = p2 = p`.
pub fn closed_form_state(alpha: f64, beta: f64, p: f64) -> Result<PureState> {
    let q = (p * (1.0 - p)).sqrt();
    let mut amps = CVector::zeros(16);
    amps[0b0000] = c(alpha, 0.0);
    amps[0b1100] = c(beta * (1.0 - p), 0.0);
    amps[0b0011] = c(beta * p, 0.0);
    amps[0b1001] = c(beta * q, 0.0);
    amps[0b0110] = c(beta * q, 0.0);
    PureState::from_vector(amps)
}

/// JSON form of an [`InitialSpec`]: real/imaginary amplitude parts, or a
/// path to a 2-qubit density matrix in the state JSON format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum InitialSpecConfig {
    Amplitudes {
        alpha_re: f64,
        #[serde(default)]
        alpha_im: f64,
        beta_re: f64,
        #[serde(default)]
        beta_im: f64,
    },
    MixedFile {
        mixed_system_file: PathBuf,
    },
}

impl InitialSpecConfig {
    /// Resolve into an [`InitialSpec`]; relative file paths are taken
    /// relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<InitialSpec> {
        match self {
            InitialSpecConfig::Amplitudes {
                alpha_re,
                alpha_im,
                beta_re,
                beta_im,
            } => Ok(InitialSpec::pure(c(*alpha_re, *alpha_im), c(*beta_re, *beta_im))),
            InitialSpecConfig::MixedFile { mixed_system_file } => {
                let path = if mixed_system_file.is_absolute() {
                    mixed_system_file.clone()
                } else {
                    base_dir.join(mixed_system_file)
                };
                let rho = crate::qcore::read_density_json(&path)?;
                log::info!("mixed initial state {} has purity {:.4}", path.display(), purity(&rho));
                Ok(InitialSpec::Mixed(rho))
            }
        }
    }
}

/// `α|00⟩ + β|11⟩` partially dephased to reach a target purity, standing in
/// for an imperfect source. Mixes with `|α|²|00⟩⟨00| + |β|²|11⟩⟨11|`.
pub fn dephased_source(alpha2: f64, target_purity: f64) -> Result<DensityMatrix> {
    let a = alpha2.sqrt();
    let b = (1.0 - alpha2).sqrt();
    let psi = PureState::new(vec![c(a, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(b, 0.0)])?;
    let mut diag = CMatrix::zeros(4, 4);
    diag[(0, 0)] = c(alpha2, 0.0);
    diag[(3, 3)] = c(1.0 - alpha2, 0.0);
    let diag = DensityMatrix::new(diag)?;
    // purity((1-q)ψ + qD) = 1 - 2q(1-s) + q²(1-s), s = α⁴ + β⁴
    let s = alpha2.powi(2) + (1.0 - alpha2).powi(2);
    let k = 1.0 - s;
    let floor = s;
    if !(floor..=1.0).contains(&target_purity) || k <= 0.0 {
        return Err(Error::arg(format!(
            "target purity {target_purity} unreachable (range [{floor:.4}, 1])"
        )));
    }
    // k q² - 2k q + (1 - target) = 0, smaller root
    let q = 1.0 - (1.0 - (1.0 - target_purity) / k).sqrt();
    DensityMatrix::mixture(&[(1.0 - q, &psi.to_density()), (q, &diag)])
}
