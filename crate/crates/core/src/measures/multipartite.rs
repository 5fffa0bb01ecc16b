//! Residual (monogamy-slack) entanglement and its decomposition into
//! three- and four-party contributions on the `(S1, S2, E1, E2)` register.

use serde::Serialize;

use crate::channels::RegisterState;
use crate::error::{Error, Result};
use crate::qcore::linalg::fix_phase;
use crate::qcore::{
    compose, numerical_rank, partial_trace, CVector, DensityMatrix, Partition, PureState,
    SubsystemLabel, C64, MAX_QUBITS,
};

use super::concurrence::concurrence;
use super::tangle::{tangle_lower_bound, tangle_pure, tangle_quasipure, TangleEstimator};
use super::PerLabel;

use SubsystemLabel::*;

/// Relative eigenvalue threshold for the rank-two condition on pair marginals.
pub const RANK_TWO_EPS: f64 = 1e-6;

/// Magnitude below which a negative 3-tangle is round-off.
pub const THREE_TANGLE_CLAMP: f64 = 1e-7;

/// Magnitude below which a negative residual or τ is estimator noise.
pub const TAU_CLAMP: f64 = 1e-6;

/// Tolerance of the six-term residual identity on pure states.
pub const DECOMPOSITION_TOL: f64 = 1e-6;

/// `4 det ρ_i − C²_ij − C²_ik` for a pure three-qubit state, reference slot `i`.
pub fn three_tangle_pure(psi3: &PureState, i: usize) -> Result<f64> {
    if psi3.n_qubits() != 3 {
        return Err(Error::arg(format!(
            "3-tangle needs a 3-qubit state, got {}",
            psi3.n_qubits()
        )));
    }
    if i >= 3 {
        return Err(Error::arg(format!("reference slot {i} out of range")));
    }
    let others: Vec<usize> = (0..3).filter(|&s| s != i).collect();
    let rho_i = psi3.reduced(&[i])?;
    let m = rho_i.matrix();
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    let mut tau = 4.0 * det;
    for &k in &others {
        let mut pair = [i, k];
        pair.sort();
        let cc = concurrence(&psi3.reduced(&pair)?)?;
        tau -= cc * cc;
    }
    if tau < 0.0 && tau >= -THREE_TANGLE_CLAMP {
        tau = 0.0;
    }
    Ok(tau)
}

/// A four-qubit state with a rank-two pair marginal rewritten on three
/// qubits: the two remaining slots (ascending) followed by the effective
/// qubit spanning the pair's support.
#[derive(Clone, Debug)]
pub struct Compressed {
    pub state: PureState,
    /// Original slots of compressed qubits 0 and 1.
    pub remaining: [usize; 2],
    /// Eigenvalues of the pair marginal, descending.
    pub pair_spectrum: Vec<f64>,
}

impl Compressed {
    /// Position of an original slot among the compressed qubits.
    pub fn position_of(&self, slot: usize) -> Option<usize> {
        self.remaining.iter().position(|&s| s == slot)
    }
}

/// Map the support of the `pair` marginal onto a single effective qubit.
///
/// Effective basis: eigenvectors of `ρ_pair` by descending eigenvalue, each
/// rephased so its largest-magnitude component is real and positive.
pub fn compress_rank2(psi: &PureState, pair: (usize, usize)) -> Result<Compressed> {
    if psi.n_qubits() != MAX_QUBITS {
        return Err(Error::arg("compression expects a 4-qubit state"));
    }
    let (k, l) = pair;
    if k == l || k >= MAX_QUBITS || l >= MAX_QUBITS {
        return Err(Error::arg(format!("invalid pair ({k}, {l})")));
    }
    let mut pair_slots = [k, l];
    pair_slots.sort();
    let rho_pair = psi.reduced(&pair_slots)?;
    let eig = rho_pair.eigen();
    let spectrum: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    if spectrum[2] > RANK_TWO_EPS * spectrum[0] {
        return Err(Error::Precondition(format!(
            "pair marginal on slots ({k}, {l}) is not rank two: third eigenvalue {:.3e} (largest {:.3e})",
            spectrum[2], spectrum[0]
        )));
    }
    let rest: Vec<usize> = (0..MAX_QUBITS).filter(|s| !pair_slots.contains(s)).collect();
    let basis: Vec<CVector> = (0..2)
        .map(|b| {
            let mut v = eig.vector(b);
            fix_phase(&mut v);
            v
        })
        .collect();
    let mut amps = vec![C64::new(0.0, 0.0); 8];
    for r in 0..4 {
        for (b, e) in basis.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for x in 0..4 {
                acc += e[x].conj() * psi.amplitude(compose(MAX_QUBITS, &rest, r, &pair_slots, x));
            }
            amps[(r << 1) | b] = acc;
        }
    }
    Ok(Compressed {
        state: PureState::normalized(amps)?,
        remaining: [rest[0], rest[1]],
        pair_spectrum: spectrum,
    })
}

/// Index scheme `(i, j, (k l))`: reference qubit `i`, partner `j`, and the
/// pair `(k l)` treated as one effective qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GroupingSpec {
    pub i: SubsystemLabel,
    pub j: SubsystemLabel,
    pub pair_kl: (SubsystemLabel, SubsystemLabel),
}

impl GroupingSpec {
    pub fn new(
        i: SubsystemLabel,
        j: SubsystemLabel,
        pair_kl: (SubsystemLabel, SubsystemLabel),
    ) -> Result<Self> {
        let mut all = [i, j, pair_kl.0, pair_kl.1];
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg(format!(
                "grouping {i},{j},({},{}) must use each label once",
                pair_kl.0, pair_kl.1
            )));
        }
        Ok(Self { i, j, pair_kl })
    }

    /// `τ_{\underline{i}kl}` grouping: `j` is `i`'s system/environment partner
    /// and `(kl)` is the other pair.
    pub fn underline(i: SubsystemLabel) -> Self {
        let j = i.partner();
        let pair_kl = match i {
            S1 | E1 => (S2, E2),
            S2 | E2 => (S1, E1),
        };
        Self { i, j, pair_kl }
    }

    /// `τ_{S1E1(S2E2)}` (`first = S1`) or `τ_{S2E2(S1E1)}` (`first = S2`).
    pub fn effective(first: SubsystemLabel) -> Self {
        Self::underline(first)
    }

    fn kl_slots(&self) -> (usize, usize) {
        (self.pair_kl.0.slot(), self.pair_kl.1.slot())
    }
}

/// 3-tangle of `(i, j, effective(kl))` after compressing `(kl)`.
pub fn tau_pair_effective(psi: &PureState, grouping: &GroupingSpec) -> Result<f64> {
    let comp = compress_rank2(psi, grouping.kl_slots())?;
    let i = comp
        .position_of(grouping.i.slot())
        .expect("grouping labels are disjoint");
    three_tangle_pure(&comp.state, i)
}

fn require_register(psi: &PureState) -> Result<()> {
    if psi.n_qubits() != MAX_QUBITS {
        return Err(Error::arg("expected the 4-qubit (S1,S2,E1,E2) register"));
    }
    Ok(())
}

fn pair_c2_pure(psi: &PureState, a: SubsystemLabel, b: SubsystemLabel) -> Result<f64> {
    let mut slots = [a.slot(), b.slot()];
    slots.sort();
    let cc = concurrence(&psi.reduced(&slots)?)?;
    Ok(cc * cc)
}

/// Unclamped `C²_{i|jkl} − (C²_ij + C²_ik + C²_il) − τ_{ij(kl)}`.
pub fn tau_underline_raw(psi: &PureState, grouping: &GroupingSpec) -> Result<f64> {
    require_register(psi)?;
    let i = grouping.i;
    let one_vs_rest = tangle_pure(psi, &Partition::labels_vs_rest(&[i])?)?;
    let mut pairs = 0.0;
    for other in SubsystemLabel::ALL.into_iter().filter(|&l| l != i) {
        pairs += pair_c2_pure(psi, i, other)?;
    }
    Ok(one_vs_rest - pairs - tau_pair_effective(psi, grouping)?)
}

/// [`tau_underline_raw`] with values in `[−1e-6, 0)` reported as zero.
pub fn tau_underline(psi: &PureState, grouping: &GroupingSpec) -> Result<f64> {
    let raw = tau_underline_raw(psi, grouping)?;
    Ok(settle(raw, TAU_CLAMP))
}

pub(crate) fn settle(raw: f64, tol: f64) -> f64 {
    if raw < 0.0 && raw >= -tol {
        0.0
    } else {
        raw
    }
}

/// Marginal of a register state on two labels (slot order).
pub fn pair_marginal(
    state: &RegisterState,
    a: SubsystemLabel,
    b: SubsystemLabel,
) -> Result<DensityMatrix> {
    let mut slots = [a.slot(), b.slot()];
    slots.sort();
    match state {
        RegisterState::Pure(psi) => psi.reduced(&slots),
        RegisterState::Mixed(rho) => partial_trace(rho, &slots),
    }
}

/// `C²` between two single qubits.
pub fn pair_tangle(state: &RegisterState, a: SubsystemLabel, b: SubsystemLabel) -> Result<f64> {
    let cc = concurrence(&pair_marginal(state, a, b)?)?;
    Ok(cc * cc)
}

/// Tangle across `part`; exact on pure states, `estimator` on mixed ones.
/// Returns the estimator actually used.
pub fn cut_tangle(
    state: &RegisterState,
    part: &Partition,
    estimator: TangleEstimator,
) -> Result<(f64, TangleEstimator)> {
    match state {
        RegisterState::Pure(psi) => Ok((tangle_pure(psi, part)?, TangleEstimator::Pure)),
        RegisterState::Mixed(rho) => match estimator {
            TangleEstimator::LowerBound => Ok((tangle_lower_bound(rho, part)?, estimator)),
            TangleEstimator::QuasiPure => Ok((tangle_quasipure(rho, part)?, estimator)),
            TangleEstimator::Pure => Err(Error::arg("pure-state tangle requested for a mixed state")),
        },
    }
}

fn pair_cut_partition() -> Partition {
    Partition::from_labels(&[S1, E1], &[S2, E2]).expect("static partition")
}

fn check_rank_two(state: &RegisterState, a: SubsystemLabel, b: SubsystemLabel) -> Result<bool> {
    Ok(numerical_rank(&pair_marginal(state, a, b)?, RANK_TWO_EPS) <= 2)
}

/// `C²_{S1E1|S2E2} − C²_{S2E1} − C²_{S1E2} − C²_{S1S2} − C²_{E1E2}`, with the
/// lower-bound estimator for the cut tangle on mixed states.
pub fn residual_r_pairs(state: &RegisterState) -> Result<f64> {
    residual_r_pairs_with(state, TangleEstimator::LowerBound)
}

pub fn residual_r_pairs_with(state: &RegisterState, estimator: TangleEstimator) -> Result<f64> {
    if state.n_qubits() != MAX_QUBITS {
        return Err(Error::arg("expected the 4-qubit (S1,S2,E1,E2) register"));
    }
    if !check_rank_two(state, S1, E1)? {
        log::warn!("residual R_S1E1|S2E2: ρ_S1E1 is not rank two; monogamy bound may not apply");
    }
    let (cut, _) = cut_tangle(state, &pair_cut_partition(), estimator)?;
    Ok(cut
        - pair_tangle(state, S2, E1)?
        - pair_tangle(state, S1, E2)?
        - pair_tangle(state, S1, S2)?
        - pair_tangle(state, E1, E2)?)
}

/// `C²_{i|jkl} − C²_ij − C²_ik − C²_il`, with the quasi-pure estimator for
/// the `1|3` tangle on mixed states.
pub fn residual_r_i(state: &RegisterState, i: SubsystemLabel) -> Result<f64> {
    if state.n_qubits() != MAX_QUBITS {
        return Err(Error::arg("expected the 4-qubit (S1,S2,E1,E2) register"));
    }
    let (one_vs_rest, _) = cut_tangle(
        state,
        &Partition::labels_vs_rest(&[i])?,
        TangleEstimator::QuasiPure,
    )?;
    let mut r = one_vs_rest;
    for other in SubsystemLabel::ALL.into_iter().filter(|&l| l != i) {
        r -= pair_tangle(state, i, other)?;
    }
    Ok(r)
}

/// All six terms of the residual decomposition of a pure register state.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualDecomposition {
    /// `τ_{\underline{i}kl}` per reference label.
    pub tau_underline: PerLabel<f64>,
    /// `τ_{S1E1(S2E2)}`.
    pub tau_s1e1_s2e2: f64,
    /// `τ_{S2E2(S1E1)}`.
    pub tau_s2e2_s1e1: f64,
    /// `R_{S1E1|S2E2}` evaluated directly.
    pub residual: f64,
    /// Half-sum of the six terms.
    pub half_sum: f64,
}

/// Evaluate the six contributions and check that half their sum reproduces
/// `R_{S1E1|S2E2}` within [`DECOMPOSITION_TOL`].
pub fn decompose_residual(psi: &PureState) -> Result<ResidualDecomposition> {
    require_register(psi)?;
    let eff1 = tau_pair_effective(psi, &GroupingSpec::effective(S1))?;
    let eff2 = tau_pair_effective(psi, &GroupingSpec::effective(S2))?;
    let mut under = PerLabel::default();
    for l in SubsystemLabel::ALL {
        under[l] = tau_underline_raw(psi, &GroupingSpec::underline(l))?;
    }
    let half_sum = 0.5 * (under.s1 + under.s2 + under.e1 + under.e2 + eff1 + eff2);
    let residual = residual_r_pairs(&RegisterState::Pure(psi.clone()))?;
    let diff = (half_sum - residual).abs();
    if diff > DECOMPOSITION_TOL {
        return Err(Error::Identity {
            name: "R_S1E1|S2E2 = half-sum of six tau terms",
            lhs: residual,
            rhs: half_sum,
            diff,
            tol: DECOMPOSITION_TOL,
        });
    }
    Ok(ResidualDecomposition {
        tau_underline: under.map(|v| settle(v, TAU_CLAMP)),
        tau_s1e1_s2e2: settle(eff1, THREE_TANGLE_CLAMP),
        tau_s2e2_s1e1: settle(eff2, THREE_TANGLE_CLAMP),
        residual,
        half_sum,
    })
}

/// Slack of the `2:2` monogamy inequality on one pairing.
#[derive(Clone, Debug, Serialize)]
pub struct PairCutSlack {
    pub cut: String,
    /// `None` when the rank-two precondition fails.
    pub slack: Option<f64>,
    pub notice: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonogamyReport {
    /// `C²_{i|rest} − Σ_j C²_ij` per qubit.
    pub one_vs_rest: PerLabel<f64>,
    pub pair_cuts: Vec<PairCutSlack>,
}

impl MonogamyReport {
    /// Smallest slack over every evaluated inequality.
    pub fn min_slack(&self) -> f64 {
        let a = self.one_vs_rest.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        self.pair_cuts
            .iter()
            .filter_map(|c| c.slack)
            .fold(a, f64::min)
    }
}

/// The three ways of splitting the register into two pairs.
pub const PAIRINGS: [[SubsystemLabel; 4]; 3] = [[S1, E1, S2, E2], [S1, S2, E1, E2], [S1, E2, S2, E1]];

/// Left-minus-right slack of the `1:3` monogamy inequality for every qubit
/// and of the `2:2` inequality for every pairing whose first pair marginal
/// is rank two. Mixed states use the quasi-pure (`1:3`) and `pair_estimator`
/// (`2:2`) tangles.
pub fn monogamy_check(state: &RegisterState, pair_estimator: TangleEstimator) -> Result<MonogamyReport> {
    let mut one_vs_rest = PerLabel::default();
    for l in SubsystemLabel::ALL {
        one_vs_rest[l] = residual_r_i(state, l)?;
    }
    let mut pair_cuts = Vec::new();
    for [i, ip, j, jp] in PAIRINGS {
        let cut = format!("{i}{ip}|{j}{jp}");
        if !check_rank_two(state, i, ip)? {
            pair_cuts.push(PairCutSlack {
                cut,
                slack: None,
                notice: Some(format!("ρ_{i}{ip} is not rank two; 2:2 inequality skipped")),
            });
            continue;
        }
        let part = Partition::from_labels(&[i, ip], &[j, jp])?;
        let (lhs, _) = cut_tangle(state, &part, pair_estimator)?;
        let rhs = pair_tangle(state, i, j)?
            + pair_tangle(state, i, jp)?
            + pair_tangle(state, ip, j)?
            + pair_tangle(state, ip, jp)?;
        pair_cuts.push(PairCutSlack {
            cut,
            slack: Some(lhs - rhs),
            notice: None,
        });
    }
    Ok(MonogamyReport {
        one_vs_rest,
        pair_cuts,
    })
}
