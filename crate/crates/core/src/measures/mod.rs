//! Entanglement quantifiers on the `(S1, S2, E1, E2)` register.

mod concurrence;
mod multipartite;
mod tangle;

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::channels::RegisterState;
use crate::error::{Error, Result};
use crate::qcore::{fidelity_pure, DensityMatrix, Partition, PureState, SubsystemLabel, C64};

pub use concurrence::{concurrence, gamma};
pub use multipartite::{
    compress_rank2, cut_tangle, decompose_residual, monogamy_check, pair_marginal, pair_tangle,
    residual_r_i, residual_r_pairs, residual_r_pairs_with, tau_pair_effective, tau_underline,
    tau_underline_raw, three_tangle_pure, Compressed, GroupingSpec, MonogamyReport, PairCutSlack,
    ResidualDecomposition, DECOMPOSITION_TOL, PAIRINGS, RANK_TWO_EPS, TAU_CLAMP,
    THREE_TANGLE_CLAMP,
};
pub use tangle::{
    tangle_lower_bound, tangle_lower_bound_raw, tangle_pure, tangle_quasipure, TangleEstimator,
};

use SubsystemLabel::*;

/// One value per register label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerLabel<T> {
    pub s1: T,
    pub s2: T,
    pub e1: T,
    pub e2: T,
}

impl<T> PerLabel<T> {
    pub fn iter(&self) -> impl Iterator<Item = (SubsystemLabel, &T)> {
        SubsystemLabel::ALL.into_iter().map(move |l| (l, &self[l]))
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> PerLabel<U> {
        PerLabel {
            s1: f(self.s1),
            s2: f(self.s2),
            e1: f(self.e1),
            e2: f(self.e2),
        }
    }
}

impl<T> Index<SubsystemLabel> for PerLabel<T> {
    type Output = T;

    fn index(&self, l: SubsystemLabel) -> &T {
        match l {
            S1 => &self.s1,
            S2 => &self.s2,
            E1 => &self.e1,
            E2 => &self.e2,
        }
    }
}

impl<T> IndexMut<SubsystemLabel> for PerLabel<T> {
    fn index_mut(&mut self, l: SubsystemLabel) -> &mut T {
        match l {
            S1 => &mut self.s1,
            S2 => &mut self.s2,
            E1 => &mut self.e1,
            E2 => &mut self.e2,
        }
    }
}

/// Fidelity threshold above which overlap with the Dicke-type state
/// certifies genuine four-party entanglement.
pub const DICKE_WITNESS_THRESHOLD: f64 = 2.0 / 3.0;

/// `(|0000⟩ + |1111⟩ + |0011⟩ + |1100⟩ + |0110⟩ + |1001⟩)/√6`.
pub fn dicke_state() -> PureState {
    let w = 1.0 / 6f64.sqrt();
    let mut amps = vec![C64::new(0.0, 0.0); 16];
    for idx in [0b0000, 0b1111, 0b0011, 0b1100, 0b0110, 0b1001] {
        amps[idx] = C64::new(w, 0.0);
    }
    PureState::new(amps).expect("six equal weights normalize")
}

/// Fidelity with [`dicke_state`] and whether it strictly exceeds 2/3.
pub fn genuine4_witness(rho: &DensityMatrix) -> Result<(f64, bool)> {
    if rho.n_qubits() != 4 {
        return Err(Error::arg("the four-party witness needs a 4-qubit state"));
    }
    let f = fidelity_pure(rho, &dicke_state())?;
    Ok((f, f > DICKE_WITNESS_THRESHOLD))
}

fn witness_of(state: &RegisterState) -> Result<(f64, bool)> {
    match state {
        RegisterState::Pure(psi) => {
            let f = psi.inner(&dicke_state()).norm_sqr().clamp(0.0, 1.0);
            Ok((f, f > DICKE_WITNESS_THRESHOLD))
        }
        RegisterState::Mixed(rho) => genuine4_witness(rho),
    }
}

/// `τ_{S1E1(S2E2)}` and `τ_{S2E2(S1E1)}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTaus {
    pub s1e1_s2e2: Option<f64>,
    pub s2e2_s1e1: Option<f64>,
}

/// Every measure at one value of the decoherence parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangleReport {
    pub p: f64,
    pub c2_s1s2: f64,
    pub c2_e1e2: f64,
    pub c2_s1e2: f64,
    pub c2_s2e1: f64,
    pub c2_s1e1: f64,
    pub c2_s2e2: f64,
    pub gamma_s1s2: f64,
    pub gamma_e1e2: f64,
    /// `C²_{S1E1|S2E2}`: exact on pure states, else `pair_estimator`.
    pub c2_pair: f64,
    pub pair_estimator: TangleEstimator,
    /// Estimator for the `1|3` tangles inside `residual_i`.
    pub split_estimator: TangleEstimator,
    pub residual_pair: f64,
    pub residual_i: PerLabel<f64>,
    pub tau_underline: Option<PerLabel<f64>>,
    pub tau_effective: EffectiveTaus,
    pub dicke_fidelity: f64,
    pub genuine4: bool,
    pub flags: Vec<String>,
}

fn settle_flagged(name: &str, raw: f64, flags: &mut Vec<String>) -> f64 {
    if raw >= 0.0 {
        raw
    } else if raw >= -TAU_CLAMP {
        flags.push(format!("clamped:{name}"));
        0.0
    } else {
        log::warn!("{name} = {raw:.3e} is negative beyond estimator tolerance");
        flags.push(format!("negative:{name}"));
        raw
    }
}

/// Compute a full [`TangleReport`] for a register state.
///
/// Pure states use exact tangles and the full six-term decomposition. Mixed
/// states use `pair_estimator` for `C²_{S1E1|S2E2}` and the quasi-pure
/// estimator for `C²_{i|jkl}`; their effective-pair terms are unavailable
/// (they require a pure global state), so `τ_{\underline{i}kl}` is reported
/// as `R_i`, which is exact whenever the effective terms vanish.
pub fn tangle_report(
    state: &RegisterState,
    p: f64,
    pair_estimator: TangleEstimator,
) -> Result<TangleReport> {
    if state.n_qubits() != 4 {
        return Err(Error::arg("reports are defined on the 4-qubit register"));
    }
    let mut flags = Vec::new();
    let c2 = |a, b| pair_tangle(state, a, b);
    let cut = Partition::from_labels(&[S1, E1], &[S2, E2])?;
    let (c2_pair, used) = cut_tangle(state, &cut, pair_estimator)?;
    let c2_s1s2 = c2(S1, S2)?;
    let c2_e1e2 = c2(E1, E2)?;
    let c2_s1e2 = c2(S1, E2)?;
    let c2_s2e1 = c2(S2, E1)?;
    let residual_pair = c2_pair - c2_s1s2 - c2_e1e2 - c2_s1e2 - c2_s2e1;
    if residual_pair < -TAU_CLAMP {
        flags.push("negative:residual_pair".into());
    }

    let mut residual_i = PerLabel::default();
    for l in SubsystemLabel::ALL {
        residual_i[l] = residual_r_i(state, l)?;
    }

    let (tau_underline, tau_effective, split_estimator) = match state {
        RegisterState::Pure(psi) => {
            let (under, eff) = pure_decomposition(psi, &mut flags);
            (under, eff, TangleEstimator::Pure)
        }
        RegisterState::Mixed(_) => {
            flags.push("tau_effective_unavailable".into());
            let under = residual_i.map(|v| v);
            let mut settled = PerLabel::default();
            for l in SubsystemLabel::ALL {
                settled[l] = settle_flagged(&format!("tau_u_{}", l.name().to_lowercase()), under[l], &mut flags);
            }
            (Some(settled), EffectiveTaus::default(), TangleEstimator::QuasiPure)
        }
    };

    let (dicke_fidelity, genuine4) = witness_of(state)?;
    Ok(TangleReport {
        p,
        c2_s1s2,
        c2_e1e2,
        c2_s1e2,
        c2_s2e1,
        c2_s1e1: c2(S1, E1)?,
        c2_s2e2: c2(S2, E2)?,
        gamma_s1s2: gamma(&pair_marginal(state, S1, S2)?)?,
        gamma_e1e2: gamma(&pair_marginal(state, E1, E2)?)?,
        c2_pair,
        pair_estimator: used,
        split_estimator,
        residual_pair,
        residual_i,
        tau_underline,
        tau_effective,
        dicke_fidelity,
        genuine4,
        flags,
    })
}

fn pure_decomposition(psi: &PureState, flags: &mut Vec<String>) -> (Option<PerLabel<f64>>, EffectiveTaus) {
    let eff = |first| tau_pair_effective(psi, &GroupingSpec::effective(first));
    let (e1, e2) = match (eff(S1), eff(S2)) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            for err in [a.err(), b.err()].into_iter().flatten() {
                log::warn!("effective-pair 3-tangle unavailable: {err}");
            }
            flags.push("rank_two_violated".into());
            return (None, EffectiveTaus::default());
        }
    };
    let mut under = PerLabel::default();
    for l in SubsystemLabel::ALL {
        let raw = match tau_underline_raw(psi, &GroupingSpec::underline(l)) {
            Ok(v) => v,
            Err(err) => {
                log::warn!("τ_underline({l}) unavailable: {err}");
                flags.push("rank_two_violated".into());
                return (None, EffectiveTaus::default());
            }
        };
        under[l] = settle_flagged(&format!("tau_u_{}", l.name().to_lowercase()), raw, flags);
    }
    let effective = EffectiveTaus {
        s1e1_s2e2: Some(settle_flagged("tau_eff_s1e1", e1, flags)),
        s2e2_s1e1: Some(settle_flagged("tau_eff_s2e2", e2, flags)),
    };
    (Some(under), effective)
}
