//! Entanglement redistribution between two qubits and their environments.
//!
//! Two system qubits `S1`, `S2` start in `α|00⟩ + β|11⟩` (or a measured mixed
//! state) while their environments `E1`, `E2` start in `|0⟩`. Each pair
//! `(S_i, E_i)` then evolves under the dilation of an amplitude-damping
//! channel of strength `p`. The crate tracks where the initial entanglement
//! goes: pairwise concurrences, residual (multipartite) tangles, their
//! decomposition into three- and four-party terms, and a Dicke-state fidelity
//! witness. A simulated 256-setting tomography loop reconstructs states from
//! finite counts so the same measures can be evaluated on noisy data.

pub mod channels;
pub mod error;
pub mod measures;
pub mod pipeline;
pub mod qcore;
pub mod tomography;

pub use error::{Error, Result};
