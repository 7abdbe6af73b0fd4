//! Desk-scale simulator and statistics harness for a six-photon Bell-Wigner
//! test: two observers measure entangled photons, two "friends" record those
//! measurements non-destructively via type-I fusion gates, and the resulting
//! joint statistics violate a Bell-type bound that any observer-independent
//! account of the records would have to satisfy.
//!
//! The crate provides
//!
//! * [`quantum`] — dense statevector algebra over labelled polarization
//!   qubits, wave-plate Jones matrices, and density-matrix metrics
//!   (fidelity, purity, concurrence);
//! * [`circuit`] — the protocol itself: sources, the resource rotation,
//!   friend measurements, the post-selected four-photon state and the three
//!   observable families;
//! * [`stats`] — Poisson count emulation, analytic error propagation,
//!   Monte-Carlo percentile intervals, the deterministic local-model oracle
//!   and no-signalling diagnostics;
//! * [`loopholes`] — the detection-efficiency threshold analysis, noise
//!   channels and the polarizer-based alternative protocol;
//! * [`experiment`] — configuration, run orchestration and file formats;
//! * [`verify`] — the named acceptance checks behind `bwsim verify`.

pub mod circuit;
pub mod error;
pub mod experiment;
pub mod loopholes;
pub mod quantum;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
