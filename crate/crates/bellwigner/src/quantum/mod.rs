//! Exact finite-dimensional quantum mechanics over labelled polarization
//! qubits: states, operators, wave plates, density matrices and the
//! entanglement metrics used to benchmark source states.

pub mod density;
pub mod ket;
pub mod operator;

pub use density::DensityMatrix;
pub use ket::{Ket, C64, MAX_QUBITS};
pub use operator::{
    born_probability, born_probability_raw, half_wave_plate, projector, quarter_wave_plate,
    sigma_x, sigma_y, sigma_z, Operator,
};
