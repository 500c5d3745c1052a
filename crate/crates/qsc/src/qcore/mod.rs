//! Dense complex linear algebra over labeled tensor factors: states,
//! channels, purification, fidelity, Uhlmann unitaries.
//!
//! Conventions used throughout the crate:
//! * factor order is row-major Kronecker with the first-listed factor
//!   most significant;
//! * fidelity is the square-root form `||sqrt(rho) sqrt(sigma)||_1`;
//! * purification ancillas have dimension equal to the full system
//!   dimension, not the rank.

pub mod channel;
pub mod factor;
pub mod ops;
pub mod random;
pub mod state;

pub use channel::Channel;
pub use factor::{total_dim, Factor};
pub use ops::{
    apply_channel, fidelity, full_trace, merge_factors, partial_trace, permute_factors,
    permute_pure, purify, reduce, states_close, tensor_power_bipartite, tensor_product,
    uhlmann_unitary,
};
pub use random::{
    ginibre, random_isometry, random_isometry_rng, random_pure_rng, random_state,
    random_state_rng, random_unitary_rng, rng_from_seed, rng_stream,
};
pub use state::{state_distance, DensityMatrix, PureState};

#[cfg(test)]
mod tests;
