//! Link-level simulator for multi-cell multi-user massive FD-MIMO networks.
//!
//! The library covers the uplink-to-downlink chain of a TDD system whose
//! base stations estimate 2D directions of arrival with unitary ESPRIT and
//! reuse them for downlink precoding:
//!
//! * [`numerics`] — dense complex-matrix kernels (Kronecker, SVD, eigen,
//!   pseudoinverse, PSD square root).
//! * [`channel`] — geometric mmWave channel synthesis: planar/linear array
//!   responses, per-tap impulse responses, per-subcarrier transfer functions,
//!   and random multi-cell scenario generation.
//! * [`pilots`] — the shared non-orthogonal spreading-sequence pool, uplink
//!   received-signal synthesis, and despreading.
//! * [`esprit`] — forward-backward-averaged 2D ESPRIT estimation of the
//!   elevation/azimuth spatial frequencies, plus path matching.
//! * [`mse`] — analytical estimation-error prediction: exact first-order
//!   per-component MSE and closed-form large-array expressions, with the
//!   Jacobian conversion from spatial frequencies to angles.
//! * [`precoding`] — downlink precoders (sum-rate maximizing, eigen
//!   beamforming, block-diagonalization zero forcing), water-filling power
//!   allocation, and achievable-rate evaluation.
//! * [`complexity`] — closed-form FLOP models for the estimation and
//!   precoding algorithms.
//! * [`harness`] — experiment configuration, seeded Monte Carlo drivers, and
//!   CSV emission behind the `fdmimo` CLI.

pub mod channel;
pub mod complexity;
pub mod esprit;
pub mod harness;
pub mod mse;
pub mod numerics;
pub mod pilots;
pub mod precoding;
