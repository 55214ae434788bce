//! Numerical laboratory for discretized canonical commutation relations.
//!
//! * [`weyl`]: exact and floating arithmetic in the rotation algebra.
//! * [`expr`]: potential functions given as text.
//! * [`lattice`]: clock/shift matrix models of `P_τ`, `Q_τ` and `H`.
//! * [`spectral`]: eigenanalysis, butterfly sweeps, KMS states, dynamics.
//! * [`process`]: the periodic position process and its path sampler.
//! * [`classical`]: the classical anharmonic oscillator.
//! * [`cli`]: command-line driver and file output.

pub mod classical;
pub mod cli;
pub mod expr;
pub mod lattice;
pub mod linalg;
pub mod process;
pub mod spectral;
pub mod weyl;
