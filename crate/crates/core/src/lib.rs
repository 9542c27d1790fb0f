//! Comonotone couplings of stochastically monotone Markov semigroups on
//! the real line.
//!
//! - [`kernels`]: transition laws, quantile functions and `P_t tanh` for
//!   CIR, Brownian, finite-chain and identity semigroups.
//! - [`coupling`]: Monte Carlo comonotone steps, their dyadic iterates and
//!   reference couplings.
//! - [`exactchain`]: exact computations on finite ordered chains.
//! - [`stats`]: empirical W1, DKW checks, dominance and convergence
//!   diagnostics.

pub mod coupling;
pub mod error;
pub mod exactchain;
pub mod extended;
pub mod kernels;
pub mod stats;

pub use coupling::{
    dyadic_decompose, independent_batch, one_step_batch, parallel_batch, sample_batch, CouplingConfig,
    DyadicTime, SampleBatch,
};
pub use error::{Error, Result};
pub use exactchain::{ChainModel, JointDist, QMatrix, TransitionMatrix};
pub use extended::{phi_dist, ExtendedReal};
pub use kernels::{
    expected_phi, quantile, transition_cdf, BrownianParams, CirParams, SemigroupModel,
};
