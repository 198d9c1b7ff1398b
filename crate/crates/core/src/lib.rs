//! Matrix exponential learning for sum-rate maximisation in multi-user MIMO
//! uplinks.
//!
//! Each user picks a unit-trace positive semidefinite input covariance and
//! the network maximises `log det(I + sum_k P_k H_k Q_k H_k^dagger)`. The
//! crate provides the Hermitian algebra ([`hermitian`]), the channel model
//! ([`network`]), one-point gradient estimators that need only the realised
//! sum rate ([`estimators`]), the learning and water-filling schemes
//! ([`optimizers`]) and an experiment harness ([`harness`]).

pub mod error;
pub mod estimators;
pub mod harness;
pub mod hermitian;
pub mod network;
pub mod optimizers;

pub use error::{Error, Result};
pub use hermitian::{CMatrix, Complex, HermitianMatrix};
pub use network::{ChannelRealization, CovarianceProfile, UserChannel};
