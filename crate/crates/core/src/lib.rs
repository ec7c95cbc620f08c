//! Intermittent private information retrieval.
//!
//! A user makes two correlated requests to N replicated servers: a private
//! one S and a non-private one X. S is fetched with capacity-achieving PIR
//! over all K messages; X is fetched with PIR over a random set `U` that
//! contains X and is independent of S, so the second request reveals nothing
//! about the first. The same idea drives an online location-privacy
//! mechanism over a Markov mobility model.
//!
//! Probability code is generic over [`Scalar`]; [`Rational`] gives exact
//! answers and is what every privacy check uses.

pub mod audit;
pub mod error;
pub mod fixtures;
pub mod intermittent;
pub mod location;
pub mod obfuscation;
pub mod pir;
pub mod prob;
pub mod rng;
pub mod scalar;
pub mod subset;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use obfuscation::{ObfuscationPolicy, Solver, ThetaProfile};
pub use prob::{capacity_cost, ConditionalMatrix, JointDistribution, MessageStore, SystemConfig};
pub use rng::{SeedTree, StreamRng};
pub use scalar::Scalar;
pub use subset::Subset;

pub type Rational = num_rational::BigRational;

pub type Joint = JointDistribution<Rational>;
pub type Conditional = ConditionalMatrix<Rational>;
pub type Policy = ObfuscationPolicy<Rational>;
pub type Profile = ThetaProfile<Rational>;

pub type JointF64 = JointDistribution<f64>;
pub type ConditionalF64 = ConditionalMatrix<f64>;
pub type PolicyF64 = ObfuscationPolicy<f64>;
