//! Identifiability of finite mixtures of discrete measures from grouped
//! samples.
//!
//! A group of `n` observations drawn iid from a single component of a mixture
//! `P = sum_i w_i delta_{mu_i}` has law `V_n(P) = sum_i w_i mu_i^{⊗n}`, a
//! symmetric order-`n` moment tensor. This crate evaluates these laws, builds
//! pairs of distinct `m`-component mixtures whose laws agree up to order
//! `2m - 2`, certifies distinctness at order `2m - 1` through a rank argument,
//! and searches numerically for confusable alternatives.
//!
//! Constructions and certificates run on exact [`Rational`] arithmetic;
//! search and simulation use `f64`.

pub mod assign;
pub mod construct;
pub mod error;
pub mod identify;
pub mod lemma;
pub mod linalg;
pub mod measures;
pub mod par;
pub mod scalar;
pub mod simulate;
pub mod tensor;

pub use error::{Error, Result};
pub use measures::{canonicalize, mixtures_equal, random_mixture, DiscreteMeasure, Mixture, SignedMixture};
pub use par::Execution;
pub use scalar::{Rational, Scalar};
pub use tensor::{
    group_law, marginalize, rank_of_powers, sym_compress, tensor_distance, tensor_power, Layout, MomentTensor,
};
