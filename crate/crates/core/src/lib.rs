//! Continuation-based training for small neural networks.
//!
//! Instead of attacking the target problem directly, training is cast as
//! following a path of minima from an easy problem (lambda = 0) to the hard
//! one (lambda = 1): Natural Parameter Continuation re-solves on a fixed
//! lambda grid, and first-order Pseudo-Arclength Continuation follows the
//! path by arclength with a secant predictor and a penalty corrector, which
//! keeps working where the path folds and lambda reverses.
//!
//! The crate ships:
//! - the homotopies (h-relu, h-sigmoid, brightness, loss blend) and
//!   from-scratch networks with exact parameter- and lambda-gradients,
//! - ADAM/SGD solvers and the NPC/PARC outer loops with trace output,
//! - an analytic fold testbed with a Newton corrector that serves as the
//!   correctness oracle for the path-following machinery,
//! - dataset plumbing (IDX/MNIST to 6x6, synthetic fallback) and the
//!   experiment harness behind the CLI.
//!
//! Batch gradient evaluation and suite execution are data-parallel via rayon
//! when the default `parallel` feature is on; the sequential fallback is
//! bit-identical.

pub mod continuation;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod homotopy;
pub mod models;
pub mod param_space;
pub mod solvers;
pub mod testbed;
pub mod training;

pub use error::{Error, Result};
