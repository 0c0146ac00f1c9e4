//! Solvers for the regularized leverage-score gradient inversion problem
//!
//!   min_x 0.5 ||g(x) - c||_2^2 + 0.5 ||diag(w) A x||_2^2,
//!
//! where g is the gradient of the leverage-score matching loss
//! L_b(x) = 0.5 ||f(x) - b||_2^2 and f(x) collects the leverage scores of
//! S_x^{-1} A with S_x = diag(Ax - b).
//!
//! The crate provides the analytic derivative chain (gradient, Jacobian of g,
//! full Hessian), an exact Newton solver with a 0.4-per-step contraction
//! certificate, a sketch-accelerated variant that subsamples rows by leverage
//! score to build an approximate Hessian, and oracle-grade verification of
//! every claimed property (finite differences, brute-force projections,
//! eigenvalue order checks, spectral bound ledgers).
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release --example leverage_scores
//! cargo run --release --example gradient_check
//! cargo run --release --example planted_instance
//! cargo run --release --example exact_newton
//! cargo run --release --example sketched_newton
//! cargo run --release --example subsample_sandwich
//! cargo run --release --example bound_ledger
//! ```
//!
//! or with the `levinv` binary: `levinv gen`, `levinv solve`, `levinv verify`,
//! `levinv bench`.

pub mod calculus;
pub mod cli;
pub mod error;
pub mod hessian;
pub mod leverage;
pub mod newton;
pub mod numkit;
pub mod oracle;
pub mod problem;
pub mod sketch;

pub use error::{Error, Result};
