//! Certified value iteration for finite Markov decision processes with
//! Epstein-Zin recursive utility.
//!
//! The Bellman equation of an Epstein-Zin model is not a contraction in the
//! plain supremum norm. After the power transform `w = v^(1-gamma)` or
//! `w = v^(1-rho)` (chosen by the `(rho, gamma)` regime) it becomes one in a
//! weighted supremum norm, so plain value iteration from zero converges with a
//! computable error certificate.
//!
//! ```
//! use ezdp::{solve, validate, RawModel, SolveOptions};
//!
//! let raw: RawModel<f64> = serde_json::from_str(r#"{
//!     "n_states": 1, "n_actions": 1, "feasible": [[0]],
//!     "utility": [[2.0]], "transition": [[[1.0]]],
//!     "beta": 0.9, "rho": 0.5, "gamma": 0.75
//! }"#).unwrap();
//! let m = validate(raw).unwrap();
//! let report = solve(&m, &SolveOptions::default()).unwrap();
//! assert!((report.v_star.values[0] - 2.0).abs() < 1e-9);
//! ```

// `!(x < y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dubounds;
pub mod error;
pub mod model;
pub mod operators;
pub mod policyeval;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    classify, derive, validate, CaseClass, DerivedParams, Mdp, RawModel, Space, ValueFn,
};
pub use operators::{OperatorKind, Optimizer, Policy};
pub use scalar::Scalar;
pub use solver::{solve, SolveOptions, SolveReport};

/// Double precision instantiations.
pub type Mdp64 = Mdp<f64>;
pub type RawModel64 = RawModel<f64>;
pub type DerivedParams64 = DerivedParams<f64>;
pub type ValueFn64 = ValueFn<f64>;
pub type SolveReport64 = SolveReport<f64>;

/// Single precision instantiations.
pub type Mdp32 = Mdp<f32>;
pub type RawModel32 = RawModel<f32>;
pub type DerivedParams32 = DerivedParams<f32>;
pub type ValueFn32 = ValueFn<f32>;
