//! Linear impulsive differential equations with piecewise constant arguments
//! of generalized type: fundamental matrices, the variation-of-parameters
//! representation, Green kernels, closed forms, an independent Picard oracle
//! and Gronwall-type bounds.

pub mod bounds;
pub mod cli;
pub mod closedforms;
pub mod coeffs;
pub mod config;
pub mod error;
pub mod fundamental;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod scenarios;
pub mod system;
pub mod transition;
pub mod vop;

pub use bounds::{gronwall1_bound, gronwall2_bound, h1_constants, GronwallData, ScalarFunction, ZetaReading};
pub use closedforms::{solve_advanced, solve_b_only, solve_constant, solve_delayed, ConstantForm, ConstantSystem};
pub use coeffs::{Expression, ImpulseSequence, Indexed, MatrixFunction, VectorFunction};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use fundamental::{FundamentalEngine, Side};
pub use grid::{GridSpec, Partition};
pub use kernel::{H3Report, KernelEngine};
pub use oracle::{h2_check, picard_solve, H2Report, PicardConfig};
pub use scenarios::{classify_s1, Scenario};
pub use system::{Ivp, LinearSystem, Numerics, TransitionMethod};
pub use vop::{H3Policy, Trajectory, VopSolver};
