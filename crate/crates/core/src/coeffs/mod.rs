//! Time-varying coefficients, impulse sequences and the expression language
//! used to declare them.

mod expr;
mod functions;

pub use expr::{BinOp, Constant, Expr, Expression, Func, ParseError, Var};
pub use functions::{ImpulseSequence, Indexed, MatrixFunction, VectorFunction};
