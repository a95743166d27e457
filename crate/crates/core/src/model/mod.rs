//! System description: coefficient expressions, the argument grid and the
//! JSON document format.

pub mod expr;
pub mod grid;
pub mod system;

pub use expr::{parse_expression, Expr, Func};
pub use grid::ArgumentGrid;
pub use system::{
    load_system, load_system_with, LoadOptions, MatrixFunction, Scalar, SystemDocument, SystemSpec,
    Tolerances, MAX_DIM,
};
