pub mod error;
pub mod floquet;
pub mod json;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod simulate;
pub mod sweep;
pub mod systems;
pub mod transition;

pub use error::{Error, Result};
