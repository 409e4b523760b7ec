pub mod dynamics;
pub mod environment;
pub mod error;
pub mod fan;
pub mod fronts;
pub mod hamiltonian;
pub mod linalg;
pub mod modes;
pub mod quadrature;

pub use environment::MediumModel;
pub use error::{Error, ErrorClass, Result};
