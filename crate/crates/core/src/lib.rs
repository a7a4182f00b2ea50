pub mod error;
pub mod experiments;
pub mod funcspace;
pub mod heatkernel;
pub mod levykernel;
pub mod modulus;
pub mod montecarlo;
pub mod nonlocal;
pub mod quadrature;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
