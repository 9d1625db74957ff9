pub mod asymptotics;
pub mod error;
pub mod fit;
pub mod lab;
pub mod coeffs;
pub mod mat2;
pub mod multiplier;
pub mod ode;
pub mod quad;
pub mod rates;
pub mod special;
pub mod suite;
pub mod zones;

pub use error::{LabError, Result};
