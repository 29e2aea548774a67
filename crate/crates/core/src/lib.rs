pub mod angular;
pub mod cardy;
pub mod error;
pub mod excursions;
pub mod exponents;
pub mod fit;
pub mod loewner;
pub mod stochastic;
pub mod walk;

pub use error::{Error, Result};
