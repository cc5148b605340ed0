//! Numerical construction and verification of surfaces in the Bonnet
//! problem: CMC surfaces (including theta-function solutions), Bonnet
//! pairs from isothermic surfaces and Bonnet families from the Hazzidakis
//! equation.

pub mod bonnetfam;
pub mod bonnetpair;
pub mod error;
pub mod frameflow;
pub mod quatgeo;
pub mod thetagap;
pub mod weierstrass;

pub use error::{GeomError, Result};
