//! Numerical toolkit for Λ-Fleming-Viot processes written as Wright-Fisher
//! generators with a random linear argument `x(1-W) + WV`.

pub mod death;
pub mod error;
pub mod fixation;
pub mod generator;
pub mod measure;
pub mod poly;
pub mod quad;
pub mod rates;
pub mod sim;
pub mod special;
pub mod spectral;
pub mod stationary;

pub use error::{Error, Result};
pub use measure::{Atom, BetaPart, LambdaMeasure, WLaw};
