//! Laser cooling of a trapped atom inside a driven optical cavity.
//!
//! Analytic heating and cooling rates in the Lamb-Dicke and weak-drive
//! regimes, rate-equation dynamics of the phonon distribution, detuning-plane
//! sweeps, and a brute-force Lindblad solver used to check the rates.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rates;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{DetuningPoint, DressedStates, SystemParams};
pub use rates::{CoolingResult, RateBreakdown, RatePair};
