pub mod adiabatic;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod matching;
pub mod rabi;
pub mod rates;
pub mod superop;
pub mod spectroscopy;
pub mod sw;

pub use error::{Error, Result};
