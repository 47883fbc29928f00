//! Simulation and analysis of spectrally shaped energy-time entangled photon
//! pairs and of their classical counterparts: sources, a 4f pulse shaper with
//! a pixelated SLM, grating-compressor dispersion, sum-frequency detection,
//! two-photon rates, and the scan analyses built on them.

pub mod analysis;
pub mod detector;
pub mod error;
pub mod fit;
pub mod optics;
pub mod rates;
pub mod shaper;
pub mod source;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};
