//! Scan orchestration (dispersion, grating-shift and autocorrelation scans)
//! and time-frequency analysis of the resulting traces.

mod scan;
mod spectrogram;

pub use crate::fit::{fit_model, FitResult, ModelKind};
pub use scan::{
    classical_dispersion_signal, dispersion_scan_classical, dispersion_scan_quantum, gvd_slope, half_max_width,
    iac_scan, quantum_dispersion_rate, GvdSlope, Sampling, ScanResult, ScanSample, Shaping, PEAK_FIT_POINTS,
};
pub use spectrogram::{spectrogram, Spectrogram};
