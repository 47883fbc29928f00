use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

/// Sliding-window Fourier magnitude of a uniformly sampled scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Center of every window (same unit as the scan axis).
    pub times: Vec<f64>,
    /// Angular frequency of every bin (rad per scan-axis unit).
    pub frequencies: Vec<f64>,
    /// `magnitude[window][bin]`.
    pub magnitude: Vec<Vec<f64>>,
    pub log_scale: bool,
}

/// Hann-windowed short-time Fourier transform with a hop of one sample.
/// Each window has its mean removed before the transform; the result has
/// `(n − window + 1)` rows and `window/2 + 1` frequency bins at
/// `ω_k = 2πk/(window·dτ)`. With `log_scale` the magnitudes are `log10(m + 1e-12·max)`.
pub fn spectrogram(values: &[f64], step: f64, window: usize, log_scale: bool) -> Result<Spectrogram> {
    if window < 2 {
        return Err(invalid(format!("window must hold at least two samples, got {window}")));
    }
    if window > values.len() {
        return Err(invalid(format!(
            "window of {window} samples exceeds the scan length {}",
            values.len()
        )));
    }
    if !(step > 0.0) {
        return Err(invalid(format!("sample step must be positive, got {step}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrogram input"));
    }
    let taper: Vec<f64> = (0..window)
        .map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / window as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(window);
    let bins = window / 2 + 1;
    let rows = values.len() - window + 1;
    let mut magnitude = Vec::with_capacity(rows);
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for start in 0..rows {
        let slice = &values[start..start + window];
        let mean = slice.iter().sum::<f64>() / window as f64;
        for ((b, v), t) in buf.iter_mut().zip(slice).zip(&taper) {
            *b = Complex64::new((v - mean) * t, 0.0);
        }
        fft.process(&mut buf);
        magnitude.push(buf[..bins].iter().map(|c| c.norm()).collect::<Vec<f64>>());
    }
    if log_scale {
        let max = magnitude.iter().flatten().cloned().fold(0.0f64, f64::max);
        let floor = 1e-12 * max.max(f64::MIN_POSITIVE);
        for row in magnitude.iter_mut() {
            row.iter_mut().for_each(|m| *m = (*m + floor).log10());
        }
    }
    let times = (0..rows).map(|r| (r as f64 + 0.5 * (window - 1) as f64) * step).collect();
    let frequencies = (0..bins).map(|k| 2.0 * PI * k as f64 / (window as f64 * step)).collect();
    Ok(Spectrogram {
        times,
        frequencies,
        magnitude,
        log_scale,
    })
}

impl Spectrogram {
    pub fn rows(&self) -> usize {
        self.magnitude.len()
    }

    pub fn bins(&self) -> usize {
        self.frequencies.len()
    }

    /// Offset the time axis, e.g. to the first sample of the scan.
    pub fn shifted(mut self, origin: f64) -> Self {
        self.times.iter_mut().for_each(|t| *t += origin);
        self
    }

    /// Frequencies of the ridges: local maxima (above the lowest `skip`
    /// bins) of the per-bin maximum over all windows that reach
    /// `threshold` times the largest value. Linear magnitudes only.
    pub fn ridges(&self, threshold: f64, skip: usize) -> Vec<f64> {
        let profile: Vec<f64> = (0..self.bins())
            .map(|k| self.magnitude.iter().map(|row| row[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let top = profile.iter().skip(skip).cloned().fold(f64::NEG_INFINITY, f64::max);
        (skip.max(1)..self.bins())
            .filter(|&k| {
                let left = profile[k - 1];
                let right = profile.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
                profile[k] >= threshold * top && profile[k] > left && profile[k] >= right
            })
            .map(|k| self.frequencies[k])
            .collect()
    }

    /// Long-format CSV `tau, omega, magnitude`, keeping every `stride`-th window.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "omega", "magnitude"])?;
        w.write_record(["fs", "rad/fs", if self.log_scale { "log10" } else { "1" }])?;
        for (t, row) in self.times.iter().zip(&self.magnitude).step_by(stride) {
            for (f, m) in self.frequencies.iter().zip(row) {
                w.write_record([format!("{t:.12e}"), format!("{f:.12e}"), format!("{m:.12e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
