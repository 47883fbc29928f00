//! Frequency grids, classical spectral fields, and the spectral↔temporal
//! transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

/// Uniform sampling of the detuning Ω = ω − center.
///
/// Sample `k` sits at `(k − count/2)·spacing` (integer division), so Ω = 0 is
/// always on the grid and the layout matches the usual FFT ordering after a
/// shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    center: f64,
    spacing: f64,
    count: usize,
}

impl FrequencyGrid {
    pub const MIN_COUNT: usize = 8;

    /// Grid of `count` samples covering `span` (rad/fs) around `center`.
    pub fn new(center: f64, span: f64, count: usize) -> Result<Self> {
        if !(span > 0.0) || !span.is_finite() {
            return Err(invalid(format!("grid span must be positive, got {span}")));
        }
        if count < Self::MIN_COUNT {
            return Err(invalid(format!(
                "grid count must be at least {}, got {count}",
                Self::MIN_COUNT
            )));
        }
        Self::with_spacing(center, span / (count - 1) as f64, count)
    }

    pub fn with_spacing(center: f64, spacing: f64, count: usize) -> Result<Self> {
        if !(center > 0.0) || !center.is_finite() {
            return Err(invalid(format!("grid center must be a positive frequency, got {center}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        if count < Self::MIN_COUNT {
            return Err(invalid(format!(
                "grid count must be at least {}, got {count}",
                Self::MIN_COUNT
            )));
        }
        Ok(Self { center, spacing, count })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Index of the Ω = 0 sample.
    pub fn zero_index(&self) -> usize {
        self.count / 2
    }

    /// Distance between the first and last sample.
    pub fn span(&self) -> f64 {
        self.spacing * (self.count - 1) as f64
    }

    pub fn detuning(&self, k: usize) -> f64 {
        (k as f64 - self.zero_index() as f64) * self.spacing
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.center + self.detuning(k)
    }

    pub fn detunings(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.detuning(k)).collect()
    }

    pub fn min_detuning(&self) -> f64 {
        self.detuning(0)
    }

    pub fn max_detuning(&self) -> f64 {
        self.detuning(self.count - 1)
    }

    /// Index of the sample at −Ω for sample `k`, if it exists on the grid.
    pub fn mirror_index(&self, k: usize) -> Option<usize> {
        let j = 2 * self.zero_index() as isize - k as isize;
        (j >= 0 && (j as usize) < self.count).then_some(j as usize)
    }

    /// Time step of the conjugate grid produced by [`to_time_domain`].
    pub fn time_step(&self) -> f64 {
        2.0 * PI / (self.count as f64 * self.spacing)
    }
}

/// Classical pulse train described by its complex spectral envelope.
///
/// The amplitude is normalized such that `Σ|E_k|²·spacing` equals the number
/// of photons per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalField {
    grid: FrequencyGrid,
    amplitude: Vec<Complex64>,
    repetition_rate: f64,
    pub polarization: String,
}

impl ClassicalField {
    pub fn new(grid: FrequencyGrid, amplitude: Vec<Complex64>, repetition_rate: f64) -> Result<Self> {
        if amplitude.len() != grid.count() {
            return Err(invalid(format!(
                "amplitude length {} does not match grid count {}",
                amplitude.len(),
                grid.count()
            )));
        }
        check_finite(&amplitude, "field amplitude")?;
        if !(repetition_rate > 0.0) || !repetition_rate.is_finite() {
            return Err(invalid(format!("repetition rate must be positive, got {repetition_rate}")));
        }
        Ok(Self {
            grid,
            amplitude,
            repetition_rate,
            polarization: "s".to_string(),
        })
    }

    /// Transform-limited Gaussian pulse whose spectral intensity |E(Ω)|² has
    /// standard deviation `sigma` (rad/fs).
    pub fn gaussian(grid: FrequencyGrid, sigma: f64, photons_per_pulse: f64, repetition_rate: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid(format!("spectral width must be positive, got {sigma}")));
        }
        let amplitude = grid
            .detunings()
            .into_iter()
            .map(|w| Complex64::new((-w * w / (4.0 * sigma * sigma)).exp(), 0.0))
            .collect();
        Self::new(grid, amplitude, repetition_rate)?.with_photons_per_pulse(photons_per_pulse)
    }

    /// Flat spectrum over `[lo, hi]` (detunings, rad/fs).
    pub fn flat(grid: FrequencyGrid, lo: f64, hi: f64, photons_per_pulse: f64, repetition_rate: f64) -> Result<Self> {
        let amplitude = grid
            .detunings()
            .into_iter()
            .map(|w| if (lo..=hi).contains(&w) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect();
        Self::new(grid, amplitude, repetition_rate)?.with_photons_per_pulse(photons_per_pulse)
    }

    /// Rescale the amplitude to carry `n` photons per pulse.
    pub fn with_photons_per_pulse(mut self, n: f64) -> Result<Self> {
        if !(n >= 0.0) || !n.is_finite() {
            return Err(invalid(format!("photons per pulse must be non-negative, got {n}")));
        }
        let current = self.photons_per_pulse();
        if current > 0.0 {
            let scale = (n / current).sqrt();
            self.amplitude.iter_mut().for_each(|a| *a *= scale);
        } else if n > 0.0 {
            return Err(invalid("cannot scale a zero field to a non-zero photon number"));
        }
        Ok(self)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn repetition_rate(&self) -> f64 {
        self.repetition_rate
    }

    pub fn photons_per_pulse(&self) -> f64 {
        energy(&self.amplitude, self.grid.spacing())
    }

    /// Average photon flux (photons/s).
    pub fn photon_flux(&self) -> f64 {
        self.photons_per_pulse() * self.repetition_rate
    }

    pub fn spectral_intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Same pulse train with a new amplitude on the same grid.
    pub fn with_amplitude(&self, amplitude: Vec<Complex64>) -> Result<Self> {
        let mut out = Self::new(self.grid, amplitude, self.repetition_rate)?;
        out.polarization.clone_from(&self.polarization);
        Ok(out)
    }

    /// Multiply a spectral phase φ(Ω) onto the amplitude.
    pub fn with_phase(&self, phase: impl Fn(f64) -> f64) -> Self {
        let amplitude = self
            .amplitude
            .iter()
            .enumerate()
            .map(|(k, a)| a * Complex64::from_polar(1.0, phase(self.grid.detuning(k))))
            .collect();
        Self {
            amplitude,
            ..self.clone()
        }
    }

    /// Linear interpolation of the complex amplitude onto `target`; samples
    /// outside the source grid are zero.
    pub fn resample(&self, target: &FrequencyGrid) -> Self {
        let amplitude = resample_amplitude(&self.grid, &self.amplitude, target);
        Self {
            grid: *target,
            amplitude,
            repetition_rate: self.repetition_rate,
            polarization: self.polarization.clone(),
        }
    }

    /// Temporal intensity |E⁺(t)|².
    pub fn to_time_profile(&self) -> TimeProfile {
        let (time, field) = to_time_domain(&self.grid, &self.amplitude);
        TimeProfile {
            intensity: field.iter().map(|e| e.norm_sqr()).collect(),
            time,
        }
    }
}

/// Sampled temporal intensity with its time axis (fs).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfile {
    pub time: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl TimeProfile {
    pub fn time_step(&self) -> f64 {
        self.time[1] - self.time[0]
    }

    pub fn energy(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.time_step()
    }

    pub fn rms_width(&self) -> f64 {
        rms_width(&self.time, &self.intensity)
    }

    pub fn fwhm(&self) -> Option<f64> {
        fwhm(&self.time, &self.intensity)
    }
}

/// Unitary transform to the time domain,
/// `E(t) = (2π)^{-1/2} ∫ E(Ω) e^{−iΩt} dΩ`, evaluated on the conjugate grid
/// `t_j = (j − count/2)·dt` with `dt = 2π/(count·spacing)`.
///
/// Parseval holds exactly: `Σ|E(t_j)|² dt = Σ|E(Ω_k)|² dΩ`.
pub fn to_time_domain(grid: &FrequencyGrid, amplitude: &[Complex64]) -> (Vec<f64>, Vec<Complex64>) {
    let n = grid.count();
    let h = grid.zero_index() as f64;
    let nf = n as f64;
    let dt = grid.time_step();
    // (k−h)(j−h) = kj − kh − jh + h²; the k·h and j·h terms become pre/post
    // twiddles around a plain forward DFT.
    let mut buf: Vec<Complex64> = amplitude
        .iter()
        .enumerate()
        .map(|(k, a)| a * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * h / nf))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = grid.spacing() / (2.0 * PI).sqrt();
    let global = Complex64::from_polar(scale, -2.0 * PI * h * h / nf);
    let field = buf
        .into_iter()
        .enumerate()
        .map(|(j, b)| b * global * Complex64::from_polar(1.0, 2.0 * PI * j as f64 * h / nf))
        .collect();
    let time = (0..n).map(|j| (j as f64 - h) * dt).collect();
    (time, field)
}

pub(crate) fn energy(amplitude: &[Complex64], spacing: f64) -> f64 {
    amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * spacing
}

pub(crate) fn check_finite(values: &[Complex64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn resample_amplitude(source: &FrequencyGrid, amplitude: &[Complex64], target: &FrequencyGrid) -> Vec<Complex64> {
    let last = source.count() - 1;
    (0..target.count())
        .map(|k| {
            let pos = (target.omega(k) - source.omega(0)) / source.spacing();
            // snap positions that coincide with a source sample up to rounding
            let snapped = pos.round();
            let pos = if (pos - snapped).abs() < 1e-9 { snapped } else { pos };
            if pos < 0.0 || pos > last as f64 {
                return Complex64::new(0.0, 0.0);
            }
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            if i == last || frac == 0.0 {
                amplitude[i]
            } else {
                amplitude[i] * (1.0 - frac) + amplitude[i + 1] * frac
            }
        })
        .collect()
}

/// Weighted standard deviation of `x` with non-negative weights `w`.
pub fn rms_width(x: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mean = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = x.iter().zip(w).map(|(x, w)| (x - mean).powi(2) * w).sum::<f64>() / total;
    var.sqrt()
}

/// Full width at half maximum by linear interpolation of the outermost
/// half-maximum crossings.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lo, hi) = half_max_crossings(x, y)?;
    Some(hi - lo)
}

pub fn half_max_crossings(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return None;
    }
    let half = max / 2.0;
    let first = y.iter().position(|&v| v >= half)?;
    let last = y.iter().rposition(|&v| v >= half)?;
    if first == 0 || last + 1 == y.len() {
        return None;
    }
    let interp = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    Some((interp(first - 1, first), interp(last, last + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::wavelength_to_omega;

    #[test]
    fn grid_construction() {
        let g = FrequencyGrid::new(2.3546, 0.9, 1024).unwrap();
        assert_eq!(g.count(), 1024);
        assert!((g.spacing() - 0.9 / 1023.0).abs() < 1e-15);
        assert_eq!(g.detuning(512), 0.0);
        assert!((g.span() - 0.9).abs() < 1e-12);
        let p = FrequencyGrid::new(2.0 * 2.3546, 0.1, 256).unwrap();
        assert_eq!(p.omega(p.zero_index()), 4.7092);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(matches!(FrequencyGrid::new(2.3546, 0.9, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(FrequencyGrid::new(2.3546, -0.9, 64), Err(Error::InvalidArgument(_))));
        assert!(matches!(FrequencyGrid::new(-1.0, 0.9, 64), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn grid_samples_uniform() {
        let g = FrequencyGrid::new(wavelength_to_omega(800.0), 0.9, 1000).unwrap();
        let d = g.detunings();
        for w in d.windows(2) {
            assert!(((w[1] - w[0]) / g.spacing() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nan_amplitude() {
        let g = FrequencyGrid::new(2.35, 0.5, 16).unwrap();
        let mut amp = vec![Complex64::new(1.0, 0.0); 16];
        amp[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(ClassicalField::new(g, amp, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn gaussian_pair_duration_bandwidth() {
        let g = FrequencyGrid::new(2.3546, 1.2, 2048).unwrap();
        let sigma = 0.05;
        let f = ClassicalField::gaussian(g, sigma, 1.0, 90e6).unwrap();
        let t = f.to_time_profile();
        let sw = rms_width(&g.detunings(), &f.spectral_intensity());
        assert!((sw / sigma - 1.0).abs() < 1e-6);
        let product = t.rms_width() * sw;
        assert!((product - 0.5).abs() < 0.005, "σt·σω = {product}");
    }

    #[test]
    fn parseval_and_chirp_broadening() {
        let g = FrequencyGrid::new(2.3546, 1.0, 1024).unwrap();
        let f = ClassicalField::gaussian(g, 0.04, 1000.0, 90e6).unwrap();
        let t0 = f.to_time_profile();
        assert!((t0.energy() / f.photons_per_pulse() - 1.0).abs() < 1e-9);
        let chirped = f.with_phase(|w| 0.5 * 300.0 * w * w);
        let t1 = chirped.to_time_profile();
        assert!((t1.energy() / f.photons_per_pulse() - 1.0).abs() < 1e-9);
        assert!(t1.fwhm().unwrap() > t0.fwhm().unwrap());
    }

    #[test]
    fn zero_field_zero_profile() {
        let g = FrequencyGrid::new(2.3546, 1.0, 64).unwrap();
        let f = ClassicalField::new(g, vec![Complex64::new(0.0, 0.0); 64], 1.0).unwrap();
        assert!(f.to_time_profile().intensity.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_phase_delays_pulse() {
        let g = FrequencyGrid::new(2.3546, 1.0, 512).unwrap();
        let f = ClassicalField::gaussian(g, 0.05, 1.0, 1.0).unwrap().with_phase(|w| 40.0 * w);
        let t = f.to_time_profile();
        let peak = t
            .intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((t.time[peak] - 40.0).abs() <= t.time_step());
    }

    #[test]
    fn resample_is_idempotent() {
        let g = FrequencyGrid::new(2.3546, 0.6, 300).unwrap();
        let f = ClassicalField::gaussian(g, 0.05, 1.0, 1.0).unwrap().with_phase(|w| 20.0 * w * w);
        let target = FrequencyGrid::with_spacing(2.3546, g.spacing() * 0.77, 512).unwrap();
        let once = f.resample(&target);
        let twice = once.resample(&target);
        for (a, b) in once.amplitude().iter().zip(twice.amplitude()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
