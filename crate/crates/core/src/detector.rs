//! Sum-frequency detection: a spectrometer and photodiode behind the
//! up-conversion crystal for classical pulses, coincidence up-conversion for
//! photon pairs, and Poisson count sampling.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::source::{BiphotonState, SourceParams};
use crate::spectral::{rms_width, ClassicalField, FrequencyGrid};
use crate::units::FWHM_PER_SIGMA;

/// Acceptance of the up-conversion crystal as a function of the sum
/// frequency Ω₃ = Ω₁ + Ω₂ (detuning from twice the carrier).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpconversionAcceptance {
    Constant,
    /// `exp{−Ω₃²/(2Δ²)}` with Δ = `width` (rad/fs).
    GaussianSum { width: f64 },
}

impl UpconversionAcceptance {
    pub fn eval(&self, sum_detuning: f64) -> f64 {
        match self {
            UpconversionAcceptance::Constant => 1.0,
            UpconversionAcceptance::GaussianSum { width } => (-0.5 * (sum_detuning / width).powi(2)).exp(),
        }
    }
}

/// Detection chain parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub acceptance: UpconversionAcceptance,
    /// Transmission T of the setup per photon.
    pub transmission: f64,
    /// Detector quantum efficiency η.
    pub efficiency: f64,
    /// Dark count rate (Hz).
    pub dark_rate: f64,
    /// Length of one counting bin (s).
    pub integration_time: f64,
    /// Calibration constant κ linking the model amplitude to a count rate.
    pub rate_scale: f64,
}

/// Count rate of the unshaped default source at the detector (Hz), used to fix κ.
pub const REFERENCE_RATE: f64 = 12.8;

impl Default for DetectorParams {
    fn default() -> Self {
        let mut params = Self {
            acceptance: UpconversionAcceptance::GaussianSum { width: 0.35e-3 },
            transmission: 0.62,
            efficiency: 0.17,
            dark_rate: 10.8,
            integration_time: 5.0,
            rate_scale: 1.0,
        };
        // |∫ψ dΩ|² of a normalized Gaussian ψ is 2√(2π)·s with s the std of |ψ|².
        let source = SourceParams::default();
        let s = 2.0 * source.marginal_half_width() / FWHM_PER_SIGMA;
        let overlap = 2.0 * (2.0 * std::f64::consts::PI).sqrt() * s;
        params.rate_scale = REFERENCE_RATE / (source.pair_rate * params.pair_factor() * overlap);
        params
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("transmission", self.transmission), ("efficiency", self.efficiency)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(invalid(format!("dark rate must be non-negative, got {}", self.dark_rate)));
        }
        if !(self.integration_time > 0.0) {
            return Err(invalid(format!(
                "integration time must be positive, got {}",
                self.integration_time
            )));
        }
        if !(self.rate_scale >= 0.0) {
            return Err(invalid(format!("rate scale must be non-negative, got {}", self.rate_scale)));
        }
        if let UpconversionAcceptance::GaussianSum { width } = self.acceptance {
            if !(width > 0.0) {
                return Err(invalid(format!("acceptance width must be positive, got {width}")));
            }
        }
        Ok(())
    }

    /// T²·η: both photons must survive the setup, one up-converted photon is detected.
    pub fn pair_factor(&self) -> f64 {
        self.transmission * self.transmission * self.efficiency
    }

    /// Same parameters with κ chosen so that `state` produces `rate` (Hz).
    pub fn calibrated_to(&self, state: &BiphotonState, rate: f64) -> Result<Self> {
        let unit = Self {
            rate_scale: 1.0,
            ..self.clone()
        };
        let base = coincidence_rate(state, &unit)?;
        if !(base > 0.0) {
            return Err(invalid("cannot calibrate against a state with zero rate"));
        }
        Ok(Self {
            rate_scale: rate / base,
            ..self.clone()
        })
    }
}

/// Up-converted spectrum and the photodiode signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SfgSignal {
    /// Grid of the sum frequency, centred on twice the input carrier.
    pub grid: FrequencyGrid,
    pub spectrum: Vec<Complex64>,
    /// `∫|S(Ω₃)|² dΩ₃`.
    pub photodiode: f64,
}

/// Classical SFG of `field` after a residual quadratic phase `(c₂/2)Ω²` on
/// the field: `S(Ω₃) = f_UC(Ω₃) ∫ E(Ω) E(Ω₃ − Ω) dΩ`.
pub fn sfg_classical(field: &ClassicalField, params: &DetectorParams, c2: f64) -> Result<SfgSignal> {
    params.validate()?;
    let grid = *field.grid();
    let intensity = field.spectral_intensity();
    let width = FWHM_PER_SIGMA * rms_width(&grid.detunings(), &intensity);
    if grid.span() < 3.0 * width {
        return Err(Error::Configuration(format!(
            "grid span {:.4e} rad/fs is below three spectral widths ({:.4e} rad/fs)",
            grid.span(),
            3.0 * width
        )));
    }
    let chirped = field.with_phase(|w| 0.5 * c2 * w * w);
    let n = grid.count();
    let size = 2 * n;
    let mut buf: Vec<Complex64> = chirped.amplitude().to_vec();
    buf.resize(size, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|v| *v = *v * *v);
    planner.plan_fft_inverse(size).process(&mut buf);
    let d = grid.spacing();
    let out_grid = FrequencyGrid::with_spacing(2.0 * grid.center(), d, size)?;
    // linear convolution index j sits at Ω₃ = (j − 2h)·d; output index i at (i − n)·d
    let offset = n - 2 * grid.zero_index();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); size];
    for j in 0..(2 * n - 1) {
        let i = j + offset;
        if i < size {
            let value = buf[j] * (d / size as f64);
            spectrum[i] = value * params.acceptance.eval(out_grid.detuning(i));
        }
    }
    let photodiode = spectrum.iter().map(|s| s.norm_sqr()).sum::<f64>() * d;
    Ok(SfgSignal {
        grid: out_grid,
        spectrum,
        photodiode,
    })
}

/// Expected up-conversion coincidence rate (Hz),
/// `κ · pair rate · T² · η · |∫ψ(Ω) dΩ|²`. The sum frequency of every pair
/// equals ω_p, so f_UC contributes a constant that is absorbed into κ.
pub fn coincidence_rate(state: &BiphotonState, params: &DetectorParams) -> Result<f64> {
    params.validate()?;
    let amplitude: Complex64 = state.psi().iter().sum::<Complex64>() * state.grid().spacing();
    Ok(params.rate_scale * state.pair_rate * params.pair_factor() * amplitude.norm_sqr())
}

/// Counts in one integration bin: Poisson with mean (rate + dark)·t.
pub fn sample_counts_with<R: Rng + ?Sized>(rate: f64, params: &DetectorParams, rng: &mut R) -> Result<u64> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(invalid(format!("count rate must be a non-negative number, got {rate}")));
    }
    params.validate()?;
    let mean = (rate + params.dark_rate) * params.integration_time;
    if mean == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(mean).map_err(|e| invalid(e.to_string()))?;
    Ok(poisson.sample(rng) as u64)
}

/// [`sample_counts_with`] using a generator seeded from `seed`.
pub fn sample_counts(rate: f64, params: &DetectorParams, seed: u64) -> Result<u64> {
    sample_counts_with(rate, params, &mut ChaCha8Rng::seed_from_u64(seed))
}
