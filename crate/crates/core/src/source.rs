//! Down-conversion source: reduced biphoton amplitudes, the full joint
//! spectral amplitude, pump tuning and flux metrics.
//!
//! The marginal envelope of the reduced amplitude is a model input. The
//! sum-frequency phase-matching function only constrains ω_s + ω_i, so the
//! difference-frequency shape has to be supplied (Gaussian with 98 nm FWHM by
//! default).

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::spectral::{check_finite, energy, to_time_domain, FrequencyGrid};
use crate::units::{
    half_omega_to_wavelength_width, wavelength_to_omega, wavelength_width_to_half_omega, wavelength_width_to_hz, watts_to_photon_flux,
    FWHM_PER_SIGMA,
};

/// Temperature range of the crystal heater, °C.
pub const HEATER_RANGE: f64 = 52.0;

/// Sum-frequency phase-matching function
/// `f(ω_s, ω_i) = exp{−(ω_p − ω_s − ω_i)²/(2Δω_p²)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatching {
    /// Sum-frequency acceptance width Δω_p (rad/fs). `f64::INFINITY` gives f ≡ 1.
    pub acceptance: f64,
    /// Crystal length (mm), informational.
    pub crystal_length: f64,
    /// Pump tuning coefficient ∂λ_p/∂T (nm/°C).
    pub temp_coefficient: f64,
}

impl Default for PhaseMatching {
    fn default() -> Self {
        Self {
            acceptance: 0.35e-3,
            crystal_length: 12.0,
            temp_coefficient: -0.019,
        }
    }
}

impl PhaseMatching {
    pub fn unity() -> Self {
        Self {
            acceptance: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.acceptance > 0.0) {
            return Err(invalid(format!("phase-matching acceptance must be positive, got {}", self.acceptance)));
        }
        Ok(())
    }

    /// Value at sum-frequency mismatch `sum_detuning` = ω_s + ω_i − ω_p.
    pub fn eval(&self, sum_detuning: f64) -> f64 {
        if self.acceptance.is_infinite() {
            1.0
        } else {
            (-sum_detuning * sum_detuning / (2.0 * self.acceptance * self.acceptance)).exp()
        }
    }
}

/// Shape of the marginal (difference-frequency) envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// Gaussian whose |ψ|² has the given FWHM on the wavelength axis (nm).
    Gaussian { fwhm_nm: f64 },
    /// Constant over a band of the given full width on the wavelength axis (nm).
    FlatTop { width_nm: f64 },
}

impl Envelope {
    /// Gaussian envelope whose temporal correlation |ψ(t)|² has RMS width
    /// `tau_fs` for photons centred at `center_nm`.
    pub fn for_correlation_time(tau_fs: f64, center_nm: f64) -> Result<Self> {
        if !(tau_fs > 0.0) || !tau_fs.is_finite() {
            return Err(invalid(format!("correlation time must be positive, got {tau_fs}")));
        }
        // σ_t σ_ω = 1/2 for the intensity widths of a transform-limited Gaussian
        let half = 0.5 * FWHM_PER_SIGMA / (2.0 * tau_fs);
        Ok(Envelope::Gaussian {
            fwhm_nm: half_omega_to_wavelength_width(wavelength_to_omega(center_nm), half),
        })
    }

    pub fn width_nm(&self) -> f64 {
        match *self {
            Envelope::Gaussian { fwhm_nm } => fwhm_nm,
            Envelope::FlatTop { width_nm } => width_nm,
        }
    }
}

/// Parameters of the down-conversion source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceParams {
    pub pump_wavelength: f64,
    pub envelope: Envelope,
    /// Pairs per second leaving the source.
    pub pair_rate: f64,
    /// Entanglement size σ_e (µm).
    pub entanglement_size: f64,
    /// Effective entanglement time τ_e (fs).
    pub entanglement_time: f64,
    /// Down-converted power P_DC (W).
    pub down_converted_power: f64,
    pub phase_matching: PhaseMatching,
}

impl Default for SourceParams {
    fn default() -> Self {
        let power = 120e-9;
        let pump = 400.0;
        Self {
            pump_wavelength: pump,
            envelope: Envelope::Gaussian { fwhm_nm: 98.0 },
            pair_rate: 0.5 * watts_to_photon_flux(power, 2.0 * pump),
            entanglement_size: 26.0,
            entanglement_time: 24.4,
            down_converted_power: power,
            phase_matching: PhaseMatching::default(),
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pump_wavelength > 0.0) {
            return Err(invalid(format!("pump wavelength must be positive, got {}", self.pump_wavelength)));
        }
        if !(self.envelope.width_nm() > 0.0) {
            return Err(invalid(format!("marginal width must be positive, got {}", self.envelope.width_nm())));
        }
        if !(self.pair_rate >= 0.0) {
            return Err(invalid(format!("pair rate must be non-negative, got {}", self.pair_rate)));
        }
        self.phase_matching.validate()
    }

    pub fn pump_frequency(&self) -> f64 {
        wavelength_to_omega(self.pump_wavelength)
    }

    /// Degenerate signal/idler wavelength (nm).
    pub fn degenerate_wavelength(&self) -> f64 {
        2.0 * self.pump_wavelength
    }

    /// Half width (rad/fs) of the marginal envelope at its half-maximum (or
    /// band edge for flat-top envelopes).
    pub fn marginal_half_width(&self) -> f64 {
        wavelength_width_to_half_omega(self.degenerate_wavelength(), self.envelope.width_nm())
    }

    /// Marginal amplitude at detuning Ω from ω_p/2.
    pub fn envelope_amplitude(&self, detuning: f64) -> f64 {
        let h = self.marginal_half_width();
        match self.envelope {
            Envelope::Gaussian { .. } => {
                // |ψ|² = exp(−Ω²/(2s²)) with FWHM 2h
                let s = 2.0 * h / FWHM_PER_SIGMA;
                (-detuning * detuning / (4.0 * s * s)).exp()
            }
            Envelope::FlatTop { .. } => {
                if detuning.abs() <= h {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Grid centred on ω_p/2, suitable for [`biphoton_reduced`].
    pub fn biphoton_grid(&self, span: f64, count: usize) -> Result<FrequencyGrid> {
        FrequencyGrid::new(0.5 * self.pump_frequency(), span, count)
    }
}

/// Reduced biphoton amplitude ψ(Ω) on the anti-diagonal ω_s + ω_i = ω_p,
/// with ω_s = ω_p/2 + Ω and ω_i = ω_p/2 − Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonState {
    grid: FrequencyGrid,
    psi: Vec<Complex64>,
    pub pump_frequency: f64,
    /// Pairs per second at the source.
    pub pair_rate: f64,
    /// σ_e (µm).
    pub entanglement_size: f64,
    /// τ_e (fs).
    pub entanglement_time: f64,
}

impl BiphotonState {
    pub fn new(
        grid: FrequencyGrid,
        psi: Vec<Complex64>,
        pump_frequency: f64,
        pair_rate: f64,
        entanglement_size: f64,
        entanglement_time: f64,
    ) -> Result<Self> {
        if psi.len() != grid.count() {
            return Err(invalid(format!("ψ length {} does not match grid count {}", psi.len(), grid.count())));
        }
        check_finite(&psi, "biphoton amplitude")?;
        if !(pump_frequency > 0.0) {
            return Err(invalid("pump frequency must be positive"));
        }
        Ok(Self {
            grid,
            psi,
            pump_frequency,
            pair_rate,
            entanglement_size,
            entanglement_time,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    /// Σ|ψ|²·dΩ. Equals one for freshly generated states; shaping losses
    /// lower it.
    pub fn norm(&self) -> f64 {
        energy(&self.psi, self.grid.spacing())
    }

    pub fn marginal(&self) -> Vec<f64> {
        self.psi.iter().map(|p| p.norm_sqr()).collect()
    }

    /// Same state with a different amplitude on the same grid.
    pub fn with_psi(&self, psi: Vec<Complex64>) -> Result<Self> {
        Self::new(
            self.grid,
            psi,
            self.pump_frequency,
            self.pair_rate,
            self.entanglement_size,
            self.entanglement_time,
        )
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(invalid("cannot normalize a zero biphoton amplitude"));
        }
        let s = 1.0 / n.sqrt();
        self.with_psi(self.psi.iter().map(|p| p * s).collect())
    }

    /// RMS width (fs) of the temporal correlation |ψ(t)|², with t the delay
    /// between signal and idler arrival.
    pub fn correlation_time(&self) -> f64 {
        let (t, field) = to_time_domain(&self.grid, &self.psi);
        let w: Vec<f64> = field.iter().map(|f| f.norm_sqr()).collect();
        crate::spectral::rms_width(&t, &w)
    }
}

/// Reduced (monochromatic-pump) biphoton amplitude with a transform-limited
/// marginal envelope.
pub fn biphoton_reduced(params: &SourceParams, grid: &FrequencyGrid) -> Result<BiphotonState> {
    params.validate()?;
    let omega_p = params.pump_frequency();
    if (grid.center() - 0.5 * omega_p).abs() > 1e-9 * omega_p {
        return Err(Error::Configuration(format!(
            "biphoton grid must be centred at ω_p/2 = {:.9} rad/fs, got {:.9}",
            0.5 * omega_p,
            grid.center()
        )));
    }
    let width = 2.0 * params.marginal_half_width();
    if grid.span() < 3.0 * width {
        return Err(Error::Configuration(format!(
            "grid span {:.4} rad/fs is narrower than three marginal widths ({:.4} rad/fs)",
            grid.span(),
            3.0 * width
        )));
    }
    let psi: Vec<Complex64> = grid
        .detunings()
        .into_iter()
        .map(|w| Complex64::new(params.envelope_amplitude(w), 0.0))
        .collect();
    let norm = energy(&psi, grid.spacing());
    if !(norm > 0.0) {
        return Err(Error::Configuration("marginal envelope has no support on the grid".into()));
    }
    let s = 1.0 / norm.sqrt();
    BiphotonState::new(
        *grid,
        psi.into_iter().map(|p| p * s).collect(),
        omega_p,
        params.pair_rate,
        params.entanglement_size,
        params.entanglement_time,
    )
}

/// Pump spectral envelope E_p(ω_s + ω_i − ω_p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpEnvelope {
    /// Gaussian width `l` in `exp{−x²/(2l²)}` (rad/fs). Zero is a
    /// monochromatic pump resolved to one grid cell.
    pub linewidth: f64,
    pub amplitude: f64,
}

impl PumpEnvelope {
    pub fn monochromatic() -> Self {
        Self {
            linewidth: 0.0,
            amplitude: 1.0,
        }
    }

    pub fn gaussian(linewidth: f64) -> Self {
        Self { linewidth, amplitude: 1.0 }
    }

    fn eval(&self, sum_detuning: f64, spacing: f64) -> f64 {
        if self.linewidth == 0.0 {
            if sum_detuning.abs() < 0.5 * spacing {
                self.amplitude
            } else {
                0.0
            }
        } else {
            self.amplitude * (-sum_detuning * sum_detuning / (2.0 * self.linewidth * self.linewidth)).exp()
        }
    }
}

/// Joint spectral amplitude Λ(Ω_s, Ω_i) on a square grid of detunings from
/// ω_p/2, stored row-major with the signal index first.
#[derive(Debug, Clone, PartialEq)]
pub struct Jsa2D {
    grid: FrequencyGrid,
    amplitude: Vec<Complex64>,
    pub pump: PumpEnvelope,
    pub phase_matching: PhaseMatching,
}

impl Jsa2D {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn get(&self, signal: usize, idler: usize) -> Complex64 {
        self.amplitude[signal * self.grid.count() + idler]
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    /// Λ(Ω, −Ω) for every Ω whose mirror sample exists.
    pub fn anti_diagonal(&self) -> Vec<Complex64> {
        (0..self.grid.count())
            .map(|k| match self.grid.mirror_index(k) {
                Some(j) => self.get(k, j),
                None => Complex64::new(0.0, 0.0),
            })
            .collect()
    }

    /// Marginal of |Λ|² over the difference coordinate, indexed by the
    /// sum detuning `(k + l − 2·zero)·spacing`, k + l = 0..2n−1.
    pub fn sum_marginal(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.count();
        let z = self.grid.zero_index() as f64;
        let mut out = vec![0.0; 2 * n - 1];
        for s in 0..n {
            for i in 0..n {
                out[s + i] += self.get(s, i).norm_sqr();
            }
        }
        let x = (0..2 * n - 1).map(|m| (m as f64 - 2.0 * z) * self.grid.spacing()).collect();
        (x, out)
    }
}

/// Λ(Ω_s, Ω_i) = E_p(Ω_s + Ω_i) · f_DC(Ω_s + Ω_i) · envelope((Ω_s − Ω_i)/2).
pub fn jsa_full(
    pump: PumpEnvelope,
    phase_matching: &PhaseMatching,
    params: &SourceParams,
    grid: &FrequencyGrid,
) -> Result<Jsa2D> {
    if !(pump.linewidth >= 0.0) {
        return Err(invalid(format!("pump linewidth must be non-negative, got {}", pump.linewidth)));
    }
    phase_matching.validate()?;
    let n = grid.count();
    let det = grid.detunings();
    let mut amplitude = Vec::with_capacity(n * n);
    for &ws in &det {
        for &wi in &det {
            let sum = ws + wi;
            let v = pump.eval(sum, grid.spacing()) * phase_matching.eval(sum) * params.envelope_amplitude(0.5 * (ws - wi));
            amplitude.push(Complex64::new(v, 0.0));
        }
    }
    check_finite(&amplitude, "joint spectral amplitude")?;
    Ok(Jsa2D {
        grid: *grid,
        amplitude,
        pump,
        phase_matching: *phase_matching,
    })
}

/// Pump wavelength after changing the crystal temperature by `delta_t` (°C).
pub fn pump_tune_temperature(delta_t: f64, params: &SourceParams) -> Result<f64> {
    if !(delta_t.abs() <= HEATER_RANGE) {
        return Err(Error::Range(format!(
            "temperature change {delta_t} °C exceeds the heater range of {HEATER_RANGE} °C"
        )));
    }
    Ok(params.pump_wavelength + params.phase_matching.temp_coefficient * delta_t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxMetrics {
    /// Photons per second.
    pub flux: f64,
    /// Photons per spectral-temporal mode.
    pub mode_density: f64,
}

/// Photon flux φ = Pλ/(hc) and mode density n = φ/Δν with Δν = cΔλ/λ².
pub fn flux_metrics(power: f64, wavelength_nm: f64, width_nm: f64) -> Result<FluxMetrics> {
    if !(power >= 0.0) || !(wavelength_nm > 0.0) || !(width_nm > 0.0) {
        return Err(invalid("flux metrics need P ≥ 0, λ > 0 and Δλ > 0"));
    }
    let flux = watts_to_photon_flux(power, wavelength_nm);
    Ok(FluxMetrics {
        flux,
        mode_density: flux / wavelength_width_to_hz(wavelength_nm, width_nm),
    })
}
