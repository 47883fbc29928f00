//! Classical and entangled two-photon rates: cross sections, pulsed
//! sum-frequency signals, and the classical→entangled coefficient chain.
//!
//! Units are carried in the argument names: cross sections in cm⁴·s and cm²,
//! β_c in m²·s, transverse sizes in µm, durations in fs, fluxes in photons/s.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_model, FitResult, ModelKind};
use crate::source::PhaseMatching;
use crate::spectral::ClassicalField;
use crate::units::{fs_to_s, um2_to_cm2, um_to_m, watts_to_photon_flux};

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be non-negative, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Two-photon absorption rate `σ_e φ + σ_c φ²`.
pub fn tpa_rate(flux: f64, sigma_e: f64, sigma_c: f64) -> Result<f64> {
    non_negative("flux", flux)?;
    non_negative("sigma_e", sigma_e)?;
    non_negative("sigma_c", sigma_c)?;
    Ok(sigma_e * flux + sigma_c * flux * flux)
}

/// Flux at which the linear and quadratic contributions are equal.
pub fn crossover_flux(sigma_e: f64, sigma_c: f64) -> Result<f64> {
    non_negative("sigma_e", sigma_e)?;
    positive("sigma_c", sigma_c)?;
    Ok(sigma_e / sigma_c)
}

/// `σ_c/(2 A_e T_e)` in whatever consistent units the caller uses.
pub fn sigma_e_consistent(sigma_c: f64, area: f64, time: f64) -> Result<f64> {
    positive("entanglement area", area)?;
    positive("entanglement time", time)?;
    non_negative("sigma_c", sigma_c)?;
    Ok(sigma_c / (2.0 * area * time))
}

/// Entangled cross section (cm²) from σ_c (cm⁴·s), A_e (µm²) and T_e (fs).
pub fn sigma_e(sigma_c_cm4s: f64, area_um2: f64, time_fs: f64) -> Result<f64> {
    positive("entanglement area", area_um2)?;
    positive("entanglement time", time_fs)?;
    sigma_e_consistent(sigma_c_cm4s, um2_to_cm2(area_um2), fs_to_s(time_fs))
}

fn pulsed_denominator(sigma_um: f64, tau_fs: f64) -> f64 {
    8.0 * PI.sqrt() * PI * PI * um_to_m(sigma_um).powi(2) * fs_to_s(tau_fs)
}

/// Average up-converted flux (photons/s) of a Gaussian pulse train,
/// `β_c/(8√π π² σ² τ ν)·I_IR²`, with σ the focal spot size (µm), τ the
/// pulse duration (fs), ν the repetition rate (Hz) and I_IR the infrared
/// photon flux (photons/s).
///
/// Integrating `ν β_c ∫φ²` for a Gaussian profile normalized to N photons
/// per pulse gives a value π times larger than this closed form. The closed
/// form is kept because the reference β_c and β_q values are tied to it.
pub fn sfg_pulsed(beta_c: f64, rep_rate: f64, sigma_um: f64, tau_fs: f64, flux_ir: f64) -> Result<f64> {
    positive("repetition rate", rep_rate)?;
    positive("spot size", sigma_um)?;
    positive("pulse duration", tau_fs)?;
    non_negative("beta_c", beta_c)?;
    non_negative("infrared flux", flux_ir)?;
    Ok(beta_c / (pulsed_denominator(sigma_um, tau_fs) * rep_rate) * flux_ir * flux_ir)
}

/// Up-converted photons per pulse for `photons` infrared photons per pulse,
/// `β_c N²/(8√π π² σ² τ)`.
pub fn sfg_per_pulse(beta_c: f64, sigma_um: f64, tau_fs: f64, photons: f64) -> Result<f64> {
    positive("spot size", sigma_um)?;
    positive("pulse duration", tau_fs)?;
    non_negative("beta_c", beta_c)?;
    non_negative("photons per pulse", photons)?;
    Ok(beta_c * photons * photons / pulsed_denominator(sigma_um, tau_fs))
}

/// Entangled up-conversion coefficient `β_c/(4√π π² σ_e² τ_e)` (dimensionless)
/// from β_c (m²·s), σ_e (µm) and τ_e (fs).
pub fn beta_q_from_beta_c(beta_c: f64, sigma_e_um: f64, tau_e_fs: f64) -> Result<f64> {
    positive("entanglement size", sigma_e_um)?;
    positive("entanglement time", tau_e_fs)?;
    non_negative("beta_c", beta_c)?;
    Ok(beta_c / (4.0 * PI.sqrt() * PI * PI * um_to_m(sigma_e_um).powi(2) * fs_to_s(tau_e_fs)))
}

/// Result of fitting `I_SFG = a·I_IR²` and mapping `a` onto β_c.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaCFit {
    /// β_c (m²·s).
    pub beta_c: f64,
    pub fit: FitResult,
}

/// Least-squares β_c from (I_IR, I_SFG) pairs in photons/s, given the
/// pulse train parameters.
pub fn beta_c_fit(points: &[(f64, f64)], rep_rate: f64, sigma_um: f64, tau_fs: f64) -> Result<BetaCFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    positive("repetition rate", rep_rate)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = fit_model(ModelKind::QuadraticThroughOrigin, &xs, &ys)?;
    let a = fit.params[0];
    if !(a > 0.0) {
        return Err(Error::FitFailure {
            reason: format!("quadratic coefficient {a:e} is not positive"),
            iterations: 0,
            last: fit.params,
        });
    }
    Ok(BetaCFit {
        beta_c: a * pulsed_denominator(sigma_um, tau_fs) * rep_rate,
        fit,
    })
}

/// Phase-matching factor
/// `p = |∬ f(Ω₁+Ω₂) E(Ω₁)E(Ω₂)| / |∬ E(Ω₁)E(Ω₂)|`.
///
/// The double sum over the field grid is reorganized along the sum
/// coordinate, `Σ_{Ω₃} f(Ω₃)·(E∗E)(Ω₃)`, which is the same rectangle rule
/// evaluated in O(N log N). The grid spacing must resolve the acceptance
/// width.
pub fn pm_factor(field: &ClassicalField, phase_matching: &PhaseMatching) -> Result<f64> {
    phase_matching.validate()?;
    let grid = field.grid();
    let total: Complex64 = field.amplitude().iter().sum();
    let denominator = total.norm_sqr();
    if !(denominator > 0.0) {
        return Err(invalid("phase-matching factor undefined for a field with zero net amplitude"));
    }
    if phase_matching.acceptance.is_infinite() {
        return Ok(1.0);
    }
    if grid.spacing() > phase_matching.acceptance {
        return Err(Error::Configuration(format!(
            "grid spacing {:.3e} rad/fs does not resolve the acceptance {:.3e} rad/fs",
            grid.spacing(),
            phase_matching.acceptance
        )));
    }
    let n = grid.count();
    let size = 2 * n;
    let mut buf: Vec<Complex64> = field.amplitude().to_vec();
    buf.resize(size, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|v| *v = *v * *v);
    planner.plan_fft_inverse(size).process(&mut buf);
    let h = grid.zero_index() as f64;
    let numerator: Complex64 = buf
        .iter()
        .take(2 * n - 1)
        .enumerate()
        .map(|(j, v)| v * phase_matching.eval((j as f64 - 2.0 * h) * grid.spacing()))
        .sum::<Complex64>()
        / size as f64;
    Ok(numerator.norm() / denominator)
}

/// β_q inferred from a measured up-conversion rate, with the convention that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaQEstimate {
    pub value: f64,
    pub convention: String,
}

/// `β_q = (R_UC/η) / (φ_DC · T²)` with φ_DC the photon flux (photons/s) of
/// the down-converted power `power_w` at `wavelength_nm`.
pub fn estimate_beta_q_measured(
    rate: f64,
    power_w: f64,
    wavelength_nm: f64,
    transmission: f64,
    efficiency: f64,
) -> Result<BetaQEstimate> {
    non_negative("up-conversion rate", rate)?;
    positive("down-converted power", power_w)?;
    positive("wavelength", wavelength_nm)?;
    positive("transmission", transmission)?;
    positive("efficiency", efficiency)?;
    let flux = watts_to_photon_flux(power_w, wavelength_nm);
    Ok(BetaQEstimate {
        value: rate / efficiency / (flux * transmission * transmission),
        convention: format!(
            "detected rate divided by efficiency ({efficiency}), by the down-converted photon flux \
             ({flux:.6e} photons/s, counted as single photons at {wavelength_nm} nm), and by T² ({})",
            transmission * transmission
        ),
    })
}

/// Where a number in the rates report comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Reported measurement or setup value used as default input.
    Default,
    /// Supplied by the user.
    Input,
    /// Computed here.
    Derived,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Default => "default",
            Provenance::Input => "input",
            Provenance::Derived => "derived",
        }
    }
}

/// Inputs of the rates chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RateParams {
    /// β_c (m²·s).
    pub beta_c: f64,
    /// Classical focal spot σ (µm).
    pub sigma_um: f64,
    /// Classical pulse duration τ (fs).
    pub tau_fs: f64,
    /// Repetition rate ν (Hz).
    pub rep_rate: f64,
    /// Entanglement size σ_e (µm).
    pub sigma_e_um: f64,
    /// Entanglement time τ_e (fs).
    pub tau_e_fs: f64,
    /// Phase-matching factor p.
    pub pm_factor: f64,
    /// Classical TPA cross section σ_c (cm⁴·s).
    pub sigma_c: f64,
    /// Measured up-conversion rate (Hz).
    pub rate_uc: f64,
    /// Down-converted power (W).
    pub power_dc: f64,
    pub wavelength_nm: f64,
    pub transmission: f64,
    pub efficiency: f64,
    /// Names of fields the user set explicitly.
    pub overridden: Vec<String>,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            beta_c: 6.5e-35,
            sigma_um: 3.7,
            tau_fs: 15.4,
            rep_rate: 90e6,
            sigma_e_um: 26.0,
            tau_e_fs: 24.4,
            pm_factor: 0.0087,
            sigma_c: 1e-49,
            rate_uc: 12.8,
            power_dc: 120e-9,
            wavelength_nm: 800.0,
            transmission: 0.62,
            efficiency: 0.17,
            overridden: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: &'static str,
    pub value: f64,
    pub unit: &'static str,
    pub provenance: Provenance,
    pub note: String,
}

/// Every input and derived quantity of the rates chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RatesReport {
    pub rows: Vec<ReportRow>,
}

impl RatesReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

pub fn rates_report(params: &RateParams) -> Result<RatesReport> {
    let p = params;
    let source = |name: &str| {
        if p.overridden.iter().any(|o| o == name) {
            Provenance::Input
        } else {
            Provenance::Default
        }
    };
    let input = |name: &'static str, value: f64, unit: &'static str| ReportRow {
        name,
        value,
        unit,
        provenance: source(name),
        note: String::new(),
    };
    let derived = |name: &'static str, value: f64, unit: &'static str, note: &str| ReportRow {
        name,
        value,
        unit,
        provenance: Provenance::Derived,
        note: note.to_string(),
    };
    positive("phase-matching factor", p.pm_factor)?;
    let beta_q = beta_q_from_beta_c(p.beta_c, p.sigma_e_um, p.tau_e_fs)?;
    let area = p.sigma_e_um * p.sigma_e_um;
    let sigma_e_value = sigma_e(p.sigma_c, area, p.tau_e_fs)?;
    let estimate = estimate_beta_q_measured(p.rate_uc, p.power_dc, p.wavelength_nm, p.transmission, p.efficiency)?;
    let flux = watts_to_photon_flux(p.power_dc, p.wavelength_nm);
    let rows = vec![
        input("beta_c", p.beta_c, "m^2 s"),
        input("sigma_um", p.sigma_um, "um"),
        input("tau_fs", p.tau_fs, "fs"),
        input("rep_rate", p.rep_rate, "Hz"),
        input("sigma_e_um", p.sigma_e_um, "um"),
        input("tau_e_fs", p.tau_e_fs, "fs"),
        input("pm_factor", p.pm_factor, "1"),
        input("sigma_c", p.sigma_c, "cm^4 s"),
        input("rate_uc", p.rate_uc, "Hz"),
        input("power_dc", p.power_dc, "W"),
        input("wavelength_nm", p.wavelength_nm, "nm"),
        input("transmission", p.transmission, "1"),
        input("efficiency", p.efficiency, "1"),
        derived("beta_q", beta_q, "1", "beta_c/(4 sqrt(pi) pi^2 sigma_e^2 tau_e)"),
        derived("beta_q_corrected", beta_q / p.pm_factor, "1", "beta_q divided by pm_factor"),
        derived("flux_dc", flux, "1/s", "down-converted photon flux"),
        derived("sigma_e", sigma_e_value, "cm^2", "sigma_c/(2 A_e T_e), A_e = sigma_e_um^2"),
        derived("beta_q_measured", estimate.value, "1", &estimate.convention),
    ];
    Ok(RatesReport { rows })
}
