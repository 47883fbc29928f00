//! Builders that turn configuration sections into library types.

use biphoton::detector::{DetectorParams, UpconversionAcceptance};
use biphoton::shaper::ShaperGeometry;
use biphoton::source::{biphoton_reduced, BiphotonState, Envelope, PhaseMatching, SourceParams};
use biphoton::spectral::{ClassicalField, FrequencyGrid};
use biphoton::units::{wavelength_to_omega, watts_to_photon_flux};

use crate::config::{Config, ConfigError, Dim};
use crate::CliError;

pub fn source(cfg: &Config) -> Result<SourceParams, CliError> {
    let s = "source";
    let base = SourceParams::default();
    let pump = cfg.f64_or(s, "pump_wavelength", Dim::Wavelength, base.pump_wavelength)?;
    let shape = cfg.choice(s, "envelope", &["gaussian", "flat"], "gaussian")?;
    let bandwidth = cfg.f64(s, "bandwidth", Dim::Wavelength)?;
    let correlation = cfg.f64(s, "correlation_time", Dim::Time)?;
    let envelope = match (bandwidth, correlation) {
        (Some(_), Some(_)) => {
            return Err(field(cfg, s, "correlation_time", "give either bandwidth or correlation_time, not both"));
        }
        (None, Some(tau)) => {
            if shape != "gaussian" {
                return Err(field(cfg, s, "correlation_time", "only defined for a gaussian envelope"));
            }
            Envelope::for_correlation_time(tau, 2.0 * pump)?
        }
        (width, None) => {
            let width = width.unwrap_or(base.envelope.width_nm());
            match shape {
                "flat" => Envelope::FlatTop { width_nm: width },
                _ => Envelope::Gaussian { fwhm_nm: width },
            }
        }
    };
    let power = cfg.f64_or(s, "power", Dim::Power, base.down_converted_power)?;
    let pair_rate = match cfg.f64(s, "pair_rate", Dim::Rate)? {
        Some(r) => r,
        None => 0.5 * watts_to_photon_flux(power, 2.0 * pump),
    };
    let params = SourceParams {
        pump_wavelength: pump,
        envelope,
        pair_rate,
        entanglement_size: cfg.f64_or(s, "entanglement_size", Dim::Micron, base.entanglement_size)?,
        entanglement_time: cfg.f64_or(s, "entanglement_time", Dim::Time, base.entanglement_time)?,
        down_converted_power: power,
        phase_matching: PhaseMatching {
            acceptance: cfg.f64_or(s, "acceptance", Dim::AngularFrequency, base.phase_matching.acceptance)?,
            crystal_length: cfg.f64_or(s, "crystal_length", Dim::Millimetre, base.phase_matching.crystal_length)?,
            ..base.phase_matching
        },
    };
    params.validate()?;
    Ok(params)
}

/// Biphoton grid from `[grid]`, defaulting to six marginal widths.
pub fn biphoton_grid(cfg: &Config, params: &SourceParams) -> Result<FrequencyGrid, CliError> {
    let default_span = 12.0 * params.marginal_half_width();
    let span = cfg.f64_or("grid", "span", Dim::AngularFrequency, default_span)?;
    let points = cfg.usize_or("grid", "points", 2048)?;
    Ok(params.biphoton_grid(span, points)?)
}

pub fn state(cfg: &Config) -> Result<(SourceParams, BiphotonState), CliError> {
    let params = source(cfg)?;
    let grid = biphoton_grid(cfg, &params)?;
    let state = biphoton_reduced(&params, &grid)?;
    Ok((params, state))
}

pub fn geometry(cfg: &Config) -> Result<ShaperGeometry, CliError> {
    let s = "geometry";
    let d = ShaperGeometry::default();
    let spot = match cfg.f64(s, "spot_pixels", Dim::Pixels)? {
        Some(v) if v == 0.0 => None,
        Some(v) => Some(v),
        None => d.spot_pixels,
    };
    let order = cfg.usize_or(s, "order", d.order as usize)?;
    let geometry = ShaperGeometry {
        grating_period: cfg.f64_or(s, "grating_period", Dim::Micron, d.grating_period)?,
        order: u32::try_from(order).map_err(|_| field(cfg, s, "order", "diffraction order too large"))?,
        incidence_angle: cfg.f64_or(s, "incidence_angle", Dim::Angle, d.incidence_angle)?,
        center_wavelength: cfg.f64_or(s, "center_wavelength", Dim::Wavelength, d.center_wavelength)?,
        focal_length: cfg.f64_or(s, "focal_length", Dim::Millimetre, d.focal_length)?,
        pixel_pitch: cfg.f64_or(s, "pixel_pitch", Dim::Micron, d.pixel_pitch)?,
        pixel_count: cfg.usize_or(s, "pixel_count", d.pixel_count)?,
        pixel_gap: cfg.f64_or(s, "pixel_gap", Dim::Micron, d.pixel_gap)?,
        psf_fwhm: cfg.f64_or(s, "psf_fwhm", Dim::AngularFrequency, d.psf_fwhm)?,
        spot_pixels: spot,
        center_pixel: cfg.f64_or(s, "center_pixel", Dim::Pixels, d.center_pixel)?,
        resolution: cfg.f64_or(s, "resolution", Dim::AngularFrequency, d.resolution)?,
        time_step: cfg.f64_or(s, "time_step", Dim::Time, d.time_step)?,
    };
    geometry.validate()?;
    Ok(geometry)
}

/// Detector chain from `[detector]`. With `reference_rate` and a state, κ is
/// calibrated so that the unshaped state gives that rate.
pub fn detector(cfg: &Config, state: Option<&BiphotonState>) -> Result<DetectorParams, CliError> {
    let s = "detector";
    let d = DetectorParams::default();
    let acceptance = match cfg.string(s, "acceptance") {
        Some(v) if v.eq_ignore_ascii_case("constant") => UpconversionAcceptance::Constant,
        Some(_) => UpconversionAcceptance::GaussianSum {
            width: cfg.require_f64(s, "acceptance", Dim::AngularFrequency)?,
        },
        None => d.acceptance,
    };
    let params = DetectorParams {
        acceptance,
        transmission: cfg.f64_or(s, "transmission", Dim::Dimensionless, d.transmission)?,
        efficiency: cfg.f64_or(s, "efficiency", Dim::Dimensionless, d.efficiency)?,
        dark_rate: cfg.f64_or(s, "dark_rate", Dim::Rate, d.dark_rate)?,
        integration_time: cfg.f64_or(s, "integration_time", Dim::Seconds, d.integration_time)?,
        rate_scale: cfg.f64_or(s, "rate_scale", Dim::Dimensionless, d.rate_scale)?,
    };
    params.validate()?;
    match (cfg.f64(s, "reference_rate", Dim::Rate)?, state) {
        (Some(_), _) if cfg.has(s, "rate_scale") => {
            Err(field(cfg, s, "reference_rate", "give either reference_rate or rate_scale, not both"))
        }
        (Some(rate), Some(state)) => Ok(params.calibrated_to(state, rate)?),
        (Some(_), None) => Err(field(cfg, s, "reference_rate", "needs a biphoton source to calibrate against")),
        (None, _) => Ok(params),
    }
}

/// Transform-limited classical pulse from `[classical]`.
pub fn classical(cfg: &Config) -> Result<ClassicalField, CliError> {
    let s = "classical";
    let center = cfg.f64_or(s, "center_wavelength", Dim::Wavelength, 800.0)?;
    let std = cfg.f64_or(s, "spectral_std", Dim::AngularFrequency, 0.02)?;
    let span = cfg.f64_or(s, "span", Dim::AngularFrequency, 20.0 * std)?;
    let points = cfg.usize_or(s, "points", 512)?;
    let rep = cfg.f64_or(s, "rep_rate", Dim::Rate, 90e6)?;
    let photons = cfg.f64_or(s, "photons_per_pulse", Dim::Dimensionless, 1.0)?;
    let grid = FrequencyGrid::new(wavelength_to_omega(center), span, points)?;
    Ok(ClassicalField::gaussian(grid, std, photons, rep)?)
}

/// Evenly spaced values `start, start + step, …, stop` from
/// `<prefix>_start`, `<prefix>_stop`, `<prefix>_step`.
pub fn range(cfg: &Config, section: &str, prefix: &str, dim: Dim, default: (f64, f64, f64)) -> Result<Vec<f64>, CliError> {
    let key = |suffix: &str| format!("{prefix}_{suffix}");
    let start = cfg.f64_or(section, &key("start"), dim, default.0)?;
    let stop = cfg.f64_or(section, &key("stop"), dim, default.1)?;
    let step = cfg.f64_or(section, &key("step"), dim, default.2)?;
    if !(step > 0.0) {
        return Err(field(cfg, section, &key("step"), "step must be positive"));
    }
    if !(stop >= start) {
        return Err(field(cfg, section, &key("stop"), "stop must not be below start"));
    }
    let n = ((stop - start) / step).round();
    if n > 5e6 {
        return Err(field(cfg, section, &key("step"), "range holds more than five million points"));
    }
    Ok((0..=n as usize).map(|k| start + k as f64 * step).collect())
}

/// Field-level error pointing at the key's line when it is set.
pub fn field(cfg: &Config, section: &str, key: &str, message: &str) -> CliError {
    match cfg.line_of(section, key) {
        Some(line) => ConfigError::Field {
            line,
            section: section.into(),
            key: key.into(),
            message: message.into(),
        },
        None => ConfigError::Missing {
            section: section.into(),
            key: key.into(),
            message: message.into(),
        },
    }
    .into()
}
