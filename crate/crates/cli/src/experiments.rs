//! The experiments behind each subcommand. Every experiment reads all of
//! its configuration up front and returns a job that only computes and
//! writes, so unknown keys are rejected before any work is done.

use std::fmt::Write as _;
use std::path::PathBuf;

use biphoton::analysis::{
    classical_dispersion_signal, dispersion_scan_classical, dispersion_scan_quantum, gvd_slope, half_max_width,
    quantum_dispersion_rate, iac_scan, spectrogram, FitResult, Sampling,
    ScanResult, Shaping,
};
use biphoton::detector::coincidence_rate;
use biphoton::optics::{geometry_summary, gvd_per_shift, third_to_second_ratio};
use biphoton::rates::{rates_report, Provenance, RateParams};
use biphoton::shaper::{
    apply_mask_biphoton, calibration_peaks, clip_biphoton, clip_classical, clipped_fraction, fit_pixel_map, mask_build,
    transmitted_spectrum, MaskKind, ShaperGeometry, SlmMask,
};
use biphoton::source::{flux_metrics, jsa_full, BiphotonState, PumpEnvelope};
use biphoton::spectral::{fwhm, half_max_crossings, to_time_domain, ClassicalField, FrequencyGrid};
use biphoton::units::omega_to_wavelength;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{Config, Dim};
use crate::output::{num, Outputs};
use crate::scenario::{self, field};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Spdc,
    Calibrate,
    Resolution,
    DispersionScan,
    GvdSlope,
    Iac,
    Rates,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Spdc,
        Experiment::Calibrate,
        Experiment::Resolution,
        Experiment::DispersionScan,
        Experiment::GvdSlope,
        Experiment::Iac,
        Experiment::Rates,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spdc => "spdc",
            Experiment::Calibrate => "calibrate",
            Experiment::Resolution => "resolution",
            Experiment::DispersionScan => "dispersion-scan",
            Experiment::GvdSlope => "gvd-slope",
            Experiment::Iac => "iac",
            Experiment::Rates => "rates",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|e| e.name() == name)
    }
}

pub type Job = Box<dyn FnOnce(&mut Outputs) -> Result<(), CliError>>;

pub fn plan(experiment: Experiment, cfg: &Config, seed: Option<u64>) -> Result<Job, CliError> {
    match experiment {
        Experiment::Spdc => spdc(cfg),
        Experiment::Calibrate => calibrate(cfg, seed),
        Experiment::Resolution => resolution(cfg),
        Experiment::DispersionScan => dispersion(cfg),
        Experiment::GvdSlope => gvd(cfg),
        Experiment::Iac => iac(cfg, seed),
        Experiment::Rates => rates(cfg),
    }
}

fn shaping_choice(cfg: &Config) -> Result<bool, CliError> {
    Ok(cfg.choice("scan", "shaping", &["ideal", "slm"], "ideal")? == "slm")
}

fn write_scan(out: &mut Outputs, name: &str, scan: &ScanResult) -> Result<(), CliError> {
    out.csv(name, |buf| Ok(scan.write_csv(buf)?))?;
    Ok(())
}

fn resolve(cfg: &Config, file: &str) -> PathBuf {
    let path = PathBuf::from(file);
    if path.is_absolute() {
        path
    } else {
        cfg.base_dir.join(path)
    }
}

fn spdc(cfg: &Config) -> Result<Job, CliError> {
    let (params, state) = scenario::state(cfg)?;
    let jsa_points = cfg.usize_or("jsa", "points", 0)?;
    let jsa_span = cfg.f64_or("jsa", "span", Dim::AngularFrequency, state.grid().span())?;
    let linewidth = cfg.f64_or("jsa", "pump_linewidth", Dim::AngularFrequency, 0.0)?;
    let mask = match cfg.string("mask", "file") {
        Some(file) => {
            let geometry = scenario::geometry(cfg)?;
            let path = resolve(cfg, &file);
            let reader = std::fs::File::open(&path).map_err(|_| {
                field(cfg, "mask", "file", &format!("{}: file not found", path.display()))
            })?;
            let mask = SlmMask::read_csv(std::io::BufReader::new(reader), &geometry)?;
            Some((geometry, mask))
        }
        None => None,
    };
    Ok(Box::new(move |out| {
        write_marginal(out, "marginal", &state)?;
        let (times, amplitude) = to_time_domain(state.grid(), state.psi());
        out.csv("correlation", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["t", "intensity"])?;
            w.write_record(["fs", "1/fs"])?;
            for (t, a) in times.iter().zip(&amplitude) {
                w.write_record([num(*t), num(a.norm_sqr())])?;
            }
            w.flush()?;
            Ok(())
        })?;
        out.summary("correlation_time", state.correlation_time(), "fs");
        let omegas: Vec<f64> = state.grid().detunings();
        if let Some((lo, hi)) = half_max_crossings(&omegas, &state.marginal()) {
            let center = 0.5 * state.pump_frequency;
            let width = omega_to_wavelength(center + lo) - omega_to_wavelength(center + hi);
            out.summary("marginal_fwhm", width, "nm");
        }
        out.summary("pair_rate", state.pair_rate, "1/s");
        let metrics = flux_metrics(params.down_converted_power, params.degenerate_wavelength(), params.envelope.width_nm())?;
        out.summary("photon_flux", metrics.flux, "1/s");
        out.summary("mode_density", metrics.mode_density, "1");
        if jsa_points > 0 {
            let grid = params.biphoton_grid(jsa_span, jsa_points)?;
            let pump = if linewidth > 0.0 {
                PumpEnvelope::gaussian(linewidth)
            } else {
                PumpEnvelope::monochromatic()
            };
            let jsa = jsa_full(pump, &params.phase_matching, &params, &grid)?;
            out.csv("jsa", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(["omega_s", "omega_i", "magnitude"])?;
                w.write_record(["rad/fs", "rad/fs", "1"])?;
                for s in 0..grid.count() {
                    for i in 0..grid.count() {
                        w.write_record([num(grid.detuning(s)), num(grid.detuning(i)), num(jsa.get(s, i).norm())])
                            ?;
                    }
                }
                w.flush()?;
                Ok(())
            })?;
        }
        if let Some((geometry, mask)) = mask {
            let clipped = clip_biphoton(&state, &geometry)?;
            let shaped = apply_mask_biphoton(&clipped, &mask, &geometry)?;
            write_marginal(out, "shaped_marginal", &shaped)?;
            out.summary("shaped_correlation_time", shaped.correlation_time(), "fs");
        }
        Ok(())
    }))
}

/// Clip a biphoton to the SLM band when shaping with the SLM; returns the
/// clipped state and the fraction of |ψ|² removed.
fn clip_for(state: BiphotonState, geometry: Option<&ShaperGeometry>) -> Result<(BiphotonState, f64), CliError> {
    match geometry {
        Some(g) => {
            let clipped = clip_biphoton(&state, g)?;
            let lost = 1.0 - clipped.norm() / state.norm();
            Ok((clipped, lost))
        }
        None => Ok((state, 0.0)),
    }
}

fn write_marginal(out: &mut Outputs, name: &str, state: &BiphotonState) -> Result<(), CliError> {
    let grid = *state.grid();
    let center = 0.5 * state.pump_frequency;
    out.csv(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["omega", "wavelength", "intensity", "re", "im"])?;
        w.write_record(["rad/fs", "nm", "fs", "fs^1/2", "fs^1/2"])?;
        for (k, p) in state.psi().iter().enumerate() {
            let d = grid.detuning(k);
            w.write_record([
                num(d),
                num(omega_to_wavelength(center + d)),
                num(p.norm_sqr()),
                num(p.re),
                num(p.im),
            ])
            ?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

fn read_peaks(path: &std::path::Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut peaks = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let parsed: Option<(f64, f64)> = (|| Some((record.get(0)?.trim().parse().ok()?, record.get(1)?.trim().parse().ok()?)))();
        match parsed {
            Some(p) => peaks.push(p),
            // a units row directly below the header
            None if i == 0 => continue,
            None => {
                return Err(CliError::Input(format!(
                    "{}: row {} is not a (pixel, wavelength) pair",
                    path.display(),
                    i + 2
                )))
            }
        }
    }
    Ok(peaks)
}

fn calibrate(cfg: &Config, seed: Option<u64>) -> Result<Job, CliError> {
    let s = "calibration";
    let nominal = scenario::geometry(cfg)?;
    let f1 = cfg.f64_or(s, "input_focal_length", Dim::Millimetre, 50.0)?;
    let peaks = match cfg.string(s, "peaks_file") {
        Some(file) => {
            let path = resolve(cfg, &file);
            if !path.exists() {
                return Err(field(cfg, s, "peaks_file", &format!("{}: file not found", path.display())));
            }
            for key in ["first", "every", "skip", "noise", "true_grating_period", "true_center_pixel", "true_focal_length"] {
                if cfg.has(s, key) {
                    return Err(field(cfg, s, key, "synthetic-peak settings cannot be combined with peaks_file"));
                }
            }
            read_peaks(&path)?
        }
        None => {
            let truth = ShaperGeometry {
                grating_period: cfg.f64_or(s, "true_grating_period", Dim::Micron, nominal.grating_period)?,
                center_pixel: cfg.f64_or(s, "true_center_pixel", Dim::Pixels, nominal.center_pixel)?,
                focal_length: cfg.f64_or(s, "true_focal_length", Dim::Millimetre, nominal.focal_length)?,
                ..nominal.clone()
            };
            let first = cfg.usize_or(s, "first", 1)?;
            let every = cfg.usize_or(s, "every", 5)?;
            let skip = cfg.usize_list(s, "skip")?.unwrap_or_else(|| vec![321]);
            let noise = cfg.f64_or(s, "noise", Dim::Wavelength, 0.0)?;
            let mut peaks = calibration_peaks(&truth, first, every, &skip)?;
            if noise > 0.0 {
                let seed = seed.ok_or_else(|| field(cfg, s, "noise", "noisy peaks need a seed (--seed or [scenario] seed)"))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(0.0, noise).map_err(|e| field(cfg, s, "noise", &e.to_string()))?;
                for p in peaks.iter_mut() {
                    p.1 += normal.sample(&mut rng);
                }
            } else if noise < 0.0 {
                return Err(field(cfg, s, "noise", "noise must not be negative"));
            }
            peaks
        }
    };
    Ok(Box::new(move |out| {
        let summary = geometry_summary(&nominal, f1)?;
        out.summary("gamma", summary.gamma, "fs/um");
        out.summary("b", summary.b, "1");
        out.summary("magnification", summary.magnification, "1");
        out.summary("center_diffraction_angle", nominal.center_diffraction_angle()?, "deg");
        out.summary("pixel_step", nominal.step_at_center()?, "rad/fs");
        out.summary("pixel_step_wavelength", nominal.step_nm_at_center()?, "nm");
        out.summary("tau_max", nominal.tau_max(), "fs");
        let map = nominal.pixel_map()?;
        out.summary("wavelength_first_pixel", map[0], "nm");
        out.summary("wavelength_last_pixel", map[map.len() - 1], "nm");
        out.csv("pixel_map", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["pixel", "wavelength", "omega"])?;
            w.write_record(["1", "nm", "rad/fs"])?;
            for (i, l) in map.iter().enumerate() {
                w.write_record([(i + 1).to_string(), num(*l), num(biphoton::units::wavelength_to_omega(*l))])
                    ?;
            }
            w.flush()?;
            Ok(())
        })?;
        let fit = fit_pixel_map(&peaks, &nominal)?;
        let fitted = fit.geometry().clone();
        out.csv("calibration_fit", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["pixel", "wavelength", "fitted", "residual"])?;
            w.write_record(["1", "nm", "nm", "nm"])?;
            for &(p, l) in &peaks {
                let f = fitted.wavelength_at(p)?;
                w.write_record([num(p), num(l), num(f), num(l - f)])?;
            }
            w.flush()?;
            Ok(())
        })?;
        let u = &fit.fit.uncertainties;
        out.summary("peaks", peaks.len() as f64, "1");
        out.summary("fit_grating_period", fit.grating_period, "um");
        out.summary("fit_grating_period_err", u[0], "um");
        out.summary("fit_center_pixel", fit.center_pixel, "1");
        out.summary("fit_center_pixel_err", u[1], "1");
        out.summary("fit_focal_length", fit.focal_length, "mm");
        out.summary("fit_focal_length_err", u[2], "mm");
        out.summary("fit_residual_rms", fit.fit.residual_rms, "nm");
        Ok(())
    }))
}

fn resolution(cfg: &Config) -> Result<Job, CliError> {
    let s = "resolution";
    let geometry = scenario::geometry(cfg)?;
    let pixels = cfg.usize_or(s, "pixels", 5)?;
    let scale = cfg.f64_or(s, "prism_scale", Dim::Dimensionless, 9.0)?;
    let span = cfg.f64_or(s, "span", Dim::AngularFrequency, 0.16)?;
    let points = cfg.usize_or(s, "points", 16001)?;
    if pixels == 0 || pixels > geometry.pixel_count {
        return Err(field(cfg, s, "pixels", "window must hold between one pixel and the whole SLM"));
    }
    if !(scale > 0.0) {
        return Err(field(cfg, s, "prism_scale", "must be positive"));
    }
    Ok(Box::new(move |out| {
        let grid = FrequencyGrid::new(geometry.center_frequency(), span, points)?;
        let flat = ClassicalField::flat(grid, grid.min_detuning(), grid.max_detuning(), 1.0, 90e6)?;
        let field = clip_classical(&flat, &geometry)?;
        let p0 = geometry.center_pixel.round() as usize;
        let first = (p0 + 1).saturating_sub(pixels.div_ceil(2)).max(1);
        let window: Vec<usize> = (first..first + pixels).collect();
        let kind = MaskKind::PixelWindow { pixels: window.clone() };
        let prism_geometry = geometry.with_blur_scaled(scale);
        let grating = transmitted_spectrum(&field, &mask_build(&kind, &geometry)?, &geometry)?;
        let prism = transmitted_spectrum(&field, &mask_build(&kind, &prism_geometry)?, &prism_geometry)?;
        let det = grid.detunings();
        out.csv("resolution", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["omega", "grating", "prism"])?;
            w.write_record(["rad/fs", "1", "1"])?;
            for k in 0..det.len() {
                w.write_record([num(det[k]), num(grating[k]), num(prism[k])])?;
            }
            w.flush()?;
            Ok(())
        })?;
        let wg = fwhm(&det, &grating).ok_or_else(|| CliError::Physics(biphoton::Error::Range("grating spectrum has no half-maximum crossings".into())))?;
        let wp = fwhm(&det, &prism).ok_or_else(|| CliError::Physics(biphoton::Error::Range("prism spectrum has no half-maximum crossings; widen the span".into())))?;
        out.summary("window_first_pixel", window[0] as f64, "1");
        out.summary("window_pixels", window.len() as f64, "1");
        out.summary("fwhm_grating", wg, "rad/fs");
        out.summary("fwhm_prism", wp, "rad/fs");
        out.summary("fwhm_ratio", wp / wg, "1");
        Ok(())
    }))
}

fn fit_row(w: &mut csv::Writer<&mut Vec<u8>>, scan: &str, fit: &Option<FitResult>) -> Result<(), CliError> {
    match fit {
        Some(f) => {
            let mut row = vec![scan.to_string(), f.kind.name().to_string()];
            row.extend(f.params.iter().map(|v| num(*v)));
            row.extend(f.uncertainties.iter().map(|v| num(*v)));
            row.push(num(f.fwhm().unwrap_or(f64::NAN)));
            row.push(num(f.residual_rms));
            row.push(f.converged.to_string());
            w.write_record(row)?;
        }
        None => w.write_record([scan, "none", "", "", "", "", "", "", "", "", "false"])?,
    }
    Ok(())
}

fn dispersion(cfg: &Config) -> Result<Job, CliError> {
    let mode = cfg.choice("scan", "mode", &["both", "quantum", "classical"], "both")?;
    let slm = shaping_choice(cfg)?;
    let c2 = scenario::range(cfg, "scan", "c2", Dim::Dispersion, (-3000.0, 3000.0, 50.0))?;
    let setup = cfg.f64_or("scan", "setup_c2", Dim::Dispersion, 0.0)?;
    let step = if c2.len() > 1 { c2[1] - c2[0] } else { 100.0 };
    let geometry = if slm { Some(scenario::geometry(cfg)?) } else { None };
    let quantum = if mode != "classical" {
        let (_, state) = scenario::state(cfg)?;
        let (state, lost) = clip_for(state, geometry.as_ref())?;
        let detector = scenario::detector(cfg, Some(&state))?;
        Some((state, detector, lost))
    } else {
        None
    };
    let classical = if mode != "quantum" {
        let field = scenario::classical(cfg)?;
        let lost = match &geometry {
            Some(g) => clipped_fraction(&field, g)?,
            None => 0.0,
        };
        let field = match &geometry {
            Some(g) => clip_classical(&field, g)?,
            None => field,
        };
        let detector = match &quantum {
            Some((_, d, _)) => d.clone(),
            None => scenario::detector(cfg, None)?,
        };
        Some((field, detector, lost))
    } else {
        None
    };
    Ok(Box::new(move |out| {
        let shaping = match &geometry {
            Some(g) => Shaping::Slm(g),
            None => Shaping::Ideal,
        };
        let mut fits = Vec::new();
        if let Some((state, detector, lost)) = &quantum {
            if geometry.is_some() {
                out.summary("quantum_clipped_fraction", *lost, "1");
            }
            let scan = dispersion_scan_quantum(state, &c2, setup, detector, shaping)?;
            write_scan(out, "quantum", &scan)?;
            out.summary("quantum_unshaped_rate", coincidence_rate(state, detector)?, "Hz");
            if let Some(peak) = scan.peak() {
                out.summary("quantum_peak_c2", peak.x, "fs^2");
                out.summary("quantum_peak_rate", peak.rate, "Hz");
                let width = half_max_width(|c| quantum_dispersion_rate(state, c, setup, detector, shaping), peak.x, step)?;
                out.summary("quantum_fwhm", width, "fs^2");
            }
            if let Some(f) = &scan.fit {
                out.summary("quantum_fit_center", f.params[1], "fs^2");
                out.summary("quantum_fit_fwhm", f.fwhm().unwrap_or(f64::NAN), "fs^2");
            }
            fits.push(("quantum", scan.fit.clone()));
        }
        if let Some((field, detector, lost)) = &classical {
            if geometry.is_some() {
                out.summary("classical_clipped_fraction", *lost, "1");
            }
            let scan = dispersion_scan_classical(field, &c2, setup, detector, shaping)?;
            write_scan(out, "classical", &scan)?;
            if let Some(peak) = scan.peak() {
                out.summary("classical_peak_c2", peak.x, "fs^2");
                let width = half_max_width(|c| classical_dispersion_signal(field, c, setup, detector, shaping), peak.x, step)?;
                out.summary("classical_fwhm", width, "fs^2");
            }
            if let Some(f) = &scan.fit {
                out.summary("classical_fit_center", f.params[1], "fs^2");
                out.summary("classical_fit_fwhm", f.fwhm().unwrap_or(f64::NAN), "fs^2");
            }
            fits.push(("classical", scan.fit.clone()));
        }
        out.csv("fits", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record([
                "scan", "model", "amplitude", "center", "width", "amplitude_err", "center_err", "width_err", "fwhm",
                "residual_rms", "converged",
            ])
            ?;
            w.write_record(["1", "1", "scan rate unit", "fs^2", "fs^2", "scan rate unit", "fs^2", "fs^2", "fs^2", "scan rate unit", "1"])
                ?;
            for (name, fit) in &fits {
                fit_row(&mut w, name, fit)?;
            }
            w.flush()?;
            Ok(())
        })?;
        out.note("quantum scan fitted with a Gaussian, classical scan with a Lorentzian (empirical fit convention)");
        Ok(())
    }))
}

fn gvd(cfg: &Config) -> Result<Job, CliError> {
    let geometry = scenario::geometry(cfg)?;
    let field = scenario::classical(cfg)?;
    let detector = scenario::detector(cfg, None)?;
    let g = scenario::range(cfg, "scan", "g", Dim::Millimetre, (-1.0, 1.0, 0.5))?;
    let c2 = scenario::range(cfg, "scan", "c2", Dim::Dispersion, (-6000.0, 6000.0, 25.0))?;
    let analytic = gvd_per_shift(&geometry)?;
    let slope = cfg.f64_or("scan", "slope", Dim::DispersionPerShift, analytic)?;
    let cubic = cfg.bool_or("scan", "cubic", false)?;
    let c3_ratio = if cubic { Some(third_to_second_ratio(&geometry)?) } else { None };
    Ok(Box::new(move |out| {
        let result = gvd_slope(&g, &c2, &field, &detector, slope, c3_ratio)?;
        out.csv("maxima", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["g", "c2_peak", "setup_c2", "peak_err"])?;
            w.write_record(["mm", "fs^2", "fs^2", "fs^2"])?;
            for ((gv, peak), fit) in result.maxima.iter().zip(&result.peak_fits) {
                w.write_record([num(*gv), num(*peak), num(slope * gv), num(fit.uncertainties[1])])
                    ?;
            }
            w.flush()?;
            Ok(())
        })?;
        out.summary("gvd_per_shift_analytic", analytic, "fs^2/mm");
        out.summary("injected_slope", slope, "fs^2/mm");
        out.summary("recovered_slope", result.slope, "fs^2/mm");
        out.summary("recovered_slope_err", result.fit.uncertainties[0], "fs^2/mm");
        out.summary("intercept", result.fit.params[1], "fs^2");
        if let Some(r) = c3_ratio {
            out.summary("c3_over_c2", r, "fs");
            out.note("third-order dispersion from the grating-pair ratio is a model-grade estimate");
        }
        Ok(())
    }))
}

fn iac(cfg: &Config, seed: Option<u64>) -> Result<Job, CliError> {
    let (_, state) = scenario::state(cfg)?;
    let slm = shaping_choice(cfg)?;
    let geometry = if slm { Some(scenario::geometry(cfg)?) } else { None };
    let (state, lost) = clip_for(state, geometry.as_ref())?;
    let detector = scenario::detector(cfg, Some(&state))?;
    let taus = scenario::range(cfg, "scan", "tau", Dim::Time, (-400.0, 400.0, 0.1))?;
    let sampling = if cfg.bool_or("scan", "sampling", false)? {
        let seed = seed.ok_or_else(|| field(cfg, "scan", "sampling", "sampling needs a seed (--seed or [scenario] seed)"))?;
        Some(Sampling { seed })
    } else {
        None
    };
    let window = cfg.usize_or("spectrogram", "window", 256)?;
    let log = cfg.bool_or("spectrogram", "log", false)?;
    let stride = cfg.usize_or("spectrogram", "stride", 50)?;
    let threshold = cfg.f64_or("spectrogram", "ridge_threshold", Dim::Dimensionless, 0.05)?;
    if stride == 0 {
        return Err(field(cfg, "spectrogram", "stride", "stride must be at least 1"));
    }
    Ok(Box::new(move |out| {
        let shaping = match &geometry {
            Some(g) => Shaping::Slm(g),
            None => Shaping::Ideal,
        };
        if geometry.is_some() {
            out.summary("clipped_fraction", lost, "1");
        }
        let scan = iac_scan(&state, &taus, &detector, shaping, sampling)?;
        write_scan(out, "iac", &scan)?;
        let r0 = coincidence_rate(&state, &detector)?;
        out.summary("unshaped_rate", r0, "Hz");
        let rates = scan.rates();
        let max = rates.iter().cloned().fold(f64::MIN, f64::max);
        let min = rates.iter().cloned().fold(f64::MAX, f64::min);
        out.summary("max_rate", max, "Hz");
        out.summary("min_rate", min, "Hz");
        if max + min > 0.0 {
            out.summary("visibility", (max - min) / (max + min), "1");
        }
        if window > 0 && taus.len() >= window && taus.len() > 1 {
            let step = taus[1] - taus[0];
            let spec = spectrogram(&rates, step, window, log)?.shifted(taus[0]);
            out.csv("spectrogram", |buf| Ok(spec.write_csv(buf, stride)?))?;
            out.summary("window_length", window as f64 * step, "fs");
            if !log {
                for (i, r) in spec.ridges(threshold, 1).iter().enumerate() {
                    out.summary(&format!("ridge_{}", i + 1), *r, "rad/fs");
                }
            }
            out.summary("pump_frequency", state.pump_frequency, "rad/fs");
        }
        Ok(())
    }))
}

/// Config keys of `[rates]` with their dimension and the report row they set.
const RATE_KEYS: [(&str, Dim, &str); 13] = [
    ("beta_c", Dim::AreaTime, "beta_c"),
    ("sigma", Dim::Micron, "sigma_um"),
    ("tau", Dim::Time, "tau_fs"),
    ("rep_rate", Dim::Rate, "rep_rate"),
    ("sigma_e", Dim::Micron, "sigma_e_um"),
    ("tau_e", Dim::Time, "tau_e_fs"),
    ("pm_factor", Dim::Dimensionless, "pm_factor"),
    ("sigma_c", Dim::CrossSection, "sigma_c"),
    ("rate_uc", Dim::Rate, "rate_uc"),
    ("power_dc", Dim::Power, "power_dc"),
    ("wavelength", Dim::Wavelength, "wavelength_nm"),
    ("transmission", Dim::Dimensionless, "transmission"),
    ("efficiency", Dim::Dimensionless, "efficiency"),
];

fn rates(cfg: &Config) -> Result<Job, CliError> {
    let mut params = RateParams::default();
    for (key, dim, row) in RATE_KEYS {
        if let Some(v) = cfg.f64("rates", key, dim)? {
            let slot = match row {
                "beta_c" => &mut params.beta_c,
                "sigma_um" => &mut params.sigma_um,
                "tau_fs" => &mut params.tau_fs,
                "rep_rate" => &mut params.rep_rate,
                "sigma_e_um" => &mut params.sigma_e_um,
                "tau_e_fs" => &mut params.tau_e_fs,
                "pm_factor" => &mut params.pm_factor,
                "sigma_c" => &mut params.sigma_c,
                "rate_uc" => &mut params.rate_uc,
                "power_dc" => &mut params.power_dc,
                "wavelength_nm" => &mut params.wavelength_nm,
                "transmission" => &mut params.transmission,
                _ => &mut params.efficiency,
            };
            *slot = v;
            params.overridden.push(row.to_string());
        }
    }
    let mode_power = cfg.f64("rates", "mode_power", Dim::Power)?;
    let mode_bandwidth = cfg.f64("rates", "mode_bandwidth", Dim::Wavelength)?;
    let mode_provenance = |set: bool| if set { Provenance::Input } else { Provenance::Default };
    let mode_rows = [
        ("mode_power", mode_power.unwrap_or(200e-9), "W", mode_provenance(mode_power.is_some())),
        ("mode_bandwidth", mode_bandwidth.unwrap_or(98.0), "nm", mode_provenance(mode_bandwidth.is_some())),
    ];
    Ok(Box::new(move |out| {
        let report = rates_report(&params)?;
        let metrics = flux_metrics(mode_rows[0].1, params.wavelength_nm, mode_rows[1].1)?;
        let mut rows: Vec<(String, f64, String, &'static str, String)> = report
            .rows
            .iter()
            .map(|r| (r.name.to_string(), r.value, r.unit.to_string(), r.provenance.as_str(), r.note.clone()))
            .collect();
        for (name, value, unit, prov) in mode_rows {
            rows.push((name.into(), value, unit.into(), prov.as_str(), String::new()));
        }
        rows.push((
            "mode_density".into(),
            metrics.mode_density,
            "1".into(),
            Provenance::Derived.as_str(),
            "photons per spectral-temporal mode at mode_power over mode_bandwidth".into(),
        ));
        out.csv("rates", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["quantity", "value", "unit", "provenance", "note"])?;
            w.write_record(["1", "per row", "1", "1", "1"])?;
            for (name, value, unit, prov, note) in &rows {
                w.write_record([name.as_str(), &num(*value), unit, prov, note])?;
            }
            w.flush()?;
            Ok(())
        })?;
        for (name, value, unit, _, _) in &rows {
            out.summary(name, *value, unit);
        }
        out.note("beta_q_measured depends on the counting convention given in its note and is not expected to match other conventions");
        let mut table = String::new();
        for (name, value, unit, prov, note) in &rows {
            let _ = writeln!(table, "{name:<18} {value:>14.6e} {unit:<8} {prov:<8} {note}");
        }
        out.text("rates", table)?;
        Ok(())
    }))
}
