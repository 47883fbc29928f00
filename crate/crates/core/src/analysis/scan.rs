use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detector::{coincidence_rate, sample_counts_with, sfg_classical, DetectorParams};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_model, FitResult, ModelKind};
use crate::shaper::{
    apply_mask_biphoton, apply_mask_classical, apply_transfer_biphoton, apply_transfer_classical, mask_build, MaskKind,
    ShaperGeometry, Transfer,
};
use crate::source::BiphotonState;
use crate::spectral::ClassicalField;

/// How masks reach the light: as ideal continuous transfers, or through the
/// pixelated and blurred SLM model.
#[derive(Debug, Clone, Copy)]
pub enum Shaping<'a> {
    Ideal,
    Slm(&'a ShaperGeometry),
}

/// One point of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSample {
    pub x: f64,
    /// Expected signal (Hz for count rates, arbitrary units for the photodiode).
    pub rate: f64,
    /// Sampled counts in one integration bin, when sampling was requested.
    pub counts: Option<u64>,
    /// Poisson standard deviation of the counts.
    pub sigma: Option<f64>,
}

/// Signal as a function of one scanned parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub parameter: String,
    pub unit: String,
    pub rate_unit: String,
    pub samples: Vec<ScanSample>,
    pub fit: Option<FitResult>,
}

impl ScanResult {
    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rate).collect()
    }

    /// Sample with the largest expected signal.
    pub fn peak(&self) -> Option<&ScanSample> {
        self.samples.iter().max_by(|a, b| a.rate.total_cmp(&b.rate))
    }

    /// Write `x, rate, counts, sigma` with header and units rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.parameter.as_str(), "rate", "counts", "sigma"])?;
        w.write_record([self.unit.as_str(), self.rate_unit.as_str(), "1", "1"])?;
        for s in &self.samples {
            w.write_record([
                format!("{:.12e}", s.x),
                format!("{:.12e}", s.rate),
                s.counts.map(|c| c.to_string()).unwrap_or_default(),
                s.sigma.map(|v| format!("{v:.12e}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_monotone(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid(format!("{what} list is empty")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("scan positions"));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(format!("{what} values must be strictly increasing")));
    }
    Ok(())
}

fn evaluate<F>(xs: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    xs.par_iter().map(|&x| f(x)).collect()
}

fn samples(xs: &[f64], rates: Vec<f64>) -> Vec<ScanSample> {
    xs.iter()
        .zip(rates)
        .map(|(&x, rate)| ScanSample {
            x,
            rate,
            counts: None,
            sigma: None,
        })
        .collect()
}

/// Coincidence rate of `state` after a quadratic mask c₂′ and a setup
/// dispersion `setup_c2` acting on both photons.
pub fn quantum_dispersion_rate(
    state: &BiphotonState,
    c2_mask: f64,
    setup_c2: f64,
    detector: &DetectorParams,
    shaping: Shaping,
) -> Result<f64> {
    let center = 0.5 * state.pump_frequency;
    let setup = Transfer::Quadratic { c2: setup_c2, center };
    let shaped = match shaping {
        Shaping::Ideal => apply_transfer_biphoton(
            state,
            &Transfer::Product(vec![Transfer::Quadratic { c2: c2_mask, center }, setup]),
        )?,
        Shaping::Slm(geometry) => {
            let mask = mask_build(&MaskKind::Quadratic { c2: c2_mask }, geometry)?;
            apply_transfer_biphoton(&apply_mask_biphoton(state, &mask, geometry)?, &setup)?
        }
    };
    coincidence_rate(&shaped, detector)
}

/// Photodiode signal of the classical SFG after a quadratic mask c₂′ and a
/// setup dispersion `setup_c2`.
pub fn classical_dispersion_signal(
    field: &ClassicalField,
    c2_mask: f64,
    setup_c2: f64,
    detector: &DetectorParams,
    shaping: Shaping,
) -> Result<f64> {
    let shaped = match shaping {
        Shaping::Ideal => apply_transfer_classical(
            field,
            &Transfer::Quadratic {
                c2: c2_mask,
                center: field.grid().center(),
            },
        )?,
        Shaping::Slm(geometry) => {
            let mask = mask_build(&MaskKind::Quadratic { c2: c2_mask }, geometry)?;
            apply_mask_classical(field, &mask, geometry)?
        }
    };
    Ok(sfg_classical(&shaped, detector, setup_c2)?.photodiode)
}

/// Quantum dispersion scan over the mask coefficient c₂′ (fs²), fitted with
/// a Gaussian.
pub fn dispersion_scan_quantum(
    state: &BiphotonState,
    c2_values: &[f64],
    setup_c2: f64,
    detector: &DetectorParams,
    shaping: Shaping,
) -> Result<ScanResult> {
    check_monotone(c2_values, "c2")?;
    let rates = evaluate(c2_values, |c| quantum_dispersion_rate(state, c, setup_c2, detector, shaping))?;
    let fit = fit_model(ModelKind::Gaussian, c2_values, &rates).ok();
    Ok(ScanResult {
        parameter: "c2_mask".into(),
        unit: "fs^2".into(),
        rate_unit: "Hz".into(),
        samples: samples(c2_values, rates),
        fit,
    })
}

/// Classical dispersion scan over c₂′ (fs²), fitted with a Lorentzian.
pub fn dispersion_scan_classical(
    field: &ClassicalField,
    c2_values: &[f64],
    setup_c2: f64,
    detector: &DetectorParams,
    shaping: Shaping,
) -> Result<ScanResult> {
    check_monotone(c2_values, "c2")?;
    let rates = evaluate(c2_values, |c| classical_dispersion_signal(field, c, setup_c2, detector, shaping))?;
    let fit = fit_model(ModelKind::Lorentzian, c2_values, &rates).ok();
    Ok(ScanResult {
        parameter: "c2_mask".into(),
        unit: "fs^2".into(),
        rate_unit: "arb".into(),
        samples: samples(c2_values, rates),
        fit,
    })
}

/// Full width at half maximum of a single-peaked function around its peak
/// at `center`, found by bracketing outwards from `center` in steps of
/// `scale` and bisecting each side.
pub fn half_max_width(f: impl Fn(f64) -> Result<f64>, center: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(invalid("bracketing scale must be positive"));
    }
    let peak = f(center)?;
    if !(peak > 0.0) {
        return Err(invalid("function is not positive at the peak"));
    }
    let half = 0.5 * peak;
    let mut edges = [0.0; 2];
    for (edge, dir) in edges.iter_mut().zip([-1.0, 1.0]) {
        let mut inner = center;
        let mut outer = center + dir * scale;
        let mut steps = 0;
        while f(outer)? > half {
            inner = outer;
            outer = center + (outer - center) * 2.0;
            steps += 1;
            if steps > 60 {
                return Err(Error::Range("no half-maximum crossing found".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if f(mid)? > half {
                inner = mid;
            } else {
                outer = mid;
            }
            if (outer - inner).abs() <= 1e-15 * (1.0 + center.abs() + scale) {
                break;
            }
        }
        *edge = 0.5 * (inner + outer);
    }
    Ok(edges[1] - edges[0])
}

/// Grating positions, recovered peak positions and the linear fit through
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct GvdSlope {
    /// Setup dispersion per grating shift (fs²/mm), i.e. minus the slope of
    /// the optimal mask coefficient versus g.
    pub slope: f64,
    pub fit: FitResult,
    /// (g, c₂′ at maximum signal) for every grating position.
    pub maxima: Vec<(f64, f64)>,
    pub peak_fits: Vec<FitResult>,
}

/// Points used around the maximum of every scan for the Lorentzian fit.
pub const PEAK_FIT_POINTS: usize = 41;

/// For every grating shift g (mm) the setup adds `slope·g` of GDD (plus
/// `c3_ratio` times that as c₃ when given); scan the mask c₂′, locate the
/// maximum with a Lorentzian through the 41 samples around it, and fit the
/// maxima linearly against g.
pub fn gvd_slope(
    g_values: &[f64],
    c2_values: &[f64],
    field: &ClassicalField,
    detector: &DetectorParams,
    slope: f64,
    c3_ratio: Option<f64>,
) -> Result<GvdSlope> {
    if g_values.len() < 3 {
        return Err(Error::Range(format!(
            "need at least three grating positions, got {}",
            g_values.len()
        )));
    }
    check_monotone(g_values, "grating shift")?;
    check_monotone(c2_values, "c2")?;
    if c2_values.len() < PEAK_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: PEAK_FIT_POINTS,
            got: c2_values.len(),
        });
    }
    let half = PEAK_FIT_POINTS / 2;
    let mut maxima = Vec::with_capacity(g_values.len());
    let mut peak_fits = Vec::with_capacity(g_values.len());
    for &g in g_values {
        let setup_c2 = slope * g;
        let setup_c3 = c3_ratio.map(|r| r * setup_c2).unwrap_or(0.0);
        let base = field.with_phase(|w| setup_c3 / 6.0 * w * w * w);
        let rates = evaluate(c2_values, |c| classical_dispersion_signal(&base, c, setup_c2, detector, Shaping::Ideal))?;
        let imax = rates
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if imax < half || imax + half >= c2_values.len() {
            return Err(Error::Range(format!(
                "scan at g = {g} mm has its maximum at the edge of the c2 range"
            )));
        }
        let window = imax - half..=imax + half;
        let fit = fit_model(ModelKind::Lorentzian, &c2_values[window.clone()], &rates[window])?;
        maxima.push((g, fit.params[1]));
        peak_fits.push(fit);
    }
    let gs: Vec<f64> = maxima.iter().map(|m| m.0).collect();
    let setup: Vec<f64> = maxima.iter().map(|m| -m.1).collect();
    let fit = fit_model(ModelKind::Linear, &gs, &setup)?;
    Ok(GvdSlope {
        slope: fit.params[0],
        fit,
        maxima,
        peak_fits,
    })
}

/// Sampling of Poisson counts on top of expected rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub seed: u64,
}

/// Interferometric autocorrelation: coincidence rate after the mask
/// `½(1 + e^{−iωτ})` on both photons, for every delay τ (fs).
pub fn iac_scan(
    state: &BiphotonState,
    taus: &[f64],
    detector: &DetectorParams,
    shaping: Shaping,
    sampling: Option<Sampling>,
) -> Result<ScanResult> {
    check_monotone(taus, "delay")?;
    let rates = evaluate(taus, |tau| {
        let shaped = match shaping {
            Shaping::Ideal => apply_transfer_biphoton(state, &Transfer::Iac { tau })?,
            Shaping::Slm(geometry) => {
                let mask = mask_build(&MaskKind::Iac { tau }, geometry)?;
                apply_mask_biphoton(state, &mask, geometry)?
            }
        };
        coincidence_rate(&shaped, detector)
    })?;
    let mut out = samples(taus, rates);
    if let Some(Sampling { seed }) = sampling {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in out.iter_mut() {
            let counts = sample_counts_with(s.rate, detector, &mut rng)?;
            s.counts = Some(counts);
            s.sigma = Some(((s.rate + detector.dark_rate) * detector.integration_time).sqrt());
        }
    }
    Ok(ScanResult {
        parameter: "tau".into(),
        unit: "fs".into(),
        rate_unit: "Hz".into(),
        samples: out,
        fit: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{biphoton_reduced, Envelope, SourceParams};
    use crate::spectral::FrequencyGrid;

    fn state() -> BiphotonState {
        let p = SourceParams {
            envelope: Envelope::Gaussian { fwhm_nm: 16.4 },
            ..SourceParams::default()
        };
        biphoton_reduced(&p, &p.biphoton_grid(0.5, 1024).unwrap()).unwrap()
    }

    #[test]
    fn quantum_scan_symmetric() {
        let s = state();
        let d = DetectorParams::default();
        let c2: Vec<f64> = (-20..=20).map(|k| k as f64 * 100.0).collect();
        let scan = dispersion_scan_quantum(&s, &c2, 0.0, &d, Shaping::Ideal).unwrap();
        let r = scan.rates();
        for k in 0..r.len() {
            assert!((r[k] - r[r.len() - 1 - k]).abs() < 1e-9 * r[20]);
        }
        assert_eq!(scan.peak().unwrap().x, 0.0);
        assert!(scan.fit.is_some());
    }

    #[test]
    fn half_max_of_known_function() {
        let w = half_max_width(|x| Ok(1.0 / (1.0 + x * x)), 0.0, 0.1).unwrap();
        assert!((w - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gvd_slope_needs_three_positions() {
        let grid = FrequencyGrid::new(2.3546, 0.4, 256).unwrap();
        let f = ClassicalField::gaussian(grid, 0.02, 1.0, 90e6).unwrap();
        let c2: Vec<f64> = (-60..=60).map(|k| k as f64 * 100.0).collect();
        let r = gvd_slope(&[0.0], &c2, &f, &DetectorParams::default(), -2610.0, None);
        assert!(matches!(r, Err(Error::Range(_))));
    }

    #[test]
    fn iac_at_zero_delay_is_unshaped() {
        let s = state();
        let d = DetectorParams::default();
        let scan = iac_scan(&s, &[-1.0, 0.0, 1.0], &d, Shaping::Ideal, None).unwrap();
        let r0 = coincidence_rate(&s, &d).unwrap();
        assert!((scan.samples[1].rate / r0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let s = state();
        let d = DetectorParams::default();
        let taus: Vec<f64> = (0..50).map(|k| k as f64 * 0.3).collect();
        let a = iac_scan(&s, &taus, &d, Shaping::Ideal, Some(Sampling { seed: 7 })).unwrap();
        let b = iac_scan(&s, &taus, &d, Shaping::Ideal, Some(Sampling { seed: 7 })).unwrap();
        assert_eq!(a, b);
        assert!(iac_scan(&s, &[1.0, 0.0], &d, Shaping::Ideal, None).is_err());
    }
}
