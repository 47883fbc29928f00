use super::geometry::ShaperGeometry;
use crate::error::{invalid, Error, Result};
use crate::fit::{least_squares, FitResult, ModelKind};

/// Grating period, center pixel and focal length recovered from measured
/// (pixel, wavelength) peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMapFit {
    /// G (µm).
    pub grating_period: f64,
    /// p₀.
    pub center_pixel: f64,
    /// f₂ (mm).
    pub focal_length: f64,
    pub fit: FitResult,
    geometry: ShaperGeometry,
}

impl PixelMapFit {
    /// The nominal geometry updated with the fitted parameters.
    pub fn geometry(&self) -> &ShaperGeometry {
        &self.geometry
    }
}

/// Noiseless peaks of the calibration pattern that switches pixels
/// `first, first + every, …`, leaving out the pixels in `skip` (an
/// orientation marker).
pub fn calibration_peaks(geometry: &ShaperGeometry, first: usize, every: usize, skip: &[usize]) -> Result<Vec<(f64, f64)>> {
    if every == 0 || first == 0 {
        return Err(invalid("pixel stride and first pixel must be positive"));
    }
    (first..=geometry.pixel_count)
        .step_by(every)
        .filter(|p| !skip.contains(p))
        .map(|p| Ok((p as f64, geometry.wavelength_at(p as f64)?)))
        .collect()
}

/// Fit the grating-equation pixel map to measured peaks. The incidence angle
/// and the diffraction angle of the nominal center wavelength are held
/// fixed; G, p₀ and f₂ start from `nominal`.
pub fn fit_pixel_map(peaks: &[(f64, f64)], nominal: &ShaperGeometry) -> Result<PixelMapFit> {
    nominal.validate()?;
    if peaks.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: peaks.len(),
        });
    }
    let mut pixels: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    pixels.sort_by(f64::total_cmp);
    if pixels.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("calibration peaks must sit on distinct pixels"));
    }
    if peaks.iter().any(|(p, l)| !p.is_finite() || !l.is_finite()) {
        return Err(Error::NonFinite("calibration peaks"));
    }
    let beta_c = nominal.center_diffraction_angle()?.to_radians();
    let sin_alpha = nominal.incidence_angle.to_radians().sin();
    let k = 1000.0 / nominal.order as f64;
    let dx = nominal.pixel_pitch / 1000.0;
    let model = move |q: &[f64], p: f64, grad: &mut [f64]| -> f64 {
        let (g, p0, f2) = (q[0], q[1], q[2]);
        let x = (p - p0) * dx / f2;
        let theta = x.atan() + beta_c;
        let s = theta.sin() + sin_alpha;
        let dtheta = k * g * theta.cos() / (1.0 + x * x);
        grad[0] = k * s;
        grad[1] = -dtheta * dx / f2;
        grad[2] = -dtheta * x / f2;
        k * g * s
    };
    let xs: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    let guess = vec![nominal.grating_period, nominal.center_pixel, nominal.focal_length];
    let fit = least_squares(ModelKind::PixelMap, &xs, &ys, guess, model)?;
    let (g, p0, f2) = (fit.params[0], fit.params[1], fit.params[2]);
    if !(g > 0.0 && f2 > 0.0) {
        return Err(Error::FitFailure {
            reason: "non-physical grating period or focal length".into(),
            iterations: fit.iterations,
            last: fit.params,
        });
    }
    let geometry = ShaperGeometry {
        grating_period: g,
        center_pixel: p0,
        focal_length: f2,
        center_wavelength: k * g * (beta_c.sin() + sin_alpha),
        ..nominal.clone()
    };
    Ok(PixelMapFit {
        grating_period: g,
        center_pixel: p0,
        focal_length: f2,
        fit,
        geometry,
    })
}
