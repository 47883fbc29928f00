use std::f64::consts::PI;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::units::{omega_to_wavelength, wavelength_to_omega, C_NM_PER_FS, FWHM_PER_SIGMA};

/// Grating, lens and SLM parameters of the 4f shaper.
///
/// The diffraction angle at the center wavelength is not stored; it follows
/// from the grating equation so the two can never disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct ShaperGeometry {
    /// Grating period G (µm).
    pub grating_period: f64,
    /// Diffraction order m.
    pub order: u32,
    /// Incidence angle α (degrees).
    pub incidence_angle: f64,
    /// Wavelength imaged onto the center pixel (nm).
    pub center_wavelength: f64,
    /// Focal length f₂ of the Fourier lens (mm).
    pub focal_length: f64,
    /// Pixel pitch Δx (µm).
    pub pixel_pitch: f64,
    pub pixel_count: usize,
    /// Dead space between neighbouring pixels (µm).
    pub pixel_gap: f64,
    /// Point spread function FWHM of one frequency at the SLM plane (rad/fs).
    pub psf_fwhm: f64,
    /// Effective single-frequency footprint on the SLM (pixels, FWHM). It folds
    /// the finite beam waist into the blur; when `None` the blur is the PSF
    /// alone.
    pub spot_pixels: Option<f64>,
    /// Pixel index (1-based, fractional allowed) hit by the center wavelength.
    pub center_pixel: f64,
    /// Spectral resolution Δω that sets the largest programmable delay (rad/fs).
    pub resolution: f64,
    /// Smallest programmable time shift (fs).
    pub time_step: f64,
}

impl Default for ShaperGeometry {
    fn default() -> Self {
        Self {
            grating_period: 1.0 / 1.50376,
            order: 1,
            incidence_angle: 41.0,
            center_wavelength: 800.0,
            focal_length: 298.4,
            pixel_pitch: 100.0,
            pixel_count: 640,
            pixel_gap: 3.0,
            psf_fwhm: 0.756e-3,
            spot_pixels: Some(5.0),
            center_pixel: 320.0,
            resolution: 3.3e-3,
            time_step: 0.007,
        }
    }
}

impl ShaperGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grating period", self.grating_period),
            ("center wavelength", self.center_wavelength),
            ("focal length", self.focal_length),
            ("pixel pitch", self.pixel_pitch),
            ("PSF width", self.psf_fwhm),
            ("resolution", self.resolution),
            ("time step", self.time_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        if self.order == 0 {
            return Err(Error::Geometry("diffraction order must be at least 1".into()));
        }
        if self.pixel_count == 0 {
            return Err(Error::Geometry("pixel count must be positive".into()));
        }
        if !(self.pixel_gap >= 0.0) || self.pixel_gap >= self.pixel_pitch {
            return Err(Error::Geometry(format!(
                "pixel gap must lie in [0, pitch), got {} µm",
                self.pixel_gap
            )));
        }
        if let Some(s) = self.spot_pixels {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Geometry(format!("spot size must be positive, got {s}")));
            }
        }
        let beta = self.center_angle()?;
        let edges = [self.pixel_angle(1.0, beta), self.pixel_angle(self.pixel_count as f64, beta)];
        if edges.iter().any(|b| b.abs() >= PI / 2.0) {
            return Err(Error::Geometry("diffraction angle leaves (−90°, 90°) across the SLM".into()));
        }
        Ok(())
    }

    fn alpha(&self) -> f64 {
        self.incidence_angle.to_radians()
    }

    /// `m/G` in 1/nm.
    fn lines_per_nm(&self) -> f64 {
        self.order as f64 / (1000.0 * self.grating_period)
    }

    /// Diffraction angle (rad) of wavelength `nm` from the grating equation
    /// `sin α + sin β = mλ/G`.
    pub fn diffraction_angle(&self, nm: f64) -> Result<f64> {
        let s = self.lines_per_nm() * nm - self.alpha().sin();
        if !(s.abs() <= 1.0) {
            return Err(Error::Geometry(format!(
                "no diffracted order at {nm:.3} nm (sin β = {s:.6})"
            )));
        }
        Ok(s.asin())
    }

    fn center_angle(&self) -> Result<f64> {
        self.diffraction_angle(self.center_wavelength)
    }

    /// Diffraction angle β(λ_c) in degrees.
    pub fn center_diffraction_angle(&self) -> Result<f64> {
        Ok(self.center_angle()?.to_degrees())
    }

    fn pixel_angle(&self, p: f64, beta_c: f64) -> f64 {
        ((p - self.center_pixel) * self.pixel_pitch / (1000.0 * self.focal_length)).atan() + beta_c
    }

    pub fn center_frequency(&self) -> f64 {
        wavelength_to_omega(self.center_wavelength)
    }

    /// Wavelength (nm) imaged onto the continuous pixel coordinate `p`,
    /// `λ(p) = (G/m){sin[atan((p−p₀)Δx/f₂) + β_c] + sin α}`.
    pub fn wavelength_at(&self, p: f64) -> Result<f64> {
        let beta = self.pixel_angle(p, self.center_angle()?);
        if beta.abs() >= PI / 2.0 {
            return Err(Error::Geometry(format!("pixel {p} lies beyond grazing diffraction")));
        }
        Ok((beta.sin() + self.alpha().sin()) / self.lines_per_nm())
    }

    /// Center wavelength (nm) of every pixel, pixel 1 first.
    pub fn pixel_map(&self) -> Result<Vec<f64>> {
        self.validate()?;
        (1..=self.pixel_count).map(|p| self.wavelength_at(p as f64)).collect()
    }

    /// Center angular frequency (rad/fs) of every pixel, pixel 1 first.
    pub fn pixel_frequencies(&self) -> Result<Vec<f64>> {
        Ok(self.pixel_map()?.into_iter().map(wavelength_to_omega).collect())
    }

    /// Continuous pixel coordinate hit by angular frequency `omega`, or `None`
    /// when the frequency has no diffracted order.
    pub fn pixel_coordinate(&self, omega: f64) -> Option<f64> {
        let beta_c = self.center_angle().ok()?;
        let beta = self.diffraction_angle(omega_to_wavelength(omega)).ok()?;
        let x = (beta - beta_c).tan() * 1000.0 * self.focal_length / self.pixel_pitch;
        x.is_finite().then_some(self.center_pixel + x)
    }

    /// |dλ/dp| at the center pixel (nm/pixel).
    pub fn step_nm_at_center(&self) -> Result<f64> {
        let beta_c = self.center_angle()?;
        Ok(beta_c.cos() * self.pixel_pitch / (1000.0 * self.focal_length) / self.lines_per_nm())
    }

    /// |dω/dp| at the center pixel (rad/fs per pixel).
    pub fn step_at_center(&self) -> Result<f64> {
        let lambda = self.center_wavelength;
        Ok(2.0 * PI * C_NM_PER_FS / (lambda * lambda) * self.step_nm_at_center()?)
    }

    /// FWHM (pixels) of the Gaussian blur applied to the pixelated mask.
    pub fn blur_fwhm_pixels(&self) -> Result<f64> {
        match self.spot_pixels {
            Some(s) => Ok(s),
            None => Ok(self.psf_fwhm / self.step_at_center()?),
        }
    }

    pub(crate) fn blur_sigma_pixels(&self) -> Result<f64> {
        Ok(self.blur_fwhm_pixels()? / FWHM_PER_SIGMA)
    }

    /// Half width of the transmitting part of a pixel, in pixels.
    pub(crate) fn active_half_width(&self) -> f64 {
        0.5 - self.pixel_gap / (2.0 * self.pixel_pitch)
    }

    /// Same shaper with the blur widened `factor` times, used to model a
    /// prism compressor with a worse point spread function.
    pub fn with_blur_scaled(&self, factor: f64) -> Self {
        Self {
            psf_fwhm: self.psf_fwhm * factor,
            spot_pixels: self.spot_pixels.map(|s| s * factor),
            ..self.clone()
        }
    }

    /// Largest delay the pixelated mask can encode without aliasing,
    /// `τ_max = 2π/Δω`.
    pub fn tau_max(&self) -> f64 {
        2.0 * PI / self.resolution
    }

    /// Phase step (rad) corresponding to the smallest time shift at the
    /// center frequency.
    pub fn phase_step(&self) -> f64 {
        self.center_frequency() * self.time_step
    }

    /// SHA-256 over all parameters, used to tie exported masks to a geometry.
    pub fn hash(&self) -> String {
        let canonical = format!(
            "G={:?};m={};alpha={:?};lambda_c={:?};f2={:?};dx={:?};n={};gap={:?};psf={:?};spot={:?};p0={:?};res={:?};dt={:?}",
            self.grating_period,
            self.order,
            self.incidence_angle,
            self.center_wavelength,
            self.focal_length,
            self.pixel_pitch,
            self.pixel_count,
            self.pixel_gap,
            self.psf_fwhm,
            self.spot_pixels,
            self.center_pixel,
            self.resolution,
            self.time_step
        );
        hex(&Sha256::digest(canonical.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
