use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::geometry::ShaperGeometry;
use crate::error::{invalid, Error, Result};
use crate::units::wavelength_to_omega;

/// Ideal, continuous transfer function M(ω) evaluated at absolute angular
/// frequency ω (rad/fs). Used when pixelation and blur are irrelevant or
/// would alias, e.g. delay scans beyond the SLM limit.
#[derive(Debug, Clone, PartialEq)]
pub enum Transfer {
    Identity,
    /// `exp{i (c₂/2)(ω − center)²}`, c₂ in fs².
    Quadratic { c2: f64, center: f64 },
    /// Interferometric autocorrelation mask `½(1 + e^{−iωτ})`.
    Iac { tau: f64 },
    /// Delay `e^{−iωτ}`.
    TimeShift { tau: f64 },
    /// Pointwise product of several transfers.
    Product(Vec<Transfer>),
}

impl Transfer {
    pub fn eval(&self, omega: f64) -> Complex64 {
        match self {
            Transfer::Identity => Complex64::new(1.0, 0.0),
            Transfer::Quadratic { c2, center } => {
                let d = omega - center;
                Complex64::from_polar(1.0, 0.5 * c2 * d * d)
            }
            Transfer::Iac { tau } => 0.5 * (1.0 + Complex64::from_polar(1.0, -omega * tau)),
            Transfer::TimeShift { tau } => Complex64::from_polar(1.0, -omega * tau),
            Transfer::Product(parts) => parts.iter().map(|t| t.eval(omega)).product(),
        }
    }
}

/// What to program onto the SLM.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskKind {
    /// Quadratic phase `exp{i (c₂′/2) Ω²}` about the geometry's center frequency.
    Quadratic { c2: f64 },
    /// `½(1 + e^{−iωτ})`.
    Iac { tau: f64 },
    /// `e^{−iωτ}` with τ rounded to the shaper's time step.
    TimeShift { tau: f64 },
    /// Unit transmission on the listed pixels (1-based), zero elsewhere.
    PixelWindow { pixels: Vec<usize> },
    /// Samples of M at absolute frequencies, interpolated linearly. Pixels
    /// beyond the sampled range take the nearest end value.
    Custom { omega: Vec<f64>, values: Vec<Complex64> },
    /// Any continuous transfer sampled at the pixel centers.
    Transfer(Transfer),
}

/// Complex transmission of every SLM pixel together with the calibration it
/// was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct SlmMask {
    coefficients: Vec<Complex64>,
    wavelengths: Vec<f64>,
    pub description: String,
    /// Adjustments made while building the mask (clamped magnitudes, rounded delays).
    pub warnings: Vec<String>,
    pub geometry_hash: String,
}

impl SlmMask {
    /// Mask from explicit coefficients; magnitudes above one are clamped.
    pub fn from_coefficients(geometry: &ShaperGeometry, coefficients: Vec<Complex64>, description: &str) -> Result<Self> {
        let wavelengths = geometry.pixel_map()?;
        if coefficients.len() != wavelengths.len() {
            return Err(invalid(format!(
                "mask needs {} coefficients, got {}",
                wavelengths.len(),
                coefficients.len()
            )));
        }
        let mut warnings = Vec::new();
        let mut clamped = 0usize;
        let mut worst = 0.0f64;
        let mut coefficients = coefficients;
        for c in coefficients.iter_mut() {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NonFinite("mask coefficient"));
            }
            let (mut r, phi) = c.to_polar();
            if r > 1.0 {
                clamped += 1;
                worst = worst.max(r);
                r = 1.0;
            }
            *c = Complex64::from_polar(r, normalize_phase(phi));
        }
        if clamped > 0 {
            warnings.push(format!("{clamped} coefficients with magnitude up to {worst:.6} clamped to 1"));
        }
        Ok(Self {
            coefficients,
            wavelengths,
            description: description.to_string(),
            warnings,
            geometry_hash: geometry.hash(),
        })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Calibrated center wavelength (nm) of each pixel.
    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Pointwise product, i.e. both masks programmed at once.
    pub fn product(&self, other: &SlmMask) -> Result<SlmMask> {
        if self.geometry_hash != other.geometry_hash {
            return Err(invalid("masks were built for different geometries"));
        }
        let coefficients = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| {
                let c = a * b;
                Complex64::from_polar(c.norm(), normalize_phase(c.arg()))
            })
            .collect();
        let mut warnings = self.warnings.clone();
        warnings.extend(other.warnings.iter().cloned());
        Ok(SlmMask {
            coefficients,
            wavelengths: self.wavelengths.clone(),
            description: format!("{} * {}", self.description, other.description),
            warnings,
            geometry_hash: self.geometry_hash.clone(),
        })
    }

    /// Write as CSV: geometry hash comment, header, units row, one line per pixel.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# geometry {}", self.geometry_hash)?;
        writeln!(out, "# mask {}", self.description)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pixel", "magnitude", "phase", "wavelength"])?;
        w.write_record(["", "", "rad", "nm"])?;
        for (i, (c, l)) in self.coefficients.iter().zip(&self.wavelengths).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                format!("{:.12e}", c.norm()),
                format!("{:.12e}", normalize_phase(c.arg())),
                format!("{l:.12e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a mask written by [`SlmMask::write_csv`]. The geometry hash must
    /// match `geometry`.
    pub fn read_csv<R: BufRead>(mut input: R, geometry: &ShaperGeometry) -> Result<SlmMask> {
        let mut hash = None;
        let mut description = String::new();
        let mut body = String::new();
        let mut line = String::new();
        while input.read_line(&mut line)? > 0 {
            if let Some(rest) = line.strip_prefix("# geometry ") {
                hash = Some(rest.trim().to_string());
            } else if let Some(rest) = line.strip_prefix("# mask ") {
                description = rest.trim().to_string();
            } else if !line.starts_with('#') {
                body.push_str(&line);
            }
            line.clear();
        }
        let expected = geometry.hash();
        match hash {
            Some(h) if h == expected => {}
            Some(h) => {
                return Err(Error::Configuration(format!(
                    "mask geometry hash {h} does not match the current geometry {expected}"
                )))
            }
            None => return Err(Error::Parse("mask file has no geometry hash".into())),
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let mut coefficients = Vec::new();
        for (row, record) in reader.records().enumerate().skip(1) {
            let record = record?;
            let field = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse(format!("mask row {}: bad column {}", row + 1, i + 1)))
            };
            let pixel = field(0)? as usize;
            if pixel != coefficients.len() + 1 {
                return Err(Error::Parse(format!("mask row {}: expected pixel {}", row + 1, coefficients.len() + 1)));
            }
            coefficients.push(Complex64::from_polar(field(1)?, field(2)?));
        }
        SlmMask::from_coefficients(geometry, coefficients, &description)
    }
}

/// Map a phase onto (−π, π].
pub fn normalize_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Program `kind` onto the SLM described by `geometry`, sampling at each
/// pixel's center frequency.
pub fn mask_build(kind: &MaskKind, geometry: &ShaperGeometry) -> Result<SlmMask> {
    let omegas: Vec<f64> = geometry.pixel_map()?.into_iter().map(wavelength_to_omega).collect();
    let check_tau = |tau: f64| -> Result<()> {
        if !tau.is_finite() {
            return Err(Error::NonFinite("delay"));
        }
        if tau.abs() > geometry.tau_max() {
            return Err(Error::Aliasing {
                tau,
                tau_max: geometry.tau_max(),
            });
        }
        Ok(())
    };
    let mut notes = Vec::new();
    let (values, description): (Vec<Complex64>, String) = match kind {
        MaskKind::Quadratic { c2 } => {
            let t = Transfer::Quadratic {
                c2: *c2,
                center: geometry.center_frequency(),
            };
            (omegas.iter().map(|&w| t.eval(w)).collect(), format!("quadratic c2={c2} fs^2"))
        }
        MaskKind::Iac { tau } => {
            check_tau(*tau)?;
            let t = Transfer::Iac { tau: *tau };
            (omegas.iter().map(|&w| t.eval(w)).collect(), format!("iac tau={tau} fs"))
        }
        MaskKind::TimeShift { tau } => {
            check_tau(*tau)?;
            let q = (tau / geometry.time_step).round() * geometry.time_step;
            if (q - tau).abs() > 1e-12 {
                notes.push(format!("delay {tau} fs rounded to {q} fs"));
            }
            let t = Transfer::TimeShift { tau: q };
            (omegas.iter().map(|&w| t.eval(w)).collect(), format!("timeshift tau={q} fs"))
        }
        MaskKind::PixelWindow { pixels } => {
            let mut v = vec![Complex64::new(0.0, 0.0); omegas.len()];
            for &p in pixels {
                if p == 0 || p > omegas.len() {
                    return Err(Error::Range(format!("pixel {p} outside 1..={}", omegas.len())));
                }
                v[p - 1] = Complex64::new(1.0, 0.0);
            }
            (v, format!("window of {} pixels", pixels.len()))
        }
        MaskKind::Custom { omega, values } => {
            if omega.len() != values.len() || omega.len() < 2 {
                return Err(invalid("custom mask needs at least two (ω, M) samples of equal length"));
            }
            if omega.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(invalid("custom mask frequencies must be strictly increasing"));
            }
            let v = omegas.iter().map(|&w| interpolate(omega, values, w)).collect();
            (v, format!("custom ({} samples)", omega.len()))
        }
        MaskKind::Transfer(t) => (omegas.iter().map(|&w| t.eval(w)).collect(), format!("{t:?}")),
    };
    let mut mask = SlmMask::from_coefficients(geometry, values, &description)?;
    mask.warnings.extend(notes);
    Ok(mask)
}

fn interpolate(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let f = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - f) + ys[i + 1] * f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ones(m: &SlmMask) -> bool {
        m.coefficients().iter().all(|c| (c - 1.0).norm() < 1e-12)
    }

    #[test]
    fn identities() {
        let g = ShaperGeometry::default();
        assert!(all_ones(&mask_build(&MaskKind::Quadratic { c2: 0.0 }, &g).unwrap()));
        assert!(all_ones(&mask_build(&MaskKind::Iac { tau: 0.0 }, &g).unwrap()));
        assert_eq!(mask_build(&MaskKind::Iac { tau: 0.0 }, &g).unwrap().len(), 640);
    }

    #[test]
    fn aliasing_limit() {
        let g = ShaperGeometry::default();
        let err = mask_build(&MaskKind::TimeShift { tau: 2000.0 }, &g).unwrap_err();
        assert!(matches!(err, Error::Aliasing { .. }));
        assert!(err.to_string().contains("1904"));
        assert!(mask_build(&MaskKind::TimeShift { tau: 1800.0 }, &g).is_ok());
    }

    #[test]
    fn timeshift_quantized() {
        let g = ShaperGeometry::default();
        let m = mask_build(&MaskKind::TimeShift { tau: 10.0 }, &g).unwrap();
        assert_eq!(m.warnings.len(), 1);
        let exact = mask_build(&MaskKind::TimeShift { tau: 1429.0 * 0.007 }, &g).unwrap();
        assert!(exact.warnings.is_empty());
        for (a, b) in m.coefficients().iter().zip(exact.coefficients()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn magnitudes_clamped() {
        let g = ShaperGeometry::default();
        let m = mask_build(
            &MaskKind::Custom {
                omega: vec![2.0, 3.0],
                values: vec![Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0)],
            },
            &g,
        )
        .unwrap();
        assert!(m.coefficients().iter().all(|c| c.norm() <= 1.0 + 1e-15));
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn phases_in_half_open_interval() {
        assert_eq!(normalize_phase(-PI), PI);
        assert_eq!(normalize_phase(PI), PI);
        assert!((normalize_phase(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip() {
        let g = ShaperGeometry::default();
        let m = mask_build(&MaskKind::Quadratic { c2: 1500.0 }, &g).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = SlmMask::read_csv(buf.as_slice(), &g).unwrap();
        for (a, b) in m.coefficients().iter().zip(back.coefficients()) {
            assert!((a - b).norm() < 1e-10);
        }
        let other = ShaperGeometry {
            focal_length: 300.0,
            ..g
        };
        assert!(matches!(SlmMask::read_csv(buf.as_slice(), &other), Err(Error::Configuration(_))));
    }
}
