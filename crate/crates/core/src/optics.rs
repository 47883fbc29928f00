//! Grating-compressor dispersion: group-delay dispersion per grating shift,
//! the setup phase for a given shift, and Taylor-coefficient extraction.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::shaper::ShaperGeometry;
use crate::spectral::FrequencyGrid;
use crate::units::C_NM_PER_FS;

/// GDD of a grating pair per unit normal separation (fs²/mm),
/// `−m²λ³/(2πc²G²cos²β)`, for wavelength `nm`, period `period_um` and
/// diffraction angle `beta` (rad).
pub fn grating_pair_gvd(order: u32, nm: f64, period_um: f64, beta: f64) -> f64 {
    let g = 1000.0 * period_um;
    let m = order as f64;
    -m * m * nm.powi(3) / (2.0 * PI * C_NM_PER_FS * C_NM_PER_FS * g * g * beta.cos().powi(2)) * 1e6
}

/// Setup GDD added per millimetre of grating shift (fs²/mm). Shifting by
/// g > 0 compensates positive dispersion elsewhere in the setup.
pub fn gvd_per_shift(geometry: &ShaperGeometry) -> Result<f64> {
    let beta = geometry.diffraction_angle(geometry.center_wavelength)?;
    Ok(grating_pair_gvd(
        geometry.order,
        geometry.center_wavelength,
        geometry.grating_period,
        beta,
    ))
}

/// Ratio c₃/c₂ (fs) of the grating pair at the center wavelength.
pub fn third_to_second_ratio(geometry: &ShaperGeometry) -> Result<f64> {
    let beta = geometry.diffraction_angle(geometry.center_wavelength)?;
    let lambda = geometry.center_wavelength;
    let sin_a = geometry.incidence_angle.to_radians().sin();
    let ml_g = geometry.order as f64 * lambda / (1000.0 * geometry.grating_period);
    Ok(-3.0 * lambda / (2.0 * PI * C_NM_PER_FS) * (1.0 + ml_g * sin_a - sin_a * sin_a) / beta.cos().powi(2))
}

/// Residual spectral phase of the compressor at one grating shift.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressorState {
    pub geometry: ShaperGeometry,
    /// Grating shift g (mm).
    pub shift: f64,
    pub grid: FrequencyGrid,
    /// φ(Ω) (rad) on `grid`.
    pub phase: Vec<f64>,
    /// Taylor coefficients c_0 … c_K (fs^k).
    pub coefficients: Vec<f64>,
    /// True when c₃ comes from the analytic grating-pair model rather than a
    /// measurement or ray trace.
    pub model_grade: bool,
}

impl CompressorState {
    /// Wrap externally supplied phase samples, e.g. from a ray trace.
    pub fn from_samples(geometry: ShaperGeometry, grid: FrequencyGrid, phase: Vec<f64>, orders: usize) -> Result<Self> {
        if phase.len() != grid.count() {
            return Err(invalid(format!(
                "phase length {} does not match grid count {}",
                phase.len(),
                grid.count()
            )));
        }
        if phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("phase samples"));
        }
        let coefficients = taylor_coeffs(&grid.detunings(), &phase, orders)?;
        Ok(Self {
            geometry,
            shift: f64::NAN,
            grid,
            phase,
            coefficients,
            model_grade: false,
        })
    }

    /// c₂ (fs²).
    pub fn c2(&self) -> f64 {
        self.coefficients[2]
    }

    /// Write the phase as CSV with columns Ω (rad/fs) and φ (rad).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_phase_csv(out, &self.grid.detunings(), &self.phase)
    }
}

/// Analytic setup phase `φ(Ω) = (c₂/2)Ω² + (c₃/6)Ω³` for grating shift `g`
/// (mm); the cubic term is included when `orders ≥ 3`.
pub fn setup_phase(g: f64, geometry: &ShaperGeometry, grid: &FrequencyGrid, orders: usize) -> Result<CompressorState> {
    if orders < 2 {
        return Err(invalid(format!("need at least second order, got {orders}")));
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("grating shift"));
    }
    let c2 = gvd_per_shift(geometry)? * g;
    let c3 = if orders >= 3 { third_to_second_ratio(geometry)? * c2 } else { 0.0 };
    let phase = grid
        .detunings()
        .into_iter()
        .map(|w| 0.5 * c2 * w * w + c3 / 6.0 * w * w * w)
        .collect();
    let mut coefficients = vec![0.0; orders + 1];
    coefficients[2] = c2;
    if orders >= 3 {
        coefficients[3] = c3;
    }
    Ok(CompressorState {
        geometry: geometry.clone(),
        shift: g,
        grid: *grid,
        phase,
        coefficients,
        model_grade: orders >= 3,
    })
}

/// Least-squares polynomial of degree `orders` through φ(Ω); returns
/// `c_k = k!·a_k` for k = 0 … orders.
pub fn taylor_coeffs(detunings: &[f64], phase: &[f64], orders: usize) -> Result<Vec<f64>> {
    if detunings.len() != phase.len() {
        return Err(invalid("detuning and phase lengths differ"));
    }
    let needed = (4 * orders).max(orders + 1);
    if detunings.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: detunings.len(),
        });
    }
    let scale = detunings.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if !(scale > 0.0) {
        return Err(invalid("detunings must not all be zero"));
    }
    let n = detunings.len();
    let a = DMatrix::from_fn(n, orders + 1, |i, k| (detunings[i] / scale).powi(k as i32));
    let b = DVector::from_column_slice(phase);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-14).map_err(|e| invalid(e.to_string()))?;
    let mut factorial = 1.0;
    Ok((0..=orders)
        .map(|k| {
            if k > 0 {
                factorial *= k as f64;
            }
            factorial * x[k] / scale.powi(k as i32)
        })
        .collect())
}

/// Linearized dispersion γ, beam magnification factor b and the SLM-plane
/// magnification M of the compressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySummary {
    /// γ (fs/µm).
    pub gamma: f64,
    pub b: f64,
    pub magnification: f64,
}

/// `γ = 2πm/(ω_c G cos β)`, `b = cos α / cos β`, `M = b f₂/f₁` with `f1` in mm.
pub fn geometry_summary(geometry: &ShaperGeometry, f1: f64) -> Result<GeometrySummary> {
    geometry.validate()?;
    if !(f1 > 0.0) {
        return Err(invalid(format!("f1 must be positive, got {f1}")));
    }
    let beta = geometry.diffraction_angle(geometry.center_wavelength)?;
    let gamma = 2.0 * PI * geometry.order as f64 / (geometry.center_frequency() * geometry.grating_period * beta.cos());
    let b = geometry.incidence_angle.to_radians().cos() / beta.cos();
    Ok(GeometrySummary {
        gamma,
        b,
        magnification: b * geometry.focal_length / f1,
    })
}

/// Write (Ω, φ) samples as CSV with a header and a units row.
pub fn write_phase_csv<W: Write>(out: W, detunings: &[f64], phase: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "phase"])?;
    w.write_record(["rad/fs", "rad"])?;
    for (o, p) in detunings.iter().zip(phase) {
        w.write_record([format!("{o:.12e}"), format!("{p:.12e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Read (Ω, φ) samples written by [`write_phase_csv`]. A units row is
/// recognised and skipped.
pub fn read_phase_csv<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_reader(input);
    let mut omega = Vec::new();
    let mut phase = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |j: usize| record.get(j).and_then(|s| s.trim().parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(o), Some(p)) => {
                omega.push(o);
                phase.push(p);
            }
            _ if i == 0 => continue,
            _ => return Err(Error::Parse(format!("phase file row {}: expected two numbers", i + 2))),
        }
    }
    Ok((omega, phase))
}
