use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use super::geometry::ShaperGeometry;
use super::mask::{SlmMask, Transfer};
use crate::error::{Error, Result};
use crate::source::BiphotonState;
use crate::spectral::ClassicalField;

/// Largest energy fraction allowed to fall outside the SLM before the
/// application is refused.
pub const CLIP_TOLERANCE: f64 = 1e-6;

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Precomputed blur and gap parameters shared by every frequency sample.
struct Optics<'a> {
    geometry: &'a ShaperGeometry,
    sigma: f64,
    half: f64,
    reach: f64,
}

impl<'a> Optics<'a> {
    fn new(geometry: &'a ShaperGeometry) -> Result<Self> {
        geometry.validate()?;
        let sigma = geometry.blur_sigma_pixels()?;
        Ok(Self {
            geometry,
            sigma,
            half: geometry.active_half_width(),
            reach: 8.0 * sigma + 1.0,
        })
    }

    /// Calls `f(pixel_index, weight)` for every pixel whose active area
    /// overlaps the blurred spot centred at coordinate `u`.
    fn for_each_weight(&self, u: f64, mut f: impl FnMut(usize, f64)) {
        let n = self.geometry.pixel_count as f64;
        let lo = (u - self.reach).floor().max(1.0);
        let hi = (u + self.reach).ceil().min(n);
        if lo > hi {
            return;
        }
        for p in lo as usize..=hi as usize {
            let pf = p as f64;
            let w = normal_cdf((pf + self.half - u) / self.sigma) - normal_cdf((pf - self.half - u) / self.sigma);
            if w > 0.0 {
                f(p - 1, w);
            }
        }
    }

    fn amplitude(&self, mask: &SlmMask, omega: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        if let Some(u) = self.geometry.pixel_coordinate(omega) {
            let c = mask.coefficients();
            self.for_each_weight(u, |i, w| acc += c[i] * w);
        }
        acc
    }

    fn power(&self, mask: &SlmMask, omega: f64) -> f64 {
        let mut acc = 0.0;
        if let Some(u) = self.geometry.pixel_coordinate(omega) {
            let c = mask.coefficients();
            self.for_each_weight(u, |i, w| acc += c[i].norm_sqr() * w);
        }
        acc
    }

    fn inside(&self, omega: f64) -> bool {
        let n = self.geometry.pixel_count as f64;
        self.geometry
            .pixel_coordinate(omega)
            .is_some_and(|u| (0.5..=n + 0.5).contains(&u))
    }
}

fn check_hash(mask: &SlmMask, geometry: &ShaperGeometry) -> Result<()> {
    if mask.geometry_hash != geometry.hash() {
        return Err(Error::Configuration("mask was built for a different shaper geometry".into()));
    }
    Ok(())
}

/// Coherent field transfer of the programmed SLM at angular frequency
/// `omega`: the pixelated mask, with zero transmission in the gaps, blurred
/// by the Gaussian spot.
pub fn effective_transfer(mask: &SlmMask, geometry: &ShaperGeometry, omega: f64) -> Result<Complex64> {
    check_hash(mask, geometry)?;
    Ok(Optics::new(geometry)?.amplitude(mask, omega))
}

/// Energy fraction of `field` at frequencies that miss the SLM.
pub fn clipped_fraction(field: &ClassicalField, geometry: &ShaperGeometry) -> Result<f64> {
    let optics = Optics::new(geometry)?;
    let grid = field.grid();
    let intensity = field.spectral_intensity();
    let total: f64 = intensity.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let outside: f64 = intensity
        .iter()
        .enumerate()
        .filter(|(k, _)| !optics.inside(grid.omega(*k)))
        .map(|(_, v)| v)
        .sum();
    Ok(outside / total)
}

fn clipped_fraction_biphoton(state: &BiphotonState, optics: &Optics) -> f64 {
    let grid = state.grid();
    let marginal = state.marginal();
    let total: f64 = marginal.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let outside: f64 = marginal
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let w = grid.omega(*k);
            !(optics.inside(w) && optics.inside(state.pump_frequency - w))
        })
        .map(|(_, v)| v)
        .sum();
    outside / total
}

/// `E_out(Ω) = E_in(Ω)·M_eff(Ω)`.
pub fn apply_mask_classical(field: &ClassicalField, mask: &SlmMask, geometry: &ShaperGeometry) -> Result<ClassicalField> {
    check_hash(mask, geometry)?;
    let clipped = clipped_fraction(field, geometry)?;
    if clipped > CLIP_TOLERANCE {
        return Err(Error::OutOfRange {
            clipped_fraction: clipped,
        });
    }
    let optics = Optics::new(geometry)?;
    let grid = *field.grid();
    let amplitude = field
        .amplitude()
        .iter()
        .enumerate()
        .map(|(k, a)| a * optics.amplitude(mask, grid.omega(k)))
        .collect();
    field.with_amplitude(amplitude)
}

/// Both photons pass the same SLM:
/// `ψ′(Ω) = ψ(Ω)·M_eff(ω_p/2+Ω)·M_eff(ω_p/2−Ω)`. The norm is not restored.
pub fn apply_mask_biphoton(state: &BiphotonState, mask: &SlmMask, geometry: &ShaperGeometry) -> Result<BiphotonState> {
    check_hash(mask, geometry)?;
    let optics = Optics::new(geometry)?;
    let clipped = clipped_fraction_biphoton(state, &optics);
    if clipped > CLIP_TOLERANCE {
        return Err(Error::OutOfRange {
            clipped_fraction: clipped,
        });
    }
    let grid = *state.grid();
    let psi = state
        .psi()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let w = grid.omega(k);
            p * optics.amplitude(mask, w) * optics.amplitude(mask, state.pump_frequency - w)
        })
        .collect();
    state.with_psi(psi)
}

/// Spectrum behind the shaper as seen by a spectrometer,
/// `|E(Ω)|²·T(Ω)` with `T` the pixel power transmission blurred by the spot.
/// Unlike the coherent amplitude transfer this adds the powers of all
/// pixels the spot covers.
pub fn transmitted_spectrum(field: &ClassicalField, mask: &SlmMask, geometry: &ShaperGeometry) -> Result<Vec<f64>> {
    check_hash(mask, geometry)?;
    let optics = Optics::new(geometry)?;
    let grid = *field.grid();
    Ok(field
        .spectral_intensity()
        .into_iter()
        .enumerate()
        .map(|(k, i)| i * optics.power(mask, grid.omega(k)))
        .collect())
}

/// Zero every frequency of `field` that misses the SLM.
pub fn clip_classical(field: &ClassicalField, geometry: &ShaperGeometry) -> Result<ClassicalField> {
    let optics = Optics::new(geometry)?;
    let grid = *field.grid();
    let amplitude = field
        .amplitude()
        .iter()
        .enumerate()
        .map(|(k, a)| if optics.inside(grid.omega(k)) { *a } else { Complex64::new(0.0, 0.0) })
        .collect();
    field.with_amplitude(amplitude)
}

/// Zero every biphoton component for which either photon misses the SLM.
pub fn clip_biphoton(state: &BiphotonState, geometry: &ShaperGeometry) -> Result<BiphotonState> {
    let optics = Optics::new(geometry)?;
    let grid = *state.grid();
    let psi = state
        .psi()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let w = grid.omega(k);
            if optics.inside(w) && optics.inside(state.pump_frequency - w) {
                *p
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    state.with_psi(psi)
}

/// Apply an ideal continuous transfer to a classical field.
pub fn apply_transfer_classical(field: &ClassicalField, transfer: &Transfer) -> Result<ClassicalField> {
    let grid = *field.grid();
    let amplitude = field
        .amplitude()
        .iter()
        .enumerate()
        .map(|(k, a)| a * transfer.eval(grid.omega(k)))
        .collect();
    field.with_amplitude(amplitude)
}

/// Apply an ideal continuous transfer to both photons of a pair.
pub fn apply_transfer_biphoton(state: &BiphotonState, transfer: &Transfer) -> Result<BiphotonState> {
    let grid = *state.grid();
    let psi = state
        .psi()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let w = grid.omega(k);
            p * transfer.eval(w) * transfer.eval(state.pump_frequency - w)
        })
        .collect();
    state.with_psi(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shaper::mask::{mask_build, MaskKind};
    use crate::source::{biphoton_reduced, Envelope, SourceParams};
    use crate::spectral::FrequencyGrid;

    fn narrow_field(g: &ShaperGeometry) -> ClassicalField {
        let grid = FrequencyGrid::new(g.center_frequency(), 0.25, 1024).unwrap();
        ClassicalField::gaussian(grid, 0.03, 1.0, 90e6).unwrap()
    }

    #[test]
    fn all_ones_loses_gap_fraction() {
        let g = ShaperGeometry::default();
        let f = narrow_field(&g);
        let ones = mask_build(&MaskKind::Quadratic { c2: 0.0 }, &g).unwrap();
        let out = apply_mask_classical(&f, &ones, &g).unwrap();
        let k = f.grid().zero_index();
        let amp = (out.amplitude()[k] / f.amplitude()[k]).norm();
        assert!((amp - 0.97).abs() < 0.002, "amplitude transmission {amp}");
        let t: f64 = transmitted_spectrum(&f, &ones, &g).unwrap().iter().sum::<f64>()
            / f.spectral_intensity().iter().sum::<f64>();
        assert!((t - 0.97).abs() < 0.002, "power transmission {t}");
    }

    #[test]
    fn zero_mask_zero_field() {
        let g = ShaperGeometry::default();
        let f = narrow_field(&g);
        let zero = mask_build(&MaskKind::PixelWindow { pixels: vec![] }, &g).unwrap();
        let out = apply_mask_classical(&f, &zero, &g).unwrap();
        assert!(out.amplitude().iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn broadband_field_is_refused_then_clipped() {
        let g = ShaperGeometry::default();
        let grid = FrequencyGrid::new(g.center_frequency(), 0.8, 1024).unwrap();
        let f = ClassicalField::gaussian(grid, 0.1, 1.0, 90e6).unwrap();
        let ones = mask_build(&MaskKind::Iac { tau: 0.0 }, &g).unwrap();
        match apply_mask_classical(&f, &ones, &g) {
            Err(Error::OutOfRange { clipped_fraction }) => assert!(clipped_fraction > 0.01),
            other => panic!("expected out-of-range, got {other:?}"),
        }
        let clipped = clip_classical(&f, &g).unwrap();
        assert!(apply_mask_classical(&clipped, &ones, &g).is_ok());
    }

    #[test]
    fn biphoton_pair_transmission_and_symmetry() {
        let g = ShaperGeometry::default();
        let params = SourceParams {
            envelope: Envelope::Gaussian { fwhm_nm: 20.0 },
            ..SourceParams::default()
        };
        let grid = params.biphoton_grid(0.3, 1024).unwrap();
        let state = biphoton_reduced(&params, &grid).unwrap();
        let ones = mask_build(&MaskKind::Quadratic { c2: 0.0 }, &g).unwrap();
        let out = apply_mask_biphoton(&state, &ones, &g).unwrap();
        let k = grid.zero_index();
        let ratio = (out.psi()[k] / state.psi()[k]).norm();
        assert!((ratio - 0.97f64.powi(2)).abs() < 0.004, "pair transmission {ratio}");
        let quad = mask_build(&MaskKind::Quadratic { c2: 800.0 }, &g).unwrap();
        let out = apply_mask_biphoton(&state, &quad, &g).unwrap();
        for k in 0..grid.count() {
            if let Some(j) = grid.mirror_index(k) {
                assert!((out.psi()[k] - out.psi()[j]).norm() < 1e-12);
            }
        }
        assert!(out.norm() <= state.norm());
    }

    #[test]
    fn ideal_quadratic_on_pair_adds_sum_phase() {
        let params = SourceParams::default();
        let grid = params.biphoton_grid(1.2, 512).unwrap();
        let state = biphoton_reduced(&params, &grid).unwrap();
        let c2 = 300.0;
        let t = Transfer::Quadratic { c2, center: 0.0 };
        let out = apply_transfer_biphoton(&state, &t).unwrap();
        let wp = state.pump_frequency;
        for k in (0..grid.count()).step_by(37) {
            let d = grid.detuning(k);
            let expected = state.psi()[k] * Complex64::from_polar(1.0, c2 * (d * d + wp * wp / 4.0));
            assert!((out.psi()[k] - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn ideal_iac_on_pair() {
        let params = SourceParams::default();
        let grid = params.biphoton_grid(1.2, 256).unwrap();
        let state = biphoton_reduced(&params, &grid).unwrap();
        let tau = 13.7;
        let out = apply_transfer_biphoton(&state, &Transfer::Iac { tau }).unwrap();
        let wp = state.pump_frequency;
        let one = Complex64::new(1.0, 0.0);
        for k in (0..grid.count()).step_by(17) {
            let d = grid.detuning(k);
            let m = 0.25
                * (one + Complex64::from_polar(1.0, -(wp / 2.0 + d) * tau))
                * (one + Complex64::from_polar(1.0, -(wp / 2.0 - d) * tau));
            assert!((out.psi()[k] - state.psi()[k] * m).norm() < 1e-12);
        }
    }
}
