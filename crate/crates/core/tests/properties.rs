//! Property tests for the invariants of the shaper, source and rate layers.

use biphoton::analysis::gvd_slope;
use biphoton::detector::DetectorParams;
use biphoton::optics::setup_phase;
use biphoton::rates::{beta_q_from_beta_c, pm_factor, sfg_per_pulse, tpa_rate};
use biphoton::shaper::{apply_mask_classical, apply_transfer_biphoton, apply_transfer_classical, mask_build};
use biphoton::shaper::{MaskKind, ShaperGeometry, Transfer};
use biphoton::source::{biphoton_reduced, Envelope, PhaseMatching, SourceParams};
use biphoton::spectral::{ClassicalField, FrequencyGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn energy(a: &[Complex64], d: f64) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>() * d
}

fn slm_field(geometry: &ShaperGeometry) -> ClassicalField {
    let grid = FrequencyGrid::new(geometry.center_frequency(), 0.3, 512).unwrap();
    ClassicalField::gaussian(grid, 0.02, 1.0, 90e6).unwrap()
}

fn transfer_strategy() -> impl Strategy<Value = Transfer> {
    prop_oneof![
        (-3000.0..3000.0f64).prop_map(|c2| Transfer::Quadratic { c2, center: 2.3546 }),
        (-500.0..500.0f64).prop_map(|tau| Transfer::Iac { tau }),
        (-500.0..500.0f64).prop_map(|tau| Transfer::TimeShift { tau }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pixel_map_is_monotone(
        lines in 1200.0..1800.0f64,
        alpha in 30.0..50.0f64,
        focal in 150.0..500.0f64,
        pitch in 50.0..150.0f64,
    ) {
        let geometry = ShaperGeometry {
            grating_period: 1000.0 / lines,
            incidence_angle: alpha,
            focal_length: focal,
            pixel_pitch: pitch,
            pixel_gap: 0.03 * pitch,
            ..ShaperGeometry::default()
        };
        prop_assume!(geometry.validate().is_ok());
        let map = geometry.pixel_map();
        prop_assume!(map.is_ok());
        let map = map.unwrap();
        prop_assert!(map.windows(2).all(|w| w[1] > w[0]));
        let center = geometry.wavelength_at(geometry.center_pixel).unwrap();
        prop_assert!((center - geometry.center_wavelength).abs() < 1e-9);
    }

    #[test]
    fn masks_never_add_energy(c2 in -4000.0..4000.0f64, tau in -1500.0..1500.0f64, pick in 0usize..3) {
        let geometry = ShaperGeometry::default();
        let field = slm_field(&geometry);
        let kind = match pick {
            0 => MaskKind::Quadratic { c2 },
            1 => MaskKind::Iac { tau },
            _ => MaskKind::TimeShift { tau },
        };
        let mask = mask_build(&kind, &geometry).unwrap();
        let out = apply_mask_classical(&field, &mask, &geometry).unwrap();
        let d = field.grid().spacing();
        prop_assert!(energy(out.amplitude(), d) <= energy(field.amplitude(), d) * (1.0 + 1e-12));
    }

    #[test]
    fn ideal_transfers_compose(a in transfer_strategy(), b in transfer_strategy()) {
        let grid = FrequencyGrid::new(2.3546, 0.3, 256).unwrap();
        let field = ClassicalField::gaussian(grid, 0.02, 1.0, 90e6).unwrap();
        let sequential = apply_transfer_classical(&apply_transfer_classical(&field, &a).unwrap(), &b).unwrap();
        let combined = apply_transfer_classical(&field, &Transfer::Product(vec![a, b])).unwrap();
        for (x, y) in sequential.amplitude().iter().zip(combined.amplitude()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn quadratic_masks_multiply(c2a in -3000.0..3000.0f64, c2b in -3000.0..3000.0f64) {
        let geometry = ShaperGeometry::default();
        let a = mask_build(&MaskKind::Quadratic { c2: c2a }, &geometry).unwrap();
        let b = mask_build(&MaskKind::Quadratic { c2: c2b }, &geometry).unwrap();
        let sum = mask_build(&MaskKind::Quadratic { c2: c2a + c2b }, &geometry).unwrap();
        let product = a.product(&b).unwrap();
        for (x, y) in product.coefficients().iter().zip(sum.coefficients()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn shaping_keeps_exchange_symmetry(t in transfer_strategy(), u in transfer_strategy()) {
        let params = SourceParams {
            envelope: Envelope::Gaussian { fwhm_nm: 30.0 },
            ..SourceParams::default()
        };
        let grid = params.biphoton_grid(0.6, 1025).unwrap();
        let state = biphoton_reduced(&params, &grid).unwrap();
        let shaped = apply_transfer_biphoton(&state, &Transfer::Product(vec![t, u])).unwrap();
        let psi = shaped.psi();
        for k in 0..grid.count() {
            if let Some(j) = grid.mirror_index(k) {
                prop_assert!((psi[k] - psi[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn setup_phase_is_linear_in_shift(g1 in -2.0..2.0f64, g2 in -2.0..2.0f64, orders in 2usize..4) {
        let geometry = ShaperGeometry::default();
        let grid = FrequencyGrid::new(2.3546, 0.3, 128).unwrap();
        let p1 = setup_phase(g1, &geometry, &grid, orders).unwrap();
        let p2 = setup_phase(g2, &geometry, &grid, orders).unwrap();
        let p12 = setup_phase(g1 + g2, &geometry, &grid, orders).unwrap();
        for k in 0..grid.count() {
            let lhs = p12.phase[k];
            let rhs = p1.phase[k] + p2.phase[k];
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn pm_factor_bounded_for_real_spectra(
        values in prop::collection::vec(0.0..1.0f64, 64),
        acceptance in 0.01..0.5f64,
    ) {
        prop_assume!(values.iter().sum::<f64>() > 1e-3);
        let grid = FrequencyGrid::new(2.3546, 0.3, 64).unwrap();
        let amplitude = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let field = ClassicalField::new(grid, amplitude, 90e6).unwrap();
        let pm = PhaseMatching { acceptance, ..PhaseMatching::default() };
        let p = pm_factor(&field, &pm).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
    }

    #[test]
    fn rate_formulas_are_unit_homogeneous(
        beta in 1e-40..1e-34f64,
        sigma in 1.0..100.0f64,
        tau in 10.0..500.0f64,
        n in 1.0..1e6f64,
        k in 0.1..10.0f64,
    ) {
        // a spot k times larger compensated by a coefficient k² larger
        let a = sfg_per_pulse(beta, sigma, tau, n).unwrap();
        let b = sfg_per_pulse(beta * k * k, sigma * k, tau, n).unwrap();
        prop_assert!((a / b - 1.0).abs() < 1e-12);
        // pulse duration and photon number: N² / τ
        let c = sfg_per_pulse(beta, sigma, tau * k * k, n * k).unwrap();
        prop_assert!((a / c - 1.0).abs() < 1e-12);
        let q1 = beta_q_from_beta_c(beta, sigma, tau).unwrap();
        let q2 = beta_q_from_beta_c(beta * k, sigma, tau * k).unwrap();
        prop_assert!((q1 / q2 - 1.0).abs() < 1e-12);
        // flux in other units: φ → kφ with σ_e → σ_e/k, σ_c → σ_c/k²
        let r1 = tpa_rate(n, 1e-3, 1e-7).unwrap();
        let r2 = tpa_rate(n * k, 1e-3 / k, 1e-7 / (k * k)).unwrap();
        prop_assert!((r1 / r2 - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gvd_slope_recovers_injected_slope(slope in -3500.0..-1500.0f64, sigma in 0.02..0.035f64) {
        let grid = FrequencyGrid::new(2.3546, 0.5, 256).unwrap();
        let field = ClassicalField::gaussian(grid, sigma, 1.0, 90e6).unwrap();
        let g: Vec<f64> = (-2..=2).map(|k| 0.2 * k as f64).collect();
        let c2: Vec<f64> = (-80..=80).map(|k| 40.0 * k as f64).collect();
        let result = gvd_slope(&g, &c2, &field, &DetectorParams::default(), slope, None).unwrap();
        prop_assert!((result.slope / slope - 1.0).abs() < 0.02, "{} vs {}", result.slope, slope);
    }
}
