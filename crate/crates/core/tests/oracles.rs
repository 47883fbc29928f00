//! Independent numerical oracles for the closed forms and fast paths.

use std::f64::consts::PI;

use biphoton::analysis::{dispersion_scan_quantum, half_max_width, iac_scan, quantum_dispersion_rate, Shaping};
use biphoton::analysis::{fit_model, ModelKind};
use biphoton::detector::{coincidence_rate, sfg_classical, DetectorParams, UpconversionAcceptance};
use biphoton::rates::{beta_c_fit, pm_factor, sfg_per_pulse, sfg_pulsed};
use biphoton::source::{biphoton_reduced, Envelope, PhaseMatching, SourceParams};
use biphoton::spectral::{ClassicalField, FrequencyGrid};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Composite Simpson rule on [a, b] with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn narrow_state() -> biphoton::source::BiphotonState {
    let p = SourceParams {
        envelope: Envelope::Gaussian { fwhm_nm: 16.4 },
        ..SourceParams::default()
    };
    biphoton_reduced(&p, &p.biphoton_grid(0.6, 2048).unwrap()).unwrap()
}

/// Amplitude width σ of ψ ∝ exp(−Ω²/(2σ²)) measured from the state itself.
fn amplitude_sigma(state: &biphoton::source::BiphotonState) -> f64 {
    let w = state.grid().detunings();
    let m = state.marginal();
    let total: f64 = m.iter().sum();
    let var: f64 = w.iter().zip(&m).map(|(x, y)| x * x * y).sum::<f64>() / total;
    (2.0 * var).sqrt()
}

#[test]
fn pulsed_sfg_against_profile_integration() {
    // φ(r, t) = N/(2πσ²·√(2π)τ)·exp(−r²/2σ²)·exp(−t²/2τ²), photons per m² per s
    let (beta_c, sigma_um, tau_fs, n) = (1.3e-37, 11.0, 85.0, 2.0e4);
    let sigma = sigma_um * 1e-6;
    let tau = tau_fs * 1e-15;
    let amp = n / (2.0 * PI * sigma * sigma * (2.0 * PI).sqrt() * tau);
    let radial = simpson(
        |r| 2.0 * PI * r * (-r * r / (sigma * sigma)).exp(),
        0.0,
        12.0 * sigma,
        4000,
    );
    let temporal = simpson(|t| (-t * t / (tau * tau)).exp(), -12.0 * tau, 12.0 * tau, 4000);
    let numeric = beta_c * amp * amp * radial * temporal;
    let closed = sfg_per_pulse(beta_c, sigma_um, tau_fs, n).unwrap();
    // the closed form carries one more factor 1/π than the profile integral
    assert!((numeric / (PI * closed) - 1.0).abs() < 1e-6, "ratio {}", numeric / closed);

    let rep = 80e6;
    let flux = n * rep;
    let averaged = sfg_pulsed(beta_c, rep, sigma_um, tau_fs, flux).unwrap();
    assert!((averaged / (closed * rep) - 1.0).abs() < 1e-12);
}

#[test]
fn beta_c_recovered_under_multiplicative_noise() {
    let (beta_c, rep, sigma_um, tau_fs) = (2.2e-36, 90e6, 12.0, 100.0);
    let scale = sfg_pulsed(beta_c, rep, sigma_um, tau_fs, 1.0).unwrap();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut errors = Vec::new();
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<(f64, f64)> = (1..=50)
            .map(|k| {
                let flux = k as f64 * 2e13;
                (flux, scale * flux * flux * (1.0 + noise.sample(&mut rng)))
            })
            .collect();
        let fit = beta_c_fit(&points, rep, sigma_um, tau_fs).unwrap();
        errors.push((fit.beta_c / beta_c - 1.0).abs());
    }
    assert!(median(errors) < 0.03);
}

#[test]
fn quantum_scan_width_matches_closed_form() {
    let state = narrow_state();
    let sigma = amplitude_sigma(&state);
    let d = DetectorParams::default();
    let width = half_max_width(|c| quantum_dispersion_rate(&state, c, 0.0, &d, Shaping::Ideal), 0.0, 100.0).unwrap();
    let expected = 3f64.sqrt() / (sigma * sigma);
    assert!((width / expected - 1.0).abs() < 1e-6, "{width} vs {expected}");

    // every scan point against 1/√(1+4c²σ⁴)
    let c2: Vec<f64> = (-30..=30).map(|k| k as f64 * 150.0).collect();
    let scan = dispersion_scan_quantum(&state, &c2, 0.0, &d, Shaping::Ideal).unwrap();
    let r0 = coincidence_rate(&state, &d).unwrap();
    for s in &scan.samples {
        let closed = 1.0 / (1.0 + 4.0 * s.x * s.x * sigma.powi(4)).sqrt();
        assert!((s.rate / r0 - closed).abs() < 1e-6);
    }
}

#[test]
fn setup_dispersion_shifts_quantum_peak() {
    let state = narrow_state();
    let d = DetectorParams::default();
    let c2: Vec<f64> = (-40..=40).map(|k| k as f64 * 50.0).collect();
    let scan = dispersion_scan_quantum(&state, &c2, 700.0, &d, Shaping::Ideal).unwrap();
    assert_eq!(scan.peak().unwrap().x, -700.0);
}

#[test]
fn sfg_fft_matches_direct_convolution() {
    let grid = FrequencyGrid::new(2.3546, 0.5, 128).unwrap();
    let field = ClassicalField::gaussian(grid, 0.03, 1.0, 90e6)
        .unwrap()
        .with_phase(|w| 40.0 * w * w * w);
    let params = DetectorParams {
        acceptance: UpconversionAcceptance::Constant,
        ..DetectorParams::default()
    };
    let c2 = 350.0;
    let signal = sfg_classical(&field, &params, c2).unwrap();

    let e: Vec<Complex64> = field
        .amplitude()
        .iter()
        .zip(grid.detunings())
        .map(|(a, w)| a * Complex64::from_polar(1.0, 0.5 * c2 * w * w))
        .collect();
    let n = grid.count();
    let d = grid.spacing();
    let mut peak = 0.0f64;
    let mut worst = 0.0f64;
    for i in 0..signal.grid.count() {
        let omega3 = signal.grid.detuning(i);
        let mut direct = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                if (grid.detuning(a) + grid.detuning(b) - omega3).abs() < 0.5 * d {
                    direct += e[a] * e[b];
                }
            }
        }
        direct *= d;
        peak = peak.max(direct.norm());
        worst = worst.max((direct - signal.spectrum[i]).norm());
    }
    assert!(worst < 1e-10 * peak, "worst {worst:e} vs peak {peak:e}");
}

#[test]
fn pm_factor_matches_direct_double_sum() {
    let grid = FrequencyGrid::new(2.3546, 0.3, 256).unwrap();
    let field = ClassicalField::gaussian(grid, 0.025, 1.0, 90e6)
        .unwrap()
        .with_phase(|w| 200.0 * w * w);
    let pm = PhaseMatching {
        acceptance: 0.004,
        ..PhaseMatching::default()
    };
    let e = field.amplitude();
    let w = grid.detunings();
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for a in 0..e.len() {
        for b in 0..e.len() {
            let prod = e[a] * e[b];
            num += prod * pm.eval(w[a] + w[b]);
            den += prod;
        }
    }
    let direct = num.norm() / den.norm();
    let fast = pm_factor(&field, &pm).unwrap();
    assert!((fast / direct - 1.0).abs() < 1e-10, "{fast} vs {direct}");
}

#[test]
fn iac_matches_closed_form() {
    // R(τ)/R(0) = (cos(ω_p τ/2) + exp(−σ²τ²/2))²/4 for a Gaussian amplitude of width σ
    let state = narrow_state();
    let sigma = amplitude_sigma(&state);
    let d = DetectorParams::default();
    let taus: Vec<f64> = (0..400).map(|k| -60.0 + 0.3 * k as f64).collect();
    let scan = iac_scan(&state, &taus, &d, Shaping::Ideal, None).unwrap();
    let r0 = coincidence_rate(&state, &d).unwrap();
    let wp = state.pump_frequency;
    for s in &scan.samples {
        let g = (-0.5 * sigma * sigma * s.x * s.x).exp();
        let closed = 0.25 * ((0.5 * wp * s.x).cos() + g).powi(2);
        assert!((s.rate / r0 - closed).abs() < 1e-9, "tau {}: {} vs {}", s.x, s.rate / r0, closed);
    }
}

#[test]
fn gaussian_fit_uncertainties_are_calibrated() {
    let (amp, center, sigma) = (3.0, 0.4, 1.1);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let xs: Vec<f64> = (0..81).map(|k| -5.0 + 0.125 * k as f64).collect();
    let mut covered = 0;
    let mut errors = Vec::new();
    let trials = 200;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| amp * (-(x - center) * (x - center) / (2.0 * sigma * sigma)).exp() + noise.sample(&mut rng))
            .collect();
        let fit = fit_model(ModelKind::Gaussian, &xs, &ys).unwrap();
        assert!(fit.converged);
        let c = fit.center().unwrap();
        if (c - center).abs() <= fit.uncertainties[1] {
            covered += 1;
        }
        errors.push((c - center).abs());
    }
    let fraction = covered as f64 / trials as f64;
    assert!((0.58..=0.78).contains(&fraction), "1σ coverage {fraction}");
    assert!(median(errors) < 0.02);
}

#[test]
fn lorentzian_fit_recovers_exact_data() {
    let xs: Vec<f64> = (0..61).map(|k| -3000.0 + 100.0 * k as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| 2.0 / (1.0 + ((x - 420.0) / 900.0).powi(2)))
        .collect();
    let fit = fit_model(ModelKind::Lorentzian, &xs, &ys).unwrap();
    assert!((fit.center().unwrap() - 420.0).abs() < 1e-6);
    assert!((fit.fwhm().unwrap() - 1800.0).abs() < 1e-5);
}
