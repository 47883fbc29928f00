//! Curve fitting: damped least squares for the scan models and the pixel map.
//!
//! Nonlinear models go through the MINPACK-style Levenberg–Marquardt solver of
//! the `levenberg-marquardt` crate. Linear models are solved in closed form.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::{DMatrix, DVector, Dyn, Owned};

use crate::error::{Error, Result};
use crate::units::FWHM_PER_SIGMA;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `A·exp(−(x−µ)²/(2σ²))`, parameters `[A, µ, σ]`.
    Gaussian,
    /// `A/(1 + ((x−x₀)/γ)²)`, parameters `[A, x₀, γ]` with γ the half width.
    Lorentzian,
    /// `a·x + b`, parameters `[a, b]`.
    Linear,
    /// `a·x²`, parameters `[a]`.
    QuadraticThroughOrigin,
    /// Grating-equation pixel→wavelength map, parameters `[G, p₀, f₂]`.
    PixelMap,
}

impl ModelKind {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            ModelKind::Gaussian => &["amplitude", "center", "sigma"],
            ModelKind::Lorentzian => &["amplitude", "center", "half_width"],
            ModelKind::Linear => &["slope", "intercept"],
            ModelKind::QuadraticThroughOrigin => &["a"],
            ModelKind::PixelMap => &["grating_period", "center_pixel", "focal_length"],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Lorentzian => "lorentzian",
            ModelKind::Linear => "linear",
            ModelKind::QuadraticThroughOrigin => "quadratic-through-origin",
            ModelKind::PixelMap => "pixel-map",
        }
    }

    /// Model value at `x`; fills `grad` with ∂f/∂p when given.
    pub fn eval(&self, p: &[f64], x: f64, grad: Option<&mut [f64]>) -> f64 {
        match self {
            ModelKind::Gaussian => {
                let (a, mu, s) = (p[0], p[1], p[2]);
                let z = (x - mu) / s;
                let e = (-0.5 * z * z).exp();
                if let Some(g) = grad {
                    g[0] = e;
                    g[1] = a * e * z / s;
                    g[2] = a * e * z * z / s;
                }
                a * e
            }
            ModelKind::Lorentzian => {
                let (a, x0, w) = (p[0], p[1], p[2]);
                let z = (x - x0) / w;
                let d = 1.0 / (1.0 + z * z);
                if let Some(g) = grad {
                    g[0] = d;
                    g[1] = a * d * d * 2.0 * z / w;
                    g[2] = a * d * d * 2.0 * z * z / w;
                }
                a * d
            }
            ModelKind::Linear => {
                if let Some(g) = grad {
                    g[0] = x;
                    g[1] = 1.0;
                }
                p[0] * x + p[1]
            }
            ModelKind::QuadraticThroughOrigin => {
                if let Some(g) = grad {
                    g[0] = x * x;
                }
                p[0] * x * x
            }
            ModelKind::PixelMap => unreachable!("pixel map needs geometry context"),
        }
    }
}

/// Fitted parameters with 1σ uncertainties and fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: ModelKind,
    pub params: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        let idx = self.kind.parameter_names().iter().position(|n| *n == name)?;
        self.params.get(idx).copied()
    }

    /// Peak position of Gaussian and Lorentzian fits.
    pub fn center(&self) -> Option<f64> {
        matches!(self.kind, ModelKind::Gaussian | ModelKind::Lorentzian).then(|| self.params[1])
    }

    /// Full width at half maximum of Gaussian and Lorentzian fits.
    pub fn fwhm(&self) -> Option<f64> {
        match self.kind {
            ModelKind::Gaussian => Some(FWHM_PER_SIGMA * self.params[2].abs()),
            ModelKind::Lorentzian => Some(2.0 * self.params[2].abs()),
            _ => None,
        }
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.kind.eval(&self.params, x, None)
    }
}

/// Fit `kind` to `(xs, ys)`. Initial guesses for peak models come from the
/// data moments (centroid, variance, maximum).
pub fn fit_model(kind: ModelKind, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    let n_params = kind.parameter_names().len();
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "x and y lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < n_params + 1 {
        return Err(Error::InsufficientData {
            needed: n_params + 1,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit data"));
    }
    match kind {
        ModelKind::Linear => Ok(fit_linear(xs, ys)),
        ModelKind::QuadraticThroughOrigin => Ok(fit_quadratic_origin(xs, ys)),
        ModelKind::Gaussian | ModelKind::Lorentzian => {
            let guess = peak_guess(kind, xs, ys)?;
            let model = |p: &[f64], x: f64, g: &mut [f64]| kind.eval(p, x, Some(g));
            let result = least_squares(kind, xs, ys, guess, model)?;
            Ok(FitResult {
                params: {
                    let mut p = result.params;
                    p[2] = p[2].abs();
                    p
                },
                ..result
            })
        }
        ModelKind::PixelMap => Err(Error::InvalidArgument(
            "pixel-map fits go through shaper::fit_pixel_map".into(),
        )),
    }
}

fn peak_guess(kind: ModelKind, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = max.abs().max(min.abs());
    if !(max > 0.0) || max - min <= 1e-12 * scale {
        return Err(Error::FitFailure {
            reason: "degenerate data: no peak above the baseline".into(),
            iterations: 0,
            last: vec![],
        });
    }
    let w: Vec<f64> = ys.iter().map(|y| (y - min).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    let mu = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = xs.iter().zip(&w).map(|(x, w)| (x - mu).powi(2) * w).sum::<f64>() / total;
    let sigma = var.sqrt().max(1e-12 * (xs[xs.len() - 1] - xs[0]).abs());
    let width = match kind {
        ModelKind::Lorentzian => sigma * (2.0 * 2f64.ln()).sqrt(),
        _ => sigma,
    };
    Ok(vec![max, mu, width])
}

fn fit_linear(xs: &[f64], ys: &[f64]) -> FitResult {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let s2 = ssr / (n - 2.0);
    FitResult {
        kind: ModelKind::Linear,
        params: vec![slope, intercept],
        uncertainties: vec![(s2 / sxx).sqrt(), (s2 * (1.0 / n + mx * mx / sxx)).sqrt()],
        residual_rms: (ssr / n).sqrt(),
        converged: true,
        iterations: 0,
    }
}

fn fit_quadratic_origin(xs: &[f64], ys: &[f64]) -> FitResult {
    let s4: f64 = xs.iter().map(|x| x.powi(4)).sum();
    let s2y: f64 = xs.iter().zip(ys).map(|(x, y)| x * x * y).sum();
    let a = s2y / s4;
    let n = xs.len() as f64;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a * x * x).powi(2)).sum();
    FitResult {
        kind: ModelKind::QuadraticThroughOrigin,
        params: vec![a],
        uncertainties: vec![(ssr / (n - 1.0) / s4).sqrt()],
        residual_rms: (ssr / n).sqrt(),
        converged: true,
        iterations: 0,
    }
}

struct CurveProblem<'a, F> {
    xs: &'a [f64],
    ys: &'a [f64],
    params: DVector<f64>,
    model: F,
}

impl<F> LeastSquaresProblem<f64, Dyn, Dyn> for CurveProblem<'_, F>
where
    F: Fn(&[f64], f64, &mut [f64]) -> f64,
{
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.params.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.params.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = self.params.as_slice();
        let mut g = vec![0.0; p.len()];
        Some(DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().zip(self.ys).map(|(&x, &y)| (self.model)(p, x, &mut g) - y),
        ))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        Some(jacobian(self.xs, self.params.as_slice(), &self.model))
    }
}

fn jacobian<F: Fn(&[f64], f64, &mut [f64]) -> f64>(xs: &[f64], p: &[f64], model: &F) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(xs.len(), p.len());
    let mut g = vec![0.0; p.len()];
    for (i, &x) in xs.iter().enumerate() {
        model(p, x, &mut g);
        for (j, gj) in g.iter().enumerate() {
            jac[(i, j)] = *gj;
        }
    }
    jac
}

/// Levenberg–Marquardt fit of an arbitrary differentiable model.
/// `model(p, x, grad)` returns f(x; p) and writes ∂f/∂p into `grad`.
pub(crate) fn least_squares<F>(kind: ModelKind, xs: &[f64], ys: &[f64], guess: Vec<f64>, model: F) -> Result<FitResult>
where
    F: Fn(&[f64], f64, &mut [f64]) -> f64,
{
    let n_params = guess.len();
    let problem = CurveProblem {
        xs,
        ys,
        params: DVector::from_vec(guess),
        model,
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_tol(1e-15)
        .with_patience(400)
        .minimize(problem);
    let params: Vec<f64> = problem.params.iter().copied().collect();
    let iterations = report.number_of_evaluations;
    let converged = report.termination.was_successful()
        || matches!(report.termination, TerminationReason::NoImprovementPossible(_));
    if !converged || params.iter().any(|p| !p.is_finite()) {
        return Err(Error::FitFailure {
            reason: format!("{:?}", report.termination),
            iterations,
            last: params,
        });
    }
    let n = xs.len() as f64;
    let ssr = 2.0 * report.objective_function;
    let jac = jacobian(xs, &params, &problem.model);
    let dof = (xs.len() - n_params).max(1) as f64;
    let uncertainties = match (jac.transpose() * &jac).try_inverse() {
        Some(inv) => (0..n_params).map(|i| (inv[(i, i)].abs() * ssr / dof).sqrt()).collect(),
        None => vec![f64::INFINITY; n_params],
    };
    Ok(FitResult {
        kind,
        params,
        uncertainties,
        residual_rms: (ssr / n).sqrt(),
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn gaussian_roundtrip() {
        let xs = linspace(-1.0, 3.0, 81);
        let truth = [2.0, 1.0, 0.5];
        let ys: Vec<f64> = xs.iter().map(|&x| ModelKind::Gaussian.eval(&truth, x, None)).collect();
        let fit = fit_model(ModelKind::Gaussian, &xs, &ys).unwrap();
        for (p, t) in fit.params.iter().zip(truth) {
            assert!((p / t - 1.0).abs() < 1e-6, "{:?}", fit.params);
        }
        assert!(fit.converged);
    }

    #[test]
    fn lorentzian_roundtrip() {
        let xs = linspace(-500.0, 700.0, 41);
        let truth = [5.0, 120.0, 180.0];
        let ys: Vec<f64> = xs.iter().map(|&x| ModelKind::Lorentzian.eval(&truth, x, None)).collect();
        let fit = fit_model(ModelKind::Lorentzian, &xs, &ys).unwrap();
        for (p, t) in fit.params.iter().zip(truth) {
            assert!((p / t - 1.0).abs() < 1e-6, "{:?}", fit.params);
        }
        assert!((fit.fwhm().unwrap() - 360.0).abs() < 1e-4);
    }

    #[test]
    fn linear_exact() {
        let xs = linspace(-2.0, 5.0, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        let fit = fit_model(ModelKind::Linear, &xs, &ys).unwrap();
        assert!((fit.params[0] - 3.0).abs() < 1e-12);
        assert!((fit.params[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data_never_nan() {
        let xs = linspace(0.0, 1.0, 20);
        let ys = vec![4.2; 20];
        match fit_model(ModelKind::Gaussian, &xs, &ys) {
            Err(Error::FitFailure { .. }) => {}
            Ok(fit) => {
                assert!(fit.params.iter().all(|p| p.is_finite()));
                assert!(fit.params[0].abs() < 1e-9);
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn too_few_points() {
        let r = fit_model(ModelKind::Gaussian, &[0.0, 1.0, 2.0], &[1.0, 2.0, 1.0]);
        assert!(matches!(r, Err(Error::InsufficientData { needed: 4, got: 3 })));
    }

    #[test]
    fn quadratic_through_origin() {
        let xs = linspace(0.1, 4.0, 10);
        let ys: Vec<f64> = xs.iter().map(|x| 0.25 * x * x).collect();
        let fit = fit_model(ModelKind::QuadraticThroughOrigin, &xs, &ys).unwrap();
        assert!((fit.params[0] - 0.25).abs() < 1e-14);
    }
}
