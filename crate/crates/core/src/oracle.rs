//! Reference computations for tests: brute-force sums, closed forms, and an
//! explicit Runge-Kutta method of lines. None of these go through the
//! spectral convolution or the exponential-trapezoid recurrence.

use std::f64::consts::PI;

use crate::duhamel::{ProblemSpec, SpaceTimeField, TimeWindow};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::spectral::{forward_transform, inverse_transform, Complex, Grid, SpectralField};

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub field: SpaceTimeField,
    pub method: &'static str,
    /// Estimated max-norm accuracy of the reference itself.
    pub accuracy: f64,
}

/// `Σ_j G(x_i − y_j) f(y_j) dx` with periodic wrap of the argument.
pub fn direct_convolution(kernel: &KernelSpec, field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    kernel.grid().check_same(grid)?;
    Error::check_len(grid.n_points(), field.len())?;
    let circulant = circulant_row(kernel, grid);
    Ok(circulant_apply(&circulant, field, grid.dx()))
}

/// `G(wrap(d·dx))` for offsets `d = 0..N`.
fn circulant_row(kernel: &KernelSpec, grid: &Grid) -> Vec<f64> {
    (0..grid.n_points())
        .map(|d| kernel.value_at(grid.wrap(d as f64 * grid.dx())))
        .collect()
}

fn circulant_apply(row: &[f64], field: &[f64], dx: f64) -> Vec<f64> {
    let n = field.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, f) in field.iter().enumerate() {
                acc += row[(i + n - j) % n] * f;
            }
            acc * dx
        })
        .collect()
}

/// `(1/√(2π)) Σ_j φ(x_j) e^{−i p_k x_j} dx` evaluated term by term.
pub fn direct_transform(field: &[f64], grid: &Grid) -> Result<Vec<Complex>> {
    Error::check_len(grid.n_points(), field.len())?;
    let norm = grid.dx() / (2.0 * PI).sqrt();
    Ok(grid
        .frequencies()
        .iter()
        .map(|&p| {
            field
                .iter()
                .enumerate()
                .map(|(j, &v)| v * Complex::new(0.0, -p * grid.x(j)).exp())
                .sum::<Complex>()
                * norm
        })
        .collect())
}

/// `(‖G‖₁, ‖G''‖₁, Q)` of the normalized Gaussian of width `σ`. `G''` changes
/// sign at `±σ`, which gives `‖G''‖₁ = 4e^{−1/2}/(σ²√(2π))`.
pub fn gaussian_kernel_norms(sigma: f64) -> Result<(f64, f64, f64)> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let l1 = 1.0;
    let l1_2 = 4.0 * (-0.5f64).exp() / (sigma * sigma * (2.0 * PI).sqrt());
    Ok((l1, l1_2, (l1 * l1 + l1_2 * l1_2).sqrt()))
}

/// Per-mode rate `−|p|^{2α} + ibp + a + √(2π)cĜ(p)` of the linear problem `F = c·u`.
fn linear_rates(problem: &ProblemSpec) -> Result<Vec<Complex>> {
    let c = problem.nonlinearity().linear_coefficient().ok_or_else(|| {
        Error::param("linear mode oracle needs the built-in linear rate F = c·u without source")
    })?;
    let grid = problem.grid();
    let spec = problem.kernel().spectrum().coefficients();
    let root = (2.0 * PI).sqrt();
    let nyq = grid.nyquist_index();
    Ok(grid
        .frequencies()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let drift = if i == nyq { 0.0 } else { problem.b() * p };
            let frac = p.abs().powf(2.0 * problem.alpha());
            Complex::new(problem.a() - frac, drift) + root * c * spec[i]
        })
        .collect())
}

/// `û₀(p)·exp(t[−|p|^{2α} + ibp + a + √(2π)cĜ(p)])` for `F = c·u`.
pub fn linear_mode_solution(problem: &ProblemSpec, t: f64) -> Result<SpectralField> {
    let rates = linear_rates(problem)?;
    let u0 = forward_transform(problem.initial_condition(), problem.grid())?;
    Ok(SpectralField::from_coefficients(
        u0.coefficients().iter().zip(&rates).map(|(u, r)| u * (r * t).exp()).collect(),
    ))
}

/// The linear-mode solution at every level of `window`, with its time derivative.
pub fn linear_mode_field(problem: &ProblemSpec, window: &TimeWindow) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let grid = problem.grid();
    let rates = linear_rates(problem)?;
    let mut u = Vec::with_capacity(grid.n_points() * window.levels());
    let mut du = Vec::with_capacity(u.capacity());
    for m in 0..window.levels() {
        let s = linear_mode_solution(problem, window.time(m))?;
        let d: Vec<Complex> = s.coefficients().iter().zip(&rates).map(|(c, r)| c * r).collect();
        u.extend(inverse_transform(&s, grid)?);
        du.extend(inverse_transform(&SpectralField::from_coefficients(d), grid)?);
    }
    Ok((
        SpaceTimeField::from_data(grid.n_points(), window.levels(), u)?,
        SpaceTimeField::from_data(grid.n_points(), window.levels(), du)?,
    ))
}

/// `e^{−x²/(1+4t)}/√(1+4t)`, the heat evolution of `e^{−x²}`.
pub fn heat_gaussian(grid: &Grid, window: &TimeWindow) -> SpaceTimeField {
    SpaceTimeField::from_fn(grid, window, |x, t| {
        let s = 1.0 + 4.0 * t;
        (-x * x / s).exp() / s.sqrt()
    })
}

struct MolSystem<'a> {
    problem: &'a ProblemSpec,
    symbol: Vec<Complex>,
    circulant: Vec<f64>,
}

impl MolSystem<'_> {
    /// Right side in spectral form: `m·û + transform of ∫G(x−y)F(u(y),y)dy`.
    fn rhs(&self, u_hat: &[Complex]) -> Result<Vec<Complex>> {
        let grid = self.problem.grid();
        let u = inverse_transform(&SpectralField::from_coefficients(u_hat.to_vec()), grid)?;
        let f: Vec<f64> = (0..u.len()).map(|j| self.problem.nonlinearity().rate(u[j], j)).collect();
        let conv = circulant_apply(&self.circulant, &f, grid.dx());
        let conv_hat = forward_transform(&conv, grid)?;
        Ok(u_hat
            .iter()
            .zip(&self.symbol)
            .zip(conv_hat.coefficients())
            .map(|((u, m), c)| m * u + c)
            .collect())
    }

    fn run(&self, window: &TimeWindow, substeps: usize) -> Result<SpaceTimeField> {
        let grid = self.problem.grid();
        let h = window.dt() / substeps as f64;
        let mut u_hat = forward_transform(self.problem.initial_condition(), grid)?.into_coefficients();
        let mut data = Vec::with_capacity(grid.n_points() * window.levels());
        data.extend_from_slice(self.problem.initial_condition());
        let axpy = |base: &[Complex], k: &[Complex], s: f64| -> Vec<Complex> {
            base.iter().zip(k).map(|(b, k)| b + k * s).collect()
        };
        for _ in 0..window.steps() {
            for _ in 0..substeps {
                let k1 = self.rhs(&u_hat)?;
                let k2 = self.rhs(&axpy(&u_hat, &k1, 0.5 * h))?;
                let k3 = self.rhs(&axpy(&u_hat, &k2, 0.5 * h))?;
                let k4 = self.rhs(&axpy(&u_hat, &k3, h))?;
                for i in 0..u_hat.len() {
                    u_hat[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            data.extend(inverse_transform(&SpectralField::from_coefficients(u_hat.clone()), grid)?);
        }
        SpaceTimeField::from_data(grid.n_points(), window.levels(), data)
    }
}

/// Smallest number of RK4 substeps per window step meeting `dt_sub·max|m| ≤ 1`.
pub fn required_substeps(problem: &ProblemSpec, window: &TimeWindow) -> usize {
    let max_m = problem.symbol().values().iter().fold(0.0f64, |m, v| m.max(v.norm()));
    ((window.dt() * max_m).ceil() as usize).max(1)
}

/// Classical RK4 for the full equation with `substeps` steps per level of
/// `window`; the convolution is a direct circulant sum. Accuracy is the
/// step-doubling estimate `max|u_h − u_{h/2}|/15`, and the finer run is returned.
pub fn method_of_lines_reference(problem: &ProblemSpec, window: &TimeWindow, substeps: usize) -> Result<OracleResult> {
    let need = required_substeps(problem, window);
    if substeps < need {
        return Err(Error::Refused(format!(
            "RK4 stability needs dt_sub·max|m| <= 1: use at least {need} substeps per level (got {substeps})"
        )));
    }
    let grid = problem.grid();
    let system = MolSystem {
        problem,
        symbol: problem.symbol().values().to_vec(),
        circulant: circulant_row(problem.kernel(), grid),
    };
    let coarse = system.run(window, substeps)?;
    let fine = system.run(window, 2 * substeps)?;
    let accuracy = fine.sub(&coarse)?.max_abs() / 15.0;
    Ok(OracleResult { field: fine, method: "rk4_method_of_lines", accuracy })
}
