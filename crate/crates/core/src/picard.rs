//! Contraction certificate, Picard iteration of the Duhamel map, `W^{1,2,2}`
//! norms, the maximal admissible horizon and windowed global marching.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::duhamel::{
    apply_map_spectral, duhamel_residual, spacetime_l2_sqr, trapezoid_error_bound, ProblemSpec,
    SpaceTimeField, TimeWindow,
};
use crate::error::{Error, Result};
use crate::spectral::{fractional_power, Complex, Grid};

/// Default slack added to `C` when judging measured contraction ratios.
pub const DEFAULT_SLACK: f64 = 0.05;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Ratios are only formed when the previous residual exceeds this.
const RATIO_FLOOR: f64 = 1e2 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub q: f64,
    pub l: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
    pub constant: f64,
    pub admissible: bool,
    pub margin: f64,
}

/// `C = Q·l·√(T²e^{2aT}(1+2[a+|b|+1]²)+1)`.
pub fn contraction_constant(q: f64, l: f64, a: f64, b: f64, t: f64) -> f64 {
    let s = a + b.abs() + 1.0;
    let growth = (2.0 * a * t).exp();
    q * l * (t * t * growth * (1.0 + 2.0 * s * s) + 1.0).sqrt()
}

impl ContractionCertificate {
    pub fn new(q: f64, l: f64, k: f64, a: f64, b: f64, horizon: f64) -> Self {
        let constant = contraction_constant(q, l, a, b, horizon);
        Self { q, l, k, a, b, horizon, constant, admissible: constant < 1.0, margin: 1.0 - constant }
    }
}

pub fn certify(problem: &ProblemSpec, window: &TimeWindow) -> ContractionCertificate {
    let f = problem.nonlinearity();
    ContractionCertificate::new(
        problem.kernel().q(),
        f.lipschitz_constant(),
        f.growth_constant(),
        problem.a(),
        problem.b(),
        window.horizon(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Horizon {
    /// Largest `T` with `C(T) < 1`; zero when no window is admissible.
    pub t_max: f64,
    pub diagnostic: Option<String>,
}

/// Bisection on `T ↦ C(T)` for given `(Q, l, a, b)`.
pub fn max_horizon_for(q: f64, l: f64, a: f64, b: f64) -> Horizon {
    let c0 = q * l;
    if !(c0 < 1.0) {
        return Horizon {
            t_max: 0.0,
            diagnostic: Some(format!(
                "Q·l = {c0} >= 1: the contraction condition fails already as T -> 0, no admissible window"
            )),
        };
    }
    let c = |t: f64| contraction_constant(q, l, a, b, t);
    let mut hi = 1.0;
    while c(hi) < 1.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if c(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Horizon { t_max: lo, diagnostic: None }
}

pub fn max_horizon(problem: &ProblemSpec) -> Horizon {
    max_horizon_for(
        problem.kernel().q(),
        problem.nonlinearity().lipschitz_constant(),
        problem.a(),
        problem.b(),
    )
}

/// Squared `W^{1,2,2}` norm from time-major spectra of `u` and `∂u/∂t`.
pub(crate) fn w122_sqr_spectral(grid: &Grid, window: &TimeWindow, u_hat: &[Complex], du_hat: &[Complex]) -> f64 {
    let n = grid.n_points();
    let p2: Vec<f64> = grid.frequencies().iter().map(|p| p * p).collect();
    let weighted: Vec<Complex> = u_hat
        .iter()
        .enumerate()
        .map(|(i, c)| c * (1.0 + p2[i % n] * p2[i % n]).sqrt())
        .collect();
    spacetime_l2_sqr(grid, window, &weighted) + spacetime_l2_sqr(grid, window, du_hat)
}

/// `√(‖∂u/∂t‖² + ‖∂²u/∂x²‖² + ‖u‖²)` over `ℝ×[0,T]`.
pub fn w122_norm(u: &SpaceTimeField, du_dt: &SpaceTimeField, grid: &Grid, window: &TimeWindow) -> Result<f64> {
    u.check_window(grid, window)?;
    du_dt.check_window(grid, window)?;
    Ok(w122_sqr_spectral(grid, window, u.spectra(grid), du_dt.spectra(grid)).sqrt())
}

/// `√(Σ_m w_m dt ‖u(·,t_m)‖²_{H^{2α}})`.
pub fn h2alpha_spacetime_norm(u: &SpaceTimeField, grid: &Grid, window: &TimeWindow, alpha: f64) -> Result<f64> {
    u.check_window(grid, window)?;
    let n = grid.n_points();
    let w: Vec<f64> = grid
        .frequencies()
        .iter()
        .map(|&p| (1.0 + fractional_power(p, alpha).powi(2)).sqrt())
        .collect();
    let weighted: Vec<Complex> = u.spectra(grid).iter().enumerate().map(|(i, c)| c * w[i % n]).collect();
    Ok(spacetime_l2_sqr(grid, window, &weighted).sqrt())
}

pub fn l2_spacetime_norm(u: &SpaceTimeField, grid: &Grid, window: &TimeWindow) -> Result<f64> {
    u.check_window(grid, window)?;
    Ok(spacetime_l2_sqr(grid, window, u.spectra(grid)).sqrt())
}

#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// `v(x,t) = u₀(x)`.
    ConstantExtension,
    Zero,
    /// Independent uniform samples in `[-amplitude, amplitude]`.
    Random { seed: u64, amplitude: f64 },
    /// A given field; its time derivative is taken by finite differences when absent.
    Field { field: SpaceTimeField, derivative: Option<SpaceTimeField> },
}

impl InitialGuess {
    pub fn name(&self) -> &'static str {
        match self {
            InitialGuess::ConstantExtension => "constant_extension",
            InitialGuess::Zero => "zero",
            InitialGuess::Random { .. } => "random",
            InitialGuess::Field { .. } => "field",
        }
    }

    fn materialize(&self, problem: &ProblemSpec, window: &TimeWindow) -> Result<(SpaceTimeField, SpaceTimeField)> {
        let grid = problem.grid();
        Ok(match self {
            InitialGuess::ConstantExtension => (
                SpaceTimeField::constant_extension(problem.initial_condition(), window),
                SpaceTimeField::zeros(grid, window),
            ),
            InitialGuess::Zero => (SpaceTimeField::zeros(grid, window), SpaceTimeField::zeros(grid, window)),
            InitialGuess::Random { seed, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let len = grid.n_points() * window.levels();
                let data = (0..len).map(|_| amplitude * rng.gen_range(-1.0..=1.0)).collect();
                let field = SpaceTimeField::from_data(grid.n_points(), window.levels(), data)?;
                let deriv = field.finite_difference_time_derivative(window)?;
                (field, deriv)
            }
            InitialGuess::Field { field, derivative } => {
                field.check_window(grid, window)?;
                let deriv = match derivative {
                    Some(d) => {
                        d.check_window(grid, window)?;
                        d.clone()
                    }
                    None => field.finite_difference_time_derivative(window)?,
                };
                (field.clone(), deriv)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
    pub slack: f64,
    /// Iterate even when the certificate is inadmissible.
    pub allow_uncertified: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            initial_guess: InitialGuess::ConstantExtension,
            slack: DEFAULT_SLACK,
            allow_uncertified: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldNorms {
    /// `L²(ℝ×[0,T])`.
    pub l2: f64,
    /// `L²([0,T]; H^{2α})`.
    pub h2alpha: f64,
    pub w122: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NontrivialGuaranteed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nontriviality {
    pub verdict: Verdict,
    pub kernel_support: usize,
    pub baseline_support: usize,
    pub overlap: usize,
    /// Longest run of consecutive wavenumbers in the overlap.
    pub longest_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
    pub max_ratio: Option<f64>,
    pub ratio_bound: f64,
    pub predicted_iterations: Option<usize>,
    pub duhamel_residual: f64,
    pub quadrature_error_bound: f64,
    pub norms: FieldNorms,
    pub certificate: ContractionCertificate,
    pub nontriviality: Nontriviality,
    pub converged: bool,
    pub stop_reason: String,
    pub initial_guess: String,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: SpaceTimeField,
    pub time_derivative: SpaceTimeField,
    pub window: TimeWindow,
    pub report: SolveReport,
}

/// `ceil(log(τ/r₀)/log(ρ)) + 2`, the iteration budget for geometric decay at rate `ρ`.
pub fn iteration_bound(tolerance: f64, first_residual: f64, rate: f64) -> Option<usize> {
    if !(rate > 0.0 && rate < 1.0) || !(first_residual > 0.0) {
        return None;
    }
    if first_residual < tolerance {
        return Some(1);
    }
    Some(((tolerance / first_residual).ln() / rate.ln()).ceil() as usize + 2)
}

fn spectra_difference(a: &[Complex], b: &[Complex]) -> Vec<Complex> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Picard iteration `u^{(n+1)} = t_{a,b} u^{(n)}` until the `W^{1,2,2}` step is below tolerance.
pub fn solve(problem: &ProblemSpec, window: &TimeWindow, config: &SolveConfig) -> Result<Solution> {
    if !(config.tolerance.is_finite() && config.tolerance > 0.0) {
        return Err(Error::param(format!("tolerance must be positive, got {}", config.tolerance)));
    }
    if config.max_iter == 0 {
        return Err(Error::param("max_iter must be at least 1"));
    }
    let certificate = certify(problem, window);
    if !certificate.admissible && !config.allow_uncertified {
        return Err(Error::Refused(format!(
            "contraction constant C = {} >= 1 for T = {}; pass the override to iterate anyway",
            certificate.constant,
            window.horizon()
        )));
    }
    let grid = problem.grid();
    let (guess, guess_dt) = config.initial_guess.materialize(problem, window)?;
    let mut prev_u_hat = guess.spectra(grid).to_vec();
    let mut prev_du_hat = guess_dt.spectra(grid).to_vec();
    let mut input = guess;
    let mut residuals = Vec::new();
    let mut ratios = Vec::new();
    let constant_map = problem.nonlinearity().lipschitz_constant() == 0.0;

    let (output, previous, converged, stop_reason) = loop {
        let out = apply_map_spectral(problem, window, &input)?;
        let du_hat = out.time_derivative_spectra(problem);
        let step = w122_sqr_spectral(
            grid,
            window,
            &spectra_difference(&out.u_hat, &prev_u_hat),
            &spectra_difference(&du_hat, &prev_du_hat),
        )
        .sqrt();
        if let Some(&last) = residuals.last() {
            ratios.push(if last > RATIO_FLOOR { Some(step / last) } else { None });
        }
        residuals.push(step);
        let iterations = residuals.len();
        if !step.is_finite() {
            break (out, input, false, format!("residual became non-finite at iteration {iterations}"));
        }
        if constant_map {
            break (out, input, true, "map is independent of the iterate (declared l = 0)".to_string());
        }
        if step < config.tolerance {
            break (out, input, true, format!("W^{{1,2,2}} step below tolerance {}", config.tolerance));
        }
        if iterations >= config.max_iter {
            break (out, input, false, format!("max_iter = {} reached", config.max_iter));
        }
        prev_u_hat = out.u_hat.clone();
        prev_du_hat = du_hat;
        input = out.field.clone();
    };

    let du_hat = output.time_derivative_spectra(problem);
    let time_derivative = SpaceTimeField::from_spectra(grid, window.levels(), &du_hat);
    let field = output.field;
    let residual = duhamel_residual(problem, window, &field, &previous)?;
    let bound = trapezoid_error_bound(problem, window, &previous)?;
    let norms = FieldNorms {
        l2: l2_spacetime_norm(&field, grid, window)?,
        h2alpha: h2alpha_spacetime_norm(&field, grid, window, problem.alpha())?,
        w122: w122_sqr_spectral(grid, window, &output.u_hat, &du_hat).sqrt(),
    };
    let max_ratio = ratios.iter().flatten().copied().fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let ratio_bound = certificate.constant + config.slack;
    let report = SolveReport {
        iterations: residuals.len(),
        predicted_iterations: iteration_bound(config.tolerance, residuals[0], ratio_bound),
        residuals,
        ratios,
        max_ratio,
        ratio_bound,
        duhamel_residual: residual,
        quadrature_error_bound: bound,
        norms,
        certificate,
        nontriviality: check_nontriviality(problem)?,
        converged,
        stop_reason,
        initial_guess: config.initial_guess.name().to_string(),
        tolerance: config.tolerance,
    };
    let solution = Solution { field, time_derivative, window: *window, report };
    if converged {
        Ok(solution)
    } else {
        let r = &solution.report;
        Err(Error::NonConvergence {
            iterations: r.iterations,
            last_residual: *r.residuals.last().unwrap_or(&f64::NAN),
            residuals: r.residuals.clone(),
            ratios: r.ratios.iter().map(|r| r.unwrap_or(f64::NAN)).collect(),
            partial: Box::new(solution),
        })
    }
}

/// `‖t v₁ − t v₂‖_{W^{1,2,2}} / ‖v₁ − v₂‖_{W^{1,2,2}}` for fields with known time derivatives.
pub fn contraction_ratio(
    problem: &ProblemSpec,
    window: &TimeWindow,
    v1: (&SpaceTimeField, &SpaceTimeField),
    v2: (&SpaceTimeField, &SpaceTimeField),
) -> Result<f64> {
    let grid = problem.grid();
    for f in [v1.0, v1.1, v2.0, v2.1] {
        f.check_window(grid, window)?;
    }
    let denom = w122_sqr_spectral(
        grid,
        window,
        &spectra_difference(v1.0.spectra(grid), v2.0.spectra(grid)),
        &spectra_difference(v1.1.spectra(grid), v2.1.spectra(grid)),
    )
    .sqrt();
    if !(denom > 0.0) {
        return Err(Error::param("contraction ratio needs distinct fields"));
    }
    let o1 = apply_map_spectral(problem, window, v1.0)?;
    let o2 = apply_map_spectral(problem, window, v2.0)?;
    let num = w122_sqr_spectral(
        grid,
        window,
        &spectra_difference(&o1.u_hat, &o2.u_hat),
        &spectra_difference(&o1.time_derivative_spectra(problem), &o2.time_derivative_spectra(problem)),
    )
    .sqrt();
    Ok(num / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeamRecord {
    pub window: usize,
    pub time: f64,
    /// `L²` jump between the last level of one window and the first of the next.
    pub value_jump: f64,
    /// `L²` jump of `∂u/∂t` across the seam.
    pub derivative_jump: f64,
}

#[derive(Debug, Clone)]
pub struct GlobalMarch {
    pub windows: Vec<Solution>,
    pub seams: Vec<SeamRecord>,
    pub horizon: Horizon,
    pub step: f64,
}

impl GlobalMarch {
    pub fn final_level(&self) -> &[f64] {
        self.windows.last().expect("march has at least one window").field.last_level()
    }
}

/// Window lengths for marching to `total_time` in steps of `step`; the last may be shorter.
pub fn march_schedule(step: f64, total_time: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param(format!("window length must be positive, got {step}")));
    }
    if !(total_time >= step) {
        return Err(Error::param(format!("total time {total_time} is shorter than the window {step}")));
    }
    let ratio = total_time / step;
    let full = if (ratio - ratio.round()).abs() <= 1e-9 * ratio { ratio.round() as usize } else { ratio.ceil() as usize };
    let mut out = vec![step; full];
    let covered = step * (full - 1) as f64;
    out[full - 1] = total_time - covered;
    Ok(out)
}

/// Solves consecutive windows of length `window.horizon()`, restarting each
/// from the previous final level, until `total_time` is covered. The step
/// `dt` is kept, so a shorter final window gets `ceil(T_last/dt)` steps.
pub fn march_global(
    problem: &ProblemSpec,
    window: &TimeWindow,
    total_time: f64,
    config: &SolveConfig,
) -> Result<GlobalMarch> {
    let horizon = max_horizon(problem);
    let step = window.horizon();
    if step > 0.9 * horizon.t_max * (1.0 + 1e-12) {
        return Err(Error::Refused(format!(
            "window length {step} exceeds 0.9·T_max = {}{}",
            0.9 * horizon.t_max,
            horizon.diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
        )));
    }
    let schedule = march_schedule(step, total_time)?;
    let dt = window.dt();
    let mut current = problem.clone();
    let mut windows: Vec<Solution> = Vec::with_capacity(schedule.len());
    let mut seams = Vec::new();
    let mut elapsed = 0.0;
    for (index, &len) in schedule.iter().enumerate() {
        let w = if len == step {
            *window
        } else {
            TimeWindow::new(len, ((len / dt) - 1e-9).ceil().max(1.0) as usize)?
        };
        let sol = solve(&current, &w, config).map_err(|e| Error::March { index, source: Box::new(e) })?;
        if let Some(prev) = windows.last() {
            let grid = problem.grid();
            let jump = |a: &[f64], b: &[f64]| {
                (grid.dx() * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sqrt()
            };
            seams.push(SeamRecord {
                window: index,
                time: elapsed,
                value_jump: jump(prev.field.last_level(), sol.field.level(0)),
                derivative_jump: jump(prev.time_derivative.last_level(), sol.time_derivative.level(0)),
            });
        }
        elapsed += len;
        if index + 1 < schedule.len() {
            current = current.with_initial_condition(sol.field.last_level().to_vec())?;
        }
        windows.push(sol);
    }
    Ok(GlobalMarch { windows, seams, horizon, step })
}

fn support(coeffs: &[Complex]) -> Vec<bool> {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    if max == 0.0 {
        return vec![false; coeffs.len()];
    }
    coeffs.iter().map(|c| c.norm() > 1e-12 * max).collect()
}

/// Overlap of the discrete Fourier supports of `F(0,·)` and `G`.
pub fn check_nontriviality(problem: &ProblemSpec) -> Result<Nontriviality> {
    let grid = problem.grid();
    let g = support(problem.kernel().spectrum().coefficients());
    let f = support(problem.nonlinearity().baseline_spectrum()?.coefficients());
    let n = grid.n_points() as i64;
    // walk wavenumbers in increasing order
    let mut longest = 0;
    let mut run = 0;
    let mut overlap = 0;
    for k in -n / 2..n / 2 {
        let i = grid.index_of(k).expect("wavenumber in range");
        if g[i] && f[i] {
            overlap += 1;
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    Ok(Nontriviality {
        verdict: if longest >= 2 { Verdict::NontrivialGuaranteed } else { Verdict::Inconclusive },
        kernel_support: g.iter().filter(|&&s| s).count(),
        baseline_support: f.iter().filter(|&&s| s).count(),
        overlap,
        longest_run: longest,
    })
}
