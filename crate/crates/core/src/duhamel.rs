//! The block map `v ↦ u` defined mode by mode through
//!
//! ```text
//! û(p,t) = E(t)·û₀(p) + ∫₀ᵗ E(t-s)·√(2π)Ĝ(p)·f̂_v(p,s) ds,   E(t) = e^{t(-|p|^{2α} + ibp + a)}
//! ```
//!
//! where `f̂_v` is the transform of `F(v(x,s), x)`. The semigroup factor is
//! applied exactly; the time integral uses the exponential trapezoid
//! recurrence `Î_{m+1} = E(dt)Î_m + dt/2·(E(dt)ĝ_m + ĝ_{m+1})`.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::nonlinearity::NonlinearitySpec;
use crate::spectral::{h2alpha_norm, check_alpha, Complex, Grid, SpectralField, Symbol};

/// Problem data: coefficients, kernel, rate function and initial condition.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    alpha: f64,
    a: f64,
    b: f64,
    kernel: KernelSpec,
    nonlinearity: NonlinearitySpec,
    u0: Vec<f64>,
    grid: Grid,
    oracle_mode: bool,
    symbol: Symbol,
    multiplier: Vec<Complex>,
    u0_hat: SpectralField,
}

impl ProblemSpec {
    /// Headline model, `0 < α < 1`.
    pub fn new(
        alpha: f64,
        a: f64,
        b: f64,
        kernel: KernelSpec,
        nonlinearity: NonlinearitySpec,
        u0: Vec<f64>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!(
                "fractional exponent must lie in (0, 1) outside oracle mode, got {alpha}"
            )));
        }
        Self::build(alpha, a, b, kernel, nonlinearity, u0, false)
    }

    /// Admits `α = 1` (classical diffusion) for cross-checks against closed forms.
    pub fn oracle_mode(
        alpha: f64,
        a: f64,
        b: f64,
        kernel: KernelSpec,
        nonlinearity: NonlinearitySpec,
        u0: Vec<f64>,
    ) -> Result<Self> {
        Self::build(alpha, a, b, kernel, nonlinearity, u0, true)
    }

    fn build(
        alpha: f64,
        a: f64,
        b: f64,
        kernel: KernelSpec,
        nonlinearity: NonlinearitySpec,
        u0: Vec<f64>,
        oracle_mode: bool,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::param(format!("reaction coefficient a must be finite and >= 0, got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::param(format!("drift b must be finite, got {b}")));
        }
        let grid = kernel.grid().clone();
        grid.check_same(nonlinearity.grid())?;
        grid.check(u0.len())?;
        // finiteness of the H² norm doubles as the finite-sample check
        h2alpha_norm(&u0, &grid, 1.0)?;
        let symbol = Symbol::linear_part(&grid, alpha, a, b)?;
        let multiplier = kernel.multiplier();
        let u0_hat = SpectralField::from_coefficients(grid.forward_real(&u0));
        Ok(Self {
            alpha,
            a,
            b,
            kernel,
            nonlinearity,
            u0,
            grid,
            oracle_mode,
            symbol,
            multiplier,
            u0_hat,
        })
    }

    /// Same problem restarted from a different initial condition.
    pub fn with_initial_condition(&self, u0: Vec<f64>) -> Result<Self> {
        Self::build(
            self.alpha,
            self.a,
            self.b,
            self.kernel.clone(),
            self.nonlinearity.clone(),
            u0,
            self.oracle_mode,
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    pub fn initial_condition(&self) -> &[f64] {
        &self.u0
    }

    pub fn initial_spectrum(&self) -> &SpectralField {
        &self.u0_hat
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_oracle_mode(&self) -> bool {
        self.oracle_mode
    }

    /// `-|p|^{2α} + ibp + a` per mode.
    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    /// `√(2π)·Ĝ(p)` per mode.
    pub fn convolution_multiplier(&self) -> &[Complex] {
        &self.multiplier
    }

    /// Warnings when `u₀` has not decayed at the box edge.
    pub fn boundary_warnings(&self) -> Vec<String> {
        let max = self.u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = self.u0[0].abs().max(self.u0[self.u0.len() - 1].abs());
        let mut out: Vec<String> = self.kernel.warnings().to_vec();
        if max > 0.0 && edge > 1e-8 * max {
            out.push(format!(
                "initial condition has not decayed at the box edge (|u₀(±L)|/max|u₀| = {:.3e})",
                edge / max
            ));
        }
        out
    }
}

/// `[0, T]` split into `M` equal steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    horizon: f64,
    steps: usize,
}

impl TimeWindow {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::param("window needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_m`, with `t_M = T` exactly.
    pub fn time(&self, m: usize) -> f64 {
        if m == self.steps {
            self.horizon
        } else {
            self.horizon * m as f64 / self.steps as f64
        }
    }

    /// Same horizon with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.steps * factor)
    }
}

/// Samples `u(x_j, t_m)` stored time-major, with spectra computed on demand.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    n: usize,
    levels: usize,
    data: Vec<f64>,
    spectra: OnceLock<Vec<Complex>>,
}

impl PartialEq for SpaceTimeField {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.levels == other.levels && self.data == other.data
    }
}

impl SpaceTimeField {
    pub fn from_data(n: usize, levels: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_len(n * levels, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "space-time sample (level {}, point {}) is not finite",
                i / n,
                i % n
            )));
        }
        Ok(Self { n, levels, data, spectra: OnceLock::new() })
    }

    pub fn zeros(grid: &Grid, window: &TimeWindow) -> Self {
        let n = grid.n_points();
        Self { n, levels: window.levels(), data: vec![0.0; n * window.levels()], spectra: OnceLock::new() }
    }

    /// `v(x, t) = u₀(x)` for every level.
    pub fn constant_extension(u0: &[f64], window: &TimeWindow) -> Self {
        let data = u0.iter().copied().cycle().take(u0.len() * window.levels()).collect();
        Self { n: u0.len(), levels: window.levels(), data, spectra: OnceLock::new() }
    }

    pub fn from_fn(grid: &Grid, window: &TimeWindow, f: impl Fn(f64, f64) -> f64) -> Self {
        let pts = grid.points();
        let mut data = Vec::with_capacity(pts.len() * window.levels());
        for m in 0..window.levels() {
            let t = window.time(m);
            data.extend(pts.iter().map(|&x| f(x, t)));
        }
        Self { n: pts.len(), levels: window.levels(), data, spectra: OnceLock::new() }
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn n_levels(&self) -> usize {
        self.levels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn level(&self, m: usize) -> &[f64] {
        &self.data[m * self.n..(m + 1) * self.n]
    }

    pub fn last_level(&self) -> &[f64] {
        self.level(self.levels - 1)
    }

    /// Spectra of every level, computed once.
    pub fn spectra(&self, grid: &Grid) -> &[Complex] {
        self.spectra.get_or_init(|| {
            let mut buf: Vec<Complex> = self.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
            buf.par_chunks_mut(self.n).for_each(|lvl| grid.forward_in_place(lvl));
            buf
        })
    }

    pub fn level_spectrum(&self, grid: &Grid, m: usize) -> SpectralField {
        SpectralField::from_coefficients(self.spectra(grid)[m * self.n..(m + 1) * self.n].to_vec())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            levels: self.levels,
            data: self.data.iter().map(|v| c * v).collect(),
            spectra: OnceLock::new(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            n: self.n,
            levels: self.levels,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            spectra: OnceLock::new(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            n: self.n,
            levels: self.levels,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            spectra: OnceLock::new(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Keeps every `factor`-th level.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !(self.levels - 1).is_multiple_of(factor) {
            return Err(Error::param(format!(
                "cannot subsample {} steps by {factor}",
                self.levels - 1
            )));
        }
        let levels = (self.levels - 1) / factor + 1;
        let mut data = Vec::with_capacity(levels * self.n);
        for m in 0..levels {
            data.extend_from_slice(self.level(m * factor));
        }
        Ok(Self { n: self.n, levels, data, spectra: OnceLock::new() })
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<()> {
        Error::check_len(self.n, other.n)?;
        Error::check_len(self.levels, other.levels)
    }

    pub(crate) fn check_window(&self, grid: &Grid, window: &TimeWindow) -> Result<()> {
        Error::check_len(grid.n_points(), self.n)?;
        Error::check_len(window.levels(), self.levels)
    }

    pub(crate) fn from_spectra(grid: &Grid, levels: usize, spectra: &[Complex]) -> Self {
        let n = grid.n_points();
        let mut buf = spectra.to_vec();
        buf.par_chunks_mut(n).for_each(|lvl| grid.inverse_in_place(lvl));
        Self {
            n,
            levels,
            data: buf.into_iter().map(|c| c.re).collect(),
            spectra: OnceLock::new(),
        }
    }

    /// Second-order finite differences in time (one-sided at the ends).
    pub fn finite_difference_time_derivative(&self, window: &TimeWindow) -> Result<Self> {
        Error::check_len(window.levels(), self.levels)?;
        let n = self.n;
        let dt = window.dt();
        let mut data = vec![0.0; self.data.len()];
        let m_last = self.levels - 1;
        for m in 0..self.levels {
            let out = &mut data[m * n..(m + 1) * n];
            for (j, o) in out.iter_mut().enumerate() {
                let at = |k: usize| self.data[k * n + j];
                *o = if m_last == 1 {
                    (at(1) - at(0)) / dt
                } else if m == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dt)
                } else if m == m_last {
                    (3.0 * at(m) - 4.0 * at(m - 1) + at(m - 2)) / (2.0 * dt)
                } else {
                    (at(m + 1) - at(m - 1)) / (2.0 * dt)
                };
            }
        }
        Ok(Self { n, levels: self.levels, data, spectra: OnceLock::new() })
    }
}

/// Spectral result of one map application.
#[derive(Debug, Clone)]
pub(crate) struct MapOutput {
    pub field: SpaceTimeField,
    /// `û(p_k, t_m)` from the recurrence, time-major.
    pub u_hat: Vec<Complex>,
    /// `√(2π)Ĝ f̂_v(p_k, t_m)`, time-major.
    pub g_hat: Vec<Complex>,
}

impl MapOutput {
    /// `∂û/∂t = m·û + ĝ`, time-major.
    pub fn time_derivative_spectra(&self, problem: &ProblemSpec) -> Vec<Complex> {
        time_derivative_spectra(problem, &self.u_hat, &self.g_hat)
    }
}

fn time_derivative_spectra(problem: &ProblemSpec, u_hat: &[Complex], g_hat: &[Complex]) -> Vec<Complex> {
    let sym = problem.symbol.values();
    let n = sym.len();
    u_hat
        .iter()
        .zip(g_hat)
        .enumerate()
        .map(|(i, (u, g))| sym[i % n] * u + g)
        .collect()
}

/// `√(2π)·Ĝ·f̂_v` at every level of `v`.
pub(crate) fn forcing_spectra(problem: &ProblemSpec, v: &SpaceTimeField) -> Result<Vec<Complex>> {
    let grid = &problem.grid;
    let n = grid.n_points();
    Error::check_len(n, v.n_points())?;
    let mut out = vec![Complex::new(0.0, 0.0); v.data.len()];
    out.par_chunks_mut(n)
        .zip(v.data.par_chunks(n))
        .enumerate()
        .try_for_each(|(m, (dst, src))| -> Result<()> {
            let mut rate = vec![0.0; n];
            problem.nonlinearity.evaluate_into(src, &mut rate).map_err(|e| match e {
                Error::Data(msg) => Error::Data(format!("level {m}: {msg}")),
                other => other,
            })?;
            for (d, r) in dst.iter_mut().zip(&rate) {
                *d = Complex::new(*r, 0.0);
            }
            grid.forward_in_place(dst);
            for (d, g) in dst.iter_mut().zip(&problem.multiplier) {
                *d *= g;
            }
            Ok(())
        })?;
    if let Some(i) = out.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Data(format!("forcing spectrum not finite at level {}", i / n)));
    }
    Ok(out)
}

/// `E(t_m)·û₀` for every level, time-major.
pub(crate) fn semigroup_levels(problem: &ProblemSpec, window: &TimeWindow) -> Vec<Complex> {
    let sym = problem.symbol.values();
    let u0 = problem.u0_hat.coefficients();
    let n = sym.len();
    let mut out = vec![Complex::new(0.0, 0.0); n * window.levels()];
    out.par_chunks_mut(n).enumerate().for_each(|(m, dst)| {
        let t = window.time(m);
        for ((d, s), c) in dst.iter_mut().zip(sym).zip(u0) {
            *d = (s * t).exp() * c;
        }
    });
    out
}

/// Exponential-trapezoid quadrature of `∫₀^{t_m} E(t_m - s) ĝ(s) ds` for all
/// levels, given `ĝ` at the levels of `window`.
pub fn duhamel_integral(problem: &ProblemSpec, window: &TimeWindow, g_hat: &[Complex]) -> Result<Vec<Complex>> {
    let n = problem.grid.n_points();
    Error::check_len(n * window.levels(), g_hat.len())?;
    let dt = window.dt();
    let e_dt: Vec<Complex> = problem.symbol.values().iter().map(|s| (s * dt).exp()).collect();
    let mut out = vec![Complex::new(0.0, 0.0); g_hat.len()];
    let half = 0.5 * dt;
    for m in 0..window.steps() {
        let (done, rest) = out.split_at_mut((m + 1) * n);
        let prev = &done[m * n..];
        let next = &mut rest[..n];
        let g0 = &g_hat[m * n..(m + 1) * n];
        let g1 = &g_hat[(m + 1) * n..(m + 2) * n];
        for k in 0..n {
            next[k] = e_dt[k] * prev[k] + half * (e_dt[k] * g0[k] + g1[k]);
        }
    }
    Ok(out)
}

pub(crate) fn apply_map_spectral(
    problem: &ProblemSpec,
    window: &TimeWindow,
    v: &SpaceTimeField,
) -> Result<MapOutput> {
    v.check_window(&problem.grid, window)?;
    let g_hat = forcing_spectra(problem, v)?;
    let integral = duhamel_integral(problem, window, &g_hat)?;
    let mut u_hat = semigroup_levels(problem, window);
    for (u, i) in u_hat.iter_mut().zip(&integral) {
        *u += i;
    }
    let mut field = SpaceTimeField::from_spectra(&problem.grid, window.levels(), &u_hat);
    // level 0 is pinned to the initial condition
    field.data[..problem.u0.len()].copy_from_slice(&problem.u0);
    Ok(MapOutput { field, u_hat, g_hat })
}

/// `u = t_{a,b} v`.
pub fn apply_map(problem: &ProblemSpec, window: &TimeWindow, v: &SpaceTimeField) -> Result<SpaceTimeField> {
    Ok(apply_map_spectral(problem, window, v)?.field)
}

/// `e^{t·m_k}` per mode.
pub fn semigroup_factor(problem: &ProblemSpec, grid: &Grid, t: f64) -> Result<Symbol> {
    problem.grid.check_same(grid)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(format!("semigroup time must be >= 0, got {t}")));
    }
    Ok(problem.symbol.exp_scaled(t))
}

/// `∂u/∂t` from `∂û/∂t = (-|p|^{2α} + ibp + a)û + √(2π)Ĝ f̂_v`.
pub fn time_derivative(
    problem: &ProblemSpec,
    window: &TimeWindow,
    u: &SpaceTimeField,
    v: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    u.check_window(&problem.grid, window)?;
    v.check_window(&problem.grid, window)?;
    let g_hat = forcing_spectra(problem, v)?;
    let dt_hat = time_derivative_spectra(problem, u.spectra(&problem.grid), &g_hat);
    Ok(SpaceTimeField::from_spectra(&problem.grid, window.levels(), &dt_hat))
}

/// `√(Σ_m w_m dt · dp Σ_k |ĉ(p_k, t_m)|²)` with trapezoid weights in time.
pub(crate) fn spacetime_l2_sqr(grid: &Grid, window: &TimeWindow, spectra: &[Complex]) -> f64 {
    let n = grid.n_points();
    let dt = window.dt();
    let last = window.steps();
    spectra
        .chunks(n)
        .enumerate()
        .map(|(m, lvl)| {
            let w = if m == 0 || m == last { 0.5 } else { 1.0 };
            w * lvl.iter().map(|c| c.norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        * dt
        * grid.dp()
}

/// Level offsets of the fine-panel quadrature.
fn simpson_midpoints(g: &[Complex], n: usize, steps: usize, m: usize) -> Vec<Complex> {
    let at = |l: usize, k: usize| g[l * n + k];
    (0..n)
        .map(|k| match steps {
            1 => 0.5 * (at(0, k) + at(1, k)),
            2 => {
                if m == 0 {
                    (3.0 * at(0, k) + 6.0 * at(1, k) - at(2, k)) / 8.0
                } else {
                    (-at(0, k) + 6.0 * at(1, k) + 3.0 * at(2, k)) / 8.0
                }
            }
            _ => {
                if m == 0 {
                    (5.0 * at(0, k) + 15.0 * at(1, k) - 5.0 * at(2, k) + at(3, k)) / 16.0
                } else if m == steps - 1 {
                    (at(m - 2, k) - 5.0 * at(m - 1, k) + 15.0 * at(m, k) + 5.0 * at(m + 1, k)) / 16.0
                } else {
                    (-at(m - 1, k) + 9.0 * at(m, k) + 9.0 * at(m + 1, k) - at(m + 2, k)) / 16.0
                }
            }
        })
        .collect()
}

/// Duhamel integral by composite Simpson. With `ĝ` given at `r·M + 1` levels
/// (`r` even) the fine levels are the Simpson nodes; with `r = 1` the panel
/// midpoints come from cubic interpolation in time.
fn simpson_integral(problem: &ProblemSpec, window: &TimeWindow, g_hat: &[Complex], fine_levels: usize) -> Result<Vec<Complex>> {
    let n = problem.grid.n_points();
    let steps = window.steps();
    let fine_steps = fine_levels - 1;
    if !fine_steps.is_multiple_of(steps) {
        return Err(Error::param(format!(
            "reference field has {fine_steps} steps, not a multiple of {steps}"
        )));
    }
    let r = fine_steps / steps;
    if r != 1 && !r.is_multiple_of(2) {
        return Err(Error::param(format!("refinement ratio must be 1 or even, got {r}")));
    }
    let dt = window.dt();
    let sym = problem.symbol.values();
    let e_dt: Vec<Complex> = sym.iter().map(|s| (s * dt).exp()).collect();
    let mut out = vec![Complex::new(0.0, 0.0); n * window.levels()];
    if r == 1 {
        let e_half: Vec<Complex> = sym.iter().map(|s| (s * (0.5 * dt)).exp()).collect();
        for m in 0..steps {
            let mid = simpson_midpoints(g_hat, n, steps, m);
            let (done, rest) = out.split_at_mut((m + 1) * n);
            let prev = &done[m * n..];
            for k in 0..n {
                let panel = dt / 6.0
                    * (e_dt[k] * g_hat[m * n + k] + 4.0 * e_half[k] * mid[k] + g_hat[(m + 1) * n + k]);
                rest[k] = e_dt[k] * prev[k] + panel;
            }
        }
    } else {
        let h = dt / r as f64;
        // E((r - j)·h) for the sub-nodes of one coarse step
        let weights: Vec<Vec<Complex>> = (0..=r)
            .map(|j| {
                let w = if j == 0 || j == r { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                let tau = (r - j) as f64 * h;
                sym.iter().map(|s| (s * tau).exp() * (w * h / 3.0)).collect()
            })
            .collect();
        for m in 0..steps {
            let (done, rest) = out.split_at_mut((m + 1) * n);
            let prev = &done[m * n..];
            for k in 0..n {
                let mut acc = e_dt[k] * prev[k];
                for (j, w) in weights.iter().enumerate() {
                    acc += w[k] * g_hat[(m * r + j) * n + k];
                }
                rest[k] = acc;
            }
        }
    }
    Ok(out)
}

/// `L²(ℝ×[0,T])` distance between `û` and `E(t)û₀ + ∫E(t-s)ĝ_v ds` with the
/// integral recomputed by Simpson. `v` may live on the same window or on one
/// refined by an even factor.
pub fn duhamel_residual(
    problem: &ProblemSpec,
    window: &TimeWindow,
    u: &SpaceTimeField,
    v: &SpaceTimeField,
) -> Result<f64> {
    u.check_window(&problem.grid, window)?;
    Error::check_len(problem.grid.n_points(), v.n_points())?;
    let g_hat = forcing_spectra(problem, v)?;
    let integral = simpson_integral(problem, window, &g_hat, v.n_levels())?;
    let semigroup = semigroup_levels(problem, window);
    let u_hat = u.spectra(&problem.grid);
    let diff: Vec<Complex> = u_hat
        .iter()
        .zip(semigroup.iter().zip(&integral))
        .map(|(u, (s, i))| u - s - i)
        .collect();
    Ok(spacetime_l2_sqr(&problem.grid, window, &diff).sqrt())
}

/// A posteriori bound on the trapezoid error of the Duhamel integral,
/// `t_m dt²/12 · e^{a t_m} · max_s |m²ĝ − 2mĝ' + ĝ''|` per mode, with time
/// derivatives of `ĝ` by finite differences and a safety factor of 2.
pub fn trapezoid_error_bound(problem: &ProblemSpec, window: &TimeWindow, v: &SpaceTimeField) -> Result<f64> {
    v.check_window(&problem.grid, window)?;
    let g = forcing_spectra(problem, v)?;
    let n = problem.grid.n_points();
    let levels = window.levels();
    let dt = window.dt();
    let sym = problem.symbol.values();
    let at = |l: usize, k: usize| g[l * n + k];
    let mut sup = vec![0.0f64; n];
    for l in 0..levels {
        for k in 0..n {
            let (d1, d2) = if levels < 3 {
                ((at(levels - 1, k) - at(0, k)) / (dt * (levels - 1) as f64), Complex::new(0.0, 0.0))
            } else {
                let c = l.clamp(1, levels - 2);
                (
                    (at(c + 1, k) - at(c - 1, k)) / (2.0 * dt),
                    (at(c + 1, k) - 2.0 * at(c, k) + at(c - 1, k)) / (dt * dt),
                )
            };
            let m = sym[k];
            let h2 = m * m * at(l, k) - 2.0 * m * d1 + d2;
            sup[k] = sup[k].max(h2.norm());
        }
    }
    let a = problem.a;
    let mut total = 0.0;
    for l in 0..levels {
        let t = window.time(l);
        let factor = 2.0 * t * dt * dt / 12.0 * (a * t).exp();
        let w = if l == 0 || l == levels - 1 { 0.5 } else { 1.0 };
        total += w * sup.iter().map(|s| (factor * s).powi(2)).sum::<f64>();
    }
    Ok((total * dt * problem.grid.dp()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelKind};
    use std::f64::consts::PI;

    fn heat_problem(alpha: f64, c: f64) -> ProblemSpec {
        let g = Grid::new(8.0 * PI, 256).unwrap();
        let k = build_kernel(KernelKind::Gaussian { sigma: 1.0 }, 1.0, &g).unwrap();
        let f = NonlinearitySpec::linear(c, &g).unwrap();
        let u0 = g.points().iter().map(|x| (-x * x).exp()).collect();
        ProblemSpec::oracle_mode(alpha, 0.0, 0.0, k, f, u0).unwrap()
    }

    #[test]
    fn alpha_one_needs_oracle_mode() {
        let p = heat_problem(1.0, 0.0);
        let r = ProblemSpec::new(1.0, 0.0, 0.0, p.kernel.clone(), p.nonlinearity.clone(), p.u0.clone());
        assert!(r.is_err());
        let r = ProblemSpec::new(0.5, -1.0, 0.0, p.kernel.clone(), p.nonlinearity.clone(), p.u0.clone());
        assert!(r.is_err());
    }

    #[test]
    fn window_times_are_exact() {
        let w = TimeWindow::new(0.3, 7).unwrap();
        assert_eq!(w.time(7), 0.3);
        assert_eq!(w.time(0), 0.0);
        assert!(TimeWindow::new(0.0, 3).is_err());
        assert!(TimeWindow::new(1.0, 0).is_err());
    }

    #[test]
    fn heat_gaussian_is_exact() {
        let p = heat_problem(1.0, 0.0);
        let w = TimeWindow::new(1.0, 20).unwrap();
        let v = SpaceTimeField::zeros(p.grid(), &w);
        let u = apply_map(&p, &w, &v).unwrap();
        let mut err = 0.0f64;
        for m in 0..w.levels() {
            let t = w.time(m);
            for (x, val) in p.grid().points().iter().zip(u.level(m)) {
                let s = 1.0 + 4.0 * t;
                err = err.max((val - (-x * x / s).exp() / s.sqrt()).abs());
            }
        }
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn semigroup_factor_properties() {
        let p = heat_problem(0.5, 0.0);
        let g = p.grid().clone();
        let one = semigroup_factor(&p, &g, 0.0).unwrap();
        assert!(one.values().iter().all(|v| *v == Complex::new(1.0, 0.0)));
        let a = semigroup_factor(&p, &g, 0.3).unwrap();
        let b = semigroup_factor(&p, &g, 0.45).unwrap();
        let ab = semigroup_factor(&p, &g, 0.75).unwrap();
        for (x, y) in a.compose(&b).unwrap().values().iter().zip(ab.values()) {
            assert!((x - y).norm() < 1e-13);
        }
        let k1 = g.index_of(8).unwrap(); // p = 1 with L = 8π
        let e1 = semigroup_factor(&p, &g, 1.0).unwrap().values()[k1];
        assert!((e1.re - (-1.0f64).exp()).abs() < 1e-15 && e1.im == 0.0);
        assert!(semigroup_factor(&p, &g, -1.0).is_err());
    }

    #[test]
    fn single_mode_time_derivative() {
        let g = Grid::new(8.0 * PI, 128).unwrap();
        let k = build_kernel(KernelKind::Gaussian { sigma: 1.0 }, 1.0, &g).unwrap();
        let f = NonlinearitySpec::linear(0.0, &g).unwrap();
        let u0: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
        let p = ProblemSpec::new(0.5, 0.0, 0.0, k, f, u0).unwrap();
        let w = TimeWindow::new(1.0, 10).unwrap();
        let v = SpaceTimeField::zeros(&g, &w);
        let u = apply_map(&p, &w, &v).unwrap();
        let du = time_derivative(&p, &w, &u, &v).unwrap();
        for (a, b) in du.data().iter().zip(u.data()) {
            assert!((a + b).abs() < 1e-10);
        }
        let zero_p = p.with_initial_condition(vec![0.0; 128]).unwrap();
        let z = apply_map(&zero_p, &w, &v).unwrap();
        let dz = time_derivative(&zero_p, &w, &z, &v).unwrap();
        assert_eq!(dz.max_abs(), 0.0);
    }

    #[test]
    fn residual_vanishes_without_forcing() {
        let p = heat_problem(0.5, 0.0);
        let w = TimeWindow::new(1.0, 16).unwrap();
        let v = SpaceTimeField::constant_extension(p.initial_condition(), &w);
        let u = apply_map(&p, &w, &v).unwrap();
        assert!(duhamel_residual(&p, &w, &u, &v).unwrap() <= 1e-12);
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let p = heat_problem(0.5, 0.1);
        let w = TimeWindow::new(1.0, 4).unwrap();
        let v = SpaceTimeField::zeros(p.grid(), &TimeWindow::new(1.0, 5).unwrap());
        assert!(apply_map(&p, &w, &v).is_err());
        let g2 = Grid::new(8.0 * PI, 64).unwrap();
        assert!(apply_map(&p, &w, &SpaceTimeField::zeros(&g2, &w)).is_err());
    }

    #[test]
    fn finite_difference_derivative_is_second_order_exact_on_quadratics() {
        let g = Grid::new(1.0, 8).unwrap();
        let w = TimeWindow::new(1.0, 5).unwrap();
        let f = SpaceTimeField::from_fn(&g, &w, |x, t| x * t * t);
        let d = f.finite_difference_time_derivative(&w).unwrap();
        let exact = SpaceTimeField::from_fn(&g, &w, |x, t| 2.0 * x * t);
        for (a, b) in d.data().iter().zip(exact.data()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
