//! Discrete Fourier machinery on a periodic box `[-L, L)`.
//!
//! The continuous transform is `φ̂(p) = (2π)^{-1/2} ∫ φ(x) e^{-ipx} dx`. On the
//! grid `x_j = -L + j·dx` it is realized by the rectangle rule, so
//!
//! ```text
//! c_k = dx/√(2π) · Σ_j φ_j e^{-i p_k x_j},     φ_j = dp/√(2π) · Σ_k c_k e^{i p_k x_j}
//! ```
//!
//! with `p_k = πk/L` and `dp = π/L`. Because `x_j` carries the `-L` offset each
//! coefficient picks up a `(-1)^k` phase relative to the raw DFT. Coefficients
//! are stored in FFT order: slot `i` holds wavenumber `i` for `i < N/2` and
//! `i - N` otherwise, so the Nyquist mode `k = -N/2` sits at slot `N/2`.
//!
//! The periodic box is a surrogate for the real line. Norms computed here are
//! norms of the periodic field, which agree with the whole-line norms only when
//! the field has decayed at `±L`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Complex = Complex64;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// `√(2π)`, the factor relating convolution to a product of transforms.
pub fn sqrt_2pi() -> f64 {
    SQRT_2PI
}

/// Uniform periodic grid on `[-L, L)` with the matching angular frequencies.
#[derive(Clone)]
pub struct Grid {
    half_width: f64,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_width", &self.half_width)
            .field("n_points", &self.n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }
}

impl Grid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::param(format!(
                "grid half width must be positive and finite, got {half_width}"
            )));
        }
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(Error::param(format!(
                "grid size must be an even integer >= 8, got {n_points}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            half_width,
            n: n_points,
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Frequency spacing `π/L`.
    pub fn dp(&self) -> f64 {
        PI / self.half_width
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed wavenumber held in storage slot `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.wavenumber(i) as f64 * self.dp()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.frequency(i)).collect()
    }

    /// Storage slot of the unpaired mode `k = -N/2`.
    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Storage slot of wavenumber `k`, if it is on the grid.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let half = self.n as i64 / 2;
        if k < -half || k >= half {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    /// Maps `x` into the box `[-L, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let period = 2.0 * self.half_width;
        let shifted = (x + self.half_width).rem_euclid(period);
        shifted - self.half_width
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        Error::check_len(self.n, len)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::param(format!(
                "grid mismatch: {:?} vs {:?}",
                self, other
            )))
        }
    }

    /// In-place forward transform of complex samples into coefficients.
    pub(crate) fn forward_in_place(&self, buf: &mut [Complex]) {
        self.forward.process(buf);
        let scale = self.dx() / SQRT_2PI;
        for (i, c) in buf.iter_mut().enumerate() {
            let s = if i % 2 == 0 { scale } else { -scale };
            *c *= s;
        }
    }

    /// In-place inverse transform of coefficients into complex samples.
    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex]) {
        for (i, c) in buf.iter_mut().enumerate() {
            if i % 2 == 1 {
                *c = -*c;
            }
        }
        self.inverse.process(buf);
        let scale = self.dp() / SQRT_2PI;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    pub(crate) fn forward_real(&self, field: &[f64]) -> Vec<Complex> {
        let mut buf: Vec<Complex> = field.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    pub(crate) fn inverse_real(&self, coeffs: &[Complex]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Spectral coefficients of a field, stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<Complex>,
}

impl SpectralField {
    pub fn from_coefficients(coeffs: Vec<Complex>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![Complex::new(0.0, 0.0); n],
        }
    }

    pub fn coefficients(&self) -> &[Complex] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<Complex> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|c_{-k} - conj(c_k)|`; zero for the spectrum of a real field.
    /// The Nyquist coefficient pairs with itself and must be real.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n)
            .map(|i| {
                let partner = (n - i) % n;
                (self.coeffs[partner] - self.coeffs[i].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `√(dp Σ|c_k|²)`: the L² norm through Parseval.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        (grid.dp() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Per-mode complex multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    values: Vec<Complex>,
}

/// `|p|^{2α}` with the exact integer powers used where available.
pub(crate) fn fractional_power(p: f64, alpha: f64) -> f64 {
    let ap = p.abs();
    if alpha == 1.0 {
        ap * ap
    } else if alpha == 0.5 {
        ap
    } else if ap == 0.0 {
        0.0
    } else {
        ap.powf(2.0 * alpha)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "fractional exponent must lie in (0, 1], got {alpha}"
        )))
    }
}

impl Symbol {
    pub fn from_values(values: Vec<Complex>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &Grid, value: Complex) -> Self {
        Self {
            values: vec![value; grid.n_points()],
        }
    }

    /// `|p|^{2α}`, the symbol of `(-∂²)^α`.
    pub fn fractional_laplacian(grid: &Grid, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            values: grid
                .frequencies()
                .into_iter()
                .map(|p| Complex::new(fractional_power(p, alpha), 0.0))
                .collect(),
        })
    }

    /// `-p²`, the symbol of `∂²/∂x²`.
    pub fn second_derivative(grid: &Grid) -> Self {
        Self {
            values: grid
                .frequencies()
                .into_iter()
                .map(|p| Complex::new(-p * p, 0.0))
                .collect(),
        }
    }

    /// `i·b·p`, with the Nyquist entry zeroed so real fields stay real.
    pub fn drift(grid: &Grid, b: f64) -> Self {
        let nyq = grid.nyquist_index();
        Self {
            values: grid
                .frequencies()
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    if i == nyq {
                        Complex::new(0.0, 0.0)
                    } else {
                        Complex::new(0.0, b * p)
                    }
                })
                .collect(),
        }
    }

    /// Full linear part `-|p|^{2α} + i·b·p + a` (drift removed at Nyquist).
    pub fn linear_part(grid: &Grid, alpha: f64, a: f64, b: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let nyq = grid.nyquist_index();
        Ok(Self {
            values: grid
                .frequencies()
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    let drift = if i == nyq { 0.0 } else { b * p };
                    Complex::new(a - fractional_power(p, alpha), drift)
                })
                .collect(),
        })
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise product `m·m'`.
    pub fn compose(&self, other: &Symbol) -> Result<Symbol> {
        Error::check_len(self.len(), other.len())?;
        Ok(Symbol {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// `e^{t·m_k}` per mode.
    pub fn exp_scaled(&self, t: f64) -> Symbol {
        Symbol {
            values: self.values.iter().map(|m| (m * t).exp()).collect(),
        }
    }

    pub fn apply(&self, spec: &SpectralField) -> Result<SpectralField> {
        Error::check_len(self.len(), spec.len())?;
        Ok(SpectralField {
            coeffs: self
                .values
                .iter()
                .zip(&spec.coeffs)
                .map(|(m, c)| m * c)
                .collect(),
        })
    }

    /// Applies the multiplier to a physical field and returns physical samples.
    pub fn apply_to_field(&self, field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
        let spec = forward_transform(field, grid)?;
        inverse_transform(&self.apply(&spec)?, grid)
    }
}

fn check_finite(field: &[f64]) -> Result<()> {
    match field.iter().position(|v| !v.is_finite()) {
        Some(j) => Err(Error::Data(format!(
            "sample {j} is {} (expected a finite value)",
            field[j]
        ))),
        None => Ok(()),
    }
}

pub fn forward_transform(field: &[f64], grid: &Grid) -> Result<SpectralField> {
    grid.check(field.len())?;
    Ok(SpectralField {
        coeffs: grid.forward_real(field),
    })
}

/// Forward transform of complex samples.
pub fn forward_transform_complex(field: &[Complex], grid: &Grid) -> Result<SpectralField> {
    grid.check(field.len())?;
    let mut buf = field.to_vec();
    grid.forward_in_place(&mut buf);
    Ok(SpectralField { coeffs: buf })
}

/// Inverse transform, discarding the (rounding-level) imaginary part.
pub fn inverse_transform(spec: &SpectralField, grid: &Grid) -> Result<Vec<f64>> {
    grid.check(spec.len())?;
    Ok(grid.inverse_real(&spec.coeffs))
}

pub fn inverse_transform_complex(spec: &SpectralField, grid: &Grid) -> Result<Vec<Complex>> {
    grid.check(spec.len())?;
    let mut buf = spec.coeffs.clone();
    grid.inverse_in_place(&mut buf);
    Ok(buf)
}

pub fn apply_fractional_laplacian(field: &[f64], grid: &Grid, alpha: f64) -> Result<Vec<f64>> {
    Symbol::fractional_laplacian(grid, alpha)?.apply_to_field(field, grid)
}

/// L² norm by the rectangle rule `√(dx Σ φ_j²)`.
pub fn l2_norm(field: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(field.len())?;
    check_finite(field)?;
    Ok((grid.dx() * field.iter().map(|v| v * v).sum::<f64>()).sqrt())
}

/// L¹ norm by the rectangle rule; exact for the discrete sup bound on `|c_k|`.
pub fn l1_norm(field: &[f64], grid: &Grid) -> Result<f64> {
    grid.check(field.len())?;
    check_finite(field)?;
    Ok(grid.dx() * field.iter().map(|v| v.abs()).sum::<f64>())
}

/// `√(‖φ‖² + ‖(-∂²)^α φ‖²)` with the second term through Parseval.
pub fn h2alpha_norm(field: &[f64], grid: &Grid, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let l2 = l2_norm(field, grid)?;
    let spec = forward_transform(field, grid)?;
    let frac = spectral_weighted_norm_sqr(&spec, grid, |p| fractional_power(p, alpha));
    Ok((l2 * l2 + frac).sqrt())
}

/// `dp Σ w(p_k)² |c_k|²`.
pub(crate) fn spectral_weighted_norm_sqr(
    spec: &SpectralField,
    grid: &Grid,
    weight: impl Fn(f64) -> f64,
) -> f64 {
    grid.dp()
        * spec
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = weight(grid.frequency(i));
                w * w * c.norm_sqr()
            })
            .sum::<f64>()
}
