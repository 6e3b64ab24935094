//! Convolution kernels `G`, their L¹ data and the coupling constant
//! `Q = √(‖G‖₁² + ‖G''‖₁²)`.
//!
//! Admissibility requires `G` nontrivial with `G, G'' ∈ L¹` in the classical
//! sense. Built-ins carry closed-form `G''`; band-limited and tabulated kernels
//! get `G''` spectrally, and tabulated ones must pass a spectral tail test
//! (coefficients decaying faster than `|k|^{-3}`) before `G''` is trusted.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::spectral::{
    forward_transform, inverse_transform, sqrt_2pi, Complex, Grid, SpectralField,
};

/// Target relative accuracy for the kernel L¹ norms. Tighter than the 1e-8
/// contract so that equality cases of the Fourier sup bound stay resolvable.
const L1_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// Normalized Gaussian `e^{-x²/(2σ²)}/(σ√(2π))`.
    Gaussian { sigma: f64 },
    /// `exp(-1/(1-(x/w)²))` on `|x| < w`, zero elsewhere.
    Bump { width: f64 },
    /// Unit-mass `sinc²` whose transform is the triangle `(1-|p|/w)₊/√(2π)`.
    /// Built spectrally, so on the grid it is the exact periodization.
    SincSquared { bandwidth: f64 },
    /// `e^{-|x|}/2`. Listed so configs can name it; always inadmissible since
    /// its second derivative carries a point mass at the origin.
    Laplace,
    /// Samples `G(x_j)` on the grid.
    Tabulated {
        #[serde(skip)]
        samples: Vec<f64>,
    },
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Gaussian { .. } => "gaussian",
            KernelKind::Bump { .. } => "bump",
            KernelKind::SincSquared { .. } => "sinc_squared",
            KernelKind::Laplace => "laplace",
            KernelKind::Tabulated { .. } => "tabulated",
        }
    }
}

/// Pointwise evaluation of `G` and `G''` anywhere in the box.
#[derive(Debug, Clone)]
enum Evaluator {
    Gaussian { sigma: f64, scale: f64 },
    Bump { width: f64, scale: f64 },
    /// Trigonometric interpolant through the significant modes.
    Spectral { modes: Vec<(f64, Complex)>, nyquist: Option<(f64, Complex)> },
}

impl Evaluator {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Evaluator::Gaussian { sigma, scale } => {
                scale * (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * sqrt_2pi())
            }
            Evaluator::Bump { width, scale } => {
                let s = x / width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    scale * (-1.0 / (1.0 - s * s)).exp()
                }
            }
            Evaluator::Spectral { .. } => self.spectral_sum(x, 0),
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Evaluator::Gaussian { sigma, .. } => {
                let s2 = sigma * sigma;
                self.value(x) * (x * x / (s2 * s2) - 1.0 / s2)
            }
            Evaluator::Bump { width, .. } => {
                let s = x / width;
                if s.abs() >= 1.0 {
                    return 0.0;
                }
                let q = 1.0 - s * s;
                let bracket = 4.0 * s * s / q.powi(4) - 2.0 / (q * q) - 8.0 * s * s / q.powi(3);
                self.value(x) * bracket / (width * width)
            }
            Evaluator::Spectral { .. } => self.spectral_sum(x, 2),
        }
    }

    /// `dp/√(2π) Σ (ip)^order c_k e^{ipx}`, real part.
    fn spectral_sum(&self, x: f64, order: i32) -> f64 {
        let Evaluator::Spectral { modes, nyquist } = self else {
            unreachable!()
        };
        let sign = if order == 2 { -1.0 } else { 1.0 };
        let mut acc = 0.0;
        for &(p, c) in modes {
            let w = if order == 2 { p * p } else { 1.0 };
            let e = Complex::new(0.0, p * x).exp();
            acc += sign * w * (c * e).re;
        }
        if let Some((p, c)) = nyquist {
            let w = if order == 2 { p * p } else { 1.0 };
            acc += sign * w * c.re * (p * x).cos();
        }
        acc
    }
}

/// An admissible kernel resolved on a grid. Immutable after construction.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    scale: f64,
    grid: Grid,
    evaluator: Evaluator,
    samples: Vec<f64>,
    second_derivative: Vec<f64>,
    l1_g: f64,
    l1_g2: f64,
    q: f64,
    spectrum: SpectralField,
    warnings: Vec<String>,
}

/// Summary used in reports.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub kind: KernelKind,
    pub scale: f64,
    pub l1_g: f64,
    pub l1_g2: f64,
    pub q: f64,
    pub signed: bool,
    pub warnings: Vec<String>,
}

pub fn build_kernel(kind: KernelKind, scale: f64, grid: &Grid) -> Result<KernelSpec> {
    KernelSpec::build(kind, scale, grid)
}

impl KernelSpec {
    pub fn build(kind: KernelKind, scale: f64, grid: &Grid) -> Result<Self> {
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Admissibility(format!(
                "kernel scale {scale} makes G trivial or non-finite; G must be a nontrivial L¹ function"
            )));
        }
        let mut warnings = Vec::new();
        let (evaluator, samples, second, closed_form) = match &kind {
            KernelKind::Gaussian { sigma } => {
                let sigma = *sigma;
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::param(format!("gaussian sigma must be positive, got {sigma}")));
                }
                let ev = Evaluator::Gaussian { sigma, scale };
                let (s, d2) = sample_pair(&ev, grid);
                let (l1, l1_2, _) = gaussian_closed_form(sigma);
                (ev, s, d2, Some((scale.abs() * l1, scale.abs() * l1_2)))
            }
            KernelKind::Bump { width } => {
                let width = *width;
                if !(width.is_finite() && width > 0.0 && width < grid.half_width()) {
                    return Err(Error::param(format!(
                        "bump width must lie in (0, L) = (0, {}), got {width}",
                        grid.half_width()
                    )));
                }
                let ev = Evaluator::Bump { width, scale };
                let (s, d2) = sample_pair(&ev, grid);
                (ev, s, d2, None)
            }
            KernelKind::SincSquared { bandwidth } => {
                let w = *bandwidth;
                let p_max = grid.dp() * (grid.n_points() / 2) as f64;
                if !(w.is_finite() && w > 0.0 && w < p_max) {
                    return Err(Error::param(format!(
                        "sinc-squared bandwidth must lie in (0, {p_max}), got {w}"
                    )));
                }
                let coeffs: Vec<Complex> = grid
                    .frequencies()
                    .into_iter()
                    .map(|p| Complex::new(scale * (1.0 - p.abs() / w).max(0.0) / sqrt_2pi(), 0.0))
                    .collect();
                spectral_kernel(SpectralField::from_coefficients(coeffs), grid)?
            }
            KernelKind::Laplace => {
                return Err(Error::Admissibility(
                    "the Laplace kernel e^{-|x|}/2 has G'' = G - δ₀, a point mass; \
                     G'' must be a classical L¹ function"
                        .into(),
                ));
            }
            KernelKind::Tabulated { samples } => {
                grid.check(samples.len())?;
                if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("tabulated kernel sample {j} is not finite")));
                }
                let scaled: Vec<f64> = samples.iter().map(|v| v * scale).collect();
                if scaled.iter().all(|&v| v == 0.0) {
                    return Err(Error::Admissibility("tabulated kernel is identically zero".into()));
                }
                let spec = forward_transform(&scaled, grid)?;
                spectral_tail_check(&spec, grid).map_err(Error::Admissibility)?;
                spectral_kernel(spec, grid)?
            }
        };

        let max_abs = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_abs == 0.0 {
            return Err(Error::Admissibility("kernel vanishes on the grid".into()));
        }
        let edge = samples[0].abs().max(samples[grid.n_points() - 1].abs());
        if edge > 1e-8 * max_abs {
            warnings.push(format!(
                "kernel has not decayed at the box edge (|G(±L)|/max|G| = {:.3e})",
                edge / max_abs
            ));
        }
        let signed = samples.iter().any(|&v| v < -1e-12 * max_abs);
        if signed {
            warnings.push("kernel takes negative values (signed mass)".into());
        }

        let l = grid.half_width();
        let panels = grid.n_points();
        let quad_g = adaptive_simpson(|x| evaluator.value(x).abs(), -l, l, panels, L1_REL_TOL);
        let quad_g2 =
            adaptive_simpson(|x| evaluator.second_derivative(x).abs(), -l, l, panels, L1_REL_TOL);
        let (l1_g, l1_g2) = match closed_form {
            Some((c1, c2)) => {
                let ok1 = (quad_g - c1).abs() <= 1e-8 * c1;
                let ok2 = (quad_g2 - c2).abs() <= 1e-8 * c2;
                if ok1 && ok2 {
                    (c1, c2)
                } else {
                    warnings.push(format!(
                        "closed-form L¹ norms ({c1:.10e}, {c2:.10e}) disagree with box quadrature \
                         ({quad_g:.10e}, {quad_g2:.10e}); using quadrature"
                    ));
                    (quad_g, quad_g2)
                }
            }
            None => (quad_g, quad_g2),
        };
        if !(l1_g > 0.0 && l1_g.is_finite() && l1_g2.is_finite()) {
            return Err(Error::Admissibility(format!(
                "kernel L¹ data not admissible: ‖G‖₁ = {l1_g}, ‖G''‖₁ = {l1_g2}"
            )));
        }
        let q = (l1_g * l1_g + l1_g2 * l1_g2).sqrt();
        let spectrum = forward_transform(&samples, grid)?;

        Ok(Self {
            kind,
            scale,
            grid: grid.clone(),
            evaluator,
            samples,
            second_derivative: second,
            l1_g,
            l1_g2,
            q,
            spectrum,
            warnings,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn second_derivative_samples(&self) -> &[f64] {
        &self.second_derivative
    }

    pub fn l1_g(&self) -> f64 {
        self.l1_g
    }

    pub fn l1_g2(&self) -> f64 {
        self.l1_g2
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Ĝ(p_k)` in FFT order.
    pub fn spectrum(&self) -> &SpectralField {
        &self.spectrum
    }

    /// `√(2π)·Ĝ(p_k)`, the convolution multiplier.
    pub fn multiplier(&self) -> Vec<Complex> {
        self.spectrum
            .coefficients()
            .iter()
            .map(|c| c * sqrt_2pi())
            .collect()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_signed(&self) -> bool {
        self.warnings.iter().any(|w| w.contains("negative"))
    }

    /// `G(x)` at an arbitrary point of the box (closed form or interpolant).
    pub fn value_at(&self, x: f64) -> f64 {
        self.evaluator.value(x)
    }

    pub fn second_derivative_at(&self, x: f64) -> f64 {
        self.evaluator.second_derivative(x)
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            kind: self.kind.clone(),
            scale: self.scale,
            l1_g: self.l1_g,
            l1_g2: self.l1_g2,
            q: self.q,
            signed: self.is_signed(),
            warnings: self.warnings.clone(),
        }
    }
}

fn sample_pair(ev: &Evaluator, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let pts = grid.points();
    (
        pts.iter().map(|&x| ev.value(x)).collect(),
        pts.iter().map(|&x| ev.second_derivative(x)).collect(),
    )
}

type Resolved = (Evaluator, Vec<f64>, Vec<f64>, Option<(f64, f64)>);

fn spectral_kernel(spec: SpectralField, grid: &Grid) -> Result<Resolved> {
    let samples = inverse_transform(&spec, grid)?;
    let d2: Vec<Complex> = spec
        .coefficients()
        .iter()
        .zip(grid.frequencies())
        .map(|(c, p)| -c * (p * p))
        .collect();
    let second = inverse_transform(&SpectralField::from_coefficients(d2), grid)?;
    let floor = 1e-18 * spec.max_abs();
    let scale = grid.dp() / sqrt_2pi();
    let nyq = grid.nyquist_index();
    let modes = spec
        .coefficients()
        .iter()
        .enumerate()
        .filter(|&(i, c)| i != nyq && c.norm() > floor)
        .map(|(i, c)| (grid.frequency(i), c * scale))
        .collect();
    let nyquist = {
        let c = spec.coefficients()[nyq];
        (c.norm() > floor).then(|| (grid.frequency(nyq), c * scale))
    };
    Ok((Evaluator::Spectral { modes, nyquist }, samples, second, None))
}

/// Spectral smoothness gate for tabulated kernels: over the upper half of the
/// resolved band, `|c_k|·|k|³` must keep decreasing relative to the band below.
pub fn spectral_tail_check(spec: &SpectralField, grid: &Grid) -> std::result::Result<(), String> {
    let n = grid.n_points() as i64;
    let floor = 1e-13 * spec.max_abs();
    let band_max = |lo: i64, hi: i64| -> f64 {
        spec.coefficients()
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let k = grid.wavenumber(i).abs();
                (k >= lo && k < hi && c.norm() > floor).then(|| c.norm() * (k as f64).powi(3))
            })
            .fold(0.0, f64::max)
    };
    let mid = band_max(n / 8, n / 4);
    let high = band_max(n / 4, n / 2 + 1);
    if high > 0.0 && high >= mid {
        Err(format!(
            "spectral tail decays no faster than |k|^-3 (max |c_k| k³: {high:.3e} in the upper band vs \
             {mid:.3e} below); G'' is not a classical L¹ function on this grid"
        ))
    } else {
        Ok(())
    }
}

/// `(‖G‖₁, ‖G''‖₁, Q)` of the unit-mass Gaussian of width `σ` on the line.
pub(crate) fn gaussian_closed_form(sigma: f64) -> (f64, f64, f64) {
    let l1_2 = 4.0 * (-0.5f64).exp() / (sigma * sigma * (2.0 * PI).sqrt());
    (1.0, l1_2, (1.0 + l1_2 * l1_2).sqrt())
}

/// `∫G(x-y) f(y) dy` as `inverse(√(2π)·Ĝ·f̂)`.
pub fn convolve(kernel: &KernelSpec, field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    kernel.grid.check_same(grid)?;
    let f_hat = forward_transform(field, grid)?;
    let prod: Vec<Complex> = f_hat
        .coefficients()
        .iter()
        .zip(kernel.spectrum.coefficients())
        .map(|(f, g)| f * g * sqrt_2pi())
        .collect();
    inverse_transform(&SpectralField::from_coefficients(prod), grid)
}

/// Reads a two-column `x, value` CSV whose rows are the grid points in order.
/// A non-numeric first row is treated as a header.
pub fn load_profile_csv(path: &Path, grid: &Grid) -> Result<Vec<f64>> {
    let input_err = |message: String| Error::Input {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_err(e.to_string()))?;
    let mut values = Vec::with_capacity(grid.n_points());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| input_err(e.to_string()))?;
        if record.len() != 2 {
            return Err(input_err(format!("row {row}: expected 2 columns, found {}", record.len())));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|s| s.parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                let j = values.len();
                if j >= grid.n_points() {
                    return Err(input_err(format!(
                        "more than {} data rows",
                        grid.n_points()
                    )));
                }
                let x = grid.x(j);
                if (v[0] - x).abs() > 1e-9 * grid.half_width().max(1.0) {
                    return Err(input_err(format!(
                        "row {row}: x = {} does not match grid point {x}",
                        v[0]
                    )));
                }
                values.push(v[1]);
            }
            Err(e) if row == 0 => {
                let _ = e;
            }
            Err(e) => return Err(input_err(format!("row {row}: {e}"))),
        }
    }
    if values.len() != grid.n_points() {
        return Err(input_err(format!(
            "expected {} data rows, found {}",
            grid.n_points(),
            values.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(8.0 * PI, 256).unwrap()
    }

    #[test]
    fn gaussian_norms_match_closed_form() {
        let g = grid();
        let k = build_kernel(KernelKind::Gaussian { sigma: 1.0 }, 1.0, &g).unwrap();
        assert!(k.warnings().is_empty(), "{:?}", k.warnings());
        assert!((k.l1_g() - 1.0).abs() < 1e-15);
        assert!((k.l1_g2() - 0.967_882_898_3).abs() < 1e-9);
        assert!((k.q() - 1.391_69).abs() < 1e-5);
        let k2 = build_kernel(KernelKind::Gaussian { sigma: 2.0 }, 1.0, &g).unwrap();
        assert!((k2.l1_g2() - 0.241_970_724_5).abs() < 1e-9);
        assert!((k2.q() - 1.028_86).abs() < 1e-5);
    }

    #[test]
    fn gaussian_second_derivative_matches_finite_difference() {
        let k = build_kernel(KernelKind::Gaussian { sigma: 0.7 }, 1.0, &grid()).unwrap();
        let h = 1e-4;
        for &x in &[-1.3, -0.2, 0.0, 0.5, 2.1] {
            let fd = (k.value_at(x + h) - 2.0 * k.value_at(x) + k.value_at(x - h)) / (h * h);
            assert!((fd - k.second_derivative_at(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn bump_second_derivative_matches_finite_difference() {
        let k = build_kernel(KernelKind::Bump { width: 2.0 }, 1.0, &grid()).unwrap();
        let h = 1e-4;
        for &x in &[-1.7, -0.9, 0.0, 0.3, 1.4] {
            let fd = (k.value_at(x + h) - 2.0 * k.value_at(x) + k.value_at(x - h)) / (h * h);
            assert!((fd - k.second_derivative_at(x)).abs() < 1e-5, "x={x}");
        }
        assert_eq!(k.value_at(2.5), 0.0);
        assert!(k.l1_g() > 0.0 && k.q() > k.l1_g());
    }

    #[test]
    fn sinc_squared_is_unit_mass_and_band_limited() {
        let g = grid();
        let k = build_kernel(KernelKind::SincSquared { bandwidth: 1.0 }, 1.0, &g).unwrap();
        assert!((k.l1_g() - 1.0).abs() < 1e-10, "{}", k.l1_g());
        for (i, c) in k.spectrum().coefficients().iter().enumerate() {
            if g.frequency(i).abs() >= 1.0 {
                assert!(c.norm() < 1e-15);
            }
        }
        for j in [0, 17, 128, 200] {
            let x = g.x(j);
            assert!((k.value_at(x) - k.samples()[j]).abs() < 1e-14);
            assert!((k.second_derivative_at(x) - k.second_derivative_samples()[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_kernel_is_inadmissible() {
        let g = grid();
        assert!(matches!(
            build_kernel(KernelKind::Laplace, 1.0, &g),
            Err(Error::Admissibility(_))
        ));
        let samples: Vec<f64> = g.points().iter().map(|x| 0.5 * (-x.abs()).exp()).collect();
        let err = build_kernel(KernelKind::Tabulated { samples }, 1.0, &g).unwrap_err();
        assert!(matches!(err, Error::Admissibility(_)), "{err}");
    }

    #[test]
    fn tabulated_gaussian_is_admitted() {
        let g = grid();
        let reference = build_kernel(KernelKind::Gaussian { sigma: 1.5 }, 1.0, &g).unwrap();
        let k = build_kernel(
            KernelKind::Tabulated {
                samples: reference.samples().to_vec(),
            },
            1.0,
            &g,
        )
        .unwrap();
        assert!((k.l1_g() - reference.l1_g()).abs() < 1e-9);
        assert!((k.l1_g2() - reference.l1_g2()).abs() < 1e-8);
    }

    #[test]
    fn zero_kernels_are_rejected() {
        let g = grid();
        assert!(matches!(
            build_kernel(KernelKind::Tabulated { samples: vec![0.0; 256] }, 1.0, &g),
            Err(Error::Admissibility(_))
        ));
        assert!(build_kernel(KernelKind::Gaussian { sigma: 1.0 }, 0.0, &g).is_err());
        assert!(build_kernel(KernelKind::Gaussian { sigma: -1.0 }, 1.0, &g).is_err());
    }

    #[test]
    fn q_scales_and_ignores_sign() {
        let g = grid();
        let base = build_kernel(KernelKind::Bump { width: 1.5 }, 1.0, &g).unwrap();
        let neg = build_kernel(KernelKind::Bump { width: 1.5 }, -1.0, &g).unwrap();
        let big = build_kernel(KernelKind::Bump { width: 1.5 }, 3.0, &g).unwrap();
        assert!((neg.q() - base.q()).abs() < 1e-12 * base.q());
        assert!(neg.is_signed());
        assert!((big.q() - 3.0 * base.q()).abs() < 1e-10 * base.q());
        assert!((big.l1_g() - 3.0 * base.l1_g()).abs() < 1e-10 * base.l1_g());
    }

    #[test]
    fn convolution_of_gaussians() {
        let g = grid();
        let k = build_kernel(KernelKind::Gaussian { sigma: 1.0 }, 1.0, &g).unwrap();
        let f: Vec<f64> = g.points().iter().map(|&x| k.value_at(x)).collect();
        let out = convolve(&k, &f, &g).unwrap();
        let s = 2.0f64.sqrt();
        for (x, v) in g.points().iter().zip(&out) {
            let exact = (-x * x / (2.0 * s * s)).exp() / (s * sqrt_2pi());
            assert!((v - exact).abs() < 1e-10);
        }
        assert!(convolve(&k, &vec![0.0; 256], &g).unwrap().iter().all(|v| v.abs() == 0.0));
        let other = Grid::new(4.0, 256).unwrap();
        assert!(convolve(&k, &vec![0.0; 256], &other).is_err());
    }

    #[test]
    fn csv_profile_round_trip() {
        let g = Grid::new(4.0, 16).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let mut text = String::from("x,G\n");
        for j in 0..16 {
            let x = g.x(j);
            text.push_str(&format!("{x},{}\n", (-x * x).exp()));
        }
        std::fs::write(&path, &text).unwrap();
        let values = load_profile_csv(&path, &g).unwrap();
        assert_eq!(values.len(), 16);
        assert_eq!(values[8], 1.0);

        let short: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, short).unwrap();
        assert!(load_profile_csv(&path, &g).is_err());
    }
}
