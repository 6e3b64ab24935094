//! Proliferation rates `F(u, x) = r(u) + s(x)` (or an arbitrary evaluator) with
//! the growth data `|F(u,x)| ≤ k|u| + h(x)` and Lipschitz constant `l`.
//!
//! The offset is `h = |s|`, which is nonnegative and square integrable whenever
//! the source is. Measurability in `x` cannot be checked numerically and is
//! assumed for every evaluator.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{forward_transform, inverse_transform, l2_norm, Complex, Grid, SpectralField};

/// Relative slack absorbing rounding in difference quotients and bound checks.
const ROUNDING_SLACK: f64 = 1e-10;

pub type RateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum RateKind {
    /// `c·u`
    Linear { c: f64 },
    /// `k·u/(1+u²)`, slope maximal (= k) at the origin.
    Saturating { k: f64 },
    /// `k·sin(u)`
    Sine { k: f64 },
    /// Arbitrary `F(u, x)`; the source profile, if any, is added on top.
    Custom { name: String, f: RateFn },
}

impl fmt::Debug for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateKind::Linear { c } => write!(f, "Linear {{ c: {c} }}"),
            RateKind::Saturating { k } => write!(f, "Saturating {{ k: {k} }}"),
            RateKind::Sine { k } => write!(f, "Sine {{ k: {k} }}"),
            RateKind::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

impl RateKind {
    fn value(&self, u: f64, x: f64) -> f64 {
        match self {
            RateKind::Linear { c } => c * u,
            RateKind::Saturating { k } => k * u / (1.0 + u * u),
            RateKind::Sine { k } => k * u.sin(),
            RateKind::Custom { f, .. } => f(u, x),
        }
    }

    /// Growth and Lipschitz constants implied by the closed form.
    fn natural_constants(&self) -> Option<(f64, f64)> {
        match *self {
            RateKind::Linear { c } => Some((c.abs(), c.abs())),
            RateKind::Saturating { k } | RateKind::Sine { k } => Some((k.abs(), k.abs())),
            RateKind::Custom { .. } => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            RateKind::Linear { c } => format!("linear(c={c})"),
            RateKind::Saturating { k } => format!("saturating(k={k})"),
            RateKind::Sine { k } => format!("sine(k={k})"),
            RateKind::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceProfile {
    /// `A·exp(-((x-c)/w)²)`
    Gaussian { amplitude: f64, width: f64, center: f64 },
    /// Real even field whose spectrum is a `sin²` bump on `p_lo < |p| < p_hi`,
    /// scaled to peak value `amplitude`.
    Band { amplitude: f64, p_lo: f64, p_hi: f64 },
    Tabulated {
        #[serde(skip)]
        samples: Vec<f64>,
    },
}

impl SourceProfile {
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            SourceProfile::Gaussian { amplitude, width, center } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::param(format!("source width must be positive, got {width}")));
                }
                Ok(grid
                    .points()
                    .iter()
                    .map(|x| {
                        let s = (x - center) / width;
                        amplitude * (-s * s).exp()
                    })
                    .collect())
            }
            SourceProfile::Band { amplitude, p_lo, p_hi } => {
                let p_max = grid.dp() * (grid.n_points() / 2) as f64;
                if !(*p_lo >= 0.0 && p_hi > p_lo && *p_hi < p_max) {
                    return Err(Error::param(format!(
                        "band source needs 0 <= p_lo < p_hi < {p_max}, got [{p_lo}, {p_hi}]"
                    )));
                }
                let coeffs: Vec<Complex> = grid
                    .frequencies()
                    .into_iter()
                    .map(|p| {
                        let a = p.abs();
                        let w = if a > *p_lo && a < *p_hi {
                            (std::f64::consts::PI * (a - p_lo) / (p_hi - p_lo)).sin().powi(2)
                        } else {
                            0.0
                        };
                        Complex::new(w, 0.0)
                    })
                    .collect();
                let raw = inverse_transform(&SpectralField::from_coefficients(coeffs), grid)?;
                let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if peak == 0.0 {
                    return Err(Error::param("band source contains no grid modes"));
                }
                Ok(raw.into_iter().map(|v| amplitude * v / peak).collect())
            }
            SourceProfile::Tabulated { samples } => {
                grid.check(samples.len())?;
                if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("source sample {j} is not finite")));
                }
                Ok(samples.clone())
            }
        }
    }
}

/// A rate function bound to a grid with its declared constants.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    kind: RateKind,
    source: Option<SourceProfile>,
    grid: Grid,
    points: Vec<f64>,
    source_samples: Vec<f64>,
    h: Vec<f64>,
    h_l2: f64,
    k: f64,
    l: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearitySummary {
    pub rate: String,
    pub source: Option<SourceProfile>,
    pub declared_k: f64,
    pub declared_l: f64,
    pub h_l2: f64,
}

/// A sampled point where `|F(u₁,x) − F(u₂,x)|/|u₁ − u₂|` is largest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzWitness {
    pub u1: f64,
    pub u2: f64,
    pub x: f64,
    pub quotient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthWitness {
    pub u: f64,
    pub x: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub passed: bool,
    pub samples: usize,
    /// Largest `|F| − (k|u| + h)` seen; negative when every sample passes.
    pub worst_excess: f64,
    pub witness: Option<GrowthWitness>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct URange {
    pub lo: f64,
    pub hi: f64,
}

impl URange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::param(format!("u range [{lo}, {hi}] is degenerate")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl Default for URange {
    fn default() -> Self {
        Self { lo: -10.0, hi: 10.0 }
    }
}

pub const DEFAULT_SWEEP_SAMPLES: usize = 10_000;

/// Van der Corput radical inverse of `i` in `base`.
pub(crate) fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

impl NonlinearitySpec {
    /// Uses the closed-form constants of built-ins unless `declared` overrides
    /// them; custom evaluators must declare `(k, l)`.
    pub fn new(
        kind: RateKind,
        source: Option<SourceProfile>,
        grid: &Grid,
        declared: Option<(f64, f64)>,
    ) -> Result<Self> {
        let (k, l) = match (declared, kind.natural_constants()) {
            (Some(d), _) => d,
            (None, Some(n)) => n,
            (None, None) => {
                return Err(Error::param(format!(
                    "{} needs declared growth and Lipschitz constants",
                    kind.describe()
                )))
            }
        };
        if !(k.is_finite() && k >= 0.0 && l.is_finite() && l >= 0.0) {
            return Err(Error::param(format!(
                "declared constants must be finite and nonnegative, got k={k}, l={l}"
            )));
        }
        let source_samples = match &source {
            Some(s) => s.sample(grid)?,
            None => vec![0.0; grid.n_points()],
        };
        let h: Vec<f64> = source_samples.iter().map(|v| v.abs()).collect();
        let h_l2 = l2_norm(&h, grid)?;
        Ok(Self {
            kind,
            source,
            grid: grid.clone(),
            points: grid.points(),
            source_samples,
            h,
            h_l2,
            k,
            l,
        })
    }

    pub fn linear(c: f64, grid: &Grid) -> Result<Self> {
        Self::new(RateKind::Linear { c }, None, grid, None)
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    pub fn source(&self) -> Option<&SourceProfile> {
        self.source.as_ref()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn growth_constant(&self) -> f64 {
        self.k
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.l
    }

    /// `h(x_j)` on the grid.
    pub fn offset(&self) -> &[f64] {
        &self.h
    }

    pub fn offset_l2(&self) -> f64 {
        self.h_l2
    }

    /// The coefficient `c` when the rate is exactly `c·u` with no source.
    pub fn linear_coefficient(&self) -> Option<f64> {
        match (&self.kind, &self.source) {
            (RateKind::Linear { c }, None) => Some(*c),
            _ => None,
        }
    }

    /// `F(u, x_j)`.
    #[inline]
    pub fn rate(&self, u: f64, j: usize) -> f64 {
        self.kind.value(u, self.points[j]) + self.source_samples[j]
    }

    /// Pointwise `F(u(x_j), x_j)` into `out`; reports the first non-finite value.
    pub(crate) fn evaluate_into(&self, field: &[f64], out: &mut [f64]) -> Result<()> {
        for (j, (o, &u)) in out.iter_mut().zip(field).enumerate() {
            let v = self.rate(u, j);
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "F(u, x) = {v} at x_{j} = {} (u = {u})",
                    self.points[j]
                )));
            }
            *o = v;
        }
        Ok(())
    }

    /// `F(0, x_j)`.
    pub fn baseline(&self) -> Vec<f64> {
        (0..self.points.len()).map(|j| self.rate(0.0, j)).collect()
    }

    pub fn baseline_spectrum(&self) -> Result<SpectralField> {
        forward_transform(&self.baseline(), &self.grid)
    }

    pub fn summary(&self) -> NonlinearitySummary {
        NonlinearitySummary {
            rate: self.kind.describe(),
            source: self.source.clone(),
            declared_k: self.k,
            declared_l: self.l,
            h_l2: self.h_l2,
        }
    }

    /// Samples difference quotients on a deterministic low-discrepancy sweep.
    /// `u₁` is stratified over the range, the offset `u₂ − u₁` is log-spread over
    /// `[10⁻³, 1]` of the range width, and `x` runs over grid points.
    pub fn sweep_lipschitz(&self, range: URange, samples: usize) -> Result<LipschitzWitness> {
        if samples < 1000 {
            return Err(Error::param(format!(
                "Lipschitz sweep needs at least 1000 samples, got {samples}"
            )));
        }
        let n = self.points.len();
        let width = range.width();
        let mut best = LipschitzWitness { u1: range.lo, u2: range.hi, x: self.points[0], quotient: 0.0 };
        for i in 1..=samples {
            let u1 = range.lo + width * radical_inverse(i, 2);
            let delta = width * 10f64.powf(-3.0 * radical_inverse(i, 3));
            let mut u2 = if i % 2 == 0 { u1 + delta } else { u1 - delta };
            if u2 > range.hi || u2 < range.lo {
                u2 = if i % 2 == 0 { u1 - delta } else { u1 + delta };
            }
            if u2 > range.hi || u2 < range.lo || u2 == u1 {
                continue;
            }
            let j = ((radical_inverse(i, 5) * n as f64) as usize).min(n - 1);
            let q = (self.rate(u1, j) - self.rate(u2, j)).abs() / (u1 - u2).abs();
            if !q.is_finite() {
                return Err(Error::Data(format!("non-finite difference quotient at u = {u1}, {u2}")));
            }
            if q > best.quotient {
                best = LipschitzWitness { u1, u2, x: self.points[j], quotient: q };
            }
        }
        Ok(best)
    }

    pub fn estimate_lipschitz(&self, range: URange, samples: usize) -> Result<f64> {
        estimate_lipschitz(self, range, samples)
    }

    pub fn verify_growth(&self, range: URange, samples: usize) -> GrowthReport {
        verify_growth(self, range, samples)
    }
}

pub fn evaluate(spec: &NonlinearitySpec, field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    spec.grid.check_same(grid)?;
    grid.check(field.len())?;
    let mut out = vec![0.0; field.len()];
    spec.evaluate_into(field, &mut out)?;
    Ok(out)
}

/// Largest sampled difference quotient; errors with the witness if it exceeds
/// the declared Lipschitz constant.
pub fn estimate_lipschitz(spec: &NonlinearitySpec, range: URange, samples: usize) -> Result<f64> {
    let w = spec.sweep_lipschitz(range, samples)?;
    if w.quotient > spec.l * (1.0 + ROUNDING_SLACK) + f64::MIN_POSITIVE {
        return Err(Error::AssumptionViolation(format!(
            "Lipschitz bound l = {} exceeded: |F({}, {}) - F({}, {})| / |Δu| = {}",
            spec.l, w.u1, w.x, w.u2, w.x, w.quotient
        )));
    }
    Ok(w.quotient)
}

pub fn verify_growth(spec: &NonlinearitySpec, range: URange, samples: usize) -> GrowthReport {
    let n = spec.points.len();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut witness = None;
    let mut passed = true;
    for i in 1..=samples {
        let u = range.lo + range.width() * radical_inverse(i, 2);
        let j = ((radical_inverse(i, 3) * n as f64) as usize).min(n - 1);
        let value = spec.rate(u, j).abs();
        let bound = spec.k * u.abs() + spec.h[j];
        let excess = value - bound;
        if excess > worst_excess {
            worst_excess = excess;
        }
        let fails = !value.is_finite() || excess > ROUNDING_SLACK * bound + f64::MIN_POSITIVE;
        if fails && passed {
            passed = false;
            witness = Some(GrowthWitness { u, x: spec.points[j], value, bound });
        }
    }
    GrowthReport { passed, samples, worst_excess, witness }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(8.0, 64).unwrap()
    }

    #[test]
    fn linear_and_sine_evaluation() {
        let g = grid();
        let lin = NonlinearitySpec::linear(0.1, &g).unwrap();
        let out = evaluate(&lin, &vec![2.0; 64], &g).unwrap();
        assert!(out.iter().all(|v| (v - 0.2).abs() < 1e-16));
        let sine = NonlinearitySpec::new(RateKind::Sine { k: 0.3 }, None, &g, None).unwrap();
        let out = evaluate(&sine, &vec![std::f64::consts::FRAC_PI_2; 64], &g).unwrap();
        assert!(out.iter().all(|v| (v - 0.3).abs() < 1e-16));
    }

    #[test]
    fn nan_is_reported_with_location() {
        let g = grid();
        let f: RateFn = Arc::new(|u, _| if u > 1.0 { f64::NAN } else { u });
        let spec = NonlinearitySpec::new(
            RateKind::Custom { name: "nan".into(), f },
            None,
            &g,
            Some((1.0, 1.0)),
        )
        .unwrap();
        let mut field = vec![0.0; 64];
        field[5] = 2.0;
        let err = evaluate(&spec, &field, &g).unwrap_err();
        assert!(err.to_string().contains("x_5"), "{err}");
    }

    #[test]
    fn custom_rates_need_declared_constants() {
        let f: RateFn = Arc::new(|u, _| u);
        assert!(NonlinearitySpec::new(RateKind::Custom { name: "id".into(), f }, None, &grid(), None).is_err());
    }

    #[test]
    fn lipschitz_estimates() {
        let g = grid();
        let r = URange::default();
        let sine = NonlinearitySpec::new(RateKind::Sine { k: 0.3 }, None, &g, None).unwrap();
        let est = estimate_lipschitz(&sine, r, DEFAULT_SWEEP_SAMPLES).unwrap();
        assert!((0.299..=0.300).contains(&est), "{est}");

        let lin = NonlinearitySpec::linear(-0.7, &g).unwrap();
        let est = estimate_lipschitz(&lin, r, DEFAULT_SWEEP_SAMPLES).unwrap();
        assert!((est - 0.7).abs() < 1e-12, "{est}");

        let sat = NonlinearitySpec::new(RateKind::Saturating { k: 0.2 }, None, &g, None).unwrap();
        let est = estimate_lipschitz(&sat, r, DEFAULT_SWEEP_SAMPLES).unwrap();
        assert!((0.199..=0.200).contains(&est), "{est}");

        assert!(estimate_lipschitz(&sat, r, 10).is_err());
    }

    #[test]
    fn understated_lipschitz_constant_is_caught() {
        let g = grid();
        let spec = NonlinearitySpec::new(RateKind::Sine { k: 0.3 }, None, &g, Some((0.3, 0.2))).unwrap();
        let err = estimate_lipschitz(&spec, URange::default(), DEFAULT_SWEEP_SAMPLES).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation(_)));
    }

    #[test]
    fn growth_checks() {
        let g = grid();
        let r = URange::default();
        let sine = NonlinearitySpec::new(RateKind::Sine { k: 0.3 }, None, &g, None).unwrap();
        assert!(verify_growth(&sine, r, DEFAULT_SWEEP_SAMPLES).passed);

        let with_source = NonlinearitySpec::new(
            RateKind::Linear { c: -0.4 },
            Some(SourceProfile::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0 }),
            &g,
            None,
        )
        .unwrap();
        let report = verify_growth(&with_source, r, DEFAULT_SWEEP_SAMPLES);
        assert!(report.passed, "{report:?}");

        let f: RateFn = Arc::new(|u, _| u * u);
        let quad = NonlinearitySpec::new(
            RateKind::Custom { name: "square".into(), f },
            Some(SourceProfile::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0 }),
            &g,
            Some((1.0, 1.0)),
        )
        .unwrap();
        let report = verify_growth(&quad, r, DEFAULT_SWEEP_SAMPLES);
        assert!(!report.passed);
        let w = report.witness.unwrap();
        assert!(w.u.abs() > 1.0 && w.value > w.bound);
    }

    #[test]
    fn evaluation_is_local() {
        let g = grid();
        let spec = NonlinearitySpec::new(
            RateKind::Saturating { k: 0.5 },
            Some(SourceProfile::Gaussian { amplitude: 0.3, width: 2.0, center: 1.0 }),
            &g,
            None,
        )
        .unwrap();
        let base: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
        let mut bumped = base.clone();
        bumped[17] += 0.5;
        let a = evaluate(&spec, &base, &g).unwrap();
        let b = evaluate(&spec, &bumped, &g).unwrap();
        for j in 0..64 {
            assert_eq!(a[j] == b[j], j != 17);
        }
    }

    #[test]
    fn band_source_is_real_and_band_limited() {
        let g = Grid::new(8.0 * std::f64::consts::PI, 256).unwrap();
        let spec = NonlinearitySpec::new(
            RateKind::Sine { k: 0.1 },
            Some(SourceProfile::Band { amplitude: 0.2, p_lo: 2.0, p_hi: 4.0 }),
            &g,
            None,
        )
        .unwrap();
        let s = spec.baseline_spectrum().unwrap();
        assert!(s.hermitian_defect() < 1e-12 * s.max_abs().max(1.0));
        for (i, c) in s.coefficients().iter().enumerate() {
            let p = g.frequency(i).abs();
            if p <= 2.0 || p >= 4.0 {
                assert!(c.norm() < 1e-12 * s.max_abs());
            }
        }
        let peak = spec.baseline().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.2).abs() < 1e-15);
    }

    #[test]
    fn halton_points_are_in_unit_interval() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }
}
