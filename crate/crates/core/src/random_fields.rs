//! Seeded smooth random fields for verification sweeps. Each field is a short
//! sum of Gaussian bumps, so its derivatives are known in closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::duhamel::{SpaceTimeField, TimeWindow};
use crate::spectral::Grid;

const BUMPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bump {
    mean: f64,
    swing: f64,
    omega: f64,
    phase: f64,
    center: f64,
    width: f64,
}

impl Bump {
    fn shape(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        (-0.5 * s * s).exp()
    }

    fn shape_xx(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        self.shape(x) * (s * s - 1.0) / (self.width * self.width)
    }

    fn amplitude(&self, t: f64) -> f64 {
        self.mean + self.swing * (self.omega * t + self.phase).sin()
    }

    fn amplitude_t(&self, t: f64) -> f64 {
        self.swing * self.omega * (self.omega * t + self.phase).cos()
    }
}

/// `v(x,t) = Σ (a_j + b_j sin(ω_j t + φ_j))·exp(−(x−c_j)²/(2w_j²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothField {
    bumps: Vec<Bump>,
}

impl SmoothField {
    /// Centers in `[−L/4, L/4]`, widths in `[0.5, 2]`, frequencies in `[0.5, 3]`,
    /// amplitudes in `[−amplitude, amplitude]`.
    pub fn sample(rng: &mut impl Rng, grid: &Grid, amplitude: f64) -> Self {
        let quarter = 0.25 * grid.half_width();
        let bumps = (0..BUMPS)
            .map(|_| Bump {
                mean: amplitude * rng.gen_range(-1.0..=1.0),
                swing: amplitude * rng.gen_range(-1.0..=1.0),
                omega: rng.gen_range(0.5..=3.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                center: rng.gen_range(-quarter..=quarter),
                width: rng.gen_range(0.5..=2.0),
            })
            .collect();
        Self { bumps }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.bumps.iter().map(|b| b.amplitude(t) * b.shape(x)).sum()
    }

    pub fn time_derivative(&self, x: f64, t: f64) -> f64 {
        self.bumps.iter().map(|b| b.amplitude_t(t) * b.shape(x)).sum()
    }

    pub fn second_space_derivative(&self, x: f64, t: f64) -> f64 {
        self.bumps.iter().map(|b| b.amplitude(t) * b.shape_xx(x)).sum()
    }

    pub fn field(&self, grid: &Grid, window: &TimeWindow) -> SpaceTimeField {
        SpaceTimeField::from_fn(grid, window, |x, t| self.value(x, t))
    }

    pub fn derivative_field(&self, grid: &Grid, window: &TimeWindow) -> SpaceTimeField {
        SpaceTimeField::from_fn(grid, window, |x, t| self.time_derivative(x, t))
    }

    /// Samples at `t`, together with `∂²/∂x²` at `t`.
    pub fn snapshot(&self, grid: &Grid, t: f64) -> (Vec<f64>, Vec<f64>) {
        grid.points()
            .into_iter()
            .map(|x| (self.value(x, t), self.second_space_derivative(x, t)))
            .unzip()
    }
}

/// Deterministic stream of smooth fields keyed by a seed.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    rng: ChaCha8Rng,
    amplitude: f64,
}

impl FieldSampler {
    pub fn new(seed: u64, amplitude: f64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), amplitude }
    }

    pub fn next_field(&mut self, grid: &Grid) -> SmoothField {
        SmoothField::sample(&mut self.rng, grid, self.amplitude)
    }

    /// `(v, ∂v/∂t)` on the window.
    pub fn next_pair(&mut self, grid: &Grid, window: &TimeWindow) -> (SpaceTimeField, SpaceTimeField) {
        let f = self.next_field(grid);
        (f.field(grid, window), f.derivative_field(grid, window))
    }

    /// Independent uniform samples in `[−amplitude, amplitude]`.
    pub fn next_white_noise(&mut self, grid: &Grid) -> Vec<f64> {
        (0..grid.n_points()).map(|_| self.amplitude * self.rng.gen_range(-1.0..=1.0)).collect()
    }
}
