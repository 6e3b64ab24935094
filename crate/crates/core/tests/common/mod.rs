#![allow(dead_code)]

use std::f64::consts::PI;

use dkpp_core::kernel::build_kernel;
use dkpp_core::{Grid, KernelKind, NonlinearitySpec, ProblemSpec, RateKind, SourceProfile};

pub fn grid(n: usize) -> Grid {
    Grid::new(8.0 * PI, n).unwrap()
}

pub fn gaussian_u0(grid: &Grid) -> Vec<f64> {
    grid.points().iter().map(|x| (-x * x).exp()).collect()
}

pub fn gaussian_kernel(grid: &Grid, sigma: f64) -> dkpp_core::KernelSpec {
    build_kernel(KernelKind::Gaussian { sigma }, 1.0, grid).unwrap()
}

pub fn saturating(grid: &Grid, k: f64) -> NonlinearitySpec {
    NonlinearitySpec::new(RateKind::Saturating { k }, None, grid, None).unwrap()
}

pub fn saturating_with_source(grid: &Grid, k: f64) -> NonlinearitySpec {
    let source = SourceProfile::Gaussian { amplitude: 0.2, width: 1.5, center: 0.0 };
    NonlinearitySpec::new(RateKind::Saturating { k }, Some(source), grid, None).unwrap()
}

pub fn problem(alpha: f64, a: f64, b: f64, sigma: f64, f: NonlinearitySpec) -> ProblemSpec {
    let g = f.grid().clone();
    ProblemSpec::new(alpha, a, b, gaussian_kernel(&g, sigma), f, gaussian_u0(&g)).unwrap()
}

/// L² distance of two samples on the grid.
pub fn l2_diff(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    (grid.dx() * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sqrt()
}
