//! Problem setups shared by the benchmarks.

use dkpp_core::kernel::build_kernel;
use dkpp_core::{Grid, KernelKind, NonlinearitySpec, ProblemSpec, RateKind, Result};

/// Gaussian kernel, saturating rate with `k = l`, Gaussian initial bump on `[-8π, 8π)`.
pub fn reference_problem(n: usize, alpha: f64, sigma: f64, l: f64) -> Result<ProblemSpec> {
    let grid = Grid::new(8.0 * std::f64::consts::PI, n)?;
    let kernel = build_kernel(KernelKind::Gaussian { sigma }, 1.0, &grid)?;
    let f = NonlinearitySpec::new(RateKind::Saturating { k: l }, None, &grid, None)?;
    let u0 = grid.points().iter().map(|x| (-x * x).exp()).collect();
    ProblemSpec::new(alpha, 0.0, 0.0, kernel, f, u0)
}
