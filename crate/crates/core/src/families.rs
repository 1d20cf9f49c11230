//! Deterministic smooth test functions: Gaussians in `u = ln|xi|` with a
//! slow phase, plus their tensor products.

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{sample, GridFunction, LogGrid};
use crate::product::TensorGridFunction;

/// Parameters of one family member. The negative branch (full line only)
/// uses a shifted centre and a smaller amplitude so members are not even.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianU {
    pub center: f64,
    pub width: f64,
    pub phase: f64,
    pub neg_amplitude: f64,
}

impl GaussianU {
    pub fn eval(&self, xi: f64) -> Complex64 {
        let u = xi.abs().ln();
        let (c, a) = if xi > 0.0 {
            (self.center, 1.0)
        } else {
            (self.center + 0.1, self.neg_amplitude)
        };
        let env = a * (-(u - c).powi(2) / (2.0 * self.width * self.width)).exp();
        Complex64::from_polar(env, self.phase * u)
    }

    pub fn sample(&self, grid: &LogGrid) -> Result<GridFunction> {
        sample(grid, |xi| self.eval(xi))
    }
}

/// Member `k` of the standard family; centres in `[-1.2, 0.6]`, widths in
/// `[0.45, 0.72]`.
pub fn member(k: usize) -> GaussianU {
    let k = k % 10;
    GaussianU {
        center: -1.2 + 0.2 * k as f64,
        width: 0.45 + 0.03 * k as f64,
        phase: 0.3 * (k % 3) as f64,
        neg_amplitude: 0.5 + 0.05 * k as f64,
    }
}

/// The ten standard members sampled on `grid`.
pub fn smooth_family(grid: &LogGrid) -> Result<Vec<GridFunction>> {
    (0..10).map(|k| member(k).sample(grid)).collect()
}

/// Member `k` of the tensor family: a sum of two products of standard
/// members, so members are not pure tensors.
pub fn tensor_member(k: usize, grid1: &LogGrid, grid2: &LogGrid) -> Result<TensorGridFunction> {
    let a = TensorGridFunction::outer(&member(k).sample(grid1)?, &member(k + 5).sample(grid2)?);
    let b = TensorGridFunction::outer(&member(k + 1).sample(grid1)?, &member(k + 7).sample(grid2)?);
    a.add(&b.scale(Complex64::new(0.0, 0.3)))
}
