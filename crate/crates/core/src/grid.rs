//! Logarithmic grids on the frequency axis and sampled model-space functions.
//!
//! Samples live at `xi = sign * exp(u)` with `u` uniformly spaced, so the
//! invariant measure `|xi|^{-1} d xi` becomes `du` and the dilation field
//! `xi d/d xi` becomes the constant-coefficient derivative `d/du`.
//!
//! Storage is branch-major: on a [`Domain::FullLine`] grid the negative
//! branch comes first, each branch in increasing `u`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Both half-lines, `xi < 0` and `xi > 0`.
    FullLine,
    /// `xi > 0` only.
    PositiveHalf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    domain: Domain,
    u_min: f64,
    u_max: f64,
    n_per_branch: usize,
    h: f64,
}

impl LogGrid {
    pub fn new(domain: Domain, u_min: f64, u_max: f64, n_per_branch: usize) -> Result<Self> {
        if !u_min.is_finite() || !u_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "non-finite bounds u_min = {u_min}, u_max = {u_max}"
            )));
        }
        if u_min >= u_max {
            return Err(Error::InvalidGrid(format!(
                "u_min = {u_min} must be less than u_max = {u_max}"
            )));
        }
        if n_per_branch < 2 {
            return Err(Error::InvalidGrid(format!(
                "n_per_branch = {n_per_branch} must be at least 2"
            )));
        }
        let h = (u_max - u_min) / (n_per_branch - 1) as f64;
        Ok(Self {
            domain,
            u_min,
            u_max,
            n_per_branch,
            h,
        })
    }

    /// The default grid: `u` in `[-9, 9]` with 4097 points per branch.
    pub fn desk(domain: Domain) -> Self {
        Self::new(domain, -9.0, 9.0, 4097).expect("valid default grid")
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn n_per_branch(&self) -> usize {
        self.n_per_branch
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Signs of the branches in storage order.
    pub fn branch_signs(&self) -> &'static [f64] {
        match self.domain {
            Domain::FullLine => &[-1.0, 1.0],
            Domain::PositiveHalf => &[1.0],
        }
    }

    pub fn n_branches(&self) -> usize {
        self.branch_signs().len()
    }

    pub fn len(&self) -> usize {
        self.n_branches() * self.n_per_branch
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Log-coordinate of node `j` within a branch.
    #[inline]
    pub fn u(&self, j: usize) -> f64 {
        if j + 1 == self.n_per_branch {
            self.u_max
        } else {
            self.u_min + j as f64 * self.h
        }
    }

    /// Abscissa of the flat storage index `idx`.
    #[inline]
    pub fn xi(&self, idx: usize) -> f64 {
        let (b, j) = (idx / self.n_per_branch, idx % self.n_per_branch);
        self.branch_signs()[b] * self.u(j).exp()
    }

    pub fn abscissas(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.xi(i)).collect()
    }

    /// Branch index holding abscissas with the sign of `xi`, if any.
    pub fn branch_of(&self, xi: f64) -> Option<usize> {
        if xi == 0.0 || !xi.is_finite() {
            return None;
        }
        match (self.domain, xi > 0.0) {
            (Domain::FullLine, false) => Some(0),
            (Domain::FullLine, true) => Some(1),
            (Domain::PositiveHalf, true) => Some(0),
            (Domain::PositiveHalf, false) => None,
        }
    }

    /// Whether `xi` lies inside the covered interval of its branch.
    pub fn covers(&self, xi: f64) -> bool {
        if self.branch_of(xi).is_none() {
            return false;
        }
        let u = xi.abs().ln();
        let slack = 1e-12 * self.h;
        u >= self.u_min - slack && u <= self.u_max + slack
    }

    /// Smallest and largest covered `|xi|`.
    pub fn abs_range(&self) -> (f64, f64) {
        (self.u_min.exp(), self.u_max.exp())
    }

    /// Same layout check used before combining two grid functions.
    pub fn same_as(&self, other: &LogGrid) -> bool {
        self == other
    }
}

/// `build_grid` in functional form.
pub fn build_grid(domain: Domain, u_min: f64, u_max: f64, n_per_branch: usize) -> Result<LogGrid> {
    LogGrid::new(domain, u_min, u_max, n_per_branch)
}

/// Complex samples of a model-space function on a [`LogGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: LogGrid,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: LogGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(i) = samples.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFiniteSample {
                xi: grid.xi(i),
                value: samples[i].to_string(),
            });
        }
        Ok(Self { grid, samples })
    }

    /// Build without the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_parts(grid: LogGrid, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    pub fn zeros(grid: LogGrid) -> Self {
        Self::from_parts(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Samples of one branch.
    pub fn branch(&self, b: usize) -> &[Complex64] {
        let n = self.grid.n_per_branch;
        &self.samples[b * n..(b + 1) * n]
    }

    /// Multiply pointwise by `m(xi)`.
    pub fn map_with_xi<F>(&self, m: F) -> Self
    where
        F: Fn(f64, Complex64) -> Complex64,
    {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &z)| m(self.grid.xi(i), z))
            .collect();
        Self::from_parts(self.grid, samples)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_parts(self.grid, self.samples.iter().map(|&z| z * c).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.is_finite())
    }

    fn zip_with<F>(&self, other: &Self, op: F) -> Self
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        assert!(
            self.grid.same_as(&other.grid),
            "grid functions live on different grids"
        );
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Self::from_parts(self.grid, samples)
    }

    /// Pointwise product.
    pub fn mul_pointwise(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: Self) -> GridFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: Self) -> GridFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul<Complex64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: Complex64) -> GridFunction {
        self.scale(rhs)
    }
}

/// Sample a pointwise expression at every abscissa of `grid`.
pub fn sample<F>(grid: &LogGrid, expr: F) -> Result<GridFunction>
where
    F: Fn(f64) -> Complex64,
{
    let mut samples = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let xi = grid.xi(i);
        let v = expr(xi);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample {
                xi,
                value: v.to_string(),
            });
        }
        samples.push(v);
    }
    Ok(GridFunction::from_parts(*grid, samples))
}

/// Position of `xi` on the grid: branch, cell index and offset in cells.
struct Locus {
    branch: usize,
    /// Fractional node coordinate `(u - u_min) / h`.
    t: f64,
}

fn locate(grid: &LogGrid, xi: f64) -> Result<Locus> {
    let branch = grid.branch_of(xi).ok_or(Error::OutOfRange { xi })?;
    if !grid.covers(xi) {
        return Err(Error::OutOfRange { xi });
    }
    let u = xi.abs().ln();
    let t = ((u - grid.u_min) / grid.h).clamp(0.0, (grid.n_per_branch - 1) as f64);
    Ok(Locus { branch, t })
}

/// Cubic Lagrange weights (value and d/dt) at offset `x` for nodes 0,1,2,3.
fn cubic_weights(x: f64) -> ([f64; 4], [f64; 4]) {
    let (a, b, c, d) = (x, x - 1.0, x - 2.0, x - 3.0);
    let w = [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ];
    let dw = [
        -(c * d + b * d + b * c) / 6.0,
        (c * d + a * d + a * c) / 2.0,
        -(b * d + a * d + a * b) / 2.0,
        (b * c + a * c + a * b) / 6.0,
    ];
    (w, dw)
}

/// First node of the four-point stencil for fractional position `t`,
/// shifted by `shift` cells and clamped to the branch.
fn stencil_start(t: f64, n: usize, shift: isize) -> usize {
    let k = t.floor() as isize;
    let start = k - 1 + shift;
    start.clamp(0, n as isize - 4) as usize
}

fn node_if_exact(t: f64) -> Option<usize> {
    let k = t.round();
    if (t - k).abs() < 1e-9 {
        Some(k as usize)
    } else {
        None
    }
}

fn cubic_eval(branch: &[Complex64], t: f64, start: usize) -> (Complex64, Complex64) {
    let (w, dw) = cubic_weights(t - start as f64);
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        v += branch[start + i] * w[i];
        dv += branch[start + i] * dw[i];
    }
    (v, dv)
}

/// Local cubic interpolation in `u`, exact at nodes.
///
/// For `u` strictly between nodes `k` and `k+1` the stencil is `k-1..=k+2`
/// (clamped at the branch ends).
pub fn interpolate_at(f: &GridFunction, xi: f64) -> Result<Complex64> {
    let grid = f.grid();
    if grid.n_per_branch < 4 {
        return Err(Error::GridTooSmall {
            points: grid.n_per_branch,
            needed: 4,
        });
    }
    let loc = locate(grid, xi)?;
    let branch = f.branch(loc.branch);
    if let Some(j) = node_if_exact(loc.t) {
        return Ok(branch[j]);
    }
    let start = stencil_start(loc.t, grid.n_per_branch, 0);
    Ok(cubic_eval(branch, loc.t, start).0)
}

/// Interpolated value together with an a-posteriori error estimate, the
/// largest deviation of the one-cell-shifted cubic stencils from the
/// centred one.
pub fn interpolate_with_error(f: &GridFunction, xi: f64) -> Result<(Complex64, f64)> {
    let grid = f.grid();
    let value = interpolate_at(f, xi)?;
    let loc = locate(grid, xi)?;
    if node_if_exact(loc.t).is_some() {
        return Ok((value, 0.0));
    }
    let branch = f.branch(loc.branch);
    let n = grid.n_per_branch;
    let centre = stencil_start(loc.t, n, 0);
    let mut err: f64 = 0.0;
    for shift in [-1, 1] {
        let s = stencil_start(loc.t, n, shift);
        if s != centre {
            err = err.max((cubic_eval(branch, loc.t, s).0 - value).norm());
        }
    }
    Ok((value, err))
}

/// d f / d xi at `xi`, from the derivative of the local cubic in `u`
/// (five-point central difference when `xi` is a node).
pub fn derivative_at(f: &GridFunction, xi: f64) -> Result<Complex64> {
    let grid = f.grid();
    let n = grid.n_per_branch;
    if n < 5 {
        return Err(Error::GridTooSmall {
            points: n,
            needed: 5,
        });
    }
    let loc = locate(grid, xi)?;
    let branch = f.branch(loc.branch);
    let du = if let Some(j) = node_if_exact(loc.t) {
        crate::operators::stencil::d1_at(branch, j, grid.h)
    } else {
        let start = stencil_start(loc.t, n, 0);
        cubic_eval(branch, loc.t, start).1 / grid.h
    };
    Ok(du / xi)
}

/// Trapezoid-rule inner product in `L^2(|xi|^{-1} d xi)` (normalisation 1).
pub fn l2nu_inner(f: &GridFunction, g: &GridFunction) -> Complex64 {
    assert!(
        f.grid.same_as(&g.grid),
        "grid functions live on different grids"
    );
    let grid = f.grid;
    let n = grid.n_per_branch;
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..grid.n_branches() {
        let (fb, gb) = (f.branch(b), g.branch(b));
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            s += fb[j] * gb[j].conj() * w;
        }
        acc += s;
    }
    acc * grid.h
}

/// `sqrt(sum over branches of integral |f|^2 du)` by the trapezoid rule.
pub fn l2nu_norm(f: &GridFunction) -> f64 {
    l2nu_norm_samples(&f.grid, &f.samples)
}

pub(crate) fn l2nu_norm_samples(grid: &LogGrid, samples: &[Complex64]) -> f64 {
    let n = grid.n_per_branch;
    let mut acc = 0.0;
    for b in 0..grid.n_branches() {
        let fb = &samples[b * n..(b + 1) * n];
        let mut s = 0.0;
        for (j, z) in fb.iter().enumerate() {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            s += z.norm_sqr() * w;
        }
        acc += s;
    }
    (acc * grid.h).sqrt()
}
