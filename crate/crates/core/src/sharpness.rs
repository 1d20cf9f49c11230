//! Lower-bound witnesses for the twisted and map equations.
//!
//! The twisted witness is `g(xi) = q(xi) (xi^{nu+1} - 1)` with `q` a smooth
//! bump equal to one on `[1, 1 + 1/|nu|]`. Its solution at `lambda = 1` has
//! `U`-norms growing like `|nu|^{2s+1/2}` while `g` only grows like
//! `|nu|^s`; the experiment below measures both exponents.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{sample, GridFunction, LogGrid};
use crate::operators::{apply_field, sobolev_norm, Basis, Family, Field, FieldTag, SobolevSpec};
use crate::record::ExperimentRecord;
use crate::repr::{ReprParams, Series};
use crate::solvers::{map_multiplier, solve_twisted, TwistParams};

/// Support and plateau of the bump `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpSpec {
    pub support: (f64, f64),
    pub plateau: (f64, f64),
}

impl Default for BumpSpec {
    fn default() -> Self {
        Self {
            support: (0.75, 4.0 / 3.0),
            plateau: (63.0 / 64.0, 1.26),
        }
    }
}

fn phi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth ramp `phi(t) / (phi(t) + phi(1 - t))`, 0 for `t <= 0` and 1 for
/// `t >= 1`.
pub fn ramp(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = phi(t);
    a / (a + phi(1.0 - t))
}

pub fn plateau_bump(xi: f64, spec: &BumpSpec) -> f64 {
    let (a, d) = spec.support;
    let (b, c) = spec.plateau;
    if xi <= a || xi >= d {
        0.0
    } else if xi < b {
        ramp((xi - a) / (b - a))
    } else if xi <= c {
        1.0
    } else {
        ramp((d - xi) / (d - c))
    }
}

fn check_witness_params(p: &ReprParams) -> Result<f64> {
    let nu_abs = p.nu_abs();
    if p.series != Series::Principal || nu_abs < 4.0 {
        return Err(Error::InvalidParameter(format!(
            "witness needs a principal series parameter with |nu| >= 4, got nu = {}",
            p.nu
        )));
    }
    Ok(nu_abs)
}

fn check_support(grid: &LogGrid, lo: f64, hi: f64) -> Result<()> {
    for xi in [lo, hi] {
        if !grid.covers(xi) {
            return Err(Error::OutOfRange { xi });
        }
    }
    Ok(())
}

/// `q(xi / lambda) ((xi / lambda)^{nu+1} - 1)`.
fn twisted_profile(xi: f64, lambda: f64, nu: Complex64, bump: &BumpSpec) -> Complex64 {
    let y = xi / lambda;
    let q = plateau_bump(y, bump);
    if q == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // ln y computed as a difference keeps y = 1 exact when xi = lambda.
    let t = xi.ln() - lambda.ln();
    cexpm1((nu + 1.0) * t) * q
}

pub fn witness_twisted(p: &ReprParams, grid: &LogGrid) -> Result<GridFunction> {
    witness_twisted_scaled(p, grid, 1.0)
}

pub fn witness_twisted_scaled(p: &ReprParams, grid: &LogGrid, lambda: f64) -> Result<GridFunction> {
    check_witness_params(p)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} must be positive"
        )));
    }
    let bump = BumpSpec::default();
    check_support(grid, bump.support.0 * lambda, bump.support.1 * lambda)?;
    let nu = p.nu;
    sample(grid, |xi| twisted_profile(xi, lambda, nu, &bump))
}

/// `e^z - 1` without cancellation for small `|z|`.
fn cexpm1(z: Complex64) -> Complex64 {
    let half = (0.5 * z.im).sin();
    Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * half * half,
        z.re.exp() * z.im.sin(),
    )
}

/// Map witness pair `(g, f)` with `(exp(-i xi L) - 1) f = g`.
///
/// With `y = L xi / 2 pi`, `f = q(y) (y^nu - 1) / (y - 1)`; the quotient is
/// evaluated as `expm1(nu t) / expm1(t)`, `t = ln y`, which tends to `nu` at
/// the removable point `y = 1`.
pub fn witness_map(p: &ReprParams, grid: &LogGrid, l: f64) -> Result<(GridFunction, GridFunction)> {
    check_witness_params(p)?;
    if !(l > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "map time L = {l} must be positive"
        )));
    }
    let bump = BumpSpec::default();
    let unit = std::f64::consts::TAU / l;
    check_support(grid, bump.support.0 * unit, bump.support.1 * unit)?;
    let nu = p.nu;
    let f = sample(grid, |xi| {
        let y = xi / unit;
        let q = plateau_bump(y, &bump);
        if q == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let t = xi.ln() - unit.ln();
        let quotient = if t == 0.0 {
            nu
        } else {
            cexpm1(nu * t) / t.exp_m1()
        };
        quotient * q
    })?;
    let g = f.map_with_xi(|xi, z| z * map_multiplier(xi, l));
    Ok((g, f))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn exponent_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} points given, at least 3 needed",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::DegenerateFit(format!(
            "point ({x}, {y}) is not positive"
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::DegenerateFit("x values are not distinct".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Minimum of `cos(nu_abs ln(1 + t (xi - 1)))` over `xi` in
/// `[1, 1 + 1/nu_abs]` and `t` in `[0, 1]`, on an `n_xi x n_t` mesh.
pub fn cos_bound_check(nu_abs: f64, n_xi: usize, n_t: usize) -> f64 {
    let node = |i: usize, n: usize| {
        if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    let mut min = f64::INFINITY;
    for i in 0..n_xi.max(1) {
        let xi = 1.0 + node(i, n_xi) / nu_abs;
        for k in 0..n_t.max(1) {
            let t = node(k, n_t);
            min = min.min((nu_abs * (t * (xi - 1.0)).ln_1p()).cos());
        }
    }
    min
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessScan {
    pub s: f64,
    pub sigma: f64,
    pub nu_list: Vec<f64>,
    pub lambda: f64,
}

impl SharpnessScan {
    pub fn new(s: f64, sigma: f64) -> Self {
        Self {
            s,
            sigma,
            nu_list: vec![8.0, 16.0, 32.0, 64.0, 128.0],
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "s = {} must be >= 0",
                self.s
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma < self.s + 0.5) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {} must lie in [0, s + 1/2)",
                self.sigma
            )));
        }
        if let Some(nu) = self.nu_list.iter().find(|&&nu| !(nu >= 4.0)) {
            return Err(Error::InvalidParameter(format!("|nu| = {nu} must be >= 4")));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} must be positive",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Per-`|nu|` norms and the fitted growth exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessReport {
    pub records: Vec<ExperimentRecord>,
    pub slope_f: f64,
    /// Slope of the `U`-norm of `f` restricted to `[lambda, lambda (1 + 1/|nu|)]`.
    pub slope_f_restricted: f64,
    pub slope_g: f64,
    pub slope_ratio: f64,
}

/// Local grid around the witness support with `h = 5e-4`.
pub fn sharpness_grid() -> LogGrid {
    LogGrid::new(crate::grid::Domain::PositiveHalf, -0.45, 0.45, 1801)
        .expect("static grid parameters are valid")
}

/// Hat `U`-only norm of order `s` with the quadrature restricted to nodes
/// with `|xi|` in `[lo, hi]`. Fractional orders interpolate geometrically.
pub fn restricted_u_norm(
    f: &GridFunction,
    s: f64,
    p: &ReprParams,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(s >= 0.0) || s > crate::operators::DEFAULT_MAX_ORDER as f64 {
        return Err(Error::InvalidParameter(format!(
            "order s = {s} out of range"
        )));
    }
    let grid = *f.grid();
    let hi_order = s.ceil() as usize;
    let mut powers = vec![0.0; hi_order + 1];
    let mut g = f.clone();
    for (j, slot) in powers.iter_mut().enumerate() {
        if j > 0 {
            g = apply_field(&g, FieldTag::new(Family::Hat, Field::U), p)?;
        }
        *slot = g
            .samples()
            .iter()
            .enumerate()
            .filter(|&(i, _)| (lo..=hi).contains(&grid.xi(i).abs()))
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * grid.h();
    }
    let at = |n: usize| {
        (0..=n)
            .map(|j| binomial(n, j) * powers[j])
            .sum::<f64>()
            .sqrt()
    };
    let lo_order = s.floor() as usize;
    let theta = s - lo_order as f64;
    if theta == 0.0 {
        return Ok(at(lo_order));
    }
    Ok(at(lo_order).powf(1.0 - theta) * at(hi_order).powf(theta))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Witness norms at one `|nu|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessNorms {
    /// `|f|_s` in the `U`-only hat norm.
    pub f: f64,
    /// `|g|_{s+sigma}` in the full hat norm.
    pub g: f64,
    /// `|f|_s` restricted to `[lambda, lambda (1 + 1/|nu|)]`.
    pub f_restricted: f64,
}

/// Norms of the twisted witness `g` and of the solution `f` at `lambda`.
pub fn witness_norms(
    nu_abs: f64,
    s: f64,
    sigma: f64,
    lambda: f64,
    grid: &LogGrid,
) -> Result<WitnessNorms> {
    let p = ReprParams::principal(nu_abs);
    let g = witness_twisted_scaled(&p, grid, lambda)?;
    let f = solve_twisted(&g, &TwistParams::new(lambda)?)?;
    Ok(WitnessNorms {
        f: sobolev_norm(&f, &SobolevSpec::new(s, Family::Hat, Basis::UOnly), &p)?,
        g: sobolev_norm(
            &g,
            &SobolevSpec::new(s + sigma, Family::Hat, Basis::FullUXV),
            &p,
        )?,
        f_restricted: restricted_u_norm(&f, s, &p, lambda, lambda * (1.0 + 1.0 / nu_abs))?,
    })
}

pub fn sharpness_experiment(scan: &SharpnessScan, grid: &LogGrid) -> Result<SharpnessReport> {
    scan.validate()?;
    let rows: Vec<(f64, WitnessNorms)> = scan
        .nu_list
        .par_iter()
        .map(|&nu| witness_norms(nu, scan.s, scan.sigma, scan.lambda, grid).map(|w| (nu, w)))
        .collect::<Result<_>>()?;
    let fit = |sel: &dyn Fn(&WitnessNorms) -> f64| {
        exponent_fit(&rows.iter().map(|(nu, w)| (*nu, sel(w))).collect::<Vec<_>>())
    };
    let slope_f = fit(&|w| w.f)?;
    let slope_f_restricted = fit(&|w| w.f_restricted)?;
    let slope_g = fit(&|w| w.g)?;
    let slope_ratio = fit(&|w| w.f / w.g)?;
    let records = rows
        .iter()
        .map(|(nu, w)| {
            ExperimentRecord {
                nu_abs: Some(*nu),
                lambda: Some(scan.lambda),
                s: Some(scan.s),
                sigma: Some(scan.sigma),
                ..Default::default()
            }
            .with_norms(w.f, w.g)
        })
        .collect();
    Ok(SharpnessReport {
        records,
        slope_f,
        slope_f_restricted,
        slope_g,
        slope_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, interpolate_at, l2nu_norm, Domain};

    #[test]
    fn bump_examples() {
        let spec = BumpSpec::default();
        assert_eq!(plateau_bump(1.1, &spec), 1.0);
        assert_eq!(plateau_bump(0.7, &spec), 0.0);
        let v = plateau_bump(0.9, &spec);
        assert!(v > 0.0 && v < 1.0);
        for t in [0.1, 0.3, 0.5, 0.77] {
            assert!((ramp(t) + ramp(1.0 - t) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bump_is_flat_at_support_edges() {
        // Every derivative of exp(-1/t) vanishes at t = 0.
        let spec = BumpSpec::default();
        let h = 1e-3;
        for edge in [spec.support.0, spec.support.1] {
            for k in 0..5 {
                let x = edge + (k as f64 - 2.0) * h;
                assert!(plateau_bump(x, &spec) < 1e-6);
            }
        }
    }

    #[test]
    fn twisted_witness_examples() {
        let grid = build_grid(Domain::PositiveHalf, -0.45, 0.45, 1801).unwrap();
        let p = ReprParams::principal(4.0);
        let g = witness_twisted(&p, &grid).unwrap();
        assert_eq!(interpolate_at(&g, 1.0).unwrap(), Complex64::new(0.0, 0.0));
        let at = twisted_profile(1.1, 1.0, p.nu, &BumpSpec::default());
        let t = 4.0 * 1.1f64.ln();
        let oracle = Complex64::new(1.1 * t.cos() - 1.0, 1.1 * t.sin());
        assert!((at - oracle).norm() < 1e-15, "{at}");
        assert!((at - Complex64::new(0.0210, 0.4093)).norm() < 1e-4);
        assert_eq!(
            twisted_profile(0.7, 1.0, p.nu, &BumpSpec::default()),
            Complex64::new(0.0, 0.0)
        );
        assert!(witness_twisted(&ReprParams::principal(3.0), &grid).is_err());
        assert!(witness_twisted(&ReprParams::from_real_nu(0.5), &grid).is_err());
    }

    #[test]
    fn scaled_witness_examples() {
        let grid = build_grid(Domain::PositiveHalf, -2.0, 2.0, 8001).unwrap();
        let p = ReprParams::principal(8.0);
        let base = witness_twisted(&p, &grid).unwrap();
        assert_eq!(witness_twisted_scaled(&p, &grid, 1.0).unwrap(), base);
        // ln 2 is not a multiple of h, so xi = 2 is interpolated.
        let g = witness_twisted_scaled(&p, &grid, 2.0).unwrap();
        assert!(twisted_profile(2.0, 2.0, p.nu, &BumpSpec::default()).norm() == 0.0);
        assert!(interpolate_at(&g, 2.0).unwrap().norm() < 1e-6);
        let a = l2nu_norm(&base);
        // The u-shift by ln 2 is not a whole number of nodes; the trapezoid
        // rule is still spectrally accurate for this smooth integrand.
        assert!((l2nu_norm(&g) - a).abs() <= 1e-10 * a);
    }

    #[test]
    fn map_witness_examples() {
        let grid = build_grid(Domain::PositiveHalf, -1.0, 3.0, 8001).unwrap();
        let p = ReprParams::principal(8.0);
        let l = 2.0;
        let (g, f) = witness_map(&p, &grid, l).unwrap();
        let unit = std::f64::consts::TAU / l;
        let scale = g.max_abs();
        for i in 0..grid.len() {
            let xi = grid.xi(i);
            let r = f.samples()[i] * ((Complex64::new(0.0, -xi * l)).exp() - 1.0) - g.samples()[i];
            if (xi - unit).abs() > 1e-3 {
                assert!(r.norm() <= 1e-12 * scale);
            }
            if xi < 0.75 * unit || xi > 4.0 / 3.0 * unit {
                assert_eq!(f.samples()[i], Complex64::new(0.0, 0.0));
            }
        }
        assert!(interpolate_at(&g, unit).unwrap().norm() < 1e-8 * scale);
        assert!(f.is_finite());
    }

    #[test]
    fn fit_examples() {
        let s = exponent_fit(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]).unwrap();
        assert!((s - 2.0).abs() < 1e-14);
        let s = exponent_fit(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)]).unwrap();
        assert!(s.abs() < 1e-14);
        let noise = [0.01, -0.01, 0.005, -0.008, 0.0];
        let pts: Vec<_> = (0..5)
            .map(|k| {
                let x = 2f64.powi(k);
                (x, x.powf(2.5) * (1.0 + noise[k as usize]))
            })
            .collect();
        assert!((exponent_fit(&pts).unwrap() - 2.5).abs() < 0.05);
        assert!(exponent_fit(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(exponent_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    }

    #[test]
    fn cos_bound_examples() {
        let v = (4.0 * 1.25f64.ln()).cos();
        assert!((v - 0.627).abs() < 1e-3);
        let m = cos_bound_check(4.0, 200, 200);
        // The mesh contains xi = 1.25, t = 1.
        assert!(m <= v + 1e-15);
        assert!(m >= 1.25f64.cos() && m > 0.25);
        // Only the t = 0 and t = 1 slices with xi = 1: cos(0) everywhere.
        assert_eq!(cos_bound_check(4.0, 1, 2), 1.0);
    }

    #[test]
    fn scan_validation() {
        assert!(SharpnessScan::new(1.0, 1.4).validate().is_ok());
        assert!(SharpnessScan::new(1.0, 1.5).validate().is_err());
        let mut s = SharpnessScan::new(1.0, 0.0);
        s.nu_list.push(2.0);
        assert!(s.validate().is_err());
    }
}
