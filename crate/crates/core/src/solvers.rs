//! Solution operators for the twisted horocycle equation `(V + i lambda) f = g`
//! and for the horocycle-map equation `f o h_L - f = g`, in the unitarised
//! Fourier model.
//!
//! In the model `V` is multiplication by `-i xi` and the time-`L` map is
//! multiplication by `exp(-i xi L)`, so both equations are solved by
//! pointwise division. The obstructions are point evaluations: `g(lambda)`
//! for the twisted equation and `g(2 pi m / L)` for the map.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::grid::{
    derivative_at, interpolate_at, interpolate_with_error, l2nu_norm, GridFunction, LogGrid,
};
use crate::operators::{green_v, sobolev_norm, Basis, SobolevSpec};
use crate::repr::ReprParams;
use crate::sharpness::ramp;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default relative tolerance for the annihilation preconditions.
pub const ANNIHILATION_TOL: f64 = 1e-8;

/// Default resonance guard.
pub const RESONANCE_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistParams {
    pub lambda: f64,
    pub tol: f64,
    pub delta: f64,
}

impl TwistParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "twist parameter lambda = {lambda} must be finite and nonzero"
            )));
        }
        Ok(Self {
            lambda,
            tol: ANNIHILATION_TOL,
            delta: RESONANCE_DELTA,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    pub l: f64,
    /// Resonances `2 pi m / L` are checked for `1 <= |m| <= m_max`.
    pub m_max: i64,
    pub tol: f64,
    /// Absolute floor added to `tol * ||g||` in obstruction checks; lets a
    /// caller solving many fibers measure them against a common scale.
    pub abs_tol: f64,
    pub delta: f64,
}

impl MapParams {
    pub fn new(l: f64) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "map time L = {l} must be positive"
            )));
        }
        Ok(Self {
            l,
            m_max: 64,
            tol: ANNIHILATION_TOL,
            abs_tol: 0.0,
            delta: RESONANCE_DELTA,
        })
    }

    /// `m` in `[-m_max, m_max] \ {0}` on the full line, `1..=m_max` on the
    /// half line.
    pub fn resonance_indices(&self, grid: &LogGrid) -> Vec<i64> {
        match grid.domain() {
            Domain::FullLine => (-self.m_max..=self.m_max).filter(|&m| m != 0).collect(),
            Domain::PositiveHalf => (1..=self.m_max).collect(),
        }
    }

    pub fn resonance(&self, m: i64) -> f64 {
        TAU * m as f64 / self.l
    }
}

/// `exp(-i xi L) - 1`, evaluated as `-2i sin(xi L / 2) exp(-i xi L / 2)` so
/// that it keeps full relative accuracy near its zeros.
pub fn map_multiplier(xi: f64, l: f64) -> Complex64 {
    let half = 0.5 * xi * l;
    Complex64::new(0.0, -2.0 * half.sin()) * Complex64::from_polar(1.0, -half)
}

/// Checks `|value| <= tol |g| + 2 err`, where `err` estimates the
/// interpolation error of the point evaluation.
fn annihilated(g: &GridFunction, xi: f64, allowed: f64) -> Result<(bool, f64, f64)> {
    let (v, err) = interpolate_with_error(g, xi)?;
    let threshold = allowed + 2.0 * err;
    Ok((v.norm() <= threshold, v.norm(), threshold))
}

/// The twisted invariant distribution, `g(lambda)`.
pub fn eval_twist_distribution(g: &GridFunction, tp: &TwistParams) -> Result<Complex64> {
    interpolate_at(g, tp.lambda)
}

/// `D_m(g) = g(2 pi m / L)`.
pub fn eval_map_distribution(g: &GridFunction, mp: &MapParams, m: i64) -> Result<Complex64> {
    if g.grid().domain() == Domain::PositiveHalf && m <= 0 {
        return Err(Error::InvalidParameter(format!(
            "m = {m}: only m >= 1 index distributions on the half line"
        )));
    }
    interpolate_at(g, mp.resonance(m))
}

/// Nodes of `grid` where [`solve_twisted`] uses the removable-singularity
/// limit instead of division.
pub fn twist_limit_nodes(grid: &LogGrid, tp: &TwistParams) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| (grid.xi(i) - tp.lambda).abs() <= tp.delta * tp.lambda.abs())
        .collect()
}

/// Value at node `i` from the six nearest nodes of its branch (three on each
/// side, in `u`), provided none of them is in `skip`. Recovers a removable
/// singularity from quotients that are accurate to rounding.
fn fill_from_neighbours(
    grid: &LogGrid,
    out: &[Complex64],
    i: usize,
    skip: &[usize],
) -> Option<Complex64> {
    const W: [(i64, f64); 6] = [
        (-3, 0.05),
        (-2, -0.3),
        (-1, 0.75),
        (1, 0.75),
        (2, -0.3),
        (3, 0.05),
    ];
    let n = grid.n_per_branch() as i64;
    let (b, j) = (i as i64 / n, i as i64 % n);
    if j < 3 || j + 3 >= n {
        return None;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (o, w) in W {
        let k = (b * n + j + o) as usize;
        if skip.contains(&k) {
            return None;
        }
        acc += out[k] * w;
    }
    Some(acc)
}

/// `f = i g / (xi - lambda)`. A node coinciding with `lambda` (within the
/// resonance guard) takes the limit, interpolated from the neighbouring
/// quotients, or `i g'(lambda)` when the node is too close to a branch end.
pub fn solve_twisted(g: &GridFunction, tp: &TwistParams) -> Result<GridFunction> {
    let grid = *g.grid();
    let lambda = tp.lambda;
    if !grid.covers(lambda) {
        return Err(Error::OutOfRange { xi: lambda });
    }
    let norm = l2nu_norm(g);
    let (ok, value, threshold) = annihilated(g, lambda, tp.tol * norm)?;
    if !ok {
        return Err(Error::TwistObstruction { value, threshold });
    }
    let limit_nodes = twist_limit_nodes(&grid, tp);
    let mut out: Vec<Complex64> = g
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &z)| I * z / (grid.xi(i) - lambda))
        .collect();
    for &i in &limit_nodes {
        out[i] = match fill_from_neighbours(&grid, &out, i, &limit_nodes) {
            Some(v) => v,
            None => I * derivative_at(g, lambda)?,
        };
    }
    GridFunction::new(grid, out)
}

/// Nodes of `grid` within the resonance guard of some `2 pi m / L`,
/// `m != 0`, together with that `m`.
pub fn map_limit_nodes(grid: &LogGrid, mp: &MapParams) -> Vec<(usize, i64)> {
    (0..grid.len())
        .filter_map(|i| {
            let theta = grid.xi(i) * mp.l;
            let m = (theta / TAU).round();
            ((theta - TAU * m).abs() < mp.delta && m != 0.0).then_some((i, m as i64))
        })
        .collect()
}

/// Flow obstruction `g(0)`, extrapolated linearly from the two nodes of
/// smallest `|xi|` on each branch.
fn flow_obstruction(g: &GridFunction) -> Complex64 {
    let grid = g.grid();
    let mut worst = Complex64::new(0.0, 0.0);
    for b in 0..grid.n_branches() {
        let fb = g.branch(b);
        let sign = grid.branch_signs()[b];
        let (x0, x1) = (sign * grid.u(0).exp(), sign * grid.u(1).exp());
        let g0 = fb[0] - (fb[1] - fb[0]) * (x0 / (x1 - x0));
        if g0.norm() > worst.norm() {
            worst = g0;
        }
    }
    worst
}

/// Largest phase advance `h |xi| L` of `exp(-i xi L)` between neighbouring
/// nodes at which a resonance value is still read off by interpolation.
pub const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_2;

/// Whether the grid samples `exp(-i xi L)` finely enough near `xi`.
pub fn resonance_resolved(grid: &LogGrid, xi: f64, l: f64) -> bool {
    grid.h() * xi.abs() * l <= MAX_PHASE_STEP
}

/// Checks every covered map obstruction the grid resolves; returns the
/// first violation.
pub fn check_map_obstructions(g: &GridFunction, mp: &MapParams) -> Result<()> {
    let grid = *g.grid();
    let allowed = mp.tol * l2nu_norm(g) + mp.abs_tol;
    let g0 = flow_obstruction(g).norm();
    if g0 > allowed {
        return Err(Error::MapObstruction {
            m: 0,
            value: g0,
            threshold: allowed,
        });
    }
    for m in mp.resonance_indices(&grid) {
        let xi = mp.resonance(m);
        if !grid.covers(xi) || !resonance_resolved(&grid, xi, mp.l) {
            continue;
        }
        let (ok, value, threshold) = annihilated(g, xi, allowed)?;
        if !ok {
            return Err(Error::MapObstruction {
                m,
                value,
                threshold,
            });
        }
    }
    Ok(())
}

/// `f = g / (exp(-i xi L) - 1)`.
///
/// Nodes within `delta` (in `xi L mod 2 pi`) of a resonance take the limit
/// `g'(xi_m) / (-i L)`, interpolated from neighbouring quotients where the
/// branch allows.
pub fn solve_map(g: &GridFunction, mp: &MapParams) -> Result<GridFunction> {
    check_map_obstructions(g, mp)?;
    let grid = *g.grid();
    let norm = l2nu_norm(g);
    let mut out: Vec<Complex64> = g
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let xi = grid.xi(i);
            if xi * mp.l == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                z / map_multiplier(xi, mp.l)
            }
        })
        .collect();
    let limit_nodes = map_limit_nodes(&grid, mp);
    let skip: Vec<usize> = limit_nodes.iter().map(|x| x.0).collect();
    for &(i, m) in &limit_nodes {
        let xi_m = mp.resonance(m);
        let xi = grid.xi(i);
        let dg = derivative_at(g, xi_m)?;
        let allowed = mp.tol * norm + mp.abs_tol + 2.0 * dg.norm() * (xi - xi_m).abs();
        let gi = g.samples()[i].norm();
        if gi > allowed {
            return Err(Error::MapObstruction {
                m,
                value: gi,
                threshold: allowed,
            });
        }
        out[i] = match fill_from_neighbours(&grid, &out, i, &skip) {
            Some(v) => v,
            None => dg / Complex64::new(0.0, -mp.l),
        };
    }
    GridFunction::new(grid, out)
}

/// `f o h_{-L/2}`: multiplication by `exp(-i xi L / 2)`.
pub fn half_shift(f: &GridFunction, mp: &MapParams) -> GridFunction {
    f.map_with_xi(|xi, z| z * Complex64::from_polar(1.0, -0.5 * xi * mp.l))
}

/// `g = (exp(-i xi L) - 1) f0`, a map coboundary by construction.
pub fn make_coboundary(f0: &GridFunction, mp: &MapParams) -> GridFunction {
    f0.map_with_xi(|xi, z| z * map_multiplier(xi, mp.l))
}

/// Plateau cutoff in `u = ln|xi|`: one within `0.25` of `ln|lambda|`, zero
/// beyond `1.5`, on `lambda`'s branch only.
pub fn log_plateau(xi: f64, lambda: f64) -> f64 {
    if xi.signum() != lambda.signum() {
        return 0.0;
    }
    let d = (xi.abs().ln() - lambda.abs().ln()).abs();
    ramp((1.5 - d) / 1.25)
}

/// `g = base - base(lambda) chi` with `chi` = [`log_plateau`] around `lambda`.
pub fn make_twisted_annihilated(base: &GridFunction, tp: &TwistParams) -> Result<GridFunction> {
    let at = interpolate_at(base, tp.lambda)?;
    let lambda = tp.lambda;
    Ok(base.map_with_xi(|xi, z| z - at * log_plateau(xi, lambda)))
}

/// Order of the `g`-norm on the right-hand side of the map estimate:
/// `2s + 1 + eps` in general, `s + 1 + eps` for the `X, V` graph norm.
pub fn map_rhs_order(spec: &SobolevSpec) -> f64 {
    match spec.basis {
        Basis::XVOnly => spec.s + 1.0 + spec.epsilon,
        Basis::FullUXV | Basis::UOnly => 2.0 * spec.s + 1.0 + spec.epsilon,
    }
}

/// Norms entering the map estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapRhsParts {
    /// `|G^V g|_s`.
    pub green: f64,
    /// `|g|_{rhs order}`.
    pub g: f64,
    pub value: f64,
}

/// Right-hand side of the map estimate with unit constant:
/// `(1 + L^{2s}) / L |G^V g|_s + L^eps (1 + L^s) / eps |g|_{2s+1+eps}`.
pub fn map_rhs_functional(
    g: &GridFunction,
    mp: &MapParams,
    spec: &SobolevSpec,
    p: &ReprParams,
) -> Result<f64> {
    Ok(map_rhs_parts(g, mp, spec, p)?.value)
}

pub fn map_rhs_parts(
    g: &GridFunction,
    mp: &MapParams,
    spec: &SobolevSpec,
    p: &ReprParams,
) -> Result<MapRhsParts> {
    let eps = spec.epsilon;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {eps} must be positive"
        )));
    }
    let (s, l) = (spec.s, mp.l);
    let green = sobolev_norm(&green_v(g), spec, p)?;
    let gn = sobolev_norm(g, &spec.with_order(map_rhs_order(spec)), p)?;
    let value = map_rhs_combine(green, gn, s, l, eps);
    Ok(MapRhsParts {
        green,
        g: gn,
        value,
    })
}

/// Combine the two norms with the `L`-dependent weights.
pub fn map_rhs_combine(green: f64, g: f64, s: f64, l: f64, eps: f64) -> f64 {
    (1.0 + l.powf(2.0 * s)) / l * green + l.powf(eps) * (1.0 + l.powf(s)) / eps * g
}

/// `|csc x - (1/x + sum_{a=1}^{terms} (-1)^a 2x / (x^2 - a^2 pi^2))|`.
pub fn csc_expansion_check(x: f64, terms: usize) -> Result<f64> {
    if terms < 1 {
        return Err(Error::InvalidParameter(
            "at least one term is required".into(),
        ));
    }
    let k = (x / PI).round();
    if x == 0.0 || (x - k * PI).abs() < 1e-12 * x.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!("x = {x} is a pole of csc")));
    }
    let mut sum = 0.0;
    // Summed from the smallest terms up.
    for a in (1..=terms).rev() {
        let af = a as f64 * PI;
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * 2.0 * x / (x * x - af * af);
    }
    Ok((1.0 / x.sin() - (1.0 / x + sum)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample};
    use crate::operators::{apply_field, Family, Field, FieldTag};
    use crate::sharpness::{plateau_bump, BumpSpec};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn gauss(center: f64, width: f64) -> impl Fn(f64) -> Complex64 {
        move |x: f64| {
            let u = x.abs().ln();
            c((-(u - center).powi(2) / (2.0 * width * width)).exp())
        }
    }

    #[test]
    fn twist_distribution_examples() {
        let grid = LogGrid::desk(Domain::PositiveHalf);
        let tp = TwistParams::new(1.0).unwrap();
        let one = sample(&grid, |_| c(1.0)).unwrap();
        assert!((eval_twist_distribution(&one, &tp).unwrap() - 1.0).norm() < 1e-14);
        let tp = TwistParams::new(1.37).unwrap();
        let base = sample(&grid, gauss(0.2, 0.7)).unwrap();
        let g = make_twisted_annihilated(&base, &tp).unwrap();
        assert!(eval_twist_distribution(&g, &tp).unwrap().norm() < 1e-10);
    }

    #[test]
    fn map_distribution_examples() {
        let grid = LogGrid::desk(Domain::FullLine);
        let mp = MapParams::new(TAU).unwrap();
        let f = sample(&grid, |x| c(x.abs().ln().cos())).unwrap();
        let one = interpolate_at(&f, 1.0).unwrap();
        assert_eq!(eval_map_distribution(&f, &mp, 1).unwrap(), one);
        let k = sample(&grid, |_| c(1.0)).unwrap();
        for (l, m) in [(1.0, 3), (0.5, -2), (8.0, 64)] {
            let mp = MapParams::new(l).unwrap();
            assert!((eval_map_distribution(&k, &mp, m).unwrap() - 1.0).norm() < 1e-14);
        }
        let half = LogGrid::desk(Domain::PositiveHalf);
        let k = sample(&half, |_| c(1.0)).unwrap();
        assert!(eval_map_distribution(&k, &mp, 0).is_err());
        assert!(eval_map_distribution(&k, &mp, -1).is_err());
    }

    #[test]
    fn solve_twisted_zero_and_cancellation() {
        let grid = LogGrid::desk(Domain::FullLine);
        let tp = TwistParams::new(1.0).unwrap();
        let z = solve_twisted(&GridFunction::zeros(grid), &tp).unwrap();
        assert_eq!(z, GridFunction::zeros(grid));

        let spec = BumpSpec::default();
        let g = sample(&grid, |x| c(plateau_bump(x, &spec) * (x - 1.0))).unwrap();
        let f = solve_twisted(&g, &tp).unwrap();
        let near = twist_limit_nodes(&grid, &tp);
        assert_eq!(near.len(), 1);
        for i in 0..grid.len() {
            let want = I * plateau_bump(grid.xi(i), &spec);
            let tol = if near.contains(&i) { 1e-8 } else { 1e-12 };
            assert!((f.samples()[i] - want).norm() <= tol, "node {i}");
        }
    }

    #[test]
    fn solve_twisted_residual_and_v_commutation() {
        let grid = LogGrid::desk(Domain::FullLine);
        let p = ReprParams::principal(2.0);
        for lambda in [0.25, 0.5, 1.0, 2.0, 4.0, -1.5] {
            let tp = TwistParams::new(lambda).unwrap();
            let base = sample(&grid, gauss(0.3, 0.8)).unwrap();
            let g = make_twisted_annihilated(&base, &tp).unwrap();
            let f = solve_twisted(&g, &tp).unwrap();
            let mask = twist_limit_nodes(&grid, &tp);
            // Residual (V + i lambda) f - g.
            let r = f.map_with_xi(|xi, z| z * Complex64::new(0.0, lambda - xi));
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..grid.len() {
                if mask.contains(&i) {
                    continue;
                }
                num += (r.samples()[i] - g.samples()[i]).norm_sqr();
                den += g.samples()[i].norm_sqr();
            }
            assert!((num / den).sqrt() <= 1e-12, "lambda {lambda}");

            let vt = FieldTag::new(Family::Calligraphic, Field::V);
            let a = solve_twisted(&apply_field(&g, vt, &p).unwrap(), &tp).unwrap();
            let b = apply_field(&f, vt, &p).unwrap();
            let d = l2nu_norm(&(&a - &b)) / l2nu_norm(&b);
            assert!(d <= 1e-10, "lambda {lambda}: {d}");
        }
    }

    #[test]
    fn solve_twisted_obstruction() {
        let grid = LogGrid::desk(Domain::PositiveHalf);
        let tp = TwistParams::new(1.0).unwrap();
        let g = sample(&grid, gauss(0.0, 0.5)).unwrap();
        match solve_twisted(&g, &tp) {
            Err(Error::TwistObstruction { value, .. }) => assert!((value - 1.0).abs() < 1e-12),
            other => panic!("expected obstruction, got {other:?}"),
        }
        let tp = TwistParams::new(-1.0).unwrap();
        assert!(matches!(
            solve_twisted(&g, &tp),
            Err(Error::OutOfRange { .. })
        ));
        assert!(TwistParams::new(0.0).is_err());
    }

    #[test]
    fn map_round_trip() {
        let grid = build_grid(Domain::FullLine, -6.0, 4.0, 16385).unwrap();
        let f0 = sample(&grid, gauss(-1.0, 0.6)).unwrap();
        for l in [0.5, 1.0, TAU, 8.0] {
            let mp = MapParams::new(l).unwrap();
            let g = make_coboundary(&f0, &mp);
            assert!(l2nu_norm(&g) <= 2.0 * l2nu_norm(&f0));
            let f = solve_map(&g, &mp).unwrap();
            let mask: Vec<usize> = map_limit_nodes(&grid, &mp)
                .into_iter()
                .map(|x| x.0)
                .collect();
            let scale = f0.max_abs();
            for i in 0..grid.len() {
                if !mask.contains(&i) {
                    assert!((f.samples()[i] - f0.samples()[i]).norm() <= 1e-10 * scale);
                }
            }
            // Residual of the map equation.
            let r = make_coboundary(&f, &mp);
            let num = l2nu_norm(&(&r - &g));
            assert!(num <= 1e-12 * l2nu_norm(&g));
        }
    }

    #[test]
    fn map_distributions_vanish_on_coboundaries() {
        let grid = build_grid(Domain::FullLine, -6.0, 4.0, 16385).unwrap();
        let f0 = sample(&grid, gauss(-1.0, 0.6)).unwrap();
        let mp = MapParams::new(8.0).unwrap();
        let g = make_coboundary(&f0, &mp);
        for m in mp.resonance_indices(&grid) {
            let xi = mp.resonance(m);
            if grid.covers(xi) {
                assert!(
                    eval_map_distribution(&g, &mp, m).unwrap().norm() < 1e-10,
                    "m = {m}"
                );
            }
        }
    }

    #[test]
    fn solve_map_obstruction_names_m() {
        let grid = LogGrid::desk(Domain::PositiveHalf);
        let mp = MapParams::new(TAU).unwrap();
        // D_1(g) = g(1) = 1.
        let g = sample(&grid, gauss(0.0, 0.3)).unwrap();
        match solve_map(&g, &mp) {
            Err(Error::MapObstruction { m, value, .. }) => {
                assert_eq!(m, 1);
                assert!((value - 1.0).abs() < 1e-12);
            }
            other => panic!("expected obstruction, got {other:?}"),
        }
        assert_eq!(
            solve_map(&GridFunction::zeros(grid), &mp).unwrap(),
            GridFunction::zeros(grid)
        );
    }

    #[test]
    fn flow_obstruction_detected() {
        // g(xi) -> 1 as xi -> 0 is not a flow coboundary.
        let grid = LogGrid::desk(Domain::FullLine);
        let mp = MapParams::new(1.0).unwrap();
        let g = sample(&grid, |x| {
            let f0 = (-x * x).exp();
            c(f0) * (1.0 - 0.0 * x)
        })
        .unwrap();
        let g = g.map_with_xi(|xi, z| if xi.abs() < 1.0 { z } else { z * 0.0 });
        assert!(matches!(
            check_map_obstructions(&g, &mp),
            Err(Error::MapObstruction { m: 0, .. })
        ));
    }

    #[test]
    fn half_shift_properties() {
        let grid = LogGrid::desk(Domain::FullLine);
        let f = sample(&grid, gauss(0.5, 1.0)).unwrap();
        let mp = MapParams::new(4.0 * PI).unwrap();
        let hs = half_shift(&f, &mp);
        for (a, b) in hs.samples().iter().zip(f.samples()) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15 * b.norm().max(1e-300));
        }
        assert!((l2nu_norm(&hs) - l2nu_norm(&f)).abs() <= 1e-14 * l2nu_norm(&f));
        assert!((Complex64::from_polar(1.0, -0.5 * 1.0 * mp.l) - 1.0).norm() < 1e-14);
    }

    #[test]
    fn make_twisted_annihilated_examples() {
        let grid = LogGrid::desk(Domain::PositiveHalf);
        let tp = TwistParams::new(2.0).unwrap();
        let one = sample(&grid, |_| c(1.0)).unwrap();
        let g = make_twisted_annihilated(&one, &tp).unwrap();
        for i in 0..grid.len() {
            let want = 1.0 - log_plateau(grid.xi(i), 2.0);
            assert!((g.samples()[i] - want).norm() < 1e-15);
        }
        assert!(eval_twist_distribution(&g, &tp).unwrap().norm() < 1e-10);

        let node = grid.xi(grid.n_per_branch() / 2 + 150);
        let vanishing = sample(&grid, |x| c((x - node) * (-(x - node).powi(2)).exp())).unwrap();
        let g = make_twisted_annihilated(&vanishing, &TwistParams::new(node).unwrap()).unwrap();
        assert_eq!(g, vanishing);
    }

    #[test]
    fn map_rhs_examples() {
        let grid = build_grid(Domain::FullLine, -6.0, 4.0, 4097).unwrap();
        let p = ReprParams::principal(2.0);
        let mp = MapParams::new(1.0).unwrap();
        let spec = SobolevSpec::new(1.0, Family::Calligraphic, Basis::FullUXV).with_epsilon(1.0);
        assert_eq!(
            map_rhs_functional(&GridFunction::zeros(grid), &mp, &spec, &p).unwrap(),
            0.0
        );
        let f0 = sample(&grid, gauss(-1.0, 0.6)).unwrap();
        let g = make_coboundary(&f0, &mp);
        let got = map_rhs_functional(&g, &mp, &spec, &p).unwrap();
        let gv = sobolev_norm(&green_v(&g), &spec, &p).unwrap();
        let g4 = sobolev_norm(&g, &spec.with_order(4.0), &p).unwrap();
        assert!((got - (2.0 * gv + 2.0 * g4)).abs() <= 1e-12 * got);
        let g2 = g.scale(c(2.0));
        let doubled = map_rhs_functional(&g2, &mp, &spec, &p).unwrap();
        assert!((doubled - 2.0 * got).abs() <= 1e-12 * got);
    }

    #[test]
    fn csc_examples() {
        let e = csc_expansion_check(1.0, 3).unwrap();
        assert!((e - 7.9e-3).abs() < 2e-4, "{e}");
        let mut prev = f64::INFINITY;
        for terms in [25, 50, 100, 200] {
            let e = csc_expansion_check(PI / 2.0, terms).unwrap();
            assert!(e < prev);
            prev = e;
        }
        assert!(prev <= 1e-2);
        for k in [8, 16, 32] {
            assert!(
                csc_expansion_check(1.0, 2 * k).unwrap() < csc_expansion_check(1.0, k).unwrap()
            );
        }
        assert!(csc_expansion_check(PI, 10).is_err());
        assert!(csc_expansion_check(0.0, 10).is_err());
        assert!(csc_expansion_check(1.0, 0).is_err());
    }

    #[test]
    fn unresolved_resonances_are_skipped() {
        // h * xi * L = 0.1 * 20 * 1 = 2 exceeds the phase-step limit, so a
        // nonzero value at xi = 2 pi * 3 is not read as an obstruction.
        let grid = build_grid(Domain::PositiveHalf, -1.0, 4.0, 51).unwrap();
        let mp = MapParams::new(1.0).unwrap();
        assert!(!resonance_resolved(&grid, TAU * 3.0, 1.0));
        assert!(resonance_resolved(&grid, TAU, 0.5));
        let g = sample(&grid, |xi| c((-(xi - TAU * 3.0).powi(2)).exp())).unwrap();
        assert!(check_map_obstructions(&g, &mp).is_ok());
        let fine = build_grid(Domain::PositiveHalf, -1.0, 4.0, 4001).unwrap();
        let g = sample(&fine, |xi| c((-(xi - TAU * 3.0).powi(2)).exp())).unwrap();
        assert!(check_map_obstructions(&g, &mp).is_err());
    }
}
