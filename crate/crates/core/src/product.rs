//! Functions on products of two logarithmic grids, modelling vectors in a
//! tensor product of two irreducible representations, and the two-parameter
//! cocycle equation for a pair of commuting horocycle maps.
//!
//! Samples are stored row-major: entry `(j, k)` sits at `j * n2 + k`, so
//! rows are fibers along the second factor.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{l2nu_norm, GridFunction, LogGrid};
use crate::operators::{apply_field_samples, Family, Field, FieldTag, DEFAULT_MAX_ORDER};
use crate::repr::ReprParams;
use crate::solvers::{map_limit_nodes, solve_map, MapParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TensorGridFunction {
    grid1: LogGrid,
    grid2: LogGrid,
    samples: Vec<Complex64>,
}

impl TensorGridFunction {
    pub fn new(grid1: LogGrid, grid2: LogGrid, samples: Vec<Complex64>) -> Result<Self> {
        let want = grid1.len() * grid2.len();
        if samples.len() != want {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {} x {} grid",
                samples.len(),
                grid1.len(),
                grid2.len()
            )));
        }
        if let Some(i) = samples
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            let n2 = grid2.len();
            return Err(Error::NonFiniteSample {
                xi: grid1.xi(i / n2),
                value: samples[i].to_string(),
            });
        }
        Ok(Self {
            grid1,
            grid2,
            samples,
        })
    }

    pub fn zeros(grid1: LogGrid, grid2: LogGrid) -> Self {
        Self {
            grid1,
            grid2,
            samples: vec![ZERO; grid1.len() * grid2.len()],
        }
    }

    /// Samples `expr(xi1, xi2)`.
    pub fn from_fn<F>(grid1: LogGrid, grid2: LogGrid, expr: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let x1 = grid1.abscissas();
        let x2 = grid2.abscissas();
        let samples = x1
            .iter()
            .flat_map(|&a| x2.iter().map(move |&b| (a, b)))
            .map(|(a, b)| expr(a, b))
            .collect();
        Self::new(grid1, grid2, samples)
    }

    /// `f1 (x) f2`.
    pub fn outer(f1: &GridFunction, f2: &GridFunction) -> Self {
        let samples = f1
            .samples()
            .iter()
            .flat_map(|&a| f2.samples().iter().map(move |&b| a * b))
            .collect();
        Self {
            grid1: *f1.grid(),
            grid2: *f2.grid(),
            samples,
        }
    }

    pub fn grid1(&self) -> &LogGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &LogGrid {
        &self.grid2
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.grid1.len(), self.grid2.len())
    }

    pub fn at(&self, j: usize, k: usize) -> Complex64 {
        self.samples[j * self.grid2.len() + k]
    }

    /// Fiber along the first factor at second-factor index `k`.
    pub fn fiber1(&self, k: usize) -> GridFunction {
        let n2 = self.grid2.len();
        let v = (0..self.grid1.len())
            .map(|j| self.samples[j * n2 + k])
            .collect();
        GridFunction::from_parts(self.grid1, v)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }

    fn map(&self, m: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid1: self.grid1,
            grid2: self.grid2,
            samples: self.samples.iter().map(|&z| m(z)).collect(),
        }
    }

    fn zip(&self, other: &Self, m: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            grid1: self.grid1,
            grid2: self.grid2,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| m(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid1.same_as(&other.grid1) && self.grid2.same_as(&other.grid2) {
            Ok(())
        } else {
            Err(Error::GridMismatch("tensor grids differ".into()))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn transpose(&self) -> Vec<Complex64> {
        transpose(&self.samples, self.grid1.len(), self.grid2.len())
    }
}

fn transpose(v: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; v.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = v[r * cols + c];
        }
    }
    out
}

fn trapezoid_weights(grid: &LogGrid) -> Vec<f64> {
    let n = grid.n_per_branch();
    (0..grid.len())
        .map(|i| {
            let j = i % n;
            grid.h() * if j == 0 || j + 1 == n { 0.5 } else { 1.0 }
        })
        .collect()
}

fn l2_sq(samples: &[Complex64], w_rows: &[f64], w_cols: &[f64]) -> f64 {
    let cols = w_cols.len();
    samples
        .par_chunks(cols)
        .zip(w_rows.par_iter())
        .map(|(row, wr)| {
            row.iter()
                .zip(w_cols)
                .map(|(z, wc)| z.norm_sqr() * wc)
                .sum::<f64>()
                * wr
        })
        .sum()
}

/// Tensor `L^2` norm for the product of the two `|xi|^{-1} d xi` measures.
pub fn tensor_l2_norm(f: &TensorGridFunction) -> f64 {
    l2_sq(
        &f.samples,
        &trapezoid_weights(&f.grid1),
        &trapezoid_weights(&f.grid2),
    )
    .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocycleParams {
    pub l1: f64,
    pub l2: f64,
}

impl CocycleParams {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0) || !(l1.is_finite() && l2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "map times L1 = {l1}, L2 = {l2} must be positive"
            )));
        }
        Ok(Self { l1, l2 })
    }

    /// The single `L` in the tame bound.
    pub fn l_max(&self) -> f64 {
        self.l1.max(self.l2)
    }
}

/// Composition with the time-`l` horocycle map of factor `k`: multiplication
/// by `exp(-i xi_k l)`.
pub fn translate_factor(f: &TensorGridFunction, k: usize, l: f64) -> Result<TensorGridFunction> {
    let n2 = f.grid2.len();
    let mult = |grid: &LogGrid| -> Vec<Complex64> {
        grid.abscissas()
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -x * l))
            .collect()
    };
    let mut out = f.samples.clone();
    match k {
        1 => {
            let m = mult(&f.grid1);
            out.par_chunks_mut(n2)
                .zip(m.par_iter())
                .for_each(|(row, &c)| {
                    row.iter_mut().for_each(|z| *z *= c);
                });
        }
        2 => {
            let m = mult(&f.grid2);
            out.par_chunks_mut(n2).for_each(|row| {
                row.iter_mut().zip(&m).for_each(|(z, &c)| *z *= c);
            });
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "factor index {k} must be 1 or 2"
            )));
        }
    }
    Ok(TensorGridFunction {
        grid1: f.grid1,
        grid2: f.grid2,
        samples: out,
    })
}

/// `(g, f) = (p o h1 - p, p o h2 - p)`.
pub fn make_cocycle_pair(
    p: &TensorGridFunction,
    cp: &CocycleParams,
) -> Result<(TensorGridFunction, TensorGridFunction)> {
    let g = translate_factor(p, 1, cp.l1)?.sub(p)?;
    let f = translate_factor(p, 2, cp.l2)?.sub(p)?;
    Ok((g, f))
}

/// `|(f o h1 - f) - (g o h2 - g)|`.
pub fn cocycle_defect(
    f: &TensorGridFunction,
    g: &TensorGridFunction,
    cp: &CocycleParams,
) -> Result<f64> {
    f.check_same(g)?;
    let a = translate_factor(f, 1, cp.l1)?.sub(f)?;
    let b = translate_factor(g, 2, cp.l2)?.sub(g)?;
    Ok(tensor_l2_norm(&a.sub(&b)?))
}

/// Relative tolerance on the cocycle identity and on the second equation.
pub const COCYCLE_TOL: f64 = 1e-8;

/// Solves `p o h1 - p = g` fiberwise with the one-factor map solver, then
/// checks `p o h2 - p = f`.
pub fn solve_cocycle(
    f: &TensorGridFunction,
    g: &TensorGridFunction,
    cp: &CocycleParams,
) -> Result<TensorGridFunction> {
    let scale = tensor_l2_norm(f).max(tensor_l2_norm(g));
    if scale == 0.0 {
        return Ok(TensorGridFunction::zeros(g.grid1, g.grid2));
    }
    let defect = cocycle_defect(f, g, cp)?;
    if defect > COCYCLE_TOL * scale {
        return Err(Error::Residual {
            context: "cocycle identity".into(),
            residual: defect,
            tolerance: COCYCLE_TOL * scale,
        });
    }
    let (n1, n2) = g.dims();
    let mut mp = MapParams::new(cp.l1)?;
    // Tail fibers are tiny; judge their obstructions against the largest.
    mp.abs_tol = mp.tol * (0..n2).map(|k| l2nu_norm(&g.fiber1(k))).fold(0.0, f64::max);
    let columns: Vec<Vec<Complex64>> = (0..n2)
        .into_par_iter()
        .map(|k| {
            solve_map(&g.fiber1(k), &mp)
                .map(GridFunction::into_samples)
                .map_err(|e| Error::FiberObstruction {
                    k,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let mut samples = vec![ZERO; n1 * n2];
    for (k, col) in columns.iter().enumerate() {
        for (j, &z) in col.iter().enumerate() {
            samples[j * n2 + k] = z;
        }
    }
    let p = TensorGridFunction {
        grid1: g.grid1,
        grid2: g.grid2,
        samples,
    };
    let second = translate_factor(&p, 2, cp.l2)?.sub(&p)?.sub(f)?;
    let residual = tensor_l2_norm(&second);
    if residual > COCYCLE_TOL * scale {
        return Err(Error::Residual {
            context: "second cocycle equation".into(),
            residual,
            tolerance: COCYCLE_TOL * scale,
        });
    }
    Ok(p)
}

/// First-factor nodes where [`solve_cocycle`] uses the resonance limit.
pub fn cocycle_limit_rows(grid1: &LogGrid, cp: &CocycleParams) -> Result<Vec<usize>> {
    let mp = MapParams::new(cp.l1)?;
    Ok(map_limit_nodes(grid1, &mp)
        .into_iter()
        .map(|x| x.0)
        .collect())
}

/// Representation data for the six-generator surrogate norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorSobolev {
    pub p1: ReprParams,
    pub p2: ReprParams,
    pub family: Family,
}

/// Applies one generator to every contiguous row of `data`.
fn apply_rows(
    data: &[Complex64],
    grid: &LogGrid,
    tag: FieldTag,
    p: &ReprParams,
) -> Result<Vec<Complex64>> {
    let n = grid.len();
    let mut out = vec![ZERO; data.len()];
    out.par_chunks_mut(n)
        .zip(data.par_chunks(n))
        .try_for_each(|(o, row)| apply_field_samples(grid, row, o, tag, p))?;
    Ok(out)
}

/// Visits `U^a X^b V^c data` for `a + b + c <= budget`, with the order.
fn for_each_monomial(
    data: &[Complex64],
    grid: &LogGrid,
    budget: usize,
    family: Family,
    p: &ReprParams,
    visit: &mut dyn FnMut(&[Complex64], usize) -> Result<()>,
) -> Result<()> {
    let tag = |w| FieldTag::new(family, w);
    let mut vc = data.to_vec();
    for c in 0..=budget {
        if c > 0 {
            vc = apply_rows(&vc, grid, tag(Field::V), p)?;
        }
        let mut xb = vc.clone();
        for b in 0..=budget - c {
            if b > 0 {
                xb = apply_rows(&xb, grid, tag(Field::X), p)?;
            }
            visit(&xb, b + c)?;
            let mut ua = xb.clone();
            for a in 1..=budget - c - b {
                ua = apply_rows(&ua, grid, tag(Field::U), p)?;
                visit(&ua, a + b + c)?;
            }
        }
    }
    Ok(())
}

impl TensorSobolev {
    pub fn new(p1: ReprParams, p2: ReprParams) -> Self {
        Self {
            p1,
            p2,
            family: Family::Calligraphic,
        }
    }

    fn integer_norm_sq(&self, f: &TensorGridFunction, n: usize) -> Result<f64> {
        let (n1, n2) = f.dims();
        let w1 = trapezoid_weights(&f.grid1);
        let w2 = trapezoid_weights(&f.grid2);
        let mut acc = 0.0;
        // Rows of the transpose are fibers along the first factor.
        let t = f.transpose();
        for_each_monomial(&t, &f.grid1, n, self.family, &self.p1, &mut |a, order| {
            let back = transpose(a, n2, n1);
            for_each_monomial(
                &back,
                &f.grid2,
                n - order,
                self.family,
                &self.p2,
                &mut |b, _| {
                    acc += l2_sq(b, &w1, &w2);
                    Ok(())
                },
            )
        })?;
        Ok(acc)
    }

    /// Surrogate order-`s` norm: squared norms of all products of monomials
    /// in the two factors with total order at most `s`; fractional orders by
    /// geometric interpolation.
    pub fn norm(&self, f: &TensorGridFunction, s: f64) -> Result<f64> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Sobolev order s = {s} must be >= 0"
            )));
        }
        let hi = s.ceil() as usize;
        if hi > DEFAULT_MAX_ORDER {
            return Err(Error::OrderOverflow {
                order: s,
                max: DEFAULT_MAX_ORDER,
            });
        }
        let lo = s.floor() as usize;
        let theta = s - lo as f64;
        let n_lo = self.integer_norm_sq(f, lo)?.sqrt();
        if theta == 0.0 {
            return Ok(n_lo);
        }
        let n_hi = self.integer_norm_sq(f, hi)?.sqrt();
        if n_lo == 0.0 || n_hi == 0.0 {
            return Ok(0.0);
        }
        Ok((n_lo.ln() * (1.0 - theta) + n_hi.ln() * theta).exp())
    }

    /// `sum_j Y_j^{2m} v` over the six generators.
    pub fn elliptic_operator(
        &self,
        v: &TensorGridFunction,
        m: usize,
    ) -> Result<TensorGridFunction> {
        let (n1, n2) = v.dims();
        let mut acc = vec![ZERO; n1 * n2];
        for which in [Field::U, Field::X, Field::V] {
            let tag = FieldTag::new(self.family, which);
            let mut t = v.transpose();
            for _ in 0..2 * m {
                t = apply_rows(&t, &v.grid1, tag, &self.p1)?;
            }
            for (a, b) in acc.iter_mut().zip(transpose(&t, n2, n1)) {
                *a += b;
            }
            let mut r = v.samples.clone();
            for _ in 0..2 * m {
                r = apply_rows(&r, &v.grid2, tag, &self.p2)?;
            }
            for (a, b) in acc.iter_mut().zip(r) {
                *a += b;
            }
        }
        Ok(TensorGridFunction {
            grid1: v.grid1,
            grid2: v.grid2,
            samples: acc,
        })
    }
}

/// `|p|_s / ((L + 1/L) max(|f|_{s+3}, |g|_{s+3}))` with `L = max(L1, L2)`.
pub fn tame_ratio(
    p: &TensorGridFunction,
    f: &TensorGridFunction,
    g: &TensorGridFunction,
    cp: &CocycleParams,
    s: f64,
    ctx: &TensorSobolev,
) -> Result<f64> {
    let np = ctx.norm(p, s)?;
    if np == 0.0 {
        return Ok(0.0);
    }
    let nf = ctx.norm(f, s + 3.0)?;
    let ng = ctx.norm(g, s + 3.0)?;
    tame_ratio_from_norms(np, nf, ng, cp)
}

/// [`tame_ratio`] from precomputed norms.
pub fn tame_ratio_from_norms(np: f64, nf: f64, ng: f64, cp: &CocycleParams) -> Result<f64> {
    if np == 0.0 {
        return Ok(0.0);
    }
    let den = nf.max(ng);
    if den == 0.0 {
        return Err(Error::InvalidParameter(
            "p is nonzero while f = g = 0: p is jointly invariant".into(),
        ));
    }
    let l = cp.l_max();
    Ok(np / ((l + 1.0 / l) * den))
}

/// `|v|_{2m} / (|L_{2m} v| + |v|)` with `L_{2m} = sum_j Y_j^{2m}`.
pub fn elliptic_defect(v: &TensorGridFunction, m: usize, ctx: &TensorSobolev) -> Result<f64> {
    if !(1..=2).contains(&m) {
        return Err(Error::InvalidParameter(format!("m = {m} must be 1 or 2")));
    }
    let nv = tensor_l2_norm(v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    let lv = tensor_l2_norm(&ctx.elliptic_operator(v, m)?);
    Ok(ctx.norm(v, (2 * m) as f64)? / (lv + nv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::member;
    use crate::grid::{build_grid, Domain};
    use crate::operators::{sobolev_norm, Basis, SobolevSpec};

    fn grids() -> (LogGrid, LogGrid) {
        (
            build_grid(Domain::PositiveHalf, -5.0, 4.0, 65).unwrap(),
            build_grid(Domain::PositiveHalf, -5.0, 4.0, 49).unwrap(),
        )
    }

    fn p0() -> TensorGridFunction {
        let (g1, g2) = grids();
        TensorGridFunction::outer(
            &member(2).sample(&g1).unwrap(),
            &member(6).sample(&g2).unwrap(),
        )
    }

    #[test]
    fn translate_examples() {
        let p = p0();
        assert_eq!(translate_factor(&p, 1, 0.0).unwrap(), p);
        let a = translate_factor(&translate_factor(&p, 1, 0.7).unwrap(), 2, 1.3).unwrap();
        let b = translate_factor(&translate_factor(&p, 2, 1.3).unwrap(), 1, 0.7).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).norm() <= 2.0 * f64::EPSILON * x.norm());
        }
        let n = tensor_l2_norm(&p);
        assert!((tensor_l2_norm(&a) - n).abs() <= 1e-14 * n);
        assert!(translate_factor(&p, 3, 1.0).is_err());
    }

    #[test]
    fn cocycle_pair_examples() {
        let (g1, g2) = grids();
        let cp = CocycleParams::new(0.5, 2.0).unwrap();
        let (g, f) = make_cocycle_pair(&TensorGridFunction::zeros(g1, g2), &cp).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(f.max_abs(), 0.0);
        let p = p0();
        let (g, f) = make_cocycle_pair(&p, &cp).unwrap();
        assert!(cocycle_defect(&f, &g, &cp).unwrap() <= 1e-13 * tensor_l2_norm(&p));
        assert!(tensor_l2_norm(&g) <= 2.0 * tensor_l2_norm(&p));
    }

    #[test]
    fn defect_examples() {
        let (g1, g2) = grids();
        let zero = TensorGridFunction::zeros(g1, g2);
        // Invariant vectors sit at xi = 0, off the grid; the nearest analogue
        // is a function carried by a node where exp(-i xi1 L1) = 1.
        let x1 = g1.xi(20);
        let cp = CocycleParams::new(std::f64::consts::TAU / x1, 1.7).unwrap();
        let inv = TensorGridFunction::from_fn(g1, g2, |a, _| {
            Complex64::new(if a == x1 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        assert!(cocycle_defect(&inv, &zero, &cp).unwrap() <= 1e-15 * tensor_l2_norm(&inv));
        assert_eq!(cocycle_defect(&zero, &zero, &cp).unwrap(), 0.0);
        let cp = CocycleParams::new(0.9, 1.7).unwrap();
        assert!(cocycle_defect(&p0(), &zero, &cp).unwrap() > 0.0);
    }

    #[test]
    fn solve_cocycle_round_trip() {
        let p = p0();
        let cp = CocycleParams::new(1.0, 2.0).unwrap();
        let (g, f) = make_cocycle_pair(&p, &cp).unwrap();
        let q = solve_cocycle(&f, &g, &cp).unwrap();
        let rows = cocycle_limit_rows(p.grid1(), &cp).unwrap();
        let scale = p.max_abs();
        let (n1, n2) = p.dims();
        for j in (0..n1).filter(|j| !rows.contains(j)) {
            for k in 0..n2 {
                assert!((q.at(j, k) - p.at(j, k)).norm() <= 1e-10 * scale);
            }
        }
        let (g1, g2) = grids();
        let z = TensorGridFunction::zeros(g1, g2);
        assert_eq!(solve_cocycle(&z, &z, &cp).unwrap(), z);
    }

    #[test]
    fn solve_cocycle_names_fiber() {
        let (g1, g2) = grids();
        // g is a delta in xi2 at a node where the second map is the identity,
        // so (g, 0) satisfies the cocycle identity, but its fiber has
        // D_1(g) = g(1) != 0 for L1 = 2 pi.
        let k0 = 30;
        let xi2 = g2.xi(k0);
        let cp = CocycleParams::new(std::f64::consts::TAU, std::f64::consts::TAU / xi2).unwrap();
        let bump = |x: f64| Complex64::new((-(x.ln()).powi(2) / 0.1).exp(), 0.0);
        let g = TensorGridFunction::from_fn(g1, g2, |a, b| if b == xi2 { bump(a) } else { ZERO })
            .unwrap();
        let f = TensorGridFunction::zeros(g1, g2);
        match solve_cocycle(&f, &g, &cp) {
            Err(Error::FiberObstruction { k, source }) => {
                assert_eq!(k, k0);
                assert!(matches!(*source, Error::MapObstruction { m: 1, .. }));
            }
            other => panic!("expected a fiber obstruction, got {other:?}"),
        }
    }

    #[test]
    fn tame_ratio_examples() {
        let p = p0();
        let ctx = TensorSobolev::new(ReprParams::principal(2.0), ReprParams::principal(3.0));
        let cp = CocycleParams::new(1.0, 1.0).unwrap();
        let (g1, g2) = grids();
        let z = TensorGridFunction::zeros(g1, g2);
        assert_eq!(tame_ratio(&z, &z, &z, &cp, 1.0, &ctx).unwrap(), 0.0);
        assert!(tame_ratio(&p, &z, &z, &cp, 1.0, &ctx).is_err());
        let (g, f) = make_cocycle_pair(&p, &cp).unwrap();
        let r = tame_ratio(&p, &f, &g, &cp, 1.0, &ctx).unwrap();
        let c = Complex64::new(-2.5, 0.5);
        let rc = tame_ratio(&p.scale(c), &f.scale(c), &g.scale(c), &cp, 1.0, &ctx).unwrap();
        assert!((r - rc).abs() <= 1e-12 * r);
    }

    #[test]
    fn tensor_norm_matches_one_factor_norm() {
        // With a second factor equal to a single node's delta the tensor
        // norm at order 0 and the one-factor norms agree up to the weight.
        let (g1, g2) = grids();
        let f1 = member(3).sample(&g1).unwrap();
        let f2 = member(4).sample(&g2).unwrap();
        let t = TensorGridFunction::outer(&f1, &f2);
        let a = tensor_l2_norm(&t);
        let b = crate::grid::l2nu_norm(&f1) * crate::grid::l2nu_norm(&f2);
        assert!((a - b).abs() <= 1e-12 * b);
        // Order 1: |f1 f2|_1^2 = |f1|_1^2 |f2|^2 + |f1|^2 (|f2|_1^2 - |f2|^2).
        let p1 = ReprParams::principal(2.0);
        let p2 = ReprParams::principal(3.0);
        let ctx = TensorSobolev::new(p1, p2);
        let s1 = |f: &GridFunction, p: &ReprParams| {
            sobolev_norm(
                f,
                &SobolevSpec::new(1.0, Family::Calligraphic, Basis::FullUXV),
                p,
            )
            .unwrap()
        };
        let n1 = crate::grid::l2nu_norm(&f1);
        let n2 = crate::grid::l2nu_norm(&f2);
        let want =
            (s1(&f1, &p1).powi(2) * n2 * n2 + n1 * n1 * (s1(&f2, &p2).powi(2) - n2 * n2)).sqrt();
        let got = ctx.norm(&t, 1.0).unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }

    #[test]
    fn elliptic_examples() {
        let ctx = TensorSobolev::new(ReprParams::principal(2.0), ReprParams::principal(3.0));
        let (g1, g2) = grids();
        assert_eq!(
            elliptic_defect(&TensorGridFunction::zeros(g1, g2), 1, &ctx).unwrap(),
            0.0
        );
        let v = p0();
        let r = elliptic_defect(&v, 1, &ctx).unwrap();
        assert!(r.is_finite() && r > 0.0);
        let rc = elliptic_defect(&v.scale(Complex64::new(3.0, -1.0)), 1, &ctx).unwrap();
        assert!((r - rc).abs() <= 1e-12 * r);
        assert!(elliptic_defect(&v, 3, &ctx).is_err());
    }
}
