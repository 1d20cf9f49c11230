//! The sl(2,R) generators acting on grid functions, monomial Sobolev norms,
//! the horocycle Green operator and dilations.
//!
//! Two realisations of the generators are provided. The calligraphic family
//! acts in the unitarised model where the invariant measure is
//! `|xi|^{-1} d xi` for every series:
//!
//! ```text
//! V = -i xi,   X = -2 xi d/dxi,   U = i((nu^2 - 1)/(4 xi) - xi d^2/dxi^2)
//! ```
//!
//! The hat family is the plain Fourier transform of the line model:
//!
//! ```text
//! V = -i xi,   X = (nu - 1) - 2 xi d/dxi,   U = i((nu - 1) d/dxi - xi d^2/dxi^2)
//! ```
//!
//! Derivatives are taken in `u = log|xi|` with `xi d/dxi = d/du` and
//! `xi^2 d^2/dxi^2 = d^2/du^2 - d/du`.

pub mod leibniz;
pub mod stencil;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{l2nu_norm, l2nu_norm_samples, GridFunction, LogGrid};
use crate::repr::ReprParams;

pub use leibniz::{leibniz_expansion, verify_leibniz, LeftOp, LeibnizTerm, RightOp};

/// Largest total monomial order accepted by [`sobolev_norm`].
pub const DEFAULT_MAX_ORDER: usize = 8;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Calligraphic,
    Hat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    U,
    X,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldTag {
    pub family: Family,
    pub which: Field,
}

impl FieldTag {
    pub const fn new(family: Family, which: Field) -> Self {
        Self { family, which }
    }

    pub const fn cal(which: Field) -> Self {
        Self::new(Family::Calligraphic, which)
    }

    pub const fn hat(which: Field) -> Self {
        Self::new(Family::Hat, which)
    }
}

/// `U^a X^b V^c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Monomial {
    pub const fn new(a: usize, b: usize, c: usize) -> Self {
        Self { a, b, c }
    }

    pub fn order(&self) -> usize {
        self.a + self.b + self.c
    }
}

/// Which generators enter the Sobolev surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// All monomials `U^a X^b V^c` with `a + b + c <= s`.
    FullUXV,
    /// Monomials `X^b V^c`, the `(I - X^2 - V^2)^{s/2}` graph norm.
    XVOnly,
    /// `(I - U^2)^{s/2}`, exact for skew-adjoint `U`.
    UOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevSpec {
    pub s: f64,
    pub family: Family,
    pub basis: Basis,
    /// Regularity-loss parameter, used by the map right-hand side.
    pub epsilon: f64,
}

impl SobolevSpec {
    pub fn new(s: f64, family: Family, basis: Basis) -> Self {
        Self {
            s,
            family,
            basis,
            epsilon: 0.5,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_order(mut self, s: f64) -> Self {
        self.s = s;
        self
    }
}

/// Apply one generator to every branch of `f`.
pub fn apply_field(f: &GridFunction, tag: FieldTag, p: &ReprParams) -> Result<GridFunction> {
    let grid = *f.grid();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    apply_field_samples(&grid, f.samples(), &mut out, tag, p)?;
    Ok(GridFunction::from_parts(grid, out))
}

/// Slice-level kernel behind [`apply_field`]; `input` and `out` hold the
/// samples of all branches in storage order.
pub(crate) fn apply_field_samples(
    grid: &LogGrid,
    input: &[Complex64],
    out: &mut [Complex64],
    tag: FieldTag,
    p: &ReprParams,
) -> Result<()> {
    let n = grid.n_per_branch();
    if tag.which != Field::V && n < stencil::MIN_POINTS {
        return Err(Error::GridTooSmall {
            points: n,
            needed: stencil::MIN_POINTS,
        });
    }
    let h = grid.h();
    let nu = p.nu;
    let mut d1 = vec![Complex64::new(0.0, 0.0); n];
    let mut d2 = vec![Complex64::new(0.0, 0.0); n];
    for (b, &sign) in grid.branch_signs().iter().enumerate() {
        let fb = &input[b * n..(b + 1) * n];
        let ob = &mut out[b * n..(b + 1) * n];
        match (tag.family, tag.which) {
            (_, Field::V) => {
                for j in 0..n {
                    let xi = sign * grid.u(j).exp();
                    ob[j] = fb[j] * Complex64::new(0.0, -xi);
                }
            }
            (Family::Calligraphic, Field::X) => {
                stencil::d1(fb, h, &mut d1);
                for j in 0..n {
                    ob[j] = d1[j] * -2.0;
                }
            }
            (Family::Hat, Field::X) => {
                stencil::d1(fb, h, &mut d1);
                let shift = nu - 1.0;
                for j in 0..n {
                    ob[j] = fb[j] * shift - d1[j] * 2.0;
                }
            }
            (Family::Calligraphic, Field::U) => {
                stencil::d1_d2(fb, h, &mut d1, &mut d2);
                let c = (nu * nu - 1.0) / 4.0;
                for j in 0..n {
                    let inv_xi = sign * (-grid.u(j)).exp();
                    ob[j] = I * (fb[j] * c - (d2[j] - d1[j])) * inv_xi;
                }
            }
            (Family::Hat, Field::U) => {
                stencil::d1_d2(fb, h, &mut d1, &mut d2);
                let c = nu - 1.0;
                for j in 0..n {
                    let inv_xi = sign * (-grid.u(j)).exp();
                    ob[j] = I * (d1[j] * c - (d2[j] - d1[j])) * inv_xi;
                }
            }
        }
    }
    Ok(())
}

/// `U^a X^b V^c f`: `V` acts first, then `X`, then `U`.
pub fn apply_monomial(
    f: &GridFunction,
    m: Monomial,
    family: Family,
    p: &ReprParams,
) -> Result<GridFunction> {
    if m.order() > DEFAULT_MAX_ORDER {
        return Err(Error::OrderOverflow {
            order: m.order() as f64,
            max: DEFAULT_MAX_ORDER,
        });
    }
    let mut g = f.clone();
    for (which, times) in [(Field::V, m.c), (Field::X, m.b), (Field::U, m.a)] {
        for _ in 0..times {
            g = apply_field(&g, FieldTag::new(family, which), p)?;
        }
    }
    Ok(g)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Squared surrogate norm at integer order `n`.
fn integer_norm_sq(
    f: &GridFunction,
    n: usize,
    family: Family,
    basis: Basis,
    p: &ReprParams,
) -> Result<f64> {
    let tag = |w| FieldTag::new(family, w);
    let sq = |g: &GridFunction| l2nu_norm(g).powi(2);
    let mut acc = 0.0;
    match basis {
        Basis::UOnly => {
            let mut g = f.clone();
            for j in 0..=n {
                if j > 0 {
                    g = apply_field(&g, tag(Field::U), p)?;
                }
                acc += binomial(n, j) * sq(&g);
            }
        }
        Basis::FullUXV | Basis::XVOnly => {
            let with_u = basis == Basis::FullUXV;
            let mut vc = f.clone();
            for c in 0..=n {
                if c > 0 {
                    vc = apply_field(&vc, tag(Field::V), p)?;
                }
                let mut xb = vc.clone();
                for b in 0..=n - c {
                    if b > 0 {
                        xb = apply_field(&xb, tag(Field::X), p)?;
                    }
                    acc += sq(&xb);
                    if with_u {
                        let mut ua = xb.clone();
                        for _ in 1..=n - c - b {
                            ua = apply_field(&ua, tag(Field::U), p)?;
                            acc += sq(&ua);
                        }
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Monomial surrogate of the order-`s` Sobolev norm.
///
/// Integer orders sum squared monomial norms; a fractional order
/// `s = k + theta` uses the geometric mean `|f|_k^{1-theta} |f|_{k+1}^theta`.
pub fn sobolev_norm(f: &GridFunction, spec: &SobolevSpec, p: &ReprParams) -> Result<f64> {
    let s = spec.s;
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
    let n_lo = integer_norm_sq(f, lo, spec.family, spec.basis, p)?.sqrt();
    if theta == 0.0 {
        return Ok(n_lo);
    }
    let n_hi = integer_norm_sq(f, hi, spec.family, spec.basis, p)?.sqrt();
    if n_lo == 0.0 || n_hi == 0.0 {
        return Ok(0.0);
    }
    Ok((n_lo.ln() * (1.0 - theta) + n_hi.ln() * theta).exp())
}

/// Green operator of the horocycle flow: `G(xi) = i g(xi) / xi`.
pub fn green_v(g: &GridFunction) -> GridFunction {
    g.map_with_xi(|xi, z| z * I / xi)
}

/// `f_lambda(xi) = f(lambda xi)`, a shift by `log lambda` in `u`.
///
/// Shifts by a whole number of cells move samples exactly; other shifts
/// resample with the local cubic.
pub fn scale_arg(f: &GridFunction, lambda: f64) -> Result<GridFunction> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scale factor {lambda} must be positive"
        )));
    }
    let grid = *f.grid();
    let n = grid.n_per_branch();
    let h = grid.h();
    let shift = lambda.ln() / h;
    let k = shift.round();
    let integer = (shift - k).abs() < 1e-9;

    // Support check: the image of the support has to stay on the grid.
    let floor = 1e-14 * f.max_abs();
    for b in 0..grid.n_branches() {
        let fb = f.branch(b);
        let first = fb.iter().position(|z| z.norm() > floor);
        let last = fb.iter().rposition(|z| z.norm() > floor);
        if let (Some(lo), Some(hi)) = (first, last) {
            // Destination node j reads source position j + shift.
            let dst_lo = lo as f64 - shift;
            let dst_hi = hi as f64 - shift;
            if dst_lo < -1e-9 || dst_hi > (n - 1) as f64 + 1e-9 {
                let xi = grid.branch_signs()[b] * (grid.u(lo) - lambda.ln()).exp();
                return Err(Error::OutOfRange { xi });
            }
        }
    }

    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for b in 0..grid.n_branches() {
        let fb = f.branch(b);
        let ob = &mut out[b * n..(b + 1) * n];
        for (j, o) in ob.iter_mut().enumerate() {
            let src = j as f64 + shift;
            if src < -1e-9 || src > (n - 1) as f64 + 1e-9 {
                continue;
            }
            if integer {
                let s = j as i64 + k as i64;
                if (0..n as i64).contains(&s) {
                    *o = fb[s as usize];
                }
            } else {
                let xi = grid.branch_signs()[b] * (grid.u_min() + src * h).exp();
                *o = crate::grid::interpolate_at(f, xi)?;
            }
        }
    }
    Ok(GridFunction::from_parts(grid, out))
}

/// Right-hand side of a commutation relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rhs {
    Zero,
    Field(Complex64, FieldTag),
}

/// `|(AB - BA - C) f| / |f|_2`, with `|f|_2` the order-2 surrogate norm in
/// the family of `A`.
pub fn commutator_defect(
    a: FieldTag,
    b: FieldTag,
    rhs: Rhs,
    f: &GridFunction,
    p: &ReprParams,
) -> Result<f64> {
    let ab = apply_field(&apply_field(f, b, p)?, a, p)?;
    let ba = apply_field(&apply_field(f, a, p)?, b, p)?;
    let mut d = &ab - &ba;
    if let Rhs::Field(coef, tag) = rhs {
        d = &d - &apply_field(f, tag, p)?.scale(coef);
    }
    let reference = sobolev_norm(f, &SobolevSpec::new(2.0, a.family, Basis::FullUXV), p)?;
    if reference == 0.0 {
        return Ok(0.0);
    }
    Ok(l2nu_norm_samples(d.grid(), d.samples()) / reference)
}

/// The three calligraphic relations and the three base relations realised
/// by the hat family, as `(A, B, C)` with `[A, B] = C`.
pub fn commutation_relations() -> Vec<(&'static str, FieldTag, FieldTag, Rhs)> {
    use Field::*;
    let one = Complex64::new(1.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    vec![
        (
            "[cU,cV]=cX",
            FieldTag::cal(U),
            FieldTag::cal(V),
            Rhs::Field(one, FieldTag::cal(X)),
        ),
        (
            "[cV,cX]=2cV",
            FieldTag::cal(V),
            FieldTag::cal(X),
            Rhs::Field(two, FieldTag::cal(V)),
        ),
        (
            "[cU,cX]=-2cU",
            FieldTag::cal(U),
            FieldTag::cal(X),
            Rhs::Field(-two, FieldTag::cal(U)),
        ),
        (
            "[U,V]=X",
            FieldTag::hat(U),
            FieldTag::hat(V),
            Rhs::Field(one, FieldTag::hat(X)),
        ),
        (
            "[X,U]=2U",
            FieldTag::hat(X),
            FieldTag::hat(U),
            Rhs::Field(two, FieldTag::hat(U)),
        ),
        (
            "[X,V]=-2V",
            FieldTag::hat(X),
            FieldTag::hat(V),
            Rhs::Field(-two, FieldTag::hat(V)),
        ),
    ]
}
