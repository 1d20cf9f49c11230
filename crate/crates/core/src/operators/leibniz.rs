//! Product rules for the calligraphic `X` and `U`.
//!
//! ```text
//! X(g1 g2) = (X g1) g2 + g1 (X g2)
//! U(g1 g2) = (U g1) g2 + i (X g1)(d/dxi g2) - i g1 (xi d^2/dxi^2 g2)
//! ```
//!
//! Applying these recursively expands `U^beta X^alpha (g1 g2)` into a sum of
//! products of words acting on each factor, with Gaussian-integer
//! coefficients. The expansion is evaluated numerically and compared with
//! the direct application.

use std::collections::BTreeMap;

use num_complex::{Complex, Complex64};

use super::{apply_field, stencil, Field, FieldTag};
use crate::error::{Error, Result};
use crate::grid::{l2nu_norm, GridFunction};
use crate::repr::ReprParams;

/// Operator acting on the first factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LeftOp {
    U,
    X,
}

/// Operator acting on the second factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RightOp {
    X,
    /// `d/dxi`
    D,
    /// `xi d^2/dxi^2`
    S,
}

/// `coef * (left word g1) * (right word g2)`; words list operators in the
/// order they are applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeibnizTerm {
    pub coef: Complex<i64>,
    pub left: Vec<LeftOp>,
    pub right: Vec<RightOp>,
}

type Key = (Vec<LeftOp>, Vec<RightOp>);

fn push(map: &mut BTreeMap<Key, Complex<i64>>, key: Key, c: Complex<i64>) {
    let e = map.entry(key).or_insert(Complex::new(0, 0));
    *e += c;
}

/// Expansion of `U^beta X^alpha (g1 g2)` generated by the single-step rules.
pub fn leibniz_expansion(alpha: usize, beta: usize) -> Vec<LeibnizTerm> {
    let mut terms: BTreeMap<Key, Complex<i64>> = BTreeMap::new();
    terms.insert((vec![], vec![]), Complex::new(1, 0));
    let i = Complex::new(0i64, 1);
    for _ in 0..alpha {
        let mut next = BTreeMap::new();
        for ((l, r), c) in terms {
            let mut l1 = l.clone();
            l1.push(LeftOp::X);
            push(&mut next, (l1, r.clone()), c);
            let mut r1 = r;
            r1.push(RightOp::X);
            push(&mut next, (l, r1), c);
        }
        terms = next;
    }
    for _ in 0..beta {
        let mut next = BTreeMap::new();
        for ((l, r), c) in terms {
            let mut lu = l.clone();
            lu.push(LeftOp::U);
            push(&mut next, (lu, r.clone()), c);

            let mut lx = l.clone();
            lx.push(LeftOp::X);
            let mut rd = r.clone();
            rd.push(RightOp::D);
            push(&mut next, (lx, rd), c * i);

            let mut rs = r;
            rs.push(RightOp::S);
            push(&mut next, (l, rs), -c * i);
        }
        terms = next;
    }
    terms
        .into_iter()
        .filter(|(_, c)| *c != Complex::new(0, 0))
        .map(|((left, right), coef)| LeibnizTerm { coef, left, right })
        .collect()
}

fn apply_right(g: &GridFunction, op: RightOp, p: &ReprParams) -> Result<GridFunction> {
    match op {
        RightOp::X => apply_field(g, FieldTag::cal(Field::X), p),
        RightOp::D | RightOp::S => {
            let grid = *g.grid();
            let n = grid.n_per_branch();
            if n < stencil::MIN_POINTS {
                return Err(Error::GridTooSmall {
                    points: n,
                    needed: stencil::MIN_POINTS,
                });
            }
            let mut out = Vec::with_capacity(grid.len());
            let mut d1 = vec![Complex64::new(0.0, 0.0); n];
            let mut d2 = vec![Complex64::new(0.0, 0.0); n];
            for (b, &sign) in grid.branch_signs().iter().enumerate() {
                stencil::d1_d2(g.branch(b), grid.h(), &mut d1, &mut d2);
                for j in 0..n {
                    let inv_xi = sign * (-grid.u(j)).exp();
                    out.push(match op {
                        // d/dxi = xi^{-1} d/du
                        RightOp::D => d1[j] * inv_xi,
                        // xi d^2/dxi^2 = xi^{-1}(d^2/du^2 - d/du)
                        _ => (d2[j] - d1[j]) * inv_xi,
                    });
                }
            }
            Ok(GridFunction::from_parts(grid, out))
        }
    }
}

/// Relative discrepancy between `U^beta X^alpha (g1 g2)` computed directly
/// and through the recursive product-rule expansion.
pub fn verify_leibniz(
    g1: &GridFunction,
    g2: &GridFunction,
    alpha: usize,
    beta: usize,
    p: &ReprParams,
) -> Result<f64> {
    if alpha + beta > 4 {
        return Err(Error::InvalidParameter(format!(
            "alpha + beta = {} exceeds 4",
            alpha + beta
        )));
    }
    let mut direct = g1.mul_pointwise(g2);
    for _ in 0..alpha {
        direct = apply_field(&direct, FieldTag::cal(Field::X), p)?;
    }
    for _ in 0..beta {
        direct = apply_field(&direct, FieldTag::cal(Field::U), p)?;
    }

    let mut expanded = GridFunction::zeros(*g1.grid());
    for term in leibniz_expansion(alpha, beta) {
        let mut a = g1.clone();
        for op in &term.left {
            let which = match op {
                LeftOp::U => Field::U,
                LeftOp::X => Field::X,
            };
            a = apply_field(&a, FieldTag::cal(which), p)?;
        }
        let mut b = g2.clone();
        for &op in &term.right {
            b = apply_right(&b, op, p)?;
        }
        let coef = Complex64::new(term.coef.re as f64, term.coef.im as f64);
        expanded = &expanded + &a.mul_pointwise(&b).scale(coef);
    }

    let scale = l2nu_norm(&direct);
    let diff = l2nu_norm(&(&direct - &expanded));
    if diff == 0.0 {
        return Ok(0.0);
    }
    Ok(diff / scale)
}
