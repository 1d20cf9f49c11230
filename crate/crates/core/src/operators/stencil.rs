//! Fourth-order finite differences in the log coordinate `u`.
//!
//! Interior nodes use the five-point central stencils; the two nodes at
//! each end use one-sided stencils of the same order.

use num_complex::Complex64;

/// Minimum branch length supporting the one-sided second-derivative stencil.
pub const MIN_POINTS: usize = 6;

const D1_LEFT0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_LEFT1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const D2_LEFT0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_LEFT1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

#[inline]
fn dot(f: &[Complex64], w: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (z, &c) in f.iter().zip(w) {
        acc += z * c;
    }
    acc
}

#[inline]
fn dot_rev(f: &[Complex64], end: usize, w: &[f64]) -> Complex64 {
    // Mirror of `dot` reading f[end], f[end-1], ...
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &c) in w.iter().enumerate() {
        acc += f[end - i] * c;
    }
    acc
}

/// d f / du at node `j`.
pub fn d1_at(f: &[Complex64], j: usize, h: f64) -> Complex64 {
    let n = f.len();
    let s = 1.0 / (12.0 * h);
    let v = if j >= 2 && j + 2 < n {
        (f[j - 2] - f[j - 1] * 8.0 + f[j + 1] * 8.0 - f[j + 2]) * 1.0
    } else if j == 0 {
        dot(&f[0..5], &D1_LEFT0)
    } else if j == 1 {
        dot(&f[0..5], &D1_LEFT1)
    } else if j + 1 == n {
        -dot_rev(f, n - 1, &D1_LEFT0)
    } else {
        -dot_rev(f, n - 1, &D1_LEFT1)
    };
    v * s
}

/// d^2 f / du^2 at node `j`.
pub fn d2_at(f: &[Complex64], j: usize, h: f64) -> Complex64 {
    let n = f.len();
    let s = 1.0 / (12.0 * h * h);
    let v = if j >= 2 && j + 2 < n {
        -f[j - 2] + f[j - 1] * 16.0 - f[j] * 30.0 + f[j + 1] * 16.0 - f[j + 2]
    } else if j == 0 {
        dot(&f[0..6], &D2_LEFT0)
    } else if j == 1 {
        dot(&f[0..6], &D2_LEFT1)
    } else if j + 1 == n {
        dot_rev(f, n - 1, &D2_LEFT0)
    } else {
        dot_rev(f, n - 1, &D2_LEFT1)
    };
    v * s
}

/// First and second `u`-derivatives of a whole branch.
pub fn d1_d2(f: &[Complex64], h: f64, d1: &mut [Complex64], d2: &mut [Complex64]) {
    let n = f.len();
    debug_assert!(n >= MIN_POINTS);
    let s1 = 1.0 / (12.0 * h);
    let s2 = 1.0 / (12.0 * h * h);
    for j in 2..n - 2 {
        let (a, b, c, d, e) = (f[j - 2], f[j - 1], f[j], f[j + 1], f[j + 2]);
        d1[j] = (a - b * 8.0 + d * 8.0 - e) * s1;
        d2[j] = (-a + b * 16.0 - c * 30.0 + d * 16.0 - e) * s2;
    }
    for j in [0, 1, n - 2, n - 1] {
        d1[j] = d1_at(f, j, h);
        d2[j] = d2_at(f, j, h);
    }
}

/// First `u`-derivative of a whole branch.
pub fn d1(f: &[Complex64], h: f64, out: &mut [Complex64]) {
    let n = f.len();
    debug_assert!(n >= MIN_POINTS);
    let s1 = 1.0 / (12.0 * h);
    for j in 2..n - 2 {
        out[j] = (f[j - 2] - f[j - 1] * 8.0 + f[j + 1] * 8.0 - f[j + 2]) * s1;
    }
    for j in [0, 1, n - 2, n - 1] {
        out[j] = d1_at(f, j, h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: usize, h: f64, deg: i32) -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::new((j as f64 * h).powi(deg), 0.0))
            .collect()
    }

    #[test]
    fn exact_on_quartics() {
        // Fourth-order stencils differentiate polynomials of degree <= 4 exactly
        // (up to rounding), including at the one-sided boundary nodes.
        let (n, h) = (12, 0.1);
        let f = poly(n, h, 4);
        let mut a = vec![Complex64::default(); n];
        let mut b = vec![Complex64::default(); n];
        d1_d2(&f, h, &mut a, &mut b);
        for j in 0..n {
            let x = j as f64 * h;
            assert!((a[j].re - 4.0 * x.powi(3)).abs() < 1e-10, "d1 at {j}");
            assert!((b[j].re - 12.0 * x * x).abs() < 1e-9, "d2 at {j}");
        }
    }

    #[test]
    fn constants_have_zero_derivative() {
        let f = vec![Complex64::new(3.5, -1.0); 10];
        let mut a = vec![Complex64::default(); 10];
        let mut b = vec![Complex64::default(); 10];
        d1_d2(&f, 0.3, &mut a, &mut b);
        assert!(a.iter().chain(&b).all(|z| z.norm() < 1e-12));
    }
}
