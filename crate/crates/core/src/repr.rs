//! Irreducible unitary representation parameters.
//!
//! An irreducible unitary representation of SL(2,R) is labelled by the
//! eigenvalue `mu` of the Casimir operator. We work with `nu = sqrt(1 - mu)`
//! on the principal branch, so that `nu` is purely imaginary with
//! nonnegative imaginary part for the principal series and real and
//! nonnegative otherwise.

use num_complex::Complex64;

/// The four families of nontrivial irreducible unitary representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Series {
    /// `mu > 1`, `nu` purely imaginary.
    Principal,
    /// `0 < mu < 1`, `nu` in `(0, 1)`.
    Complementary,
    /// `mu = 1`, `nu = 0`.
    MockDiscrete,
    /// `mu <= 0`, `nu >= 1` real.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprParams {
    pub mu: f64,
    pub nu: Complex64,
    pub series: Series,
}

impl ReprParams {
    /// Principal series member with `nu = i * nu_abs`.
    pub fn principal(nu_abs: f64) -> Self {
        classify_series(1.0 + nu_abs * nu_abs)
    }

    /// Representation with real parameter `nu >= 0`.
    pub fn from_real_nu(nu: f64) -> Self {
        let mut p = classify_series(1.0 - nu * nu);
        // Recover nu exactly instead of through sqrt(1 - (1 - nu^2)).
        p.nu = Complex64::new(nu, 0.0);
        p
    }

    /// `|nu|`.
    pub fn nu_abs(&self) -> f64 {
        self.nu.norm()
    }
}

/// Classify a Casimir eigenvalue and compute `nu = sqrt(1 - mu)`.
///
/// Total on finite reals.
pub fn classify_series(mu: f64) -> ReprParams {
    let d = 1.0 - mu;
    let nu = if d >= 0.0 {
        Complex64::new(d.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-d).sqrt())
    };
    let series = if mu > 1.0 {
        Series::Principal
    } else if mu == 1.0 {
        Series::MockDiscrete
    } else if mu > 0.0 {
        Series::Complementary
    } else {
        Series::Discrete
    };
    ReprParams { mu, nu, series }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let p = classify_series(5.0);
        assert_eq!(p.series, Series::Principal);
        assert_eq!(p.nu, Complex64::new(0.0, 2.0));

        let p = classify_series(1.0);
        assert_eq!(p.series, Series::MockDiscrete);
        assert_eq!(p.nu, Complex64::new(0.0, 0.0));

        let p = classify_series(0.75);
        assert_eq!(p.series, Series::Complementary);
        assert_eq!(p.nu, Complex64::new(0.5, 0.0));

        let p = classify_series(-3.0);
        assert_eq!(p.series, Series::Discrete);
        assert_eq!(p.nu, Complex64::new(2.0, 0.0));
    }

    #[test]
    fn mu_round_trip() {
        for nu in [
            Complex64::new(0.0, 2.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(2.0, 0.0),
        ] {
            let mu = (Complex64::new(1.0, 0.0) - nu * nu).re;
            let p = classify_series(mu);
            assert!((p.nu - nu).norm() <= 1e-12 * nu.norm().max(1.0));
            let back = 1.0 - (p.nu * p.nu).re;
            assert!((back - mu).abs() <= 1e-12 * mu.abs().max(1.0));
        }
    }

    #[test]
    fn boundary_between_complementary_and_discrete() {
        assert_eq!(classify_series(0.0).series, Series::Discrete);
        assert_eq!(classify_series(1e-9).series, Series::Complementary);
        assert_eq!(classify_series(1.0 + 1e-9).series, Series::Principal);
    }

    #[test]
    fn principal_constructor() {
        let p = ReprParams::principal(8.0);
        assert_eq!(p.series, Series::Principal);
        assert!((p.nu - Complex64::new(0.0, 8.0)).norm() < 1e-12);
    }
}
