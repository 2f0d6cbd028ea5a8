//! Classification cost families and their derivative quantities.
//!
//! Every cost is a strictly convex, twice-differentiable function of the
//! signed margin `z = l * (w' x + b)`. The solver layers only ever consume
//! the value, the first two derivatives, and their ratio.

use crate::error::{Error, Result};

/// Default transition half-width of the smooth hinge.
pub const DEFAULT_HINGE_RHO: f64 = 0.05;
/// Default curvature floor of the smooth hinge.
pub const DEFAULT_HINGE_EPS: f64 = 1e-4;

/// Classification cost family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `(1 - z)^2`
    Square,
    /// `exp(-z)`
    Exponential,
    /// `ln(1 + exp(-z))`
    Logistic,
    /// Twice-differentiable, strictly convex hinge surrogate. `rho` is the
    /// transition half-width around `z = 1`, `eps` the curvature floor
    /// outside the transition band.
    SmoothHinge { rho: f64, eps: f64 },
}

impl LossKind {
    /// Smooth hinge with validated parameters.
    pub fn smooth_hinge(rho: f64, eps: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "smooth hinge rho must be positive and finite, got {rho}"
            )));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "smooth hinge eps must be positive and finite, got {eps}"
            )));
        }
        Ok(LossKind::SmoothHinge { rho, eps })
    }

    /// Smooth hinge with the default band and floor.
    pub fn smooth_hinge_default() -> Self {
        LossKind::SmoothHinge {
            rho: DEFAULT_HINGE_RHO,
            eps: DEFAULT_HINGE_EPS,
        }
    }

    /// Short stable name used in CSV output and CLI flags.
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Square => "square",
            LossKind::Exponential => "exp",
            LossKind::Logistic => "logistic",
            LossKind::SmoothHinge { .. } => "hinge",
        }
    }
}

/// A validated, finite signed classifier margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin(f64);

impl Margin {
    pub fn new(z: f64) -> Result<Self> {
        if z.is_finite() {
            Ok(Margin(z))
        } else {
            Err(Error::NonFinite("margin z"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `exp(-z)` saturated so the result stays finite for any finite margin.
#[inline]
fn exp_neg(z: f64) -> f64 {
    (-z).min(700.0).exp()
}

/// Numerically stable sigmoid `1 / (1 + exp(-z))`.
#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossKind {
    /// Cost value.
    pub fn value(&self, z: Margin) -> f64 {
        let z = z.get();
        match *self {
            LossKind::Square => (1.0 - z) * (1.0 - z),
            LossKind::Exponential => exp_neg(z),
            LossKind::Logistic => {
                // ln(1 + e^-z) without overflow on either tail.
                if z >= 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            LossKind::SmoothHinge { rho, eps } => {
                let u = 1.0 - z;
                if u >= rho {
                    eps * u * u + u
                } else if u <= -rho {
                    eps * u * u
                } else {
                    3.0 * rho / 16.0 - u.powi(4) / (16.0 * rho.powi(3))
                        + 3.0 * u * u / (8.0 * rho)
                        + eps * u * u
                        + u / 2.0
                }
            }
        }
    }

    /// First derivative with respect to the margin.
    pub fn d1(&self, z: Margin) -> f64 {
        let z = z.get();
        match *self {
            LossKind::Square => 2.0 * (z - 1.0),
            LossKind::Exponential => -exp_neg(z),
            LossKind::Logistic => -sigmoid(-z),
            LossKind::SmoothHinge { rho, eps } => {
                let u = 1.0 - z;
                if u >= rho {
                    -2.0 * eps * u - 1.0
                } else if u <= -rho {
                    -2.0 * eps * u
                } else {
                    u.powi(3) / (4.0 * rho.powi(3)) - 3.0 * u / (4.0 * rho) - 2.0 * eps * u - 0.5
                }
            }
        }
    }

    /// Second derivative with respect to the margin; strictly positive.
    pub fn d2(&self, z: Margin) -> f64 {
        let z = z.get();
        match *self {
            LossKind::Square => 2.0,
            LossKind::Exponential => exp_neg(z),
            // sigmoid(z) * sigmoid(-z): both factors evaluate without
            // cancellation on either tail.
            LossKind::Logistic => sigmoid(z) * sigmoid(-z),
            LossKind::SmoothHinge { rho, eps } => {
                let u = 1.0 - z;
                if u.abs() <= rho {
                    -3.0 * u * u / (4.0 * rho.powi(3)) + 3.0 / (4.0 * rho) + 2.0 * eps
                } else {
                    2.0 * eps
                }
            }
        }
    }

    /// Ratio of first to second derivative. Uses closed forms where the
    /// naive quotient would lose precision on extreme margins.
    pub fn ratio12(&self, z: Margin) -> f64 {
        let zv = z.get();
        match *self {
            LossKind::Square => zv - 1.0,
            // -e^-z / e^-z, exact for all margins including underflow range.
            LossKind::Exponential => -1.0,
            LossKind::Logistic => -(1.0 + exp_neg(zv)),
            LossKind::SmoothHinge { .. } => self.d1(z) / self.d2(z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(z: f64) -> Margin {
        Margin::new(z).unwrap()
    }

    fn all_kinds() -> Vec<LossKind> {
        vec![
            LossKind::Square,
            LossKind::Exponential,
            LossKind::Logistic,
            LossKind::smooth_hinge_default(),
        ]
    }

    #[test]
    fn margin_rejects_non_finite() {
        assert!(Margin::new(f64::NAN).is_err());
        assert!(Margin::new(f64::INFINITY).is_err());
        assert!(Margin::new(1.0e308).is_ok());
    }

    #[test]
    fn value_known_points() {
        assert_eq!(LossKind::Square.value(m(1.0)), 0.0);
        assert_eq!(LossKind::Exponential.value(m(0.0)), 1.0);
        assert!((LossKind::Logistic.value(m(0.0)) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn d1_known_points() {
        assert_eq!(LossKind::Square.d1(m(0.0)), -2.0);
        assert_eq!(LossKind::Exponential.d1(m(0.0)), -1.0);
        // -1/(1+e^z) at z = 0.
        assert!((LossKind::Logistic.d1(m(0.0)) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn d2_known_points() {
        assert_eq!(LossKind::Square.d2(m(-3.7)), 2.0);
        assert_eq!(LossKind::Square.d2(m(12.0)), 2.0);
        // e^{-ln 4} = 1/4.
        assert!((LossKind::Exponential.d2(m(4.0f64.ln())) - 0.25).abs() < 1e-15);
        // e^0/(1+e^0)^2 = 1/4.
        assert!((LossKind::Logistic.d2(m(0.0)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ratio_known_points() {
        assert_eq!(LossKind::Square.ratio12(m(3.0)), 2.0);
        assert_eq!(LossKind::Exponential.ratio12(m(17.3)), -1.0);
        assert_eq!(LossKind::Exponential.ratio12(m(-800.0)), -1.0);
        // -(1+e^{-z}) at z = 0.
        assert!((LossKind::Logistic.ratio12(m(0.0)) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_agrees_with_quotient() {
        for kind in all_kinds() {
            for k in 0..200 {
                let z = -10.0 + 20.0 * (k as f64) / 199.0;
                let direct = kind.d1(m(z)) / kind.d2(m(z));
                let ratio = kind.ratio12(m(z));
                let denom = direct.abs().max(1e-12);
                assert!(
                    ((ratio - direct) / denom).abs() <= 1e-12,
                    "{kind:?} z={z}: ratio {ratio} vs quotient {direct}"
                );
            }
        }
    }

    /// Central finite differences of `value` reproduce `d1`, and of `d1`
    /// reproduce `d2`, on 100-point grids.
    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for kind in all_kinds() {
            for k in 0..100 {
                let z = -10.0 + 20.0 * (k as f64) / 99.0;
                let fd1 = (kind.value(m(z + h)) - kind.value(m(z - h))) / (2.0 * h);
                let an1 = kind.d1(m(z));
                assert!(
                    ((fd1 - an1) / an1.abs().max(1e-12)).abs() <= 1e-6,
                    "{kind:?} d1 at z={z}: fd {fd1} vs analytic {an1}"
                );
                let fd2 = (kind.d1(m(z + h)) - kind.d1(m(z - h))) / (2.0 * h);
                let an2 = kind.d2(m(z));
                assert!(
                    ((fd2 - an2) / an2.abs()).abs() <= 1e-6,
                    "{kind:?} d2 at z={z}: fd {fd2} vs analytic {an2}"
                );
            }
        }
    }

    #[test]
    fn second_derivative_strictly_positive() {
        for kind in all_kinds() {
            for k in 0..512 {
                let z = -10.0 + 20.0 * (k as f64) / 511.0;
                assert!(kind.d2(m(z)) > 0.0, "{kind:?} d2 not positive at z={z}");
            }
        }
    }

    #[test]
    fn value_nonnegative_and_vanishing_at_large_margin() {
        for kind in all_kinds() {
            for k in 0..512 {
                let z = -10.0 + 20.0 * (k as f64) / 511.0;
                assert!(kind.value(m(z)) >= 0.0, "{kind:?} negative at z={z}");
            }
        }
        for kind in [
            LossKind::Exponential,
            LossKind::Logistic,
            LossKind::smooth_hinge_default(),
        ] {
            assert!(kind.value(m(10.0)) <= 0.01, "{kind:?} too large at z=10");
        }
    }

    #[test]
    fn smooth_hinge_close_to_hinge() {
        let kind = LossKind::smooth_hinge(1e-2, 1e-6).unwrap();
        let rho = 1e-2;
        for k in 0..2001 {
            let z = -10.0 + 20.0 * (k as f64) / 2000.0;
            let hinge = (1.0 - z).max(0.0);
            let diff = (kind.value(m(z)) - hinge).abs();
            assert!(diff <= rho, "gap {diff} at z={z} exceeds rho");
        }
    }

    #[test]
    fn smooth_hinge_matches_exact_hinge_at_band_edges() {
        let rho = DEFAULT_HINGE_RHO;
        let eps = DEFAULT_HINGE_EPS;
        let kind = LossKind::SmoothHinge { rho, eps };
        // Outside the band the surrogate is eps*(1-z)^2 + max(0, 1-z).
        let left = kind.value(m(1.0 - rho));
        assert!((left - (eps * rho * rho + rho)).abs() < 1e-15);
        let right = kind.value(m(1.0 + rho));
        assert!((right - eps * rho * rho).abs() < 1e-15);
    }

    #[test]
    fn smooth_hinge_rejects_bad_params() {
        assert!(LossKind::smooth_hinge(0.0, 1e-4).is_err());
        assert!(LossKind::smooth_hinge(0.05, -1.0).is_err());
        assert!(LossKind::smooth_hinge(f64::NAN, 1e-4).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn convex_positive_and_consistent(z in -50.0f64..50.0) {
                for kind in all_kinds() {
                    let zv = m(z);
                    prop_assert!(kind.value(zv) >= 0.0);
                    prop_assert!(kind.d2(zv) > 0.0);
                    let quotient = kind.d1(zv) / kind.d2(zv);
                    let denom = quotient.abs().max(1e-9);
                    prop_assert!(((kind.ratio12(zv) - quotient) / denom).abs() <= 1e-9);
                }
            }
        }
    }
}
