//! Confining and interaction potentials: assumption gates and the
//! moment-parametrized convolution `F∗u`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::measures::MomentVector;
use crate::poly::{expand_against_moments, Polynomial};

/// First violated standing assumption on a potential.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialError {
    EmptyCoefficients,
    NonFinite { index: usize },
    /// (V-1)/(F-1): the potential must be even.
    OddCoefficient { index: usize, value: f64 },
    /// (V-1): degree ≥ 4, (F-1): degree ≥ 2.
    DegreeTooLow { degree: usize, min: usize },
    /// (V-2): `V'` must vanish exactly at `-a, 0, a` with a well at `a` and a
    /// hump at `0`.
    WrongCriticalPoints { count: usize, detail: String },
    /// (V-3): no `C4, C2 > 0` with `V(x) ≥ C4 x^4 - C2 x^2`.
    GrowthBoundFails,
    /// (V-5): `V''` must be convex.
    NonconvexSecondDerivative,
    /// (V-6)/(F-3): the potential must vanish at the origin.
    NonzeroAtOrigin { value: f64 },
    /// (F-2): `F` and `F''` must be convex.
    NotConvex { which: &'static str },
    MomentVectorTooShort { needed: usize, got: usize },
}

impl PotentialError {
    /// Label of the violated assumption, e.g. `"V-1"`.
    pub fn assumption(&self, confining: bool) -> &'static str {
        match self {
            Self::EmptyCoefficients | Self::NonFinite { .. } => "input",
            Self::OddCoefficient { .. } | Self::DegreeTooLow { .. } => {
                if confining {
                    "V-1"
                } else {
                    "F-1"
                }
            }
            Self::WrongCriticalPoints { .. } => "V-2",
            Self::GrowthBoundFails => "V-3",
            Self::NonconvexSecondDerivative => "V-5",
            Self::NonzeroAtOrigin { .. } => {
                if confining {
                    "V-6"
                } else {
                    "F-3"
                }
            }
            Self::NotConvex { .. } => "F-2",
            Self::MomentVectorTooShort { .. } => "moments",
        }
    }
}

impl fmt::Display for PotentialError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyCoefficients => write!(f, "empty coefficient list"),
            Self::NonFinite { index } => write!(f, "coefficient {index} is not finite"),
            Self::OddCoefficient { index, value } => {
                write!(f, "odd coefficient of x^{index} is {value}; the potential must be even")
            }
            Self::DegreeTooLow { degree, min } => {
                write!(f, "degree {degree} is below the required minimum {min}")
            }
            Self::WrongCriticalPoints { count, detail } => {
                write!(f, "derivative has {count} distinct real roots: {detail}")
            }
            Self::GrowthBoundFails => write!(f, "no quartic growth bound V(x) >= C4 x^4 - C2 x^2"),
            Self::NonconvexSecondDerivative => write!(f, "second derivative is not convex"),
            Self::NonzeroAtOrigin { value } => write!(f, "value at the origin is {value}, expected 0"),
            Self::NotConvex { which } => write!(f, "{which} is not convex"),
            Self::MomentVectorTooShort { needed, got } => {
                write!(f, "moment vector has {got} entries, convolution needs {needed}")
            }
        }
    }
}

impl core::error::Error for PotentialError {}

/// Even double-well confining potential `V`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfiningPotential {
    poly: Polynomial,
    d1: Polynomial,
    d2: Polynomial,
    a: f64,
    growth: (f64, f64),
}

impl ConfiningPotential {
    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    /// Location of the right well.
    pub fn well(&self) -> f64 {
        self.a
    }

    /// Half-degree `m`.
    pub fn half_degree(&self) -> usize {
        self.poly.degree() / 2
    }

    /// Witness `(C4, C2)` of the quartic growth bound.
    pub fn growth_witness(&self) -> (f64, f64) {
        self.growth
    }

    pub fn value(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }

    pub fn d1(&self) -> &Polynomial {
        &self.d1
    }

    pub fn d2(&self) -> &Polynomial {
        &self.d2
    }
}

/// Even convex interaction potential `F` with convex `F''`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionPotential {
    poly: Polynomial,
    d1: Polynomial,
    d2: Polynomial,
}

impl InteractionPotential {
    /// The non-interacting case `F ≡ 0`. It sits outside the degree gate of
    /// [`validate_interaction`] but every operation is well defined for it.
    pub fn none() -> Self {
        Self {
            poly: Polynomial::zero(),
            d1: Polynomial::zero(),
            d2: Polynomial::zero(),
        }
    }

    /// `F(x) = α x² / 2`.
    pub fn quadratic(alpha: f64) -> Result<Self, PotentialError> {
        validate_interaction(&[0.0, 0.0, 0.5 * alpha])
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn d1(&self) -> &Polynomial {
        &self.d1
    }

    pub fn d2(&self) -> &Polynomial {
        &self.d2
    }

    /// Half-degree `n` (0 for `F ≡ 0`).
    pub fn half_degree(&self) -> usize {
        self.poly.degree() / 2
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    /// (LIN): `F'` is linear.
    pub fn is_linear(&self) -> bool {
        self.poly.degree() <= 2
    }

    /// `F''(0)`.
    pub fn curvature_at_origin(&self) -> f64 {
        self.d2.eval(0.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }

    /// `x ↦ ∫ F(x - y) du(y)`.
    pub fn convolve(&self, m: &MomentVector) -> Result<Polynomial, PotentialError> {
        convolve_with_moments(&self.poly, m)
    }

    /// `x ↦ ∫ F'(x - y) du(y)`.
    pub fn convolve_d1(&self, m: &MomentVector) -> Result<Polynomial, PotentialError> {
        convolve_with_moments(&self.d1, m)
    }
}

/// (SYN): `V''(0) + F''(0) > 0`.
pub fn is_synchronized(v: &ConfiningPotential, f: &InteractionPotential) -> bool {
    v.d2.eval(0.0) + f.curvature_at_origin() > 0.0
}

/// `x ↦ ∫ p(x - y) du(y)`, expanded binomially with the moments of `u`. The
/// result has the degree of `p` and coefficients linear in the moments.
pub fn convolve_with_moments(
    p: &Polynomial,
    m: &MomentVector,
) -> Result<Polynomial, PotentialError> {
    let needed = p.degree() + 1;
    if p.is_zero() {
        return Ok(Polynomial::zero());
    }
    if m.len() < needed {
        return Err(PotentialError::MomentVectorTooShort {
            needed,
            got: m.len(),
        });
    }
    Ok(expand_against_moments(p, m.as_slice()))
}

fn check_coefficients(coeffs: &[f64]) -> Result<Polynomial, PotentialError> {
    if coeffs.is_empty() {
        return Err(PotentialError::EmptyCoefficients);
    }
    if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
        return Err(PotentialError::NonFinite { index });
    }
    if let Some(index) = coeffs
        .iter()
        .enumerate()
        .position(|(k, &c)| k % 2 == 1 && c != 0.0)
    {
        return Err(PotentialError::OddCoefficient {
            index,
            value: coeffs[index],
        });
    }
    Ok(Polynomial::new(coeffs.to_vec()))
}

const ROOT_TOL: f64 = 1e-9;

/// Validate an ascending coefficient list as a confining potential.
pub fn validate_confining(coeffs: &[f64]) -> Result<ConfiningPotential, PotentialError> {
    let poly = check_coefficients(coeffs)?;
    if poly.is_zero() || poly.degree() < 4 {
        return Err(PotentialError::DegreeTooLow {
            degree: poly.degree(),
            min: 4,
        });
    }
    let d1 = poly.deriv(1);
    let d2 = poly.deriv(2);

    let roots = d1.real_roots();
    let critical_err = |detail: &str| PotentialError::WrongCriticalPoints {
        count: roots.len(),
        detail: detail.into(),
    };
    if roots.len() != 3 {
        return Err(critical_err("expected exactly -a, 0, a"));
    }
    let scale = 1.0 + roots[2].abs();
    if roots[1].abs() > ROOT_TOL * scale || (roots[0] + roots[2]).abs() > ROOT_TOL * scale {
        return Err(critical_err("roots are not of the form -a, 0, a"));
    }
    let a = d1.newton_polish(roots[2], 50);
    if a <= 0.0 {
        return Err(critical_err("no positive well"));
    }
    if d2.eval(a) <= 0.0 {
        return Err(critical_err("V''(a) <= 0"));
    }
    if d2.eval(0.0) >= 0.0 {
        return Err(critical_err("V''(0) >= 0"));
    }

    let growth = growth_witness(&poly).ok_or(PotentialError::GrowthBoundFails)?;

    // V''(x) > 0 beyond the well follows from evenness and convexity of V''.
    if !poly.deriv(4).is_nonnegative(1e-12) {
        return Err(PotentialError::NonconvexSecondDerivative);
    }
    if poly.coeff(0) != 0.0 {
        return Err(PotentialError::NonzeroAtOrigin {
            value: poly.coeff(0),
        });
    }
    Ok(ConfiningPotential {
        poly,
        d1,
        d2,
        a,
        growth,
    })
}

/// Exhibit `(C4, C2)` with `V(x) ≥ C4 x^4 - C2 x^2` for all `x`.
///
/// `C4` is half the leading coefficient. With `h = V - C4 x^4` and `y = x²`,
/// `h = c0 + y k(y)`; `C2` is the slack `-min_{y≥0} k` plus a margin, and the
/// resulting polynomial is re-checked for nonnegativity.
fn growth_witness(v: &Polynomial) -> Option<(f64, f64)> {
    let lead = v.leading();
    if lead <= 0.0 || v.coeff(0) < 0.0 {
        return None;
    }
    let c4 = 0.5 * lead;
    let h = v.sub(&Polynomial::monomial(c4, 4));
    let k = Polynomial::new(
        (1..=h.degree() / 2)
            .map(|j| h.coeff(2 * j))
            .collect::<Vec<_>>(),
    );
    let reach = k.deriv(1).cauchy_bound().max(1.0) + 1.0;
    let (_, kmin) = k.min_on(0.0, reach);
    let slack = (-kmin).max(0.0);
    let c2 = slack + 1e-3 * (1.0 + slack);
    let bound = h.add(&Polynomial::monomial(c2, 2));
    bound.is_nonnegative(1e-12).then_some((c4, c2))
}

/// Validate an ascending coefficient list as an interaction potential.
pub fn validate_interaction(coeffs: &[f64]) -> Result<InteractionPotential, PotentialError> {
    let poly = check_coefficients(coeffs)?;
    if poly.is_zero() || poly.degree() < 2 {
        return Err(PotentialError::DegreeTooLow {
            degree: poly.degree(),
            min: 2,
        });
    }
    let d1 = poly.deriv(1);
    let d2 = poly.deriv(2);
    if !d2.is_nonnegative(1e-12) {
        return Err(PotentialError::NotConvex { which: "F" });
    }
    if !poly.deriv(4).is_nonnegative(1e-12) {
        return Err(PotentialError::NotConvex { which: "F''" });
    }
    if poly.coeff(0) != 0.0 {
        return Err(PotentialError::NonzeroAtOrigin {
            value: poly.coeff(0),
        });
    }
    Ok(InteractionPotential { poly, d1, d2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn standard_quartic_is_valid() {
        let v = validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.25]).unwrap();
        assert!((v.well() - 1.0).abs() < 1e-14);
        assert_eq!(v.half_degree(), 2);
        let (c4, c2) = v.growth_witness();
        assert!(c4 > 0.0 && c2 > 0.0);
        for i in -400..=400 {
            let x = i as f64 * 0.01;
            assert!(v.value(x) >= c4 * x.powi(4) - c2 * x * x - 1e-12);
        }
    }

    #[test]
    fn sextic_double_well() {
        // V' = x^5 - x, V''(1) = 4, V''(0) = -1
        let v = validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 1.0 / 6.0]).unwrap();
        assert!((v.well() - 1.0).abs() < 1e-13);
        assert_eq!(v.half_degree(), 3);
        assert!((v.d2().eval(1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_well_rejected() {
        let err = validate_confining(&[0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, PotentialError::DegreeTooLow { .. }));
        // degree is fine but there is only one critical point
        let err = validate_confining(&[0.0, 0.0, 1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, PotentialError::WrongCriticalPoints { count: 1, .. }));
        assert_eq!(err.assumption(true), "V-2");
    }

    #[test]
    fn odd_coefficient_rejected_first() {
        let err = validate_confining(&[0.0, 0.1, -0.5, 0.0, 0.25]).unwrap_err();
        assert_eq!(err, PotentialError::OddCoefficient { index: 1, value: 0.1 });
        assert_eq!(err.assumption(true), "V-1");
    }

    #[test]
    fn shifted_quartic_fails_at_origin() {
        let err = validate_confining(&[0.3, 0.0, -0.5, 0.0, 0.25]).unwrap_err();
        assert!(matches!(err, PotentialError::NonzeroAtOrigin { .. }));
        // a negative constant already breaks the growth bound at x = 0
        let err = validate_confining(&[-0.3, 0.0, -0.5, 0.0, 0.25]).unwrap_err();
        assert_eq!(err, PotentialError::GrowthBoundFails);
    }

    #[test]
    fn nonconvex_second_derivative() {
        // V = x^8 - x^6 + x^4/2 - x^2/2: V'/x is increasing in x² so the
        // double well survives, but V'''' dips below zero
        let coeffs = [0.0, 0.0, -0.5, 0.0, 0.5, 0.0, -1.0, 0.0, 1.0];
        let v = Polynomial::new(coeffs.to_vec());
        assert_eq!(v.deriv(1).real_roots().len(), 3, "test potential must pass V-2");
        assert!(!v.deriv(4).is_nonnegative(1e-12));
        let err = validate_confining(&coeffs).unwrap_err();
        assert_eq!(err, PotentialError::NonconvexSecondDerivative);
    }

    #[test]
    fn interaction_gates() {
        let f = validate_interaction(&[0.0, 0.0, 0.25]).unwrap();
        assert_eq!(f.half_degree(), 1);
        assert!(f.is_linear());
        assert_eq!(f.curvature_at_origin(), 0.5);

        let f = validate_interaction(&[0.0, 0.0, 0.0, 0.0, 0.25]).unwrap();
        assert_eq!(f.half_degree(), 2);
        assert!(!f.is_linear());

        let err = validate_interaction(&[0.0, 0.0, -1.0]).unwrap_err();
        assert_eq!(err, PotentialError::NotConvex { which: "F" });
        let err = validate_interaction(&[0.0]).unwrap_err();
        assert!(matches!(err, PotentialError::DegreeTooLow { .. }));
        let err = validate_interaction(&[0.1, 0.0, 1.0]).unwrap_err();
        assert_eq!(err.assumption(false), "F-3");
        // F convex but F'' = 12x^2 - 12 x^4 ... not convex
        let err = validate_interaction(&[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -0.01]).unwrap_err();
        assert!(matches!(err, PotentialError::NotConvex { .. }));
    }

    #[test]
    fn quadratic_convolution() {
        let f = InteractionPotential::quadratic(1.0).unwrap();
        let m = MomentVector::new(vec![1.0, 0.3, 0.5]);
        let c = f.convolve(&m).unwrap();
        // (x² - 2 m1 x + m2) / 2
        assert_eq!(c, Polynomial::new(vec![0.25, -0.3, 0.5]));
        // point mass at a: F∗δ_a(a) = F(0) = 0
        let a = 0.7;
        let dm = MomentVector::new(vec![1.0, a, a * a]);
        assert!(f.convolve(&dm).unwrap().eval(a).abs() < 1e-15);
    }

    #[test]
    fn quartic_against_gaussian_moments() {
        // oracle: ∫(x-y)^4 φ(y) dy = x^4 + 6x^2 + 3 for standard normal φ
        let f = validate_interaction(&[0.0, 0.0, 0.0, 0.0, 0.25]).unwrap();
        let m = MomentVector::new(vec![1.0, 0.0, 1.0, 0.0, 3.0]);
        let c = f.convolve(&m).unwrap();
        assert_eq!(c, Polynomial::new(vec![0.75, 0.0, 1.5, 0.0, 0.25]));
    }

    #[test]
    fn short_moment_vector() {
        let f = validate_interaction(&[0.0, 0.0, 0.0, 0.0, 0.25]).unwrap();
        let err = f.convolve(&MomentVector::new(vec![1.0, 0.0, 1.0])).unwrap_err();
        assert_eq!(err, PotentialError::MomentVectorTooShort { needed: 5, got: 3 });
    }

    #[test]
    fn synchronized_flag() {
        let v = validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.25]).unwrap();
        assert!(!is_synchronized(&v, &InteractionPotential::quadratic(0.5).unwrap()));
        assert!(is_synchronized(&v, &InteractionPotential::quadratic(1.5).unwrap()));
    }
}
