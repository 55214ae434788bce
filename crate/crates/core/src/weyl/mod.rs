//! Symbolic arithmetic in the rotation algebra `A_α`.
//!
//! Elements are finite combinations `Σ c_x W(x)` of Weyl symbols over the
//! group `Z×Z`, multiplied by the bicharacter twist
//! `W(x)W(y) = ω(x,y) W(x+y)` with
//! `ω((m,n),(p,q)) = exp(i(np − mq)α/2)` and `W(x)* = W(−x)`.
//!
//! Two coefficient rings are provided. [`Cyclotomic`] is exact and requires
//! a rational angle `α = 2πp/q`; every phase is then a `4q`-th root of
//! unity. `Complex64` works at any angle and carries roundoff.

pub mod cyclotomic;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

pub use cyclotomic::{Cyclotomic, CyclotomicField};

/// Relative pruning threshold for floating coefficients.
const FLOAT_PRUNE: f64 = 1e-15;
/// Tolerance for floating flip-fixedness.
const FLOAT_FIXED_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeylError {
    #[error("angle mismatch: {0} vs {1}")]
    AngleMismatch(Angle, Angle),
    #[error("coefficient ring does not support angle {0}")]
    UnsupportedAngle(Angle),
    #[error("invalid angle: {0}")]
    InvalidAngle(String),
}

/// Rotation angle `α`, either `2πp/q` (stored reduced) or a real number of radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Rational { p: i64, q: i64 },
    Real(f64),
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Angle {
    /// `α = 2πp/q`. The fraction is reduced but `p` is not taken modulo `q`:
    /// the cocycle depends on `α/2`, so `α` matters modulo `4π`.
    pub fn rational(p: i64, q: i64) -> Result<Self, WeylError> {
        if q == 0 {
            return Err(WeylError::InvalidAngle("denominator is zero".into()));
        }
        let g = gcd(p, q).max(1);
        let s = q.signum();
        Ok(Angle::Rational { p: s * p / g, q: s * q / g })
    }

    pub fn real(alpha: f64) -> Result<Self, WeylError> {
        if !alpha.is_finite() {
            return Err(WeylError::InvalidAngle(format!("{alpha} is not finite")));
        }
        Ok(Angle::Real(alpha))
    }

    pub fn radians(&self) -> f64 {
        match *self {
            Angle::Rational { p, q } => TAU * p as f64 / q as f64,
            Angle::Real(a) => a,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Angle::Rational { .. })
    }

    /// `exp(i·k·α/2)`.
    pub fn half_phase(&self, k: i64) -> Phase {
        match *self {
            Angle::Rational { p, q } => {
                // exp(iπkp/q) = exp(iπ·(2kp)/(2q))
                let e = (2 * k as i128 * p as i128).rem_euclid(4 * q as i128) as i64;
                Phase::Root { exponent: e, q }
            }
            Angle::Real(a) => Phase::Unit(Complex64::from_polar(1.0, k as f64 * a / 2.0)),
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Rational { p, q } => write!(f, "2π·{p}/{q}"),
            Angle::Real(a) => write!(f, "{a} rad"),
        }
    }
}

/// A point `(m, n)` of `Z×Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupPoint {
    pub m: i64,
    pub n: i64,
}

impl GroupPoint {
    pub const ORIGIN: GroupPoint = GroupPoint { m: 0, n: 0 };

    pub const fn new(m: i64, n: i64) -> Self {
        GroupPoint { m, n }
    }

    /// All points with `|m|, |n| <= r`.
    pub fn square(r: i64) -> impl Iterator<Item = GroupPoint> {
        (-r..=r).flat_map(move |m| (-r..=r).map(move |n| GroupPoint::new(m, n)))
    }
}

impl Add for GroupPoint {
    type Output = GroupPoint;
    fn add(self, o: GroupPoint) -> GroupPoint {
        GroupPoint::new(self.m + o.m, self.n + o.n)
    }
}

impl Sub for GroupPoint {
    type Output = GroupPoint;
    fn sub(self, o: GroupPoint) -> GroupPoint {
        GroupPoint::new(self.m - o.m, self.n - o.n)
    }
}

impl Neg for GroupPoint {
    type Output = GroupPoint;
    fn neg(self) -> GroupPoint {
        GroupPoint::new(-self.m, -self.n)
    }
}

impl fmt::Display for GroupPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

/// A unit complex number. `Root { exponent: e, q }` is `exp(iπe/(2q))`,
/// exponent kept modulo `4q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Root { exponent: i64, q: i64 },
    Unit(Complex64),
}

impl Phase {
    pub fn value(&self) -> Complex64 {
        match *self {
            Phase::Root { exponent, q } => {
                let n = 4 * q;
                let e = exponent.rem_euclid(n);
                Complex64::from_polar(1.0, PI * e as f64 / (2 * q) as f64)
            }
            Phase::Unit(z) => z,
        }
    }

    /// Exact equality for roots, bitwise for floating phases.
    pub fn is_one(&self) -> bool {
        match *self {
            Phase::Root { exponent, q } => exponent.rem_euclid(4 * q) == 0,
            Phase::Unit(z) => z == Complex64::new(1.0, 0.0),
        }
    }

    pub fn mul(&self, other: &Phase) -> Phase {
        match (*self, *other) {
            (Phase::Root { exponent: a, q }, Phase::Root { exponent: b, q: q2 }) if q == q2 => {
                Phase::Root { exponent: (a + b).rem_euclid(4 * q), q }
            }
            (a, b) => Phase::Unit(a.value() * b.value()),
        }
    }
}

/// The bicharacter `ω((m,n),(p,q)) = exp(i(np − mq)α/2)`.
pub fn cocycle(x: GroupPoint, y: GroupPoint, angle: &Angle) -> Phase {
    angle.half_phase(x.n * y.m - x.m * y.n)
}

/// Coefficient ring for [`WeylElement`].
pub trait Coeff: Clone + fmt::Debug + PartialEq + Send + Sync {
    /// Whether equality in this ring is exact.
    const EXACT: bool;

    fn supports(angle: &Angle) -> bool;
    fn from_gaussian(angle: &Angle, re: i64, im: i64) -> Self;
    fn from_phase(angle: &Angle, phase: &Phase) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    /// Whether the coefficient should be pruned from an element whose
    /// coefficient ℓ¹ norm is `scale`.
    fn is_negligible(&self, scale: f64) -> bool;
    fn to_complex(&self) -> Complex64;

    fn modulus(&self) -> f64 {
        self.to_complex().norm()
    }
}

impl Coeff for Complex64 {
    const EXACT: bool = false;

    fn supports(_: &Angle) -> bool {
        true
    }

    fn from_gaussian(_: &Angle, re: i64, im: i64) -> Self {
        Complex64::new(re as f64, im as f64)
    }

    fn from_phase(_: &Angle, phase: &Phase) -> Self {
        phase.value()
    }

    fn add(&self, o: &Self) -> Self {
        self + o
    }

    fn mul(&self, o: &Self) -> Self {
        self * o
    }

    fn neg(&self) -> Self {
        -self
    }

    fn conj(&self) -> Self {
        Complex64::conj(self)
    }

    fn is_negligible(&self, scale: f64) -> bool {
        self.norm() <= FLOAT_PRUNE * scale
    }

    fn to_complex(&self) -> Complex64 {
        *self
    }
}

fn field_for(angle: &Angle) -> Arc<CyclotomicField> {
    match *angle {
        Angle::Rational { q, .. } => CyclotomicField::get(4 * q as u64),
        Angle::Real(_) => panic!("cyclotomic coefficients need a rational angle"),
    }
}

impl Coeff for Cyclotomic {
    const EXACT: bool = true;

    fn supports(angle: &Angle) -> bool {
        angle.is_rational()
    }

    fn from_gaussian(angle: &Angle, re: i64, im: i64) -> Self {
        Cyclotomic::gaussian(&field_for(angle), re, im)
    }

    fn from_phase(angle: &Angle, phase: &Phase) -> Self {
        match *phase {
            Phase::Root { exponent, q } => {
                let field = field_for(angle);
                assert_eq!(field.order(), 4 * q as u64, "phase from a different angle");
                Cyclotomic::root(&field, exponent)
            }
            Phase::Unit(_) => panic!("floating phase has no exact cyclotomic form"),
        }
    }

    fn add(&self, o: &Self) -> Self {
        Cyclotomic::add(self, o)
    }

    fn mul(&self, o: &Self) -> Self {
        Cyclotomic::mul(self, o)
    }

    fn neg(&self) -> Self {
        Cyclotomic::neg(self)
    }

    fn conj(&self) -> Self {
        Cyclotomic::conj(self)
    }

    fn is_negligible(&self, _: f64) -> bool {
        self.is_zero()
    }

    fn to_complex(&self) -> Complex64 {
        Cyclotomic::to_complex(self)
    }
}

/// A finite combination `Σ c_x W(x)` at a fixed angle.
#[derive(Clone, PartialEq)]
pub struct WeylElement<C> {
    angle: Angle,
    terms: BTreeMap<GroupPoint, C>,
}

/// Exact elements (rational angle only).
pub type ExactElement = WeylElement<Cyclotomic>;
/// Floating elements.
pub type FloatElement = WeylElement<Complex64>;

impl<C: Coeff> WeylElement<C> {
    pub fn zero(angle: Angle) -> Result<Self, WeylError> {
        if !C::supports(&angle) {
            return Err(WeylError::UnsupportedAngle(angle));
        }
        Ok(WeylElement { angle, terms: BTreeMap::new() })
    }

    /// `c·W(x)`.
    pub fn monomial(angle: Angle, x: GroupPoint, c: C) -> Result<Self, WeylError> {
        let mut e = Self::zero(angle)?;
        e.accumulate(x, c);
        e.prune();
        Ok(e)
    }

    /// `W(x)` with unit coefficient.
    pub fn weyl(angle: Angle, x: GroupPoint) -> Result<Self, WeylError> {
        let one = Self::unit_coeff(&angle)?;
        Self::monomial(angle, x, one)
    }

    pub fn identity(angle: Angle) -> Result<Self, WeylError> {
        Self::weyl(angle, GroupPoint::ORIGIN)
    }

    pub fn from_terms<I>(angle: Angle, terms: I) -> Result<Self, WeylError>
    where
        I: IntoIterator<Item = (GroupPoint, C)>,
    {
        let mut e = Self::zero(angle)?;
        for (x, c) in terms {
            e.accumulate(x, c);
        }
        e.prune();
        Ok(e)
    }

    fn unit_coeff(angle: &Angle) -> Result<C, WeylError> {
        if !C::supports(angle) {
            return Err(WeylError::UnsupportedAngle(*angle));
        }
        Ok(C::from_gaussian(angle, 1, 0))
    }

    pub fn angle(&self) -> Angle {
        self.angle
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupPoint, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, x: GroupPoint) -> Option<&C> {
        self.terms.get(&x)
    }

    /// Number of nonzero terms.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest `max(|m|, |n|)` over the support, or `None` for zero.
    pub fn support_radius(&self) -> Option<i64> {
        self.terms.keys().map(|x| x.m.abs().max(x.n.abs())).max()
    }

    fn accumulate(&mut self, x: GroupPoint, c: C) {
        match self.terms.get_mut(&x) {
            Some(v) => *v = v.add(&c),
            None => {
                self.terms.insert(x, c);
            }
        }
    }

    fn prune(&mut self) {
        let scale: f64 = self.terms.values().map(Coeff::modulus).sum();
        self.terms.retain(|_, c| !c.is_negligible(scale));
    }

    fn check_angle(&self, other: &Self) -> Result<(), WeylError> {
        if self.angle != other.angle {
            return Err(WeylError::AngleMismatch(self.angle, other.angle));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, WeylError> {
        self.check_angle(other)?;
        let mut out = self.clone();
        for (x, c) in &other.terms {
            out.accumulate(*x, c.clone());
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, WeylError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_terms(|x, c| (x, c.neg()))
    }

    pub fn scale(&self, k: &C) -> Self {
        let mut out = self.map_terms(|x, c| (x, c.mul(k)));
        out.prune();
        out
    }

    fn map_terms(&self, f: impl Fn(GroupPoint, &C) -> (GroupPoint, C)) -> Self {
        WeylElement {
            angle: self.angle,
            terms: self.terms.iter().map(|(x, c)| f(*x, c)).collect(),
        }
    }

    /// Twisted product, bilinear in `W(x)W(y) = ω(x,y)W(x+y)`.
    pub fn mul(&self, other: &Self) -> Result<Self, WeylError> {
        self.check_angle(other)?;
        let mut out = WeylElement { angle: self.angle, terms: BTreeMap::new() };
        for (x, a) in &self.terms {
            for (y, b) in &other.terms {
                let w = C::from_phase(&self.angle, &cocycle(*x, *y, &self.angle));
                out.accumulate(*x + *y, a.mul(b).mul(&w));
            }
        }
        out.prune();
        Ok(out)
    }

    /// `(Σ c_x W(x))* = Σ conj(c_x) W(−x)`.
    pub fn adjoint(&self) -> Self {
        self.map_terms(|x, c| (-x, c.conj()))
    }

    /// The flip automorphism `σ(W(x)) = W(−x)`.
    pub fn flip(&self) -> Self {
        self.map_terms(|x, c| (-x, c.clone()))
    }

    /// Canonical trace: the `W(0,0)` coefficient.
    pub fn trace_coeff(&self) -> C {
        self.terms
            .get(&GroupPoint::ORIGIN)
            .cloned()
            .unwrap_or_else(|| C::from_gaussian(&self.angle, 0, 0))
    }

    pub fn trace(&self) -> Complex64 {
        self.trace_coeff().to_complex()
    }

    /// `Σ |c_x|`, an upper bound on the norm of every representation.
    pub fn one_norm(&self) -> f64 {
        self.terms.values().map(Coeff::modulus).sum()
    }

    /// Membership in the flip-fixed subalgebra.
    pub fn is_flip_fixed(&self) -> bool {
        let diff = self.flip().sub(self).expect("same angle");
        if C::EXACT {
            return diff.is_zero();
        }
        diff.one_norm() <= FLOAT_FIXED_TOL * self.one_norm().max(1.0)
    }
}

/// `D_x = W(x) + W(−x)`; at the origin `D_0 = 2·W(0,0)`.
pub fn d_element<C: Coeff>(x: GroupPoint, angle: Angle) -> Result<WeylElement<C>, WeylError> {
    WeylElement::weyl(angle, x)?.add(&WeylElement::weyl(angle, -x)?)
}

/// ℓ¹ norm of `D_x D_y − ω(x,y)D_{x+y} − ω(y,x)D_{x−y}`.
pub fn relation_residual<C: Coeff>(x: GroupPoint, y: GroupPoint, angle: Angle) -> Result<f64, WeylError> {
    let lhs = d_element::<C>(x, angle)?.mul(&d_element(y, angle)?)?;
    let w_xy = C::from_phase(&angle, &cocycle(x, y, &angle));
    let w_yx = C::from_phase(&angle, &cocycle(y, x, &angle));
    let rhs = d_element::<C>(x + y, angle)?
        .scale(&w_xy)
        .add(&d_element::<C>(x - y, angle)?.scale(&w_yx))?;
    Ok(lhs.sub(&rhs)?.one_norm())
}

impl<C: Coeff> fmt::Debug for WeylElement<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeylElement[{}]{{", self.angle)?;
        for (i, (x, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}: {c:?}")?;
        }
        write!(f, "}}")
    }
}
