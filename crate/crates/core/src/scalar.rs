//! Scalar traits and the concrete coefficient types.
//!
//! [`Ring`] is the minimal interface the chain-level algorithms need:
//! exact equality, ring arithmetic, and a unit test so Gaussian elimination
//! knows which pivots are invertible. [`Field`] adds inversion, [`IntRing`]
//! marks the rings where Smith normal form applies.

use num_traits::{One, Signed, Zero};

/// A commutative ring with exact arithmetic and decidable unit test.
pub trait Ring:
    Clone
    + Eq
    + std::fmt::Debug
    + std::fmt::Display
    + Zero
    + One
    + std::ops::Neg<Output = Self>
    + std::ops::Sub<Output = Self>
{
    fn from_i64(n: i64) -> Self;

    /// Whether the element has a multiplicative inverse.
    fn is_unit(&self) -> bool;

    /// The inverse of a unit. Panics on non-units.
    fn inv_unit(&self) -> Self;

    /// (−1)^k.
    fn neg_one_pow(k: u32) -> Self {
        if k % 2 == 0 {
            Self::one()
        } else {
            -Self::one()
        }
    }
}

/// A field: every nonzero element is a unit.
pub trait Field: Ring {
    fn inv(&self) -> Self {
        self.inv_unit()
    }
}

/// Rings where Smith normal form and integral homology make sense.
pub trait IntRing: Ring + num_integer::Integer + Signed {}

impl Ring for num_bigint::BigInt {
    fn from_i64(n: i64) -> Self {
        num_bigint::BigInt::from(n)
    }

    fn is_unit(&self) -> bool {
        self.abs().is_one()
    }

    fn inv_unit(&self) -> Self {
        assert!(Ring::is_unit(self), "not a unit: {self}");
        self.clone()
    }
}

impl IntRing for num_bigint::BigInt {}

impl Ring for i64 {
    fn from_i64(n: i64) -> Self {
        n
    }

    fn is_unit(&self) -> bool {
        *self == 1 || *self == -1
    }

    fn inv_unit(&self) -> Self {
        assert!(Ring::is_unit(self), "not a unit: {self}");
        *self
    }
}

impl IntRing for i64 {}

impl Ring for num_rational::BigRational {
    fn from_i64(n: i64) -> Self {
        num_rational::BigRational::from_integer(n.into())
    }

    fn is_unit(&self) -> bool {
        !self.is_zero()
    }

    fn inv_unit(&self) -> Self {
        self.recip()
    }
}

impl Field for num_rational::BigRational {}

/// The two-element field.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct F2(pub u8);

impl F2 {
    pub fn new(n: u8) -> Self {
        F2(n & 1)
    }
}

impl std::fmt::Display for F2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::ops::Add for F2 {
    type Output = F2;
    fn add(self, rhs: F2) -> F2 {
        F2(self.0 ^ rhs.0)
    }
}

impl std::ops::Sub for F2 {
    type Output = F2;
    fn sub(self, rhs: F2) -> F2 {
        F2(self.0 ^ rhs.0)
    }
}

impl std::ops::Mul for F2 {
    type Output = F2;
    fn mul(self, rhs: F2) -> F2 {
        F2(self.0 & rhs.0)
    }
}

impl std::ops::Neg for F2 {
    type Output = F2;
    fn neg(self) -> F2 {
        self
    }
}

impl Zero for F2 {
    fn zero() -> Self {
        F2(0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl One for F2 {
    fn one() -> Self {
        F2(1)
    }
    fn is_one(&self) -> bool {
        self.0 == 1
    }
}

impl Ring for F2 {
    fn from_i64(n: i64) -> Self {
        F2((n.rem_euclid(2)) as u8)
    }

    fn is_unit(&self) -> bool {
        self.0 == 1
    }

    fn inv_unit(&self) -> Self {
        assert!(self.0 == 1, "not a unit: 0");
        *self
    }
}

impl Field for F2 {}
