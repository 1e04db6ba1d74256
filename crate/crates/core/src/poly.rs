//! Laurent polynomials in q with integer coefficients, enough for graded
//! Euler characteristics and the Jones polynomial.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::Int;

/// A Laurent polynomial Σ c_e · q^e, keyed by exponent. Stored coefficients
/// are nonzero.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Laurent {
    coeffs: BTreeMap<i64, Int>,
}

impl Laurent {
    pub fn zero() -> Self {
        Laurent::default()
    }

    pub fn one() -> Self {
        Laurent::monomial(Int::from(1), 0)
    }

    pub fn monomial(coeff: Int, exp: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        if !coeff.is_zero() {
            coeffs.insert(exp, coeff);
        }
        Laurent { coeffs }
    }

    /// q + q⁻¹, the value of an unknotted circle.
    pub fn circle() -> Self {
        Laurent::monomial(Int::from(1), -1) + Laurent::monomial(Int::from(1), 1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, exp: i64) -> Int {
        self.coeffs.get(&exp).cloned().unwrap_or_else(Int::zero)
    }

    /// Exponent/coefficient pairs in ascending exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&i64, &Int)> {
        self.coeffs.iter()
    }

    pub fn add_term(&mut self, coeff: Int, exp: i64) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(exp).or_insert_with(Int::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.coeffs.remove(&exp);
        }
    }

    /// Substitute q ↦ q⁻¹.
    pub fn subst_inv(&self) -> Laurent {
        let mut out = Laurent::zero();
        for (e, c) in &self.coeffs {
            out.add_term(c.clone(), -e);
        }
        out
    }

    pub fn pow(&self, n: u32) -> Laurent {
        let mut out = Laurent::one();
        for _ in 0..n {
            out = out * self.clone();
        }
        out
    }
}

impl std::ops::Add for Laurent {
    type Output = Laurent;
    fn add(mut self, rhs: Laurent) -> Laurent {
        for (e, c) in rhs.coeffs {
            self.add_term(c, e);
        }
        self
    }
}

impl std::ops::Sub for Laurent {
    type Output = Laurent;
    fn sub(mut self, rhs: Laurent) -> Laurent {
        for (e, c) in rhs.coeffs {
            self.add_term(-c, e);
        }
        self
    }
}

impl std::ops::Neg for Laurent {
    type Output = Laurent;
    fn neg(self) -> Laurent {
        Laurent::zero() - self
    }
}

impl std::ops::Mul for Laurent {
    type Output = Laurent;
    fn mul(self, rhs: Laurent) -> Laurent {
        let mut out = Laurent::zero();
        for (e1, c1) in &self.coeffs {
            for (e2, c2) in &rhs.coeffs {
                out.add_term(c1 * c2, e1 + e2);
            }
        }
        out
    }
}

impl std::fmt::Display for Laurent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.coeffs.iter().enumerate() {
            let neg = c < &Int::zero();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = if neg { -c.clone() } else { c.clone() };
            let one = mag == Int::from(1);
            match (*e, one) {
                (0, _) => write!(f, "{mag}")?,
                (1, true) => write!(f, "q")?,
                (1, false) => write!(f, "{mag}q")?,
                (_, true) => write!(f, "q^{e}")?,
                (_, false) => write!(f, "{mag}q^{e}")?,
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for Laurent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(c: i64, e: i64) -> Laurent {
        Laurent::monomial(Int::from(c), e)
    }

    #[test]
    fn display_forms() {
        assert_eq!(Laurent::zero().to_string(), "0");
        assert_eq!(Laurent::circle().to_string(), "q^-1 + q");
        let p = mono(1, 1) + mono(1, 3) + mono(1, 5) - mono(1, 9);
        assert_eq!(p.to_string(), "q + q^3 + q^5 - q^9");
        let r = mono(-2, 0) + mono(3, 2) - mono(1, -4);
        assert_eq!(r.to_string(), "-q^-4 - 2 + 3q^2");
    }

    #[test]
    fn ring_identities() {
        let c = Laurent::circle();
        assert_eq!(c.clone() * Laurent::one(), c);
        assert_eq!(
            c.clone() * c.clone(),
            mono(1, -2) + mono(2, 0) + mono(1, 2)
        );
        assert_eq!(c.clone() - c.clone(), Laurent::zero());
        assert_eq!(c.pow(3).coeff(1), Int::from(3));
    }

    #[test]
    fn inversion_is_an_involution() {
        let p = mono(2, -3) + mono(-1, 0) + mono(5, 7);
        assert_eq!(p.subst_inv().subst_inv(), p);
        assert_eq!(Laurent::circle().subst_inv(), Laurent::circle());
    }
}
