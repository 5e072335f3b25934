//! Polynomial hash families over the 61-bit Mersenne field.
//!
//! A degree-(k-1) polynomial with uniform coefficients in F_p gives a k-wise
//! independent family, so "2-wise" is degree 1 and "4-wise" is degree 3.
//! Buckets reduce the field value modulo the range; signs take its parity.
//! Both leave a bias of order 2⁻⁶¹, far below anything our statistics see.

use rand::Rng;

pub const MERSENNE_P: u64 = (1u64 << 61) - 1;

/// Reduce a product-sized value into [0, p). The folded sum fits u64 because
/// the input stays below p² + p < 2¹²².
fn reduce(v: u128) -> u64 {
    let mut r = ((v & MERSENNE_P as u128) as u64) + ((v >> 61) as u64);
    while r >= MERSENNE_P {
        r -= MERSENNE_P;
    }
    r
}

fn uniform_field<R: Rng>(rng: &mut R) -> u64 {
    loop {
        let v = rng.gen::<u64>() >> 3;
        if v < MERSENNE_P {
            return v;
        }
    }
}

/// One member of a k-wise independent family, keyed by the rng it was
/// sampled from. Coefficients are stored leading-first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyHash {
    coeffs: Vec<u64>,
}

impl PolyHash {
    /// Draws `independence` uniform coefficients, one per monomial.
    pub fn sample<R: Rng>(rng: &mut R, independence: usize) -> Self {
        assert!(independence >= 1, "hash needs at least one coefficient");
        let coeffs = (0..independence).map(|_| uniform_field(rng)).collect();
        PolyHash { coeffs }
    }

    #[cfg(test)]
    pub(crate) fn from_coeffs(coeffs: Vec<u64>) -> Self {
        PolyHash { coeffs }
    }

    /// Horner evaluation in F_p.
    pub fn eval(&self, x: u64) -> u64 {
        let x = (x % MERSENNE_P) as u128;
        let mut acc: u128 = 0;
        for &c in &self.coeffs {
            acc = reduce(acc * x + c as u128) as u128;
        }
        acc as u64
    }

    pub fn bucket(&self, x: u64, range: u64) -> u64 {
        debug_assert!(range > 0);
        self.eval(x) % range
    }

    /// Rademacher sign from the field value's parity.
    pub fn sign(&self, x: u64) -> i8 {
        if self.eval(x) & 1 == 0 {
            1
        } else {
            -1
        }
    }
}
