//! Scalar abstraction and exact roots of unity.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use nalgebra::{ComplexField, RealField};
use num_integer::Integer;
use num_traits::{FromPrimitive, ToPrimitive};

pub use nalgebra::Complex;

/// Real scalar type the numeric layers are generic over.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` constant (tolerances, literals) into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant must be representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub fn complex<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

pub fn cabs<T: Real>(z: Complex<T>) -> T {
    ComplexField::modulus(z)
}

pub fn cabs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// The root of unity `e^{2πi k/n}`, stored as the reduced fraction `k/n` of a turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phase {
    num: u64,
    den: u64,
}

impl Phase {
    pub const ONE: Phase = Phase { num: 0, den: 1 };

    /// `e^{2πi k/n}`; `n` must be positive.
    pub fn turns(k: i64, n: u64) -> Phase {
        assert!(n > 0, "phase denominator must be positive");
        let n_i = n as i128;
        let k = (k as i128).rem_euclid(n_i);
        let g = k.gcd(&n_i).max(1);
        Phase { num: (k / g) as u64, den: (n_i / g) as u64 }
    }

    /// Numerator and denominator of the reduced fraction of a turn.
    pub fn fraction(self) -> (u64, u64) {
        (self.num, self.den)
    }

    pub fn conj(self) -> Phase {
        Phase::turns(-(self.num as i64), self.den)
    }

    /// Exact value when the phase is a multiple of a quarter turn.
    pub fn gaussian(self) -> Option<(i64, i64)> {
        match (self.num, self.den) {
            (0, 1) => Some((1, 0)),
            (1, 2) => Some((-1, 0)),
            (1, 4) => Some((0, 1)),
            (3, 4) => Some((0, -1)),
            _ => None,
        }
    }

    pub fn to_complex<T: Real>(self) -> Complex<T> {
        if let Some((re, im)) = self.gaussian() {
            return complex(re as f64, im as f64);
        }
        // fold into (-1/2, 1/2] of a turn so that conjugate phases agree bitwise
        let signed = if 2 * self.num > self.den { self.num as i64 - self.den as i64 } else { self.num as i64 };
        let angle = T::two_pi() * T::lit(signed as f64) / T::lit(self.den as f64);
        let (s, c) = angle.sin_cos();
        Complex::new(c, s)
    }
}

impl Mul for Phase {
    type Output = Phase;

    fn mul(self, rhs: Phase) -> Phase {
        let den = self.den.lcm(&rhs.den);
        let num = self.num * (den / self.den) + rhs.num * (den / rhs.den);
        Phase::turns((num % den) as i64, den)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e^(2πi·{}/{})", self.num, self.den)
    }
}

/// Integer-weighted sum of roots of unity, kept symbolic until evaluated.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RootSum {
    terms: BTreeMap<Phase, i64>,
}

impl RootSum {
    pub fn new() -> RootSum {
        RootSum::default()
    }

    pub fn add_term(&mut self, phase: Phase, weight: i64) {
        let w = self.terms.entry(phase).or_insert(0);
        *w += weight;
        if *w == 0 {
            self.terms.remove(&phase);
        }
    }

    /// Terms with nonzero weight in phase order.
    pub fn terms(&self) -> impl Iterator<Item = (Phase, i64)> + '_ {
        self.terms.iter().map(|(p, w)| (*p, *w))
    }

    /// Exact Gaussian-integer value when every phase is a quarter turn.
    pub fn gaussian(&self) -> Option<(i64, i64)> {
        self.terms.iter().try_fold((0, 0), |(re, im), (p, w)| {
            let (pr, pi) = p.gaussian()?;
            Some((re + w * pr, im + w * pi))
        })
    }

    /// Evaluates the sum; each phase is evaluated once and scaled by its exact weight.
    pub fn to_complex<T: Real>(&self) -> Complex<T> {
        if let Some((re, im)) = self.gaussian() {
            return complex(re as f64, im as f64);
        }
        let mut re = T::zero();
        let mut im = T::zero();
        for (p, w) in &self.terms {
            let v = p.to_complex::<T>();
            re += v.re * T::lit(*w as f64);
            im += v.im * T::lit(*w as f64);
        }
        Complex::new(re, im)
    }
}

impl Add for RootSum {
    type Output = RootSum;

    fn add(mut self, rhs: RootSum) -> RootSum {
        for (p, w) in rhs.terms {
            self.add_term(p, w);
        }
        self
    }
}

impl fmt::Display for RootSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(p, w)| format!("{w}·{p}")).collect();
        f.write_str(&parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction() {
        assert_eq!(Phase::turns(2, 4), Phase::turns(1, 2));
        assert_eq!(Phase::turns(-1, 3), Phase::turns(2, 3));
        assert_eq!(Phase::turns(6, 3), Phase::ONE);
        assert_eq!(Phase::turns(1, 3) * Phase::turns(1, 6), Phase::turns(1, 2));
        assert_eq!(Phase::turns(1, 5).conj(), Phase::turns(4, 5));
    }

    #[test]
    fn quarter_turns_are_exact() {
        assert_eq!(Phase::turns(1, 2).to_complex::<f64>(), Complex::new(-1.0, 0.0));
        assert_eq!(Phase::turns(3, 4).to_complex::<f32>(), Complex::new(0.0, -1.0));
        let mut z = RootSum::new();
        z.add_term(Phase::turns(1, 2), 1);
        z.add_term(Phase::ONE, 2);
        assert_eq!(z.gaussian(), Some((1, 0)));
        assert_eq!(z.to_complex::<f64>(), Complex::new(1.0, 0.0));
    }

    #[test]
    fn conjugates_agree() {
        for n in 1..20u64 {
            for k in 0..n as i64 {
                let a = Phase::turns(k, n).to_complex::<f64>();
                let b = Phase::turns(k, n).conj().to_complex::<f64>();
                assert_eq!(a, b.conj());
            }
        }
    }

    #[test]
    fn cancellation() {
        let mut z = RootSum::new();
        for k in 0..7 {
            z.add_term(Phase::turns(k, 7), 1);
        }
        assert!(cabs(z.to_complex::<f64>()) < 1e-15);
        z.add_term(Phase::ONE, -1);
        z.add_term(Phase::ONE, 1);
        assert_eq!(z.terms().count(), 7);
    }
}
