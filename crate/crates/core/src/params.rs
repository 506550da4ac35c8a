//! Protocol parameters and exact 256-bit thresholds.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::hash::Hash256;

/// A non-negative rational with 128-bit terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frac {
    pub num: u128,
    pub den: u128,
}

impl Frac {
    pub const ZERO: Frac = Frac { num: 0, den: 1 };
    pub const ONE: Frac = Frac { num: 1, den: 1 };

    pub fn new(num: u128, den: u128) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den);
        Frac { num: num / g, den: den / g }
    }

    /// Exact binary value of a finite, non-negative `f64`, truncated to the
    /// 127 fractional bits that fit.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        if x == 0.0 {
            return Some(Frac::ZERO);
        }
        let (mut m, mut e) = decompose(x);
        while e < -127 {
            m >>= 1;
            e += 1;
        }
        if e >= 0 {
            let num = (m as u128).checked_shl(e as u32)?;
            Some(Frac::new(num, 1))
        } else {
            Some(Frac::new(m as u128, 1u128 << (-e) as u32))
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn mul_big(self, other: Frac) -> (BigUint, BigUint) {
        (
            BigUint::from(self.num) * BigUint::from(other.num),
            BigUint::from(self.den) * BigUint::from(other.den),
        )
    }

    /// `floor(self * v)`.
    pub fn floor_mul(self, v: u64) -> u64 {
        let r = BigUint::from(self.num) * BigUint::from(v) / BigUint::from(self.den);
        r.to_u64().unwrap_or(u64::MAX)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// `x = m * 2^e` with integer mantissa.
fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

/// Strict upper bound on a digest read as an integer: a digest `N` passes iff
/// `N < bound`. `Full` is the bound `2^256`, which every digest passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threshold {
    Finite(Hash256),
    Full,
}

impl Threshold {
    fn two_256() -> BigUint {
        BigUint::one() << 256usize
    }

    pub fn from_biguint(v: &BigUint) -> Self {
        if *v >= Self::two_256() {
            return Threshold::Full;
        }
        let bytes = v.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - bytes.len()..].copy_from_slice(&bytes);
        if v.is_zero() {
            out = [0u8; 32];
        }
        Threshold::Finite(Hash256(out))
    }

    pub fn to_biguint(&self) -> BigUint {
        match self {
            Threshold::Finite(h) => h.to_biguint(),
            Threshold::Full => Self::two_256(),
        }
    }

    /// Bound `ceil(num * 2^256 / den)`: passes exactly the digests with
    /// fraction `< num/den`.
    pub fn below_ratio(num: &BigUint, den: &BigUint) -> Self {
        let scaled: BigUint = num << 256usize;
        let q = &scaled / den;
        let bound = if (&q * den) == scaled { q } else { q + 1u32 };
        Self::from_biguint(&bound)
    }

    /// Passes digests with fraction `< f`.
    pub fn below(f: Frac) -> Self {
        Self::below_ratio(&BigUint::from(f.num), &BigUint::from(f.den))
    }

    /// Passes digests with fraction `<= f`.
    pub fn at_most(f: Frac) -> Self {
        let v = (BigUint::from(f.num) << 256usize) / BigUint::from(f.den) + 1u32;
        Self::from_biguint(&v)
    }

    /// `at_most` for an `f64` level, clamped to `[0, 1]`.
    pub fn at_most_f64(x: f64) -> Self {
        match Frac::from_f64(x.clamp(0.0, 1.0)) {
            Some(f) => Self::at_most(f),
            None => Threshold::Finite(Hash256::ZERO),
        }
    }

    pub fn accepts(&self, h: &Hash256) -> bool {
        match self {
            Threshold::Finite(t) => h < t,
            Threshold::Full => true,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Threshold::Finite(t) => t.unit_fraction().to_f64(),
            Threshold::Full => 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("difficulty must satisfy 0 < d <= 1, got {0}")]
    Difficulty(f64),
    #[error("milestone probability must satisfy 0 < p <= 1, got {0}")]
    MilestoneProb(f64),
    #[error("assignment parameter c must be positive and finite, got {0}")]
    Assignment(f64),
    #[error("rewards must satisfy r_m > r_n (r_m = {r_m}, r_n = {r_n})")]
    Rewards { r_m: u64, r_n: u64 },
    #[error("milestone bonus fraction must lie in [0, 1], got {0}")]
    Delta(f64),
    #[error("value {0} has no exact binary representation")]
    Inexact(f64),
}

/// Consensus and reward parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub d: Frac,
    pub p: Frac,
    pub c: f64,
    pub r_n: u64,
    pub r_m: u64,
    pub delta: Frac,
    target: Threshold,
    milestone_target: Threshold,
}

impl Params {
    pub fn new(d: Frac, p: Frac, c: f64, r_n: u64, r_m: u64, delta: Frac) -> Result<Self, ParamsError> {
        if d.num == 0 || d.num > d.den {
            return Err(ParamsError::Difficulty(d.to_f64()));
        }
        if p.num == 0 || p.num > p.den {
            return Err(ParamsError::MilestoneProb(p.to_f64()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(ParamsError::Assignment(c));
        }
        if r_m <= r_n {
            return Err(ParamsError::Rewards { r_m, r_n });
        }
        if delta.num > delta.den {
            return Err(ParamsError::Delta(delta.to_f64()));
        }
        let target = Threshold::below(d);
        let (num, den) = d.mul_big(p);
        let milestone_target = Threshold::below_ratio(&num, &den);
        Ok(Params { d, p, c, r_n, r_m, delta, target, milestone_target })
    }

    /// Parameters with the default reward schedule (`r_n = 100`, `r_m = 1000`,
    /// `delta = 2%`).
    pub fn with_defaults(d: Frac, p: Frac, c: f64) -> Result<Self, ParamsError> {
        Self::new(d, p, c, 100, 1000, Frac::new(2, 100))
    }

    pub fn from_f64(d: f64, p: f64, c: f64) -> Result<Self, ParamsError> {
        let d = Frac::from_f64(d).ok_or(ParamsError::Difficulty(d))?;
        let p = Frac::from_f64(p).ok_or(ParamsError::MilestoneProb(p))?;
        Self::with_defaults(d, p, c)
    }

    /// Bound for a valid block: fraction `< d`.
    pub fn target(&self) -> Threshold {
        self.target
    }

    /// Bound for a milestone: fraction `< p*d`.
    pub fn milestone_target(&self) -> Threshold {
        self.milestone_target
    }
}
