//! Real scalars the detector is generic over: plain `f64`, and a forward-mode
//! dual number carrying one tangent, used to differentiate the unrolled
//! network with respect to a single hyperparameter at a time.

use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Num, One, Zero};
use num_traits::Float;

pub trait Scalar: Copy + Num + Neg<Output = Self> + PartialOrd + Debug {
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    /// Same value with the derivative dropped.
    fn detach(self) -> Self;

    fn max_f64(self, floor: f64) -> Self {
        if self.value() < floor {
            Self::from_f64(floor)
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        Float::sqrt(self)
    }
    fn tanh(self) -> Self {
        Float::tanh(self)
    }
    fn detach(self) -> Self {
        self
    }
}

/// `re + eps·d` with `eps² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub d: f64,
}

impl Dual {
    pub const fn new(re: f64, d: f64) -> Self {
        Self { re, d }
    }

    pub const fn constant(re: f64) -> Self {
        Self { re, d: 0.0 }
    }
}

impl PartialOrd for Dual {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.d + self.d * o.re)
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        Self::new(self.re / o.re, (self.d * o.re - self.re * o.d) / (o.re * o.re))
    }
}

impl Rem for Dual {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        // d/dx (x mod y) = 1 away from the jumps.
        let q = (self.re / o.re).trunc();
        Self::new(self.re - q * o.re, self.d - q * o.d)
    }
}


impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.d)
    }
}

impl Zero for Dual {
    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.d == 0.0
    }
}

impl One for Dual {
    fn one() -> Self {
        Self::constant(1.0)
    }
}

impl Num for Dual {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::constant)
    }
}

impl Scalar for Dual {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let s = Float::sqrt(self.re);
        Self::new(s, if s > 0.0 { self.d / (2.0 * s) } else { 0.0 })
    }
    fn tanh(self) -> Self {
        let t = Float::tanh(self.re);
        Self::new(t, self.d * (1.0 - t * t))
    }
    fn detach(self) -> Self {
        Self::constant(self.re)
    }
}
