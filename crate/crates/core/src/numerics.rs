//! Number types: exact rationals, 2-adic absolute values and fixed-precision binary floats.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rug::float::Round;
use rug::ops::AssignRound;
use rug::Float;

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

/// Accepts `p`, `p/q` and plain decimals such as `-0.125` (converted exactly).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::DivisionByZero);
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        let mut p: BigInt = digits.parse().map_err(|_| bad())?;
        if neg {
            p = -p;
        }
        let q = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(p, q));
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

pub fn format_rational(q: &Rational) -> String {
    q.to_string()
}

/// 2-adic absolute value `|x|_2`. `Pow2(e)` stands for `2^(-e)`, with `e` the valuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TwoAdicValue {
    Zero,
    Pow2(i64),
}

impl TwoAdicValue {
    pub const ONE: TwoAdicValue = TwoAdicValue::Pow2(0);

    /// The absolute value itself, `2^(-e)`.
    pub fn to_rational(self) -> Rational {
        match self {
            TwoAdicValue::Zero => Rational::zero(),
            TwoAdicValue::Pow2(e) => {
                let p = num_traits::pow(BigInt::from(2), e.unsigned_abs() as usize);
                if e <= 0 {
                    Rational::from_integer(p)
                } else {
                    Rational::new(BigInt::one(), p)
                }
            }
        }
    }
}

impl Ord for TwoAdicValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use TwoAdicValue::*;
        match (self, other) {
            (Zero, Zero) => Ordering::Equal,
            (Zero, _) => Ordering::Less,
            (_, Zero) => Ordering::Greater,
            (Pow2(a), Pow2(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for TwoAdicValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TwoAdicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwoAdicValue::Zero => write!(f, "0"),
            TwoAdicValue::Pow2(e) => write!(f, "2^{}", -e),
        }
    }
}

fn twos(b: &BigInt) -> i64 {
    b.trailing_zeros().expect("nonzero") as i64
}

pub fn val2(q: &Rational) -> TwoAdicValue {
    if q.is_zero() {
        TwoAdicValue::Zero
    } else {
        TwoAdicValue::Pow2(twos(q.numer()) - twos(q.denom()))
    }
}

/// Index (0, 1 or 2) of the first argument attaining the largest 2-adic absolute value.
pub fn val2_max(a: &Rational, b: &Rational, c: &Rational) -> usize {
    let vals = [val2(a), val2(b), val2(c)];
    let mut best = 0;
    for i in 1..3 {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    best
}

/// Binary float with an explicit precision in bits, rounding to nearest.
/// Binary operations produce the smaller of the two operand precisions.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct BigFloat(Float);

pub fn to_rug_integer(b: &BigInt) -> rug::Integer {
    rug::Integer::from_str_radix(&b.to_str_radix(16), 16).expect("hex digits")
}

pub fn from_rug_integer(i: &rug::Integer) -> BigInt {
    BigInt::parse_bytes(i.to_string_radix(16).as_bytes(), 16).expect("hex digits")
}

fn to_rug_rational(q: &Rational) -> rug::Rational {
    rug::Rational::from((to_rug_integer(q.numer()), to_rug_integer(q.denom())))
}

impl BigFloat {
    pub fn zero(prec: u32) -> Self {
        BigFloat(Float::new(prec))
    }

    pub fn from_i64(v: i64, prec: u32) -> Self {
        BigFloat(Float::with_val(prec, v))
    }

    pub fn from_f64(v: f64, prec: u32) -> Self {
        BigFloat(Float::with_val(prec, v))
    }

    pub fn from_rational(q: &Rational, prec: u32) -> Self {
        BigFloat(Float::with_val(prec, to_rug_rational(q)))
    }

    pub fn from_rug(f: Float) -> Self {
        BigFloat(f)
    }

    pub fn as_rug(&self) -> &Float {
        &self.0
    }

    pub fn precision(&self) -> u32 {
        self.0.prec()
    }

    /// Same value re-rounded to `prec` bits.
    pub fn with_precision(&self, prec: u32) -> Self {
        BigFloat(Float::with_val(prec, &self.0))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn abs(&self) -> Self {
        BigFloat(self.0.clone().abs())
    }

    /// Exact value of the float as a rational.
    pub fn to_rational(&self) -> Option<Rational> {
        let r = self.0.to_rational()?;
        Some(Rational::new(
            from_rug_integer(r.numer()),
            from_rug_integer(r.denom()),
        ))
    }

    pub fn ln(&self) -> Result<Self> {
        if self.0 <= 0 {
            return Err(Error::Domain(format!("ln of non-positive value {self}")));
        }
        Ok(BigFloat(self.0.clone().ln()))
    }

    /// `ln(1 + x)`, accurate for small `x`.
    pub fn ln_1p(&self) -> Result<Self> {
        if self.0 <= -1 {
            return Err(Error::Domain(format!("ln_1p of {self}")));
        }
        Ok(BigFloat(self.0.clone().ln_1p()))
    }

    pub fn log2(&self) -> Result<Self> {
        if self.0 <= 0 {
            return Err(Error::Domain(format!("log2 of non-positive value {self}")));
        }
        Ok(BigFloat(self.0.clone().log2()))
    }

    pub fn exp(&self) -> Self {
        BigFloat(self.0.clone().exp())
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.0 < 0 {
            return Err(Error::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(BigFloat(self.0.clone().sqrt()))
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.clone() / rhs.clone())
    }

    /// Number of significant decimal digits used when serializing at `prec` bits.
    pub fn decimal_digits(prec: u32) -> usize {
        (0.302 * prec as f64).ceil() as usize + 3
    }

    pub fn to_decimal_string(&self) -> String {
        let digits = Self::decimal_digits(self.precision());
        self.0.to_string_radix(10, Some(digits))
    }

    pub fn parse(s: &str, prec: u32) -> Result<Self> {
        let parsed =
            Float::parse(s.trim()).map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))?;
        Ok(BigFloat(Float::with_val(prec, parsed)))
    }

    /// Upper bound on `log2(x)` rounded up to a multiple of `2^-frac_bits`.
    pub fn log2_upper(x: &Rational, frac_bits: u32) -> Result<Rational> {
        Self::log2_directed(x, frac_bits, Round::Up)
    }

    /// Lower bound on `log2(x)` rounded down to a multiple of `2^-frac_bits`.
    pub fn log2_lower(x: &Rational, frac_bits: u32) -> Result<Rational> {
        Self::log2_directed(x, frac_bits, Round::Down)
    }

    fn log2_directed(x: &Rational, frac_bits: u32, dir: Round) -> Result<Rational> {
        if !x.is_positive() {
            return Err(Error::Domain(format!("log2 of {x}")));
        }
        let prec = frac_bits + 128;
        let (v, _) = Float::with_val_round(prec, to_rug_rational(x), dir);
        let mut l = Float::new(prec);
        l.assign_round(v.log2_ref(), dir);
        let scaled = l << frac_bits;
        let i = match dir {
            Round::Up => scaled.ceil(),
            _ => scaled.floor(),
        };
        let i = i.to_integer().expect("finite");
        Ok(Rational::new(
            from_rug_integer(&i),
            num_traits::pow(BigInt::from(2), frac_bits as usize),
        ))
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.to_decimal_string(), self.precision())
    }
}

macro_rules! float_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for BigFloat {
            type Output = BigFloat;
            fn $m(self, rhs: BigFloat) -> BigFloat {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a BigFloat> for &'a BigFloat {
            type Output = BigFloat;
            fn $m(self, rhs: &BigFloat) -> BigFloat {
                let prec = self.precision().min(rhs.precision());
                BigFloat(Float::with_val(prec, &self.0 $op &rhs.0))
            }
        }
    };
}

float_binop!(Add, add, +);
float_binop!(Sub, sub, -);
float_binop!(Mul, mul, *);

impl Div for BigFloat {
    type Output = BigFloat;
    fn div(self, rhs: BigFloat) -> BigFloat {
        (&self).div(&rhs)
    }
}

impl<'a> Div<&'a BigFloat> for &'a BigFloat {
    type Output = BigFloat;
    fn div(self, rhs: &BigFloat) -> BigFloat {
        assert!(!rhs.is_zero(), "BigFloat division by zero");
        let prec = self.precision().min(rhs.precision());
        BigFloat(Float::with_val(prec, &self.0 / &rhs.0))
    }
}

impl Neg for BigFloat {
    type Output = BigFloat;
    fn neg(self) -> BigFloat {
        BigFloat(-self.0)
    }
}

/// Coordinate scalar shared by exact and floating framed maps.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// Whatever is needed to build a constant: nothing, or a precision.
    type Ctx: Copy + fmt::Debug + Send + Sync;

    fn ctx(&self) -> Self::Ctx;
    fn from_rational(q: &Rational, ctx: Self::Ctx) -> Self;
    fn to_bigfloat(&self, prec: u32) -> BigFloat;
    fn as_f64(&self) -> f64;
    fn vanishes(&self) -> bool;

    fn magnitude(&self) -> Self;

    fn zero_like(&self) -> Self {
        Self::from_rational(&Rational::zero(), self.ctx())
    }

    /// Absolute slack allowed on signed areas when checking legality of `n` faces.
    fn area_tolerance(ctx: Self::Ctx, n: usize) -> Self;
    /// Absolute slack allowed on corner positions.
    fn position_tolerance(ctx: Self::Ctx) -> Self;
    /// Exact rational value, when the scalar is exact.
    fn as_exact(&self) -> Option<Rational>;
}

impl Scalar for Rational {
    type Ctx = ();

    fn ctx(&self) {}
    fn from_rational(q: &Rational, _: ()) -> Self {
        q.clone()
    }
    fn to_bigfloat(&self, prec: u32) -> BigFloat {
        BigFloat::from_rational(self, prec)
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn vanishes(&self) -> bool {
        Zero::is_zero(self)
    }
    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }
    fn area_tolerance(_: (), _: usize) -> Self {
        Rational::zero()
    }
    fn position_tolerance(_: ()) -> Self {
        Rational::zero()
    }
    fn as_exact(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

fn pow2_neg(k: i64, prec: u32) -> BigFloat {
    BigFloat(Float::with_val(prec, Float::i_exp(1, -(k as i32))))
}

impl Scalar for BigFloat {
    type Ctx = u32;

    fn ctx(&self) -> u32 {
        self.precision()
    }
    fn from_rational(q: &Rational, prec: u32) -> Self {
        BigFloat::from_rational(q, prec)
    }
    fn to_bigfloat(&self, prec: u32) -> BigFloat {
        self.with_precision(prec)
    }
    fn as_f64(&self) -> f64 {
        BigFloat::to_f64(self)
    }
    fn vanishes(&self) -> bool {
        BigFloat::is_zero(self)
    }
    fn magnitude(&self) -> Self {
        BigFloat::abs(self)
    }
    fn area_tolerance(prec: u32, n: usize) -> Self {
        pow2_neg(prec as i64 - 8, prec) * BigFloat::from_i64(n as i64, prec)
    }
    fn position_tolerance(prec: u32) -> Self {
        pow2_neg(prec as i64 - 8, prec)
    }
    fn as_exact(&self) -> Option<Rational> {
        None
    }
}

impl Scalar for f64 {
    type Ctx = ();

    fn ctx(&self) {}
    fn from_rational(q: &Rational, _: ()) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }
    fn to_bigfloat(&self, prec: u32) -> BigFloat {
        BigFloat::from_f64(*self, prec)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn vanishes(&self) -> bool {
        *self == 0.0
    }
    fn magnitude(&self) -> Self {
        f64::abs(*self)
    }
    fn area_tolerance(_: (), n: usize) -> Self {
        1e-12 * n as f64
    }
    fn position_tolerance(_: ()) -> Self {
        1e-12
    }
    fn as_exact(&self) -> Option<Rational> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn val2_examples() {
        assert_eq!(val2(&rat(1, 2)), TwoAdicValue::Pow2(-1));
        assert_eq!(val2(&rat(3, 4)), TwoAdicValue::Pow2(-2));
        assert_eq!(val2(&int(12)), TwoAdicValue::Pow2(2));
        assert_eq!(val2(&int(0)), TwoAdicValue::Zero);
        assert_eq!(val2(&rat(5, 3)), TwoAdicValue::ONE);
        assert_eq!(val2(&rat(1, 2)).to_rational(), int(2));
    }

    #[test]
    fn val2_order() {
        assert!(TwoAdicValue::Zero < TwoAdicValue::Pow2(50));
        assert!(TwoAdicValue::Pow2(2) < TwoAdicValue::Pow2(1));
        assert!(TwoAdicValue::Pow2(-1) > TwoAdicValue::ONE);
    }

    #[test]
    fn val2_max_picks_first() {
        assert_eq!(val2_max(&rat(1, 2), &rat(3, 4), &int(1)), 1);
        assert_eq!(val2_max(&int(2), &int(4), &int(1)), 2);
        assert_eq!(val2_max(&int(1), &int(3), &int(1)), 0);
    }

    #[test]
    fn rational_text() {
        assert_eq!(parse_rational("6/4").unwrap(), rat(3, 2));
        assert_eq!(parse_rational("-0.125").unwrap(), rat(-1, 8));
        assert_eq!(format_rational(&rat(3, 2)), "3/2");
        assert_eq!(format_rational(&int(-7)), "-7");
        assert!(matches!(parse_rational("1/0"), Err(Error::DivisionByZero)));
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn precision_is_min_of_operands() {
        let a = BigFloat::from_i64(1, 200);
        let b = BigFloat::from_i64(3, 64);
        assert_eq!((a.clone() / b).precision(), 64);
        assert_eq!((a.clone() + a).precision(), 200);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(BigFloat::from_i64(-1, 64).ln(), Err(Error::Domain(_))));
        assert!(BigFloat::from_i64(0, 64).ln().is_err());
        assert!(matches!(
            BigFloat::from_i64(1, 64).checked_div(&BigFloat::zero(64)),
            Err(Error::DivisionByZero)
        ));
    }

    #[test]
    fn decimal_round_trip() {
        for prec in [64u32, 128, 333] {
            let x = BigFloat::from_rational(&rat(-22, 7), prec);
            let back = BigFloat::parse(&x.to_decimal_string(), prec).unwrap();
            let rel = ((back - x.clone()) / x).abs().to_f64();
            assert!(rel <= 2f64.powi(1 - prec as i32), "prec {prec}: {rel}");
        }
    }

    #[test]
    fn directed_log2_brackets() {
        let x = int(10);
        let lo = BigFloat::log2_lower(&x, 64).unwrap();
        let hi = BigFloat::log2_upper(&x, 64).unwrap();
        assert!(lo < hi);
        assert_eq!(&hi - &lo, rat(1, 1) / int(2).pow(64));
        assert_eq!(BigFloat::log2_upper(&int(16), 64).unwrap(), int(4));
        assert_eq!(BigFloat::log2_lower(&int(16), 64).unwrap(), int(4));
    }

    #[test]
    fn bigfloat_exact_round_trip_to_rational() {
        let x = BigFloat::from_rational(&rat(3, 8), 64);
        assert_eq!(x.to_rational().unwrap(), rat(3, 8));
    }

    /// `ln(p/q) * 2^bits`, truncated, from `2 atanh(z)` with `z = (p-q)/(p+q)`,
    /// summed in fixed point with 64 guard bits.
    fn ln_oracle(p: &BigInt, q: &BigInt, bits: u32) -> BigInt {
        let guard = bits + 64;
        let one = BigInt::one() << guard;
        let negative = p < q;
        let z = &one * (p - q).abs() / (p + q);
        let z2 = &z * &z >> guard;
        let mut power = z;
        let mut sum = BigInt::zero();
        let mut j = 0u64;
        while !power.is_zero() {
            sum += &power / BigInt::from(2 * j + 1);
            power = &power * &z2 >> guard;
            j += 1;
        }
        let v: BigInt = (sum * 2) >> 64u32;
        if negative {
            -v
        } else {
            v
        }
    }

    #[test]
    fn ln_within_four_ulp_of_series() {
        let prec = 128;
        for (p, q) in [(2u64, 1u64), (3, 2), (10, 7), (1, 3), (1000, 999)] {
            // The oracle sees the operand after rounding to the working precision.
            let x = BigFloat::from_rational(&rat(p as i64, q as i64), prec);
            let xr = x.to_rational().unwrap();
            let got = x.ln().unwrap();
            let expect = Rational::new(ln_oracle(xr.numer(), xr.denom(), 200), BigInt::one() << 200u32);
            let diff = (got.to_rational().unwrap() - &expect).abs();
            // One ulp of a value in [2^(e-1), 2^e) is 2^(e - prec).
            let e = got.as_rug().get_exp().unwrap();
            let ulp = Rational::new(BigInt::one(), BigInt::one() << (prec as i32 - e) as u32);
            assert!(diff <= ulp * int(4), "ln({p}/{q})");
        }
    }
}
