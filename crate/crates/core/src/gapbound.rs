//! Explicit lower bounds on the range of dissections into an odd number of triangles.
//!
//! The minimum of a positive integer polynomial over a simplex is bounded below by
//! a gap bound `2^(-X_dmm)`; feeding the area-difference polynomial of a dissection
//! into it bounds the range of every dissection of a fixed polygon.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::coloring::rb_count;
use crate::dissection::Point;
use crate::error::{Error, Result};
use crate::numerics::{format_rational, int, BigFloat, Rational};

/// Fractional bits used when a logarithm is not an integer.
pub const LOG_FRAC_BITS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DmmInput {
    /// Total degree.
    pub d: u64,
    /// Number of variables.
    pub k: u64,
    /// Coefficients are at most `2^tau` in absolute value.
    pub tau: u64,
}

impl DmmInput {
    pub fn new(d: u64, k: u64, tau: u64) -> Result<Self> {
        if d < 1 || k < 1 {
            return Err(Error::PreconditionFailed(format!(
                "gap bound needs d >= 1 and k >= 1, got d={d}, k={k}"
            )));
        }
        Ok(DmmInput { d, k, tau })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub label: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundResult {
    /// Upper bound on `log2(1/m)`; exact when every logarithm involved is an integer.
    pub exponent: Rational,
    pub exact: bool,
    pub trace: Vec<TraceEntry>,
}

impl BoundResult {
    pub fn ceil(&self) -> BigInt {
        self.exponent.ceil().to_integer()
    }

    pub fn trace_json(&self) -> serde_json::Value {
        serde_json::json!({
            "exponent": format_rational(&self.exponent),
            "exponent_ceil": self.ceil().to_string(),
            "exact": self.exact,
            "trace": self.trace,
        })
    }
}

fn exact_log2(v: u64) -> Option<u64> {
    v.is_power_of_two().then(|| v.trailing_zeros() as u64)
}

fn log2_up(v: u64) -> (Rational, bool) {
    match exact_log2(v) {
        Some(e) => (int(e as i64), true),
        None => (
            BigFloat::log2_upper(&Rational::from_integer(BigInt::from(v)), LOG_FRAC_BITS)
                .expect("positive argument"),
            false,
        ),
    }
}

fn push(trace: &mut Vec<TraceEntry>, label: &str, value: impl ToString) {
    trace.push(TraceEntry {
        label: label.to_string(),
        value: value.to_string(),
    });
}

/// `d (d-1)^(k-1) [(k^2+3k+1) log2 d + (k+1)(d log2 k + tau) + 3k + d + 2] + (k^2+k) log2 sqrt(d)`.
///
/// Every term has a nonnegative coefficient, so upward-rounded logarithms give an upward-rounded result.
pub fn dmm_exponent(input: DmmInput) -> BoundResult {
    let DmmInput { d, k, tau } = input;
    let mut trace = Vec::new();
    let (ld, ed) = log2_up(d);
    let (lk, ek) = log2_up(k);
    push(&mut trace, "log2 d", format_rational(&ld));
    push(&mut trace, "log2 k", format_rational(&lk));
    let big = |v: u64| Rational::from_integer(BigInt::from(v));
    let lead = big(d) * Rational::from_integer(num_traits::pow(BigInt::from(d - 1), (k - 1) as usize));
    push(&mut trace, "d (d-1)^(k-1)", format_rational(&lead));
    let bracket = big(k * k + 3 * k + 1) * &ld
        + big(k + 1) * (big(d) * &lk + big(tau))
        + big(3 * k + d + 2);
    push(&mut trace, "bracket", format_rational(&bracket));
    let tail = big(k * k + k) * &ld / int(2);
    push(&mut trace, "(k^2+k) log2 sqrt(d)", format_rational(&tail));
    let exponent = lead * bracket + tail;
    push(&mut trace, "log2(1/m_dmm)", format_rational(&exponent));
    BoundResult {
        exponent,
        exact: ed && ek,
        trace,
    }
}

/// Number of red-blue sides of a polygon and whether it is odd.
pub fn rb_side_parity(corners: &[Point<Rational>]) -> (usize, bool) {
    let c = rb_count(corners);
    (c, c % 2 == 1)
}

fn shoelace(corners: &[Point<Rational>]) -> Rational {
    let m = corners.len();
    let mut s = Rational::zero();
    for i in 0..m {
        let (a, b) = (&corners[i], &corners[(i + 1) % m]);
        s += &a.x * &b.y - &b.x * &a.y;
    }
    s / int(2)
}

fn ceil_log2_int(v: &BigInt) -> u64 {
    // Smallest t with 2^t >= v, for v >= 1.
    if v <= &BigInt::one() {
        0
    } else {
        (v - 1u32).bits()
    }
}

#[derive(Clone, Debug, Default)]
pub struct LowerBoundOptions {
    /// Accept even `n`.
    pub allow_even: bool,
    /// True node count; the variable count becomes twice this instead of `2n+4`.
    pub nodes: Option<usize>,
}

/// Exponent `X` with `range >= 2^(-X)` for every dissection of `polygon` into `n` triangles.
pub fn dissection_lower_bound(
    polygon: &[Point<Rational>],
    n: usize,
    opts: &LowerBoundOptions,
) -> Result<BoundResult> {
    let (rb, odd) = rb_side_parity(polygon);
    if !odd {
        return Err(Error::PreconditionFailed(format!(
            "polygon has {rb} red-blue sides, need an odd count"
        )));
    }
    let area = shoelace(polygon);
    if !area.is_integer() || !area.is_positive() {
        return Err(Error::PreconditionFailed(format!(
            "polygon area {} is not a positive integer",
            format_rational(&area)
        )));
    }
    if n.is_even() && !opts.allow_even {
        return Err(Error::PreconditionFailed(format!("n = {n} is even")));
    }
    if n == 0 {
        return Err(Error::PreconditionFailed("n must be positive".into()));
    }
    if polygon.iter().any(|p| !p.x.is_integer() || !p.y.is_integer()) {
        return Err(Error::PreconditionFailed("polygon corners must be integers".into()));
    }
    let mut trace = Vec::new();
    let min_x = polygon.iter().map(|p| p.x.to_integer()).min().expect("corners");
    let min_y = polygon.iter().map(|p| p.y.to_integer()).min().expect("corners");
    let y_max = polygon
        .iter()
        .flat_map(|p| [p.x.to_integer() - &min_x, p.y.to_integer() - &min_y])
        .max()
        .expect("corners")
        .max(BigInt::one());
    let scale = BigInt::from(2 * n + 4);
    let k = match opts.nodes {
        Some(v) => 2 * v as u64,
        None => 2 * n as u64 + 4,
    };
    push(&mut trace, "n", n);
    push(&mut trace, "area", format_rational(&area));
    push(&mut trace, "X (denominator scale)", &scale);
    push(&mut trace, "Y (largest translated coordinate)", &y_max);
    push(&mut trace, "k (variables)", k);

    let x4y4 = num_traits::pow(&scale * &y_max, 4);
    let q = BigInt::from(4 * n as u64) * &x4y4;
    let tau = ceil_log2_int(&q);
    push(&mut trace, "Q = 4n X^4 Y^4", &q);
    push(&mut trace, "tau = ceil(log2 Q)", tau);

    let dmm = dmm_exponent(DmmInput::new(4, k, tau)?);
    push(&mut trace, "X_dmm", format_rational(&dmm.exponent));

    // SSR >= m/Q, RMS = sqrt(SSR/n) >= 2^(-(X_dmm + log2(nQ))/2), range >= RMS,
    // then undo the coordinate scaling by (XY)^2.
    let nq = Rational::from_integer(BigInt::from(n as u64) * &q);
    let log_nq = BigFloat::log2_upper(&nq, LOG_FRAC_BITS)?;
    let log_xy = BigFloat::log2_lower(&Rational::from_integer(&scale * &y_max), LOG_FRAC_BITS)?;
    push(&mut trace, "log2(4 n^2 X^4 Y^4) (upper)", format_rational(&log_nq));
    push(&mut trace, "log2(XY) (lower)", format_rational(&log_xy));
    let exponent = (&dmm.exponent + &log_nq) / int(2) - int(2) * &log_xy;
    let exponent = Rational::from_integer(exponent.ceil().to_integer());
    push(&mut trace, "range exponent (ceil)", format_rational(&exponent));
    Ok(BoundResult {
        exponent,
        exact: false,
        trace,
    })
}

/// The exponent as an f64, for comparisons with measured ranges.
pub fn exponent_f64(b: &BoundResult) -> f64 {
    b.exponent.to_f64().unwrap_or(f64::INFINITY)
}
