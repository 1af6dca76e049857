//! Explicit dissections of the unit square with tiny area range.
//!
//! The trapezoid-cut family removes a top triangle of area `p` and fills the
//! remaining trapezoid with `n-1` triangles cut alternately from its top and
//! bottom edges according to a sign sequence. Every cut triangle has area
//! `q + s_i * eps` with `q = (1-p)/(n-1)`; the single free parameter `eps` is
//! fixed by requiring the last cut to end flush with the right side. Writing
//! `W = 1/(4p)` for the area of the triangle spanned by the two trapezoid
//! edges and `A_i` for the prefix sums of the areas, flushness reads
//!
//! ```text
//! sum_i s_i * ln((W - A_i) / (W - A_{i-1})) = 0.
//! ```
//!
//! With the Thue-Morse sequence the low-order Taylor terms of this sum cancel,
//! which makes `eps` extraordinarily small.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dissection::{
    build_reduced_collinearity, check_legality, lambda, metrics_of_areas, unit_square,
    AbstractDissection, FramedMap, Point,
};
use crate::error::{Error, Result};
use crate::numerics::{int, rat, BigFloat, Rational, Scalar};

/// Sequence of +1/-1 entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignSequence(Vec<i8>);

impl SignSequence {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Parse("signs must be +1 or -1".into()));
        }
        Ok(SignSequence(signs))
    }

    /// Parses `+`/`-` characters, e.g. `"+--+"`.
    pub fn parse(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(Error::Parse(format!("bad sign character {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(SignSequence)
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_balanced(&self) -> bool {
        self.0.iter().map(|&s| s as i64).sum::<i64>() == 0
    }

    pub fn flipped(&self) -> Self {
        SignSequence(self.0.iter().map(|s| -s).collect())
    }

    /// The sequence or its flip, whichever starts with `+`.
    pub fn canonical(&self) -> Self {
        if self.0.first() == Some(&-1) {
            self.flipped()
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for SignSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Lexicographic with `+` before `-`.
impl Ord for SignSequence {
    fn cmp(&self, other: &Self) -> Ordering {
        let key = |s: &SignSequence| s.0.iter().map(|&x| x < 0).collect::<Vec<bool>>();
        key(self).cmp(&key(other))
    }
}

impl PartialOrd for SignSequence {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// First `m` Thue-Morse signs: `s_1 = +`, `s_{2j-1} = s_j`, `s_{2j} = -s_j`.
pub fn thue_morse(m: usize) -> SignSequence {
    let mut s: Vec<i8> = Vec::with_capacity(m);
    for i in 1..=m {
        let v = if i == 1 {
            1
        } else if i % 2 == 1 {
            s[(i + 1) / 2 - 1]
        } else {
            -s[i / 2 - 1]
        };
        s.push(v);
    }
    SignSequence(s)
}

/// `sum_{i=1}^{2^k} s_i f(x0 + i b)` for the polynomial `f` with coefficients
/// `coeffs` (constant term first). Vanishes whenever `deg f < k`.
pub fn prouhet_check(k: u32, b: &Rational, x0: &Rational, coeffs: &[Rational]) -> Rational {
    let m = 1usize << k;
    let s = thue_morse(m);
    let mut total = Rational::zero();
    for i in 1..=m {
        let x = x0 + b * int(i as i64);
        let mut fx = Rational::zero();
        for c in coeffs.iter().rev() {
            fx = fx * &x + c;
        }
        if s.0[i - 1] > 0 {
            total += fx;
        } else {
            total -= fx;
        }
    }
    total
}

#[derive(Clone, Debug)]
pub struct TrapezoidCutSpec {
    pub n: usize,
    pub signs: SignSequence,
    pub top_area: Rational,
    pub precision: u32,
}

impl TrapezoidCutSpec {
    /// Spec with the default top area `1/n`, where `n` is one more than the sequence length.
    pub fn new(signs: SignSequence, precision: u32) -> Result<Self> {
        let n = signs.len() + 1;
        Self::with_top_area(signs, int(1) / int(n as i64), precision)
    }

    pub fn with_top_area(signs: SignSequence, top_area: Rational, precision: u32) -> Result<Self> {
        let n = signs.len() + 1;
        if n < 3 || !signs.is_balanced() {
            return Err(Error::PreconditionFailed(format!(
                "sign sequence {signs} must be balanced with length at least 2"
            )));
        }
        if !top_area.is_positive() || top_area >= rat(1, 2) {
            return Err(Error::PreconditionFailed(format!(
                "top area {top_area} must lie in (0, 1/2)"
            )));
        }
        Ok(TrapezoidCutSpec {
            n,
            signs,
            top_area,
            precision,
        })
    }

    /// Base area `q = (1 - p) / (n - 1)` of every cut triangle.
    pub fn base_area(&self) -> Rational {
        (int(1) - &self.top_area) / int(self.n as i64 - 1)
    }

    /// Area `W = 1/(4p)` of the triangle spanned by the extended trapezoid edges.
    pub fn apex_area(&self) -> Rational {
        int(1) / (int(4) * &self.top_area)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub epsilon: BigFloat,
    pub residual: BigFloat,
    pub iterations: usize,
    pub bracket_used: (BigFloat, BigFloat),
}

/// Working precision for `n` triangles: four times the bit length of the
/// predicted range plus 64 guard bits, and at least 128.
pub fn default_precision(n: usize) -> u32 {
    let pb = predicted_bound(n);
    if !pb.valid {
        return 128;
    }
    let bits = BigFloat::log2_upper(&(int(1) / &pb.value), 0)
        .expect("positive")
        .to_integer()
        .to_u32()
        .unwrap_or(u32::MAX / 8);
    (4 * bits + 64).max(128)
}

/// `ln Phi(eps)`; zero exactly when the cut sequence ends flush.
pub fn phi_log(spec: &TrapezoidCutSpec, eps: &BigFloat) -> Result<BigFloat> {
    Ok(phi_log_with_derivative(spec, eps, false)?.0)
}

fn phi_log_with_derivative(
    spec: &TrapezoidCutSpec,
    eps: &BigFloat,
    want_derivative: bool,
) -> Result<(BigFloat, BigFloat)> {
    let prec = spec.precision;
    let eps = eps.with_precision(prec);
    let q = BigFloat::from_rational(&spec.base_area(), prec);
    let w = BigFloat::from_rational(&spec.apex_area(), prec);
    let mut value = BigFloat::zero(prec);
    let mut deriv = BigFloat::zero(prec);
    let mut prev = w.clone();
    let mut prefix: i64 = 0;
    for (i, &s) in spec.signs.signs().iter().enumerate() {
        let a = if s > 0 { &q + &eps } else { &q - &eps };
        let prev_prefix = prefix;
        prefix += s as i64;
        let cur = &w - &(&(&q * &BigFloat::from_i64(i as i64 + 1, prec))
            + &(&eps * &BigFloat::from_i64(prefix, prec)));
        if cur.as_f64() <= 0.0 {
            return Err(Error::Domain(format!(
                "remaining apex area vanishes at step {} for eps = {eps}",
                i + 1
            )));
        }
        let term = (-(a / prev.clone())).ln_1p()?;
        if s > 0 {
            value = value + term;
        } else {
            value = value - term;
        }
        if want_derivative {
            let d = &BigFloat::from_i64(prev_prefix, prec) / &prev
                - &BigFloat::from_i64(prefix, prec) / &cur;
            if s > 0 {
                deriv = deriv + d;
            } else {
                deriv = deriv - d;
            }
        }
        prev = cur;
    }
    Ok((value, deriv))
}

fn sign_of(x: &BigFloat) -> i32 {
    let f = x.as_f64();
    if f > 0.0 {
        1
    } else if f < 0.0 {
        -1
    } else if x.is_zero() {
        0
    } else {
        // Subnormal in f64 but nonzero as a BigFloat.
        if x.as_rug().is_sign_positive() {
            1
        } else {
            -1
        }
    }
}

/// Root of `ln Phi` nearest to zero: bracket, bisect to `2^(-P/2)` residual, then Newton.
pub fn solve_epsilon(spec: &TrapezoidCutSpec) -> Result<SolveResult> {
    let prec = spec.precision;
    let q = BigFloat::from_rational(&spec.base_area(), prec);
    let half = &q * &BigFloat::from_rational(&rat(1, 2), prec);
    let f = |x: &BigFloat| phi_log(spec, x);

    let (mut lo, mut hi, mut flo) = {
        let (a, b) = (-half.clone(), half.clone());
        let (fa, fb) = (f(&a)?, f(&b)?);
        if sign_of(&fa) * sign_of(&fb) <= 0 {
            (a, b, fa)
        } else {
            let edge = &q - &BigFloat::from_rational(&rat(1, 1 << 20), prec);
            let steps = 16;
            let at = |k: i64| {
                &half + &(&(&edge - &half) * &BigFloat::from_rational(&rat(k, steps), prec))
            };
            let mut found = None;
            let (mut fp_prev, mut fm_prev) = (fb, fa);
            for k in 1..=steps {
                let xp = at(k);
                let xm = -xp.clone();
                let fp = f(&xp).ok();
                let fm = f(&xm).ok();
                if let Some(fp) = &fp {
                    if sign_of(&fp_prev) * sign_of(fp) <= 0 {
                        found = Some((at(k - 1), xp.clone(), fp_prev.clone()));
                        break;
                    }
                }
                if let Some(fm) = &fm {
                    if sign_of(&fm_prev) * sign_of(fm) <= 0 {
                        found = Some((xm.clone(), -at(k - 1), fm.clone()));
                        break;
                    }
                }
                match (fp, fm) {
                    (Some(a), Some(b)) => {
                        fp_prev = a;
                        fm_prev = b;
                    }
                    _ => break,
                }
            }
            found.ok_or_else(|| {
                Error::NoBracket(format!("no sign change of ln Phi for {}", spec.signs))
            })?
        }
    };
    let bracket_used = (lo.clone(), hi.clone());
    let target = BigFloat::from_rug(rug::Float::with_val(
        prec,
        rug::Float::i_exp(1, -((prec / 2) as i32)),
    ));
    let mut iterations = 0;
    let two = BigFloat::from_i64(2, prec);
    let mut mid = (&lo + &hi) / two.clone();
    let mut fmid = f(&mid)?;
    while fmid.magnitude() > target && iterations < 4 * prec as usize {
        if sign_of(&fmid) * sign_of(&flo) <= 0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
        mid = (&lo + &hi) / two.clone();
        fmid = f(&mid)?;
        iterations += 1;
    }
    let mut eps = mid;
    let mut res = fmid;
    let tiny = BigFloat::from_rug(rug::Float::with_val(prec, rug::Float::i_exp(1, -(prec as i32))));
    for _ in 0..8 {
        if res.is_zero() {
            break;
        }
        let (_, d) = phi_log_with_derivative(spec, &eps, true)?;
        if d.is_zero() {
            break;
        }
        let step = &res / &d;
        let next = &eps - &step;
        let fnext = f(&next)?;
        iterations += 1;
        if fnext.magnitude() > res.magnitude() {
            break;
        }
        let small = step.magnitude() <= &tiny * &eps.magnitude();
        eps = next;
        res = fnext;
        if small {
            break;
        }
    }
    Ok(SolveResult {
        epsilon: eps,
        residual: res.magnitude(),
        iterations,
        bracket_used,
    })
}

/// Node and triangle layout of a trapezoid-cut dissection, with coordinates.
pub fn build_trapezoid_cut(
    spec: &TrapezoidCutSpec,
    solved: &SolveResult,
) -> Result<(AbstractDissection, FramedMap<BigFloat>)> {
    let prec = spec.precision;
    let bf = |q: &Rational| BigFloat::from_rational(q, prec);
    let eps = solved.epsilon.with_precision(prec);
    let q = bf(&spec.base_area());
    let w = bf(&spec.apex_area());
    let x0 = bf(&(int(1) / (int(2) * &spec.top_area)));
    let one = BigFloat::from_i64(1, prec);
    let target_q = int(1) - int(2) * &spec.top_area;
    let target = bf(&target_q);

    // Corners 0..4 of the unit square, then the top-right cut corner R = 4.
    let mut points: Vec<Point<BigFloat>> = unit_square()
        .iter()
        .map(|p| Point::new(bf(&p.x), bf(&p.y)))
        .collect();
    points.push(Point::new(one.clone(), target.clone()));
    let (p_id, q_id, c_id, s_id, r_id) = (0usize, 1usize, 2usize, 3usize, 4usize);

    let signs = spec.signs.signs();
    let last_plus = signs.iter().rposition(|&s| s > 0).expect("balanced");
    let last_minus = signs.iter().rposition(|&s| s < 0).expect("balanced");

    let on_top = |t: &BigFloat| Point::new(&x0 * &(&one - t), t.clone());
    let on_bottom = |u: &BigFloat| Point::new(&x0 * &(&one - u), BigFloat::zero(prec));

    let (mut t, mut u) = (one.clone(), one.clone());
    let (mut top, mut bottom) = (s_id, p_id);
    let mut top_nodes = Vec::new();
    let mut bottom_nodes = Vec::new();
    let mut triangles = Vec::with_capacity(spec.n);
    let mut prev_left = w.clone();
    let mut prefix = 0i64;
    let snap_tol = 2f64.powi(-(prec as i32) / 4);
    for (i, &s) in signs.iter().enumerate() {
        prefix += s as i64;
        let left = &w - &(&(&q * &BigFloat::from_i64(i as i64 + 1, prec))
            + &(&eps * &BigFloat::from_i64(prefix, prec)));
        let rho = left.checked_div(&prev_left)?;
        prev_left = left;
        if s > 0 {
            t = &t * &rho;
            let id = if i == last_plus {
                let dev = (&t - &target).magnitude().as_f64();
                if dev > snap_tol {
                    return Err(Error::SnapFailure {
                        deviation: dev,
                        allowed: snap_tol,
                    });
                }
                r_id
            } else {
                points.push(on_top(&t));
                top_nodes.push(points.len() - 1);
                points.len() - 1
            };
            triangles.push([bottom, id, top]);
            top = id;
        } else {
            u = &u * &rho;
            let id = if i == last_minus {
                let dev = (&u - &target).magnitude().as_f64();
                if dev > snap_tol {
                    return Err(Error::SnapFailure {
                        deviation: dev,
                        allowed: snap_tol,
                    });
                }
                q_id
            } else {
                points.push(on_bottom(&u));
                bottom_nodes.push(points.len() - 1);
                points.len() - 1
            };
            triangles.push([bottom, id, top]);
            bottom = id;
        }
    }
    triangles.push([s_id, r_id, c_id]);
    let mut sides: Vec<[Vec<usize>; 3]> = vec![Default::default(); triangles.len()];
    sides.last_mut().expect("top triangle")[0] = top_nodes;
    let mut boundary = vec![p_id];
    boundary.extend(&bottom_nodes);
    boundary.extend([q_id, r_id, c_id, s_id]);
    let corners = vec![p_id, q_id, c_id, s_id];
    let collinear = build_reduced_collinearity(&triangles, &sides, &boundary, &corners)?;
    let d = AbstractDissection::new(
        points.len(),
        boundary,
        corners,
        triangles,
        collinear,
        unit_square(),
    );
    Ok((d, FramedMap::new(points)))
}

/// Areas of a trapezoid cut: `q + s_i eps` for each cut, then the top area.
pub fn trapezoid_areas(spec: &TrapezoidCutSpec, eps: &BigFloat) -> Vec<BigFloat> {
    let prec = spec.precision;
    let q = BigFloat::from_rational(&spec.base_area(), prec);
    let mut v: Vec<BigFloat> = spec
        .signs
        .signs()
        .iter()
        .map(|&s| if s > 0 { &q + eps } else { &q - eps })
        .collect();
    v.push(BigFloat::from_rational(&spec.top_area, prec));
    v
}

/// Dissection for `n = 1 (mod 4)`: a top triangle of area `1/n` above `(n-1)/4`
/// vertical slices of area `4/n`, each cut into four triangles.
///
/// In a slice between `x` and `x'` under the top edge `y = 1 - 2x/n`, the first
/// triangle has its apex at the top-left and area exactly `1/n`, the last one sits
/// in the bottom-right, and the two middle ones share the rest equally through
/// the midpoint of the slice's top edge.
pub fn slice_family(n: usize, precision: u32) -> Result<(AbstractDissection, FramedMap<BigFloat>)> {
    if n < 5 || n % 4 != 1 {
        return Err(Error::PreconditionFailed(format!(
            "slice family needs n = 1 (mod 4) and n >= 5, got {n}"
        )));
    }
    let prec = precision;
    let bf = |q: &Rational| BigFloat::from_rational(q, prec);
    let nn = bf(&int(n as i64));
    let one = BigFloat::from_i64(1, prec);
    let two = BigFloat::from_i64(2, prec);
    let height = |x: &BigFloat| &one - &(&(&two * x) / &nn);
    let slices = (n - 1) / 4;

    let mut points: Vec<Point<BigFloat>> = unit_square()
        .iter()
        .map(|p| Point::new(bf(&p.x), bf(&p.y)))
        .collect();
    let r_top = bf(&(int(1) - rat(2, n as i64)));
    points.push(Point::new(one.clone(), r_top));
    let (p_id, q_id, c_id, s_id, r_id) = (0usize, 1usize, 2usize, 3usize, 4usize);

    let mut triangles = Vec::with_capacity(n);
    let mut top_nodes = Vec::new();
    let mut bottom_nodes = Vec::new();
    let (mut tl, mut bl) = (s_id, p_id);
    let mut x = BigFloat::zero(prec);
    for j in 0..slices {
        let last = j + 1 == slices;
        let h = height(&x);
        let b = &two / &(&nn * &h);
        let xb = &x + &b;
        // Width u of a slice of area 4/n: u^2 - (n - 2x) u + 4 = 0, smaller root.
        let c = &nn - &(&two * &x);
        let disc = (&(&c * &c) - &BigFloat::from_i64(16, prec)).sqrt()?;
        let width = &BigFloat::from_i64(8, prec) / &(&c + &disc);
        let xr = if last { one.clone() } else { &x + &width };
        let hr = height(&xr);

        points.push(Point::new(xb, BigFloat::zero(prec)));
        let base = points.len() - 1;
        let (tr, br) = if last {
            (r_id, q_id)
        } else {
            points.push(Point::new(xr.clone(), hr.clone()));
            points.push(Point::new(xr.clone(), BigFloat::zero(prec)));
            (points.len() - 2, points.len() - 1)
        };
        let mid = Point::new(
            &(&points[tl].x + &points[tr].x) / &two,
            &(&points[tl].y + &points[tr].y) / &two,
        );
        points.push(mid);
        let m = points.len() - 1;

        triangles.push([bl, base, tl]);
        triangles.push([tl, base, m]);
        triangles.push([base, tr, m]);
        triangles.push([base, br, tr]);
        top_nodes.push(m);
        bottom_nodes.push(base);
        if !last {
            top_nodes.push(tr);
            bottom_nodes.push(br);
        }
        tl = tr;
        bl = br;
        x = xr;
    }
    triangles.push([s_id, r_id, c_id]);
    let mut sides: Vec<[Vec<usize>; 3]> = vec![Default::default(); triangles.len()];
    sides.last_mut().expect("top triangle")[0] = top_nodes;
    let mut boundary = vec![p_id];
    boundary.extend(&bottom_nodes);
    boundary.extend([q_id, r_id, c_id, s_id]);
    let corners = vec![p_id, q_id, c_id, s_id];
    let collinear = build_reduced_collinearity(&triangles, &sides, &boundary, &corners)?;
    let d = AbstractDissection::new(
        points.len(),
        boundary,
        corners,
        triangles,
        collinear,
        unit_square(),
    );
    Ok((d, FramedMap::new(points)))
}

#[derive(Clone, Debug)]
pub enum SearchMode {
    /// Every balanced sequence starting with `+`; fails if `C(n-1, (n-1)/2)` exceeds `budget`.
    Exhaustive { budget: u128 },
    /// Uniformly sampled balanced sequences; sample `i` draws from stream `i` of `seed`.
    Random { samples: usize, seed: u64 },
}

/// Admits every odd `n <= 19`.
pub const DEFAULT_SEARCH_BUDGET: u128 = 48_620;

#[derive(Clone, Debug)]
pub struct RankedSequence {
    pub signs: SignSequence,
    pub epsilon: BigFloat,
    pub range: BigFloat,
    pub rms: BigFloat,
    pub lambda: Option<BigFloat>,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub ranked: Vec<RankedSequence>,
    /// Sequences for which no root of `ln Phi` was bracketed.
    pub skipped: Vec<SignSequence>,
}

fn balanced_sequences(m: usize) -> Vec<SignSequence> {
    // First entry is +, choose positions of the m/2 minus signs among the rest.
    let h = m / 2;
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (1..=h).collect();
    loop {
        let mut s = vec![1i8; m];
        for &i in &idx {
            s[i] = -1;
        }
        out.push(SignSequence(s));
        let mut k = h;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] < m - h + k {
                idx[k] += 1;
                for j in k + 1..h {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn random_sequences(m: usize, samples: usize, seed: u64) -> Vec<SignSequence> {
    let mut seen = BTreeSet::new();
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut s: Vec<i8> = (0..m).map(|j| if j < m / 2 { 1 } else { -1 }).collect();
        s.shuffle(&mut rng);
        seen.insert(SignSequence(s).canonical());
    }
    seen.into_iter().collect()
}

/// Solves every candidate sequence and ranks by `|eps|`, ties broken by sequence order.
pub fn search_signs(n: usize, mode: &SearchMode, precision: u32) -> Result<SearchOutcome> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::PreconditionFailed(format!(
            "sign search needs odd n >= 3, got {n}"
        )));
    }
    let m = n - 1;
    let candidates = match mode {
        SearchMode::Exhaustive { budget } => {
            let needed = binomial(BigInt::from(m), BigInt::from(m / 2))
                .to_u128()
                .unwrap_or(u128::MAX);
            if needed > *budget {
                return Err(Error::BudgetExceeded {
                    needed,
                    budget: *budget,
                });
            }
            balanced_sequences(m)
        }
        SearchMode::Random { samples, seed } => random_sequences(m, *samples, *seed),
    };
    let solved: Vec<(SignSequence, Option<BigFloat>)> = candidates
        .into_par_iter()
        .map(|s| {
            let eps = TrapezoidCutSpec::new(s.clone(), precision)
                .and_then(|spec| solve_epsilon(&spec))
                .ok()
                .map(|r| r.epsilon);
            (s, eps)
        })
        .collect();
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for (s, eps) in solved {
        match eps {
            Some(eps) => {
                let spec = TrapezoidCutSpec::new(s.clone(), precision)?;
                let areas = trapezoid_areas(&spec, &eps);
                let mm = metrics_of_areas(&areas, &int(1), precision);
                ranked.push(RankedSequence {
                    signs: s,
                    epsilon: eps,
                    range: mm.range,
                    rms: mm.rms,
                    lambda: mm.lambda,
                });
            }
            None => skipped.push(s),
        }
    }
    ranked.sort_by(|a, b| {
        a.epsilon
            .magnitude()
            .partial_cmp(&b.epsilon.magnitude())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.signs.cmp(&b.signs))
    });
    Ok(SearchOutcome { ranked, skipped })
}

#[derive(Clone, Debug)]
pub struct PredictedBound {
    pub n: usize,
    /// `2^k + 1` with `k = floor(log2 n)`.
    pub n_prime: u64,
    pub value: Rational,
    /// False when `n' < 5` or the value is not below 1.
    pub valid: bool,
}

impl PredictedBound {
    pub fn value_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    pub fn lambda(&self) -> Option<BigFloat> {
        if !self.valid {
            return None;
        }
        lambda(&BigFloat::from_rational(&self.value, 128), self.n)
    }
}

/// Predicted range `(n'/n) * 16 / ((n'/4 - 1)^k (k + 1))`, exact.
pub fn predicted_bound(n: usize) -> PredictedBound {
    assert!(n >= 1, "predicted bound needs n >= 1");
    let k = usize::BITS - 1 - n.leading_zeros();
    let n_prime = (1u64 << k) + 1;
    let np = int(n_prime as i64);
    let ratio = &np / int(4) - int(1);
    let denom = num_traits::pow(ratio, k as usize) * int(k as i64 + 1);
    let value = if denom.is_zero() {
        Rational::zero()
    } else {
        &np / int(n as i64) * int(16) / denom
    };
    let valid = n_prime >= 5 && value.is_positive() && value < int(1);
    PredictedBound {
        n,
        n_prime,
        value,
        valid,
    }
}

/// Range of the Thue-Morse construction carried to `n` triangles by repeated [`add_two`]:
/// `(n'/n) * R_C(n')` with `n' = 2^k + 1`, `k = floor(log2 n)`.
pub fn thue_morse_range(n: usize, precision: Option<u32>) -> Result<BigFloat> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::PreconditionFailed(format!("needs odd n >= 3, got {n}")));
    }
    let k = usize::BITS - 1 - n.leading_zeros();
    let np = (1usize << k) + 1;
    let prec = precision.unwrap_or_else(|| default_precision(np));
    let spec = TrapezoidCutSpec::new(thue_morse(np - 1), prec)?;
    let eps = solve_epsilon(&spec)?.epsilon;
    let r = &eps.magnitude() * &BigFloat::from_i64(2, prec);
    Ok(&r * &BigFloat::from_rational(&rat(np as i64, n as i64), prec))
}

/// Dissection of the unit square into `n + 2` triangles from one into `n`:
/// a strip of width `2/n` split into two triangles of area `1/n` is glued to
/// the right side and the result is squeezed horizontally by `n/(n+2)`.
pub fn add_two<S: Scalar>(
    d: &AbstractDissection,
    map: &FramedMap<S>,
) -> Result<(AbstractDissection, FramedMap<S>)> {
    if d.polygon != unit_square() {
        return Err(Error::PreconditionFailed(
            "add_two needs the unit square with corners (0,0),(1,0),(1,1),(0,1)".into(),
        ));
    }
    check_legality(d, map)?;
    let fs = d.face_structure()?;
    let n = d.n() as i64;
    let nn = d.node_count;
    let (c0, c1, c2, c3) = (d.corners[0], d.corners[1], d.corners[2], d.corners[3]);
    let (qn, cn) = (nn, nn + 1);

    let mut triangles = d.triangles.clone();
    let mut sides = fs.triangle_sides.clone();
    triangles.push([c1, qn, cn]);
    sides.push(Default::default());
    triangles.push([c1, cn, c2]);
    let right: Vec<usize> = fs.outer_sides[1].iter().rev().copied().collect();
    sides.push([Vec::new(), Vec::new(), right]);

    let mut boundary = vec![c0];
    boundary.extend(&fs.outer_sides[0]);
    boundary.extend([c1, qn, cn, c2]);
    boundary.extend(&fs.outer_sides[2]);
    boundary.push(c3);
    boundary.extend(&fs.outer_sides[3]);
    let corners = vec![c0, qn, cn, c3];
    let collinear = build_reduced_collinearity(&triangles, &sides, &boundary, &corners)?;

    let ctx = map.points[0].x.ctx();
    let squeeze = S::from_rational(&rat(n, n + 2), ctx);
    let mut points: Vec<Point<S>> = map
        .points
        .iter()
        .map(|p| Point::new(p.x.clone() * squeeze.clone(), p.y.clone()))
        .collect();
    let one = S::from_rational(&int(1), ctx);
    let zero = S::from_rational(&int(0), ctx);
    points.push(Point::new(one.clone(), zero));
    points.push(Point::new(one.clone(), one));
    let nd = AbstractDissection::new(nn + 2, boundary, corners, triangles, collinear, unit_square());
    Ok((nd, FramedMap::new(points)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TarrySolution {
    pub length: usize,
    /// Half containing 1.
    pub first: Vec<u32>,
    pub second: Vec<u32>,
}

/// Admits every `max_len <= 20`.
pub const DEFAULT_TARRY_BUDGET: u128 = 131_072;

/// Splits of `{1..2m}` into two halves of size `m` with equal power sums for
/// exponents `0..=k`, for every even length `2m <= max_len`.
pub fn tarry_escott(k: u32, max_len: usize, budget: u128) -> Result<Vec<TarrySolution>> {
    let mut needed: u128 = 0;
    for len in (2..=max_len).step_by(2) {
        needed += binomial(BigInt::from(len - 1), BigInt::from(len / 2 - 1))
            .to_u128()
            .unwrap_or(u128::MAX);
    }
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut out = Vec::new();
    for len in (2..=max_len).step_by(2) {
        let m = len / 2;
        let powers: Vec<Vec<BigInt>> = (0..=len)
            .map(|x| (0..=k).map(|e| num_traits::pow(BigInt::from(x), e as usize)).collect())
            .collect();
        let totals: Vec<BigInt> = (0..=k as usize)
            .map(|e| (1..=len).map(|x| &powers[x][e]).sum())
            .collect();
        // Choose m-1 further elements from 2..=len alongside 1.
        let mut idx: Vec<usize> = (2..=m).collect();
        loop {
            let ok = (0..=k as usize).all(|e| {
                let s: BigInt = powers[1][e].clone() + idx.iter().map(|&x| &powers[x][e]).sum::<BigInt>();
                s.clone() + s == totals[e]
            });
            if ok {
                let mut first = vec![1u32];
                first.extend(idx.iter().map(|&x| x as u32));
                let second = (1..=len as u32).filter(|x| !first.contains(x)).collect();
                out.push(TarrySolution {
                    length: len,
                    first,
                    second,
                });
            }
            let r = idx.len();
            let mut j = r;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                if idx[j] < len - (r - 1 - j) {
                    idx[j] += 1;
                    for t in j + 1..r {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break;
                }
                if j == 0 {
                    j = usize::MAX;
                    break;
                }
            }
            if j == usize::MAX || r == 0 {
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissection::{metrics, triangle_areas, validate_abstract};

    #[test]
    fn thue_morse_prefix_and_popcount() {
        assert_eq!(thue_morse(8).to_string(), "+--+-++-");
        let s = thue_morse(1 << 12);
        for (i, &v) in s.signs().iter().enumerate() {
            assert_eq!(v > 0, (i as u32).count_ones() % 2 == 0, "index {}", i + 1);
        }
    }

    #[test]
    fn sign_order_puts_plus_first() {
        let a = SignSequence::parse("+-").unwrap();
        let b = SignSequence::parse("-+").unwrap();
        assert!(a < b);
        assert_eq!(b.canonical(), a);
        assert!(SignSequence::parse("+x").is_err());
    }

    #[test]
    fn prouhet_small() {
        // 1 - 2 - 3 + 4 = 0 for f(x) = x, k = 2.
        assert!(prouhet_check(2, &int(1), &int(0), &[int(0), int(1)]).is_zero());
        assert!(!prouhet_check(2, &int(1), &int(0), &[int(0), int(0), int(1)]).is_zero());
    }

    #[test]
    fn n3_root_is_one_sixth() {
        let spec = TrapezoidCutSpec::new(SignSequence::parse("+-").unwrap(), 128).unwrap();
        let r = solve_epsilon(&spec).unwrap();
        assert!((r.epsilon.as_f64() - 1.0 / 6.0).abs() < 1e-30);
        let flipped = TrapezoidCutSpec::new(SignSequence::parse("-+").unwrap(), 128).unwrap();
        let rf = solve_epsilon(&flipped).unwrap();
        assert!((rf.epsilon.as_f64() + 1.0 / 6.0).abs() < 1e-30);
    }

    #[test]
    fn phi_log_flip_symmetry() {
        let s = SignSequence::parse("+--+").unwrap();
        let a = TrapezoidCutSpec::new(s.clone(), 128).unwrap();
        let b = TrapezoidCutSpec::new(s.flipped(), 128).unwrap();
        let e = BigFloat::from_rational(&rat(1, 100), 128);
        let va = phi_log(&a, &e).unwrap();
        let vb = phi_log(&b, &(-e)).unwrap();
        assert!((va + vb).magnitude().as_f64() < 1e-35);
    }

    #[test]
    fn n3_build_areas() {
        let spec = TrapezoidCutSpec::new(SignSequence::parse("+-").unwrap(), 128).unwrap();
        let r = solve_epsilon(&spec).unwrap();
        let (d, m) = build_trapezoid_cut(&spec, &r).unwrap();
        validate_abstract(&d).unwrap();
        check_legality(&d, &m).unwrap();
        let areas: Vec<f64> = triangle_areas(&d, &m).iter().map(|a| a.as_f64()).collect();
        let expect = [0.5, 1.0 / 6.0, 1.0 / 3.0];
        for (a, e) in areas.iter().zip(expect) {
            assert!((a - e).abs() < 1e-30, "{areas:?}");
        }
        let mm = metrics(&d, &m, 128);
        assert!((mm.range.as_f64() - 1.0 / 3.0).abs() < 1e-30);
    }

    #[test]
    fn n5_thue_morse() {
        let spec = TrapezoidCutSpec::new(thue_morse(4), 128).unwrap();
        let r = solve_epsilon(&spec).unwrap();
        // Exact root of ((21/20 - e)/(13/20 + e))^2 = 25/9 is e = -1/80.
        assert!((r.epsilon.as_f64() + 0.0125).abs() < 1e-30);
        assert!(r.residual.as_f64() <= 2f64.powi(-64));
    }

    #[test]
    fn general_top_area() {
        let spec =
            TrapezoidCutSpec::with_top_area(thue_morse(8), rat(1, 10), 128).unwrap();
        let r = solve_epsilon(&spec).unwrap();
        let (d, m) = build_trapezoid_cut(&spec, &r).unwrap();
        check_legality(&d, &m).unwrap();
        let total = triangle_areas(&d, &m)
            .into_iter()
            .fold(BigFloat::zero(128), |acc, a| acc + a);
        assert!((total - BigFloat::from_i64(1, 128)).magnitude().as_f64() < 1e-30);
    }

    #[test]
    fn telescoping_product_is_exact() {
        // prod rho_i = 1 - 4(n-1)/n^2 for every balanced sequence, at any eps.
        let s = SignSequence::parse("+-+--+").unwrap();
        let spec = TrapezoidCutSpec::new(s.clone(), 64).unwrap();
        let n = spec.n as i64;
        let eps = rat(1, 97);
        let q = spec.base_area();
        let w = spec.apex_area();
        let mut a = Rational::zero();
        let mut prod = int(1);
        for &si in s.signs() {
            let next = &a + &q + &eps * int(si as i64);
            prod *= (&w - &next) / (&w - &a);
            a = next;
        }
        assert_eq!(prod, int(1) - int(4 * (n - 1)) / int(n * n));
    }

    #[test]
    fn predicted_values() {
        assert_eq!(predicted_bound(3).value, int(-32));
        assert!(!predicted_bound(3).valid);
        assert_eq!(predicted_bound(9).value, rat(256, 125));
        assert!(!predicted_bound(9).valid);
        assert!(predicted_bound(17).valid);
        assert!((predicted_bound(17).value_f64() - 0.028682).abs() < 1e-6);
        assert!((predicted_bound(17).lambda().unwrap().as_f64() - 0.5538).abs() < 1e-4);
    }

    #[test]
    fn default_precision_values() {
        assert_eq!(default_precision(9), 128);
        assert_eq!(default_precision(129), 200);
        assert_eq!(default_precision(1025), 384);
    }

    #[test]
    fn slice_family_small() {
        let (d, m) = slice_family(9, 128).unwrap();
        assert_eq!(d.node_count, 11);
        validate_abstract(&d).unwrap();
        check_legality(&d, &m).unwrap();
        assert!(slice_family(7, 128).is_err());
    }

    #[test]
    fn slice_family_seventeen_slice_ends() {
        let (d, m) = slice_family(17, 128).unwrap();
        assert_eq!(d.node_count, 19);
        let mut xs: Vec<f64> = d
            .boundary
            .iter()
            .map(|&v| &m.points[v])
            .filter(|p| p.y.is_zero())
            .map(|p| p.x.as_f64())
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Slice boundaries, every other bottom node. The first is the root of
        // u^2 - 17u + 4 = 0; later ones drift from the drawn figure by a few 1e-6.
        assert!((xs[2] - (17.0 - 273f64.sqrt()) / 2.0).abs() < 1e-15);
        for (got, want) in [xs[2], xs[4], xs[6]].iter().zip([0.238644, 0.484393, 0.737918]) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
        assert!((m.points[4].y.as_f64() - 0.882353).abs() < 1e-6);
    }

    #[test]
    fn add_two_scales_range_and_rms() {
        let (d, m) = crate::fixtures::three_triangle();
        let (d2, m2) = add_two(&d, &m).unwrap();
        validate_abstract(&d2).unwrap();
        check_legality(&d2, &m2).unwrap();
        let a = metrics(&d, &m, 128);
        let b = metrics(&d2, &m2, 128);
        assert_eq!(b.range, a.range.clone() * rat(3, 5));
        let ratio = b.rms.as_f64() / a.rms.as_f64();
        assert!((ratio - (0.6f64).powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn add_two_keeps_side_nodes_on_the_old_right_edge() {
        let (d, m) = crate::fixtures::right_midpoint();
        let (d2, m2) = add_two(&d, &m).unwrap();
        validate_abstract(&d2).unwrap();
        check_legality(&d2, &m2).unwrap();
        assert_eq!(d2.n(), 5);
    }

    #[test]
    fn tarry_k1() {
        let sols = tarry_escott(1, 4, DEFAULT_TARRY_BUDGET).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].first, vec![1, 4]);
        assert!(matches!(
            tarry_escott(3, 40, DEFAULT_TARRY_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn exhaustive_enumeration_counts() {
        assert_eq!(balanced_sequences(4).len(), 3);
        assert_eq!(balanced_sequences(12).len(), 462);
        assert!(balanced_sequences(6).iter().all(|s| s.is_balanced() && s.signs()[0] == 1));
    }
}
