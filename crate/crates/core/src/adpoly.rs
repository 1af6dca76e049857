//! Area-difference polynomial of a dissection type and local SSR minimization.
//!
//! Variables are the node coordinates: `x_v` has index `2v`, `y_v` has index `2v+1`.
//! The polynomial is
//!
//! ```text
//! sum_triangles (a(t) - E/n)^2 + sum_collinear a(l)^2 + sum_corners |v - corner|^2
//! ```
//!
//! which is nonnegative and vanishes exactly on constrained framed maps with all
//! areas equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dissection::{
    check_legality, face_area, metrics, validate_abstract, AbstractDissection, FramedMap, Metrics,
    Point,
};
use crate::error::{Error, Result};
use crate::numerics::{int, rat, BigFloat, Rational, Scalar};

/// Sorted multiset of variable indices.
pub type Monomial = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsePolynomial {
    pub num_vars: usize,
    terms: BTreeMap<Monomial, Rational>,
}

pub fn var_name(i: u32) -> String {
    format!("{}{}", if i % 2 == 0 { 'x' } else { 'y' }, i / 2)
}

fn merge(a: &[u32], b: &[u32]) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] <= b[j]) {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out
}

impl SparsePolynomial {
    pub fn zero(num_vars: usize) -> Self {
        SparsePolynomial {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: Rational) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(num_vars: usize, i: u32) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(vec![i], int(1));
        p
    }

    pub fn add_term(&mut self, mut m: Monomial, c: Rational) {
        m.sort_unstable();
        let e = self.terms.entry(m).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            let key: Vec<Monomial> = self
                .terms
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .collect();
            for k in key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &[u32]) -> Rational {
        let mut key = m.to_vec();
        key.sort_unstable();
        self.terms.get(&key).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&[])
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Variables with a nonzero coefficient in some monomial.
    pub fn variables_used(&self) -> BTreeSet<u32> {
        self.terms.keys().flatten().copied().collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), c.clone());
        }
        p
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut p = Self::zero(self.num_vars);
        if !c.is_zero() {
            for (m, v) in &self.terms {
                p.terms.insert(m.clone(), v * c);
            }
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.num_vars.max(other.num_vars));
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                p.add_term(merge(ma, mb), ca * cb);
            }
        }
        p
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    pub fn partial(&self, var: u32) -> Self {
        let mut p = Self::zero(self.num_vars);
        for (m, c) in &self.terms {
            let count = m.iter().filter(|&&v| v == var).count();
            if count == 0 {
                continue;
            }
            let mut reduced = m.clone();
            let pos = reduced.iter().position(|&v| v == var).expect("present");
            reduced.remove(pos);
            p.add_term(reduced, c * int(count as i64));
        }
        p
    }

    pub fn eval<S: Scalar>(&self, values: &[S]) -> S {
        assert_eq!(values.len(), self.num_vars, "wrong number of values");
        let ctx = values[0].ctx();
        let mut acc = S::from_rational(&Rational::zero(), ctx);
        for (m, c) in &self.terms {
            let mut t = S::from_rational(c, ctx);
            for &v in m {
                t = t * values[v as usize].clone();
            }
            acc = acc + t;
        }
        acc
    }

    pub fn gradient<S: Scalar>(&self, values: &[S]) -> Vec<S> {
        (0..self.num_vars as u32)
            .map(|i| self.partial(i).eval(values))
            .collect()
    }
}

impl fmt::Display for SparsePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c})")?;
            for &v in m {
                write!(f, "*{}", var_name(v))?;
            }
        }
        Ok(())
    }
}

/// Flattens a map into the variable vector `x0, y0, x1, y1, ...`.
pub fn map_to_vars<S: Scalar>(map: &FramedMap<S>) -> Vec<S> {
    map.points
        .iter()
        .flat_map(|p| [p.x.clone(), p.y.clone()])
        .collect()
}

fn area_poly(num_vars: usize, f: &[usize; 3]) -> SparsePolynomial {
    let mut p = SparsePolynomial::zero(num_vars);
    let half = rat(1, 2);
    for k in 0..3 {
        let (a, b) = (f[k] as u32, f[(k + 1) % 3] as u32);
        p.add_term(vec![2 * a, 2 * b + 1], half.clone());
        p.add_term(vec![2 * b, 2 * a + 1], -half.clone());
    }
    p
}

/// The area-difference polynomial over `2N` variables.
pub fn assemble(d: &AbstractDissection) -> Result<SparsePolynomial> {
    validate_abstract(d)?;
    let nv = 2 * d.node_count;
    let mean = &d.area / int(d.n() as i64);
    let mut p = SparsePolynomial::zero(nv);
    for t in &d.triangles {
        let r = area_poly(nv, t).add(&SparsePolynomial::constant(nv, -mean.clone()));
        p = p.add(&r.square());
    }
    for l in &d.collinear {
        p = p.add(&area_poly(nv, l).square());
    }
    for (&c, corner) in d.corners.iter().zip(&d.polygon) {
        for (v, target) in [(2 * c as u32, &corner.x), (2 * c as u32 + 1, &corner.y)] {
            let r = SparsePolynomial::var(nv, v).add(&SparsePolynomial::constant(nv, -target.clone()));
            p = p.add(&r.square());
        }
    }
    Ok(p)
}

/// The three penalty terms evaluated directly from the map.
pub fn penalty_terms<S: Scalar>(d: &AbstractDissection, map: &FramedMap<S>) -> (S, S, S) {
    let ctx = map.points[0].x.ctx();
    let zero = S::from_rational(&Rational::zero(), ctx);
    let mean = S::from_rational(&(&d.area / int(d.n() as i64)), ctx);
    let mut ssr = zero.clone();
    for t in &d.triangles {
        let r = face_area(map, t) - mean.clone();
        ssr = ssr + r.clone() * r;
    }
    let mut lin = zero.clone();
    for l in &d.collinear {
        let a = face_area(map, l);
        lin = lin + a.clone() * a;
    }
    let mut corner = zero;
    for (&c, target) in d.corners.iter().zip(&d.polygon) {
        let dx = map.points[c].x.clone() - S::from_rational(&target.x, ctx);
        let dy = map.points[c].y.clone() - S::from_rational(&target.y, ctx);
        corner = corner + dx.clone() * dx + dy.clone() * dy;
    }
    (ssr, lin, corner)
}

#[derive(Clone, Debug)]
pub struct StructuralReport {
    pub degree: usize,
    pub variables: usize,
    pub variable_limit: usize,
    pub constant_term: Rational,
    pub constant_bound: Rational,
    pub max_coefficient: Rational,
    pub coefficient_bound: Rational,
    pub scale: i64,
    pub integral_after_scaling: bool,
    pub failures: Vec<String>,
}

impl StructuralReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn is_multiple_of(q: &Rational, s: i64) -> bool {
    (q * int(s)).is_integer()
}

/// Degree, variable count, coefficient sizes and integrality after scaling by `4 n s^2`.
pub fn structural_checks(p: &SparsePolynomial, d: &AbstractDissection, s: i64) -> StructuralReport {
    let mut failures = Vec::new();
    let n = d.n();
    if s < 1 {
        failures.push(format!("scale {s} must be positive"));
    }
    if !is_multiple_of(&d.area, s)
        || d.polygon.iter().any(|c| !is_multiple_of(&c.x, s) || !is_multiple_of(&c.y, s))
    {
        failures.push(format!("area or corners are not multiples of 1/{s}"));
    }
    let b = d
        .polygon
        .iter()
        .flat_map(|c| [c.x.abs(), c.y.abs()])
        .max()
        .unwrap_or_else(Rational::zero);
    if d.polygon.iter().any(|c| c.x.is_negative() || c.y.is_negative()) {
        failures.push("corner coordinates must be nonnegative for the coefficient bounds".into());
    }
    let degree = p.degree();
    if degree != 4 {
        failures.push(format!("degree {degree}, expected 4"));
    }
    let variables = p.variables_used().len();
    let variable_limit = 2 * n + 4;
    if variables > variable_limit || p.num_vars > variable_limit {
        failures.push(format!(
            "{} variables ({variables} used), limit {variable_limit}",
            p.num_vars
        ));
    }
    let nn = int(n as i64);
    let constant_term = p.constant_term();
    let constant_bound = &d.area * &d.area / &nn + int(variable_limit as i64) * &b * &b;
    if constant_term.abs() > constant_bound {
        failures.push(format!("constant term {constant_term} exceeds {constant_bound}"));
    }
    let coefficient_bound = [int(1), &d.area / &nn, int(2) * &b]
        .into_iter()
        .max()
        .expect("nonempty");
    let max_coefficient = p
        .terms()
        .filter(|(m, _)| !m.is_empty())
        .map(|(_, c)| c.abs())
        .max()
        .unwrap_or_else(Rational::zero);
    if max_coefficient > coefficient_bound {
        failures.push(format!(
            "coefficient {max_coefficient} exceeds {coefficient_bound}"
        ));
    }
    let factor = int(4 * n as i64 * s * s);
    let integral_after_scaling = p.terms().all(|(_, c)| (c * &factor).is_integer());
    if !integral_after_scaling {
        failures.push(format!("4 n s^2 p is not integral for s = {s}"));
    }
    StructuralReport {
        degree,
        variables,
        variable_limit,
        constant_term,
        constant_bound,
        max_coefficient,
        coefficient_bound,
        scale: s,
        integral_after_scaling,
        failures,
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Gradient iterations per penalty round.
    pub max_iters: usize,
    pub penalty_start: f64,
    /// The penalty weight doubles after every round.
    pub penalty_rounds: u32,
    pub grad_tol: f64,
    /// Precision of the reported map.
    pub precision: u32,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            restarts: 64,
            seed: 0,
            max_iters: 4000,
            penalty_start: 1.0,
            penalty_rounds: 20,
            grad_tol: 1e-15,
            precision: 128,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub map: FramedMap<BigFloat>,
    pub metrics: Metrics<BigFloat>,
    pub restart: usize,
    pub legal_restarts: usize,
}

/// How a node's position is produced from the parameter vector.
#[derive(Clone, Debug)]
enum Placement {
    Fixed(f64, f64),
    /// Two parameters `x, y` starting at this offset.
    Free(usize),
    /// On the segment between two other nodes, at parameter `t`.
    OnSegment { a: usize, b: usize, t: usize },
}

struct Layout {
    placement: Vec<Placement>,
    /// Nodes in dependency order.
    order: Vec<usize>,
    /// Indices of segment parameters, clamped to `[0,1]`.
    unit_params: Vec<usize>,
    bbox: (f64, f64, f64, f64),
    num_params: usize,
    /// Initial segment parameters on the same host are sorted.
    segment_groups: Vec<Vec<usize>>,
    /// True when some side nodes had to fall back to the collinearity penalty.
    uses_penalty: bool,
}

fn layout(d: &AbstractDissection) -> Result<Layout> {
    let fs = validate_abstract(d)?;
    let nn = d.node_count;
    let mut host: Vec<Option<(usize, usize)>> = vec![None; nn];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (j, side) in fs.outer_sides.iter().enumerate() {
        let (a, b) = (d.corners[j], d.corners[(j + 1) % d.corners.len()]);
        for &v in side {
            host[v] = Some((a, b));
        }
        if !side.is_empty() {
            groups.push(side.clone());
        }
    }
    for (t, sides) in d.triangles.iter().zip(&fs.triangle_sides) {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            for &v in &sides[k] {
                host[v] = Some((a, b));
            }
            if !sides[k].is_empty() {
                groups.push(sides[k].clone());
            }
        }
    }
    let corner_pos: BTreeMap<usize, (f64, f64)> = d
        .corners
        .iter()
        .zip(&d.polygon)
        .map(|(&c, p)| (c, (p.x.to_f64().unwrap_or(0.0), p.y.to_f64().unwrap_or(0.0))))
        .collect();

    // Kahn order: fixed corners and free nodes first, then hosted nodes whose endpoints are placed.
    let mut placed = vec![false; nn];
    let mut order = Vec::with_capacity(nn);
    for v in 0..nn {
        if corner_pos.contains_key(&v) || host[v].is_none() {
            placed[v] = true;
            order.push(v);
        }
    }
    loop {
        let mut progress = false;
        for v in 0..nn {
            if placed[v] {
                continue;
            }
            let (a, b) = host[v].expect("hosted");
            if placed[a] && placed[b] {
                placed[v] = true;
                order.push(v);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    let mut uses_penalty = false;
    let cyclic: Vec<usize> = (0..nn).filter(|&v| !placed[v]).collect();
    for &v in &cyclic {
        host[v] = None;
        uses_penalty = true;
    }
    // Cyclic nodes become free and go before every hosted node.
    let mut full_order: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&v| corner_pos.contains_key(&v) || host[v].is_none())
        .collect();
    full_order.extend(cyclic.iter().copied());
    full_order.extend(
        order
            .iter()
            .copied()
            .filter(|&v| !corner_pos.contains_key(&v) && host[v].is_some()),
    );

    let mut placement = vec![Placement::Fixed(0.0, 0.0); nn];
    let mut unit_params = Vec::new();
    let mut num_params = 0;
    for &v in &full_order {
        placement[v] = if let Some(&(x, y)) = corner_pos.get(&v) {
            Placement::Fixed(x, y)
        } else if let Some((a, b)) = host[v] {
            unit_params.push(num_params);
            num_params += 1;
            Placement::OnSegment {
                a,
                b,
                t: num_params - 1,
            }
        } else {
            num_params += 2;
            Placement::Free(num_params - 2)
        };
    }
    let xs: Vec<f64> = corner_pos.values().map(|p| p.0).collect();
    let ys: Vec<f64> = corner_pos.values().map(|p| p.1).collect();
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let bbox = (
        fold(&xs, f64::min, f64::INFINITY),
        fold(&xs, f64::max, f64::NEG_INFINITY),
        fold(&ys, f64::min, f64::INFINITY),
        fold(&ys, f64::max, f64::NEG_INFINITY),
    );
    let segment_groups = groups
        .into_iter()
        .map(|g| {
            g.into_iter()
                .filter_map(|v| match placement[v] {
                    Placement::OnSegment { t, .. } => Some(t),
                    _ => None,
                })
                .collect::<Vec<_>>()
        })
        .filter(|g| g.len() > 1)
        .collect();
    Ok(Layout {
        placement,
        order: full_order,
        unit_params,
        bbox,
        num_params,
        segment_groups,
        uses_penalty,
    })
}

impl Layout {
    fn positions(&self, z: &[f64]) -> Vec<(f64, f64)> {
        let mut pos = vec![(0.0, 0.0); self.placement.len()];
        for &v in &self.order {
            pos[v] = match self.placement[v] {
                Placement::Fixed(x, y) => (x, y),
                Placement::Free(i) => (z[i], z[i + 1]),
                Placement::OnSegment { a, b, t } => {
                    let (pa, pb) = (pos[a], pos[b]);
                    (pa.0 + z[t] * (pb.0 - pa.0), pa.1 + z[t] * (pb.1 - pa.1))
                }
            };
        }
        pos
    }

    fn positions_big(&self, z: &[f64], d: &AbstractDissection, prec: u32) -> Vec<Point<BigFloat>> {
        let mut pos: Vec<Option<Point<BigFloat>>> = vec![None; self.placement.len()];
        let corner_exact: BTreeMap<usize, &Point<Rational>> =
            d.corners.iter().copied().zip(&d.polygon).collect();
        for &v in &self.order {
            let p = match self.placement[v] {
                Placement::Fixed(..) => {
                    let c = corner_exact[&v];
                    Point::new(
                        BigFloat::from_rational(&c.x, prec),
                        BigFloat::from_rational(&c.y, prec),
                    )
                }
                Placement::Free(i) => Point::new(
                    BigFloat::from_f64(z[i], prec),
                    BigFloat::from_f64(z[i + 1], prec),
                ),
                Placement::OnSegment { a, b, t } => {
                    let pa = pos[a].clone().expect("ordered");
                    let pb = pos[b].clone().expect("ordered");
                    let tt = BigFloat::from_f64(z[t], prec);
                    Point::new(
                        &pa.x + &(&tt * &(&pb.x - &pa.x)),
                        &pa.y + &(&tt * &(&pb.y - &pa.y)),
                    )
                }
            };
            pos[v] = Some(p);
        }
        pos.into_iter().map(|p| p.expect("every node placed")).collect()
    }

    fn project(&self, z: &mut [f64]) {
        let (x0, x1, y0, y1) = self.bbox;
        for p in &self.placement {
            if let Placement::Free(i) = *p {
                z[i] = z[i].clamp(x0, x1);
                z[i + 1] = z[i + 1].clamp(y0, y1);
            }
        }
        for &i in &self.unit_params {
            z[i] = z[i].clamp(0.0, 1.0);
        }
    }
}

fn tri_area(p: &[(f64, f64)], f: &[usize; 3]) -> f64 {
    let (a, b, c) = (p[f[0]], p[f[1]], p[f[2]]);
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1))
}

fn add_area_grad(g: &mut [(f64, f64)], p: &[(f64, f64)], f: &[usize; 3], w: f64) {
    let (a, b, c) = (p[f[0]], p[f[1]], p[f[2]]);
    g[f[0]].0 += w * 0.5 * (b.1 - c.1);
    g[f[0]].1 += w * 0.5 * (c.0 - b.0);
    g[f[1]].0 += w * 0.5 * (c.1 - a.1);
    g[f[1]].1 += w * 0.5 * (a.0 - c.0);
    g[f[2]].0 += w * 0.5 * (a.1 - b.1);
    g[f[2]].1 += w * 0.5 * (b.0 - a.0);
}

struct Objective<'a> {
    d: &'a AbstractDissection,
    lay: &'a Layout,
    mean: f64,
}

impl Objective<'_> {
    fn value(&self, z: &[f64], mu: f64) -> f64 {
        let p = self.lay.positions(z);
        let ssr: f64 = self
            .d
            .triangles
            .iter()
            .map(|t| (tri_area(&p, t) - self.mean).powi(2))
            .sum();
        if mu == 0.0 {
            return ssr;
        }
        let lin: f64 = self.d.collinear.iter().map(|l| tri_area(&p, l).powi(2)).sum();
        ssr + mu * lin
    }

    fn gradient(&self, z: &[f64], mu: f64) -> Vec<f64> {
        let p = self.lay.positions(z);
        let mut g = vec![(0.0, 0.0); p.len()];
        for t in &self.d.triangles {
            let r = tri_area(&p, t) - self.mean;
            add_area_grad(&mut g, &p, t, 2.0 * r);
        }
        if mu != 0.0 {
            for l in &self.d.collinear {
                let a = tri_area(&p, l);
                add_area_grad(&mut g, &p, l, 2.0 * mu * a);
            }
        }
        // Back through the placement, reverse dependency order.
        let mut gz = vec![0.0; z.len()];
        for &v in self.lay.order.iter().rev() {
            match self.lay.placement[v] {
                Placement::Fixed(..) => {}
                Placement::Free(i) => {
                    gz[i] += g[v].0;
                    gz[i + 1] += g[v].1;
                }
                Placement::OnSegment { a, b, t } => {
                    let (pa, pb) = (p[a], p[b]);
                    let gv = g[v];
                    gz[t] += gv.0 * (pb.0 - pa.0) + gv.1 * (pb.1 - pa.1);
                    let s = z[t];
                    g[a].0 += (1.0 - s) * gv.0;
                    g[a].1 += (1.0 - s) * gv.1;
                    g[b].0 += s * gv.0;
                    g[b].1 += s * gv.1;
                }
            }
        }
        gz
    }

    /// Projected gradient with Barzilai-Borwein steps and Armijo backtracking.
    fn descend(&self, z: &mut Vec<f64>, mu: f64, iters: usize, tol: f64) {
        let mut f = self.value(z, mu);
        let mut g = self.gradient(z, mu);
        let mut step = 1.0;
        for _ in 0..iters {
            let mut accepted = None;
            let mut s = step;
            for _ in 0..60 {
                let mut trial: Vec<f64> = z.iter().zip(&g).map(|(x, gi)| x - s * gi).collect();
                self.lay.project(&mut trial);
                let dec: f64 = z
                    .iter()
                    .zip(&trial)
                    .zip(&g)
                    .map(|((x, y), gi)| gi * (x - y))
                    .sum();
                let ft = self.value(&trial, mu);
                if ft <= f - 1e-4 * dec {
                    accepted = Some((trial, ft));
                    break;
                }
                s *= 0.5;
            }
            let Some((next, fnext)) = accepted else { break };
            let gnext = self.gradient(&next, mu);
            let sv: Vec<f64> = next.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = sv.iter().zip(&yv).map(|(a, b)| a * b).sum();
            let ss: f64 = sv.iter().map(|a| a * a).sum();
            step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { s * 2.0 };
            let moved = ss.sqrt();
            *z = next;
            let improvement = f - fnext;
            f = fnext;
            g = gnext;
            let gnorm: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            if gnorm <= tol || moved == 0.0 || (improvement <= 0.0 && moved < 1e-18) {
                break;
            }
        }
    }

    /// Nelder-Mead on the same objective, respecting the box through projection.
    fn polish(&self, z: &mut Vec<f64>, mu: f64, evals: usize) {
        let dim = z.len();
        if dim == 0 {
            return;
        }
        let eval = |x: &mut Vec<f64>| {
            self.lay.project(x);
            self.value(x, mu)
        };
        let scale = 1e-4;
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let mut base = z.clone();
        let fb = eval(&mut base);
        simplex.push((base.clone(), fb));
        for i in 0..dim {
            let mut p = base.clone();
            p[i] += scale;
            let fp = eval(&mut p);
            simplex.push((p, fp));
        }
        let mut used = dim + 1;
        while used < evals {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            if simplex[dim].1 - simplex[0].1 <= 1e-30 * (1.0 + simplex[0].1.abs()) {
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|p| p.0[j]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].clone();
            let along = |c: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(m, w)| m + c * (m - w))
                    .collect()
            };
            let mut r = along(1.0);
            let fr = eval(&mut r);
            used += 1;
            if fr < simplex[0].1 {
                let mut e = along(2.0);
                let fe = eval(&mut e);
                used += 1;
                simplex[dim] = if fe < fr { (e, fe) } else { (r, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (r, fr);
            } else {
                let mut c = along(-0.5);
                let fc = eval(&mut c);
                used += 1;
                if fc < worst.1 {
                    simplex[dim] = (c, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for p in simplex.iter_mut().skip(1) {
                        let mut q: Vec<f64> =
                            best.iter().zip(&p.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                        let fq = eval(&mut q);
                        *p = (q, fq);
                    }
                    used += dim;
                }
            }
        }
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if simplex[0].1 < self.value(z, mu) {
            *z = simplex[0].0.clone();
        }
    }
}

/// Moves every penalty-placed side node onto the line through its side's endpoints, repeatedly.
fn snap_cyclic(d: &AbstractDissection, points: &mut [Point<BigFloat>], prec: u32) {
    let Ok(fs) = d.face_structure() else { return };
    let mut hosted = Vec::new();
    for (t, sides) in d.triangles.iter().zip(&fs.triangle_sides) {
        for k in 0..3 {
            for &v in &sides[k] {
                hosted.push((v, t[k], t[(k + 1) % 3]));
            }
        }
    }
    for _ in 0..(4 * prec as usize) {
        for &(v, a, b) in &hosted {
            let (pa, pb) = (points[a].clone(), points[b].clone());
            let dx = &pb.x - &pa.x;
            let dy = &pb.y - &pa.y;
            let len2 = &(&dx * &dx) + &(&dy * &dy);
            if len2.is_zero() {
                continue;
            }
            let t = &(&(&(&points[v].x - &pa.x) * &dx) + &(&(&points[v].y - &pa.y) * &dy)) / &len2;
            points[v] = Point::new(&pa.x + &(&t * &dx), &pa.y + &(&t * &dy));
        }
    }
}

/// Multi-start local minimization of SSR over constrained framed maps of a type.
///
/// Polygon-side nodes and side nodes whose endpoints can be placed first are
/// parameterized along their segment, so their collinearity holds exactly;
/// the rest carry a quadratic penalty whose weight doubles every round.
pub fn minimize_ssr(d: &AbstractDissection, cfg: &OptimizeConfig) -> Result<OptimizeResult> {
    if cfg.restarts == 0 {
        return Err(Error::PreconditionFailed("restarts must be at least 1".into()));
    }
    let lay = layout(d)?;
    let obj = Objective {
        d,
        lay: &lay,
        mean: (&d.area / int(d.n() as i64)).to_f64().unwrap_or(0.0),
    };
    let results: Vec<Option<(f64, FramedMap<BigFloat>)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            let (x0, x1, y0, y1) = lay.bbox;
            let mut z: Vec<f64> = vec![0.0; lay.num_params];
            for p in &lay.placement {
                if let Placement::Free(i) = *p {
                    z[i] = rng.gen_range(x0..=x1);
                    z[i + 1] = rng.gen_range(y0..=y1);
                }
            }
            for &i in &lay.unit_params {
                z[i] = rng.gen_range(0.0..=1.0);
            }
            for g in &lay.segment_groups {
                let mut vals: Vec<f64> = g.iter().map(|&i| z[i]).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                for (&i, v) in g.iter().zip(vals) {
                    z[i] = v;
                }
            }
            if lay.uses_penalty {
                let mut mu = cfg.penalty_start;
                for _ in 0..cfg.penalty_rounds {
                    obj.descend(&mut z, mu, cfg.max_iters, cfg.grad_tol);
                    mu *= 2.0;
                }
                if z.len() <= 40 {
                    obj.polish(&mut z, mu, 4000);
                }
            } else {
                obj.descend(&mut z, 0.0, cfg.max_iters, cfg.grad_tol);
                if z.len() <= 40 {
                    obj.polish(&mut z, 0.0, 4000);
                    obj.descend(&mut z, 0.0, cfg.max_iters, cfg.grad_tol);
                }
            }
            let mut pts = lay.positions_big(&z, d, cfg.precision);
            if lay.uses_penalty {
                snap_cyclic(d, &mut pts, cfg.precision);
            }
            let map = FramedMap::new(pts);
            check_legality(d, &map).ok()?;
            let ssr = metrics(d, &map, cfg.precision).ssr.as_f64();
            Some((ssr, map))
        })
        .collect();
    let legal_restarts = results.iter().filter(|r| r.is_some()).count();
    let (restart, (_, map)) = results
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|v| (i, v)))
        .min_by(|a, b| {
            a.1 .0
                .partial_cmp(&b.1 .0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .ok_or(Error::NoLegalPointFound {
            restarts: cfg.restarts,
        })?;
    let metrics = metrics(d, &map, cfg.precision);
    Ok(OptimizeResult {
        map,
        metrics,
        restart,
        legal_restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn three_triangle_shape() {
        let (d, _) = fixtures::three_triangle();
        let p = assemble(&d).unwrap();
        assert_eq!(p.num_vars, 10);
        assert_eq!(p.degree(), 4);
        let r = structural_checks(&p, &d, 2);
        assert!(r.passed(), "{:?}", r.failures);
    }

    #[test]
    fn assembled_matches_direct_terms() {
        for (name, d, m) in fixtures::all_rational() {
            let p = assemble(&d).unwrap();
            let (a, b, c) = penalty_terms(&d, &m);
            assert_eq!(p.eval(&map_to_vars(&m)), a + b + c, "{name}");
        }
    }

    #[test]
    fn vanishes_at_equal_areas() {
        let (d, m) = fixtures::x_square();
        let p = assemble(&d).unwrap();
        assert!(p.eval(&map_to_vars(&m)).is_zero());
    }

    #[test]
    fn partial_derivative_of_monomial() {
        let mut p = SparsePolynomial::zero(4);
        p.add_term(vec![0, 0, 1], rat(3, 2));
        let dp = p.partial(0);
        assert_eq!(dp.coefficient(&[0, 1]), int(3));
        assert_eq!(dp.degree(), 2);
        let mut q = SparsePolynomial::zero(2);
        q.add_term(vec![0], int(1));
        q.add_term(vec![0], int(-1));
        assert_eq!(q.num_terms(), 0);
    }

    #[test]
    fn optimizer_three_triangle() {
        let (d, _) = fixtures::three_triangle();
        let cfg = OptimizeConfig {
            restarts: 8,
            ..Default::default()
        };
        let r = minimize_ssr(&d, &cfg).unwrap();
        assert!(r.metrics.rms.as_f64() <= 0.1179, "{}", r.metrics.rms);
        check_legality(&d, &r.map).unwrap();
    }

    #[test]
    fn optimizer_reaches_equal_areas() {
        let (d, _) = fixtures::x_square();
        let r = minimize_ssr(
            &d,
            &OptimizeConfig {
                restarts: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.metrics.ssr.as_f64() <= 1e-20, "{}", r.metrics.ssr);
    }
}
