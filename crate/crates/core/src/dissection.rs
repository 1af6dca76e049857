//! Abstract dissections, framed maps (coordinate assignments) and area metrics.
//!
//! A dissection type is given by its triangles (counterclockwise corner
//! triples) and a reduced collinearity system: degenerate triples that record
//! which nodes sit in the interior of which triangle or polygon side. A triple
//! `(p, q, r)` lists three nodes on one line with `q` between `p` and `r`, and
//! is oriented counterclockwise in the planar simplicial complex obtained by
//! fanning every subdivided side from one of its endpoints. Its spanning edge
//! `r -> p` is shared with the face that owns the subdivided side. Any choice
//! of fan endpoint is accepted.

use std::collections::{BTreeSet, HashMap};

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::numerics::{int, rat, BigFloat, Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
}

impl<S> Point<S> {
    pub fn new(x: S, y: S) -> Self {
        Point { x, y }
    }
}

pub fn qpt(x: Rational, y: Rational) -> Point<Rational> {
    Point::new(x, y)
}

/// Combinatorial dissection type together with the polygon it dissects.
#[derive(Clone, Debug)]
pub struct AbstractDissection {
    pub node_count: usize,
    /// Boundary cycle of the polygon, counterclockwise.
    pub boundary: Vec<usize>,
    /// Nodes sitting at polygon corners, in boundary order; `corners[j]` sits at `polygon[j]`.
    pub corners: Vec<usize>,
    pub triangles: Vec<[usize; 3]>,
    pub collinear: Vec<[usize; 3]>,
    pub polygon: Vec<Point<Rational>>,
    pub area: Rational,
}

/// Side nodes of every face, recovered by expanding the collinearity triples.
#[derive(Clone, Debug)]
pub struct FaceStructure {
    /// `triangle_sides[i][k]`: nodes strictly inside the side from corner `k` to corner `k+1`.
    pub triangle_sides: Vec<[Vec<usize>; 3]>,
    /// `outer_sides[j]`: nodes strictly inside polygon side `j`, counterclockwise.
    pub outer_sides: Vec<Vec<usize>>,
    /// Skeleton graph adjacency.
    pub adjacency: Vec<BTreeSet<usize>>,
}

impl FaceStructure {
    pub fn side_node_count(&self) -> usize {
        let inner: usize = self
            .triangle_sides
            .iter()
            .map(|s| s.iter().map(Vec::len).sum::<usize>())
            .sum();
        inner + self.outer_sides.iter().map(Vec::len).sum::<usize>()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }
}

/// Twice the shoelace area of a closed polygon.
fn polygon_area(poly: &[Point<Rational>]) -> Rational {
    let mut s = Rational::zero();
    for i in 0..poly.len() {
        let (p, q) = (&poly[i], &poly[(i + 1) % poly.len()]);
        s += &p.x * &q.y - &q.x * &p.y;
    }
    s / int(2)
}

fn fan(a: usize, nodes: &[usize], b: usize, out: &mut Vec<[usize; 3]>) {
    for (i, &v) in nodes.iter().enumerate() {
        let next = nodes.get(i + 1).copied().unwrap_or(b);
        out.push([a, v, next]);
    }
}

/// Reduced collinearity system: each subdivided side is fanned from the endpoint
/// that comes first when its face is walked with the face on the left.
///
/// `triangle_sides[i][k]` lists the nodes strictly between corner `k` and corner
/// `k+1` of triangle `i`, ordered from corner `k`. Polygon sides are read off the
/// boundary cycle.
pub fn build_reduced_collinearity(
    triangles: &[[usize; 3]],
    triangle_sides: &[[Vec<usize>; 3]],
    boundary: &[usize],
    corners: &[usize],
) -> Result<Vec<[usize; 3]>> {
    if triangle_sides.len() != triangles.len() {
        return Err(Error::InvalidDissection(vec![format!(
            "{} side lists for {} triangles",
            triangle_sides.len(),
            triangles.len()
        )]));
    }
    let mut problems = Vec::new();
    let mut out = Vec::new();
    for (t, sides) in triangles.iter().zip(triangle_sides) {
        let mut seen = BTreeSet::new();
        for (k, side) in sides.iter().enumerate() {
            for &v in side {
                if t.contains(&v) {
                    problems.push(format!("side node {v} coincides with a corner of {t:?}"));
                }
                if !seen.insert(v) {
                    problems.push(format!("side node {v} listed twice on {t:?}"));
                }
            }
            fan(t[k], side, t[(k + 1) % 3], &mut out);
        }
    }
    for (j, side) in outer_side_lists(boundary, corners)
        .map_err(|e| Error::InvalidDissection(vec![e]))?
        .into_iter()
        .enumerate()
    {
        let a = corners[(j + 1) % corners.len()];
        let rev: Vec<usize> = side.into_iter().rev().collect();
        fan(a, &rev, corners[j], &mut out);
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::InvalidDissection(problems))
    }
}

/// Nodes strictly inside each polygon side, read off the boundary cycle.
fn outer_side_lists(boundary: &[usize], corners: &[usize]) -> std::result::Result<Vec<Vec<usize>>, String> {
    if corners.len() < 3 {
        return Err("fewer than three corners".into());
    }
    let start = boundary
        .iter()
        .position(|&v| v == corners[0])
        .ok_or("first corner is not on the boundary")?;
    let mut sides = vec![Vec::new(); corners.len()];
    let mut j = 0;
    for step in 1..=boundary.len() {
        let v = boundary[(start + step) % boundary.len()];
        let next_corner = corners[(j + 1) % corners.len()];
        if v == next_corner {
            j += 1;
            if j == corners.len() {
                if step != boundary.len() {
                    return Err("boundary revisits the first corner".into());
                }
                return Ok(sides);
            }
        } else if corners.contains(&v) {
            return Err(format!("corner {v} appears out of order on the boundary"));
        } else {
            sides[j].push(v);
        }
    }
    Err("corners do not occur in cyclic order along the boundary".into())
}

impl AbstractDissection {
    /// Builds a dissection; the polygon area is computed from its corners.
    pub fn new(
        node_count: usize,
        boundary: Vec<usize>,
        corners: Vec<usize>,
        triangles: Vec<[usize; 3]>,
        collinear: Vec<[usize; 3]>,
        polygon: Vec<Point<Rational>>,
    ) -> Self {
        let area = polygon_area(&polygon);
        AbstractDissection {
            node_count,
            boundary,
            corners,
            triangles,
            collinear,
            polygon,
            area,
        }
    }

    pub fn n(&self) -> usize {
        self.triangles.len()
    }

    pub fn k(&self) -> usize {
        self.corners.len()
    }

    pub fn ell(&self) -> usize {
        self.collinear.len()
    }

    /// Faces of the simplicial complex: triangles first, then collinearity triples.
    pub fn faces(&self) -> impl Iterator<Item = &[usize; 3]> {
        self.triangles.iter().chain(self.collinear.iter())
    }

    /// Expands every simplicial face edge through the collinearity triples.
    pub fn face_structure(&self) -> Result<FaceStructure> {
        let mut by_edge: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut problems = Vec::new();
        for (idx, t) in self.collinear.iter().enumerate() {
            let key = (t[2], t[0]);
            if by_edge.insert(key, (idx, t[1])).is_some() {
                problems.push(format!("spanning edge {key:?} shared by two collinearity triples"));
            }
        }
        let mut used = vec![false; self.collinear.len()];

        // Expands the simplicial edge a -> b of a face; returns the interior nodes in order.
        fn expand(
            a: usize,
            b: usize,
            by_edge: &HashMap<(usize, usize), (usize, usize)>,
            used: &mut [bool],
            out: &mut Vec<usize>,
            depth: usize,
        ) -> std::result::Result<(), String> {
            if depth > used.len() + 1 {
                return Err("collinearity triples nest cyclically".into());
            }
            if let Some(&(idx, m)) = by_edge.get(&(b, a)) {
                if used[idx] {
                    return Err(format!("collinearity triple #{idx} reached twice"));
                }
                used[idx] = true;
                expand(a, m, by_edge, used, out, depth + 1)?;
                out.push(m);
                expand(m, b, by_edge, used, out, depth + 1)?;
            }
            Ok(())
        }

        let mut triangle_sides = Vec::with_capacity(self.triangles.len());
        for t in &self.triangles {
            let mut sides: [Vec<usize>; 3] = Default::default();
            for k in 0..3 {
                if let Err(e) = expand(t[k], t[(k + 1) % 3], &by_edge, &mut used, &mut sides[k], 0) {
                    problems.push(format!("triangle {t:?}: {e}"));
                }
            }
            triangle_sides.push(sides);
        }
        let kk = self.corners.len();
        let mut outer_sides = Vec::with_capacity(kk);
        for j in 0..kk {
            let mut side = Vec::new();
            let (a, b) = (self.corners[(j + 1) % kk], self.corners[j]);
            if let Err(e) = expand(a, b, &by_edge, &mut used, &mut side, 0) {
                problems.push(format!("polygon side {j}: {e}"));
            }
            side.reverse();
            outer_sides.push(side);
        }
        for (idx, u) in used.iter().enumerate() {
            if !u {
                problems.push(format!(
                    "collinearity triple {:?} does not belong to any face side",
                    self.collinear[idx]
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidDissection(problems));
        }

        let mut adjacency = vec![BTreeSet::new(); self.node_count];
        let mut link = |u: usize, v: usize| {
            if u < adjacency.len() && v < adjacency.len() && u != v {
                adjacency[u].insert(v);
                adjacency[v].insert(u);
            }
        };
        for (t, sides) in self.triangles.iter().zip(&triangle_sides) {
            for k in 0..3 {
                let mut prev = t[k];
                for &v in &sides[k] {
                    link(prev, v);
                    prev = v;
                }
                link(prev, t[(k + 1) % 3]);
            }
        }
        for i in 0..self.boundary.len() {
            link(self.boundary[i], self.boundary[(i + 1) % self.boundary.len()]);
        }
        Ok(FaceStructure {
            triangle_sides,
            outer_sides,
            adjacency,
        })
    }
}

/// Checks the combinatorial axioms of a dissection type; every violation is reported.
pub fn validate_abstract(d: &AbstractDissection) -> Result<FaceStructure> {
    let mut problems = Vec::new();
    let nn = d.node_count;
    let n = d.n();
    let kk = d.k();
    let ell = d.ell();

    for f in d.faces() {
        if f.iter().any(|&v| v >= nn) {
            problems.push(format!("face {f:?} names a node outside 0..{nn}"));
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            problems.push(format!("face {f:?} repeats a node"));
        }
    }
    if d.polygon.len() != kk {
        problems.push(format!("{} polygon corners but {} corner nodes", d.polygon.len(), kk));
    }
    if !d.area.is_positive() {
        problems.push(format!("polygon area {} is not positive (corners must run counterclockwise)", d.area));
    }
    let bset: BTreeSet<usize> = d.boundary.iter().copied().collect();
    if bset.len() != d.boundary.len() {
        problems.push("boundary cycle repeats a node".into());
    }
    if let Err(e) = outer_side_lists(&d.boundary, &d.corners) {
        problems.push(e);
    }
    if 2 * nn != n + kk + ell + 2 {
        problems.push(format!(
            "count identity fails: 2N = {} but n + K + l + 2 = {}",
            2 * nn,
            n + kk + ell + 2
        ));
    }
    if ell + kk > n + 2 {
        problems.push(format!("l = {ell} exceeds n - K + 2"));
    }
    if nn > n + 2 {
        problems.push(format!("N = {nn} exceeds n + 2"));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidDissection(problems));
    }

    // Every directed edge of the closed simplicial surface must be matched by its reverse.
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let outer: Vec<[usize; 2]> = (0..kk)
        .map(|j| [d.corners[(j + 1) % kk], d.corners[j]])
        .collect();
    for f in d.faces() {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    for e in &outer {
        *directed.entry((e[0], e[1])).or_default() += 1;
    }
    for (&(u, v), &c) in &directed {
        if c != 1 {
            problems.push(format!("directed edge {u}->{v} occurs {c} times"));
        }
        if !directed.contains_key(&(v, u)) {
            problems.push(format!("edge {u}->{v} has no face on its other side"));
        }
    }
    let undirected = directed.len() / 2;
    // Euler characteristic of the sphere: V - E + F = 2.
    if problems.is_empty() && nn + n + ell + 1 != undirected + 2 {
        problems.push(format!(
            "simplicial complex is not a disk: V - E + F = {}",
            nn as i64 - undirected as i64 + (n + ell + 1) as i64
        ));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidDissection(problems));
    }

    let fs = d.face_structure()?;
    let expanded: Vec<usize> = {
        let mut cyc = Vec::new();
        for j in 0..kk {
            cyc.push(d.corners[j]);
            cyc.extend(&fs.outer_sides[j]);
        }
        cyc
    };
    if !same_cycle(&expanded, &d.boundary) {
        problems.push("boundary cycle disagrees with the polygon-side collinearity triples".into());
    }
    if fs.side_node_count() != ell {
        problems.push(format!(
            "{} side nodes but {} collinearity triples",
            fs.side_node_count(),
            ell
        ));
    }
    let mut apexed = fs.adjacency.clone();
    apexed.push(BTreeSet::new());
    for &b in &d.boundary {
        apexed[nn].insert(b);
        apexed[b].insert(nn);
    }
    if let Some(cut) = find_small_cut(&apexed) {
        problems.push(format!(
            "skeleton plus boundary apex is not 3-connected: removing {cut:?} disconnects it"
        ));
    }
    if problems.is_empty() {
        Ok(fs)
    } else {
        Err(Error::InvalidDissection(problems))
    }
}

fn same_cycle(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() || a.is_empty() {
        return a.len() == b.len();
    }
    match b.iter().position(|&v| v == a[0]) {
        Some(off) => (0..a.len()).all(|i| a[i] == b[(off + i) % b.len()]),
        None => false,
    }
}

/// A set of at most two vertices whose removal disconnects the graph, if any.
///
/// For each vertex `u`, articulation points of the graph without `u` give the pairs.
fn find_small_cut(adj: &[BTreeSet<usize>]) -> Option<Vec<usize>> {
    let nv = adj.len();
    if nv < 4 {
        return None;
    }
    if let Some(a) = articulation_point(adj, None) {
        return Some(vec![a]);
    }
    for u in 0..nv {
        if let Some(a) = articulation_point(adj, Some(u)) {
            return Some(vec![u, a]);
        }
    }
    None
}

/// Iterative Tarjan: an articulation point of the graph with `skip` deleted, or a
/// lone vertex if the graph is already disconnected.
fn articulation_point(adj: &[BTreeSet<usize>], skip: Option<usize>) -> Option<usize> {
    let nv = adj.len();
    let root = (0..nv).find(|&v| Some(v) != skip)?;
    let mut disc = vec![usize::MAX; nv];
    let mut low = vec![0usize; nv];
    let mut time = 0;
    let nbrs: Vec<Vec<usize>> = adj
        .iter()
        .map(|s| s.iter().copied().filter(|&w| Some(w) != skip).collect())
        .collect();
    let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
    disc[root] = 0;
    low[root] = 0;
    time += 1;
    let mut root_children = 0;
    while let Some(&mut (v, parent, ref mut i)) = stack.last_mut() {
        if *i < nbrs[v].len() {
            let w = nbrs[v][*i];
            *i += 1;
            if disc[w] == usize::MAX {
                disc[w] = time;
                low[w] = time;
                time += 1;
                if v == root {
                    root_children += 1;
                }
                stack.push((w, v, 0));
            } else if w != parent {
                low[v] = low[v].min(disc[w]);
            }
        } else {
            stack.pop();
            if let Some(&(p, _, _)) = stack.last() {
                low[p] = low[p].min(low[v]);
                if p != root && low[v] >= disc[p] {
                    return Some(p);
                }
            }
        }
    }
    let expected = nv - usize::from(skip.is_some());
    if time != expected {
        return (0..nv).find(|&v| Some(v) != skip && disc[v] == usize::MAX);
    }
    if root_children > 1 {
        return Some(root);
    }
    None
}

/// Coordinates for every node of a dissection type.
#[derive(Clone, Debug)]
pub struct FramedMap<S> {
    pub points: Vec<Point<S>>,
}

impl<S: Scalar> FramedMap<S> {
    pub fn new(points: Vec<Point<S>>) -> Self {
        FramedMap { points }
    }

    pub fn ctx(&self) -> Option<S::Ctx> {
        self.points.first().map(|p| p.x.ctx())
    }
}

/// Signed area, positive for counterclockwise triples.
pub fn signed_area<S: Scalar>(p1: &Point<S>, p2: &Point<S>, p3: &Point<S>) -> S {
    let twice = (p1.x.clone() * p2.y.clone() - p2.x.clone() * p1.y.clone())
        + (p2.x.clone() * p3.y.clone() - p3.x.clone() * p2.y.clone())
        + (p3.x.clone() * p1.y.clone() - p1.x.clone() * p3.y.clone());
    let half = S::from_rational(&rat(1, 2), p1.x.ctx());
    twice * half
}

pub fn face_area<S: Scalar>(map: &FramedMap<S>, f: &[usize; 3]) -> S {
    signed_area(&map.points[f[0]], &map.points[f[1]], &map.points[f[2]])
}

pub fn triangle_areas<S: Scalar>(d: &AbstractDissection, map: &FramedMap<S>) -> Vec<S> {
    d.triangles.iter().map(|t| face_area(map, t)).collect()
}

/// Sum of signed areas over triangles and collinearity triples.
pub fn sum_signed_areas<S: Scalar>(d: &AbstractDissection, map: &FramedMap<S>) -> S {
    let ctx = map.points[0].x.ctx();
    d.faces()
        .fold(S::from_rational(&Rational::zero(), ctx), |acc, f| acc + face_area(map, f))
}

/// Legality of a framed map: corners in place, collinear triples flat, every
/// triangle strictly positive. Floating maps are judged with a slack scaled to
/// their precision. All violations are reported.
pub fn check_legality<S: Scalar>(d: &AbstractDissection, map: &FramedMap<S>) -> Result<()> {
    let mut problems = Vec::new();
    if map.points.len() != d.node_count {
        return Err(Error::Illegal(vec![format!(
            "{} coordinates for {} nodes",
            map.points.len(),
            d.node_count
        )]));
    }
    let ctx = map.points[0].x.ctx();
    let tol_pos = S::position_tolerance(ctx);
    let tol_area = S::area_tolerance(ctx, d.n());
    for (j, (&c, corner)) in d.corners.iter().zip(&d.polygon).enumerate() {
        let p = &map.points[c];
        let dx = (p.x.clone() - S::from_rational(&corner.x, ctx)).magnitude();
        let dy = (p.y.clone() - S::from_rational(&corner.y, ctx)).magnitude();
        if dx > tol_pos || dy > tol_pos {
            problems.push(format!("corner node {c} is not at polygon corner {j}"));
        }
    }
    for f in &d.collinear {
        let a = face_area(map, f);
        if a.magnitude() > tol_area {
            problems.push(format!("collinearity triple {f:?} has area {:e}", a.as_f64()));
        }
    }
    for t in &d.triangles {
        let a = face_area(map, t);
        if a <= tol_area {
            problems.push(format!("triangle {t:?} has non-positive area {:e}", a.as_f64()));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Illegal(problems))
    }
}

#[derive(Clone, Debug)]
pub struct Metrics<S> {
    pub range: S,
    pub ssr: S,
    pub rms: BigFloat,
    /// `sqrt(log2(1/range)) / log2(n)`; absent unless `0 < range < 1` and `n >= 2`.
    pub lambda: Option<BigFloat>,
}

/// Growth-normalized exponent of a range value for `n` triangles.
pub fn lambda(range: &BigFloat, n: usize) -> Option<BigFloat> {
    if n < 2 || range.is_zero() || range.to_f64() >= 1.0 || range.to_f64() < 0.0 {
        return None;
    }
    let prec = range.precision();
    let one = BigFloat::from_i64(1, prec);
    let l = (one / range.clone()).log2().ok()?;
    let ln = BigFloat::from_i64(n as i64, prec).log2().ok()?;
    Some(l.sqrt().ok()? / ln)
}

/// Range, sum of squared residuals and RMS of areas about `total / n`.
/// RMS and lambda are computed at `prec` bits.
pub fn metrics_of_areas<S: Scalar>(areas: &[S], total: &Rational, prec: u32) -> Metrics<S> {
    assert!(!areas.is_empty(), "metrics of an empty area list");
    let ctx = areas[0].ctx();
    let n = areas.len();
    let mean = S::from_rational(&(total / int(n as i64)), ctx);
    let mut lo = areas[0].clone();
    let mut hi = areas[0].clone();
    let mut ssr = S::from_rational(&Rational::zero(), ctx);
    for a in areas {
        if *a < lo {
            lo = a.clone();
        }
        if *a > hi {
            hi = a.clone();
        }
        let r = a.clone() - mean.clone();
        ssr = ssr + r.clone() * r;
    }
    let range = hi - lo;
    let rms = (ssr.to_bigfloat(prec) / BigFloat::from_i64(n as i64, prec))
        .sqrt()
        .expect("ssr is a sum of squares");
    let lambda = lambda(&range.to_bigfloat(prec), n);
    Metrics {
        range,
        ssr,
        rms,
        lambda,
    }
}

pub fn metrics<S: Scalar>(d: &AbstractDissection, map: &FramedMap<S>, prec: u32) -> Metrics<S> {
    metrics_of_areas(&triangle_areas(d, map), &d.area, prec)
}

/// Unit square polygon `(0,0), (1,0), (1,1), (0,1)`.
pub fn unit_square() -> Vec<Point<Rational>> {
    vec![
        qpt(int(0), int(0)),
        qpt(int(1), int(0)),
        qpt(int(1), int(1)),
        qpt(int(0), int(1)),
    ]
}
