#![allow(dead_code)]

use equidissect::dissection::{qpt, AbstractDissection, FramedMap, Point};
use equidissect::numerics::{rat, Rational};
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_rational<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> Rational {
    let q = rng.gen_range(1..=64i64);
    let p = rng.gen_range(lo * q..=hi * q);
    rat(p, q)
}

fn lerp(a: &Point<Rational>, b: &Point<Rational>, t: &Rational) -> Point<Rational> {
    qpt(&a.x + (&b.x - &a.x) * t, &a.y + (&b.y - &a.y) * t)
}

/// Random rational map with corners in place and every side node on its side.
///
/// Free nodes land anywhere in the bounding box; the map is usually not legal.
/// Returns `None` when side nodes depend on each other cyclically.
pub fn random_constrained_map<R: Rng>(d: &AbstractDissection, rng: &mut R) -> Option<FramedMap<Rational>> {
    let fs = d.face_structure().ok()?;
    let mut groups: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for (j, side) in fs.outer_sides.iter().enumerate() {
        if !side.is_empty() {
            groups.push((d.corners[j], d.corners[(j + 1) % d.k()], side.clone()));
        }
    }
    for (t, sides) in d.triangles.iter().zip(&fs.triangle_sides) {
        for (k, side) in sides.iter().enumerate() {
            if !side.is_empty() {
                groups.push((t[k], t[(k + 1) % 3], side.clone()));
            }
        }
    }
    let on_side: std::collections::BTreeSet<usize> = groups.iter().flat_map(|g| g.2.iter().copied()).collect();
    let (lo_x, hi_x, lo_y, hi_y) = bounding_box(&d.polygon);
    let mut pts: Vec<Option<Point<Rational>>> = vec![None; d.node_count];
    for (c, p) in d.corners.iter().zip(&d.polygon) {
        pts[*c] = Some(p.clone());
    }
    for v in 0..d.node_count {
        if pts[v].is_none() && !on_side.contains(&v) {
            let x = &lo_x + (&hi_x - &lo_x) * small_rational(rng, 0, 1);
            let y = &lo_y + (&hi_y - &lo_y) * small_rational(rng, 0, 1);
            pts[v] = Some(qpt(x, y));
        }
    }
    let mut pending = groups;
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|(a, b, side)| {
            let (Some(pa), Some(pb)) = (pts[*a].clone(), pts[*b].clone()) else {
                return true;
            };
            let mut ts: Vec<Rational> = side.iter().map(|_| small_rational(rng, 0, 1)).collect();
            ts.sort();
            for (v, t) in side.iter().zip(&ts) {
                pts[*v] = Some(lerp(&pa, &pb, t));
            }
            false
        });
        if pending.len() == before {
            return None;
        }
    }
    Some(FramedMap::new(pts.into_iter().map(|p| p.expect("placed")).collect()))
}

pub fn bounding_box(poly: &[Point<Rational>]) -> (Rational, Rational, Rational, Rational) {
    let min = |f: &dyn Fn(&Point<Rational>) -> Rational| poly.iter().map(f).min().unwrap_or_else(Rational::zero);
    let max = |f: &dyn Fn(&Point<Rational>) -> Rational| poly.iter().map(f).max().unwrap_or_else(Rational::zero);
    (
        min(&|p| p.x.clone()),
        max(&|p| p.x.clone()),
        min(&|p| p.y.clone()),
        max(&|p| p.y.clone()),
    )
}

/// The same dissection type over a translated polygon.
pub fn translated(d: &AbstractDissection, dx: &Rational, dy: &Rational) -> AbstractDissection {
    let polygon = d.polygon.iter().map(|p| qpt(&p.x + dx, &p.y + dy)).collect();
    AbstractDissection::new(
        d.node_count,
        d.boundary.clone(),
        d.corners.clone(),
        d.triangles.clone(),
        d.collinear.clone(),
        polygon,
    )
}

/// Translation that makes every corner coordinate nonnegative.
pub fn nonnegative_shift(d: &AbstractDissection) -> (Rational, Rational) {
    let (lo_x, _, lo_y, _) = bounding_box(&d.polygon);
    let zero = Rational::zero();
    (
        if lo_x < zero { -lo_x } else { zero.clone() },
        if lo_y < zero { -lo_y } else { zero },
    )
}

/// Smallest positive integer `s` making the area and every corner coordinate a multiple of `1/s`.
pub fn coordinate_scale(d: &AbstractDissection) -> i64 {
    use num_integer::Integer;
    use num_traits::ToPrimitive;
    let mut s = d.area.denom().clone();
    for p in &d.polygon {
        s = s.lcm(p.x.denom()).lcm(p.y.denom());
    }
    s.to_i64().expect("small scale")
}
