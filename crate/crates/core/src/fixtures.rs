//! Small reference dissections with exact rational coordinates.
//!
//! Corner nodes are always numbered `0..K` in counterclockwise order, so the
//! polygon is read off the first `K` coordinates.

use crate::dissection::{
    build_reduced_collinearity, qpt, signed_area, AbstractDissection, FramedMap, Point,
};
use crate::numerics::{int, rat, Rational};

type Fixture = (AbstractDissection, FramedMap<Rational>);

fn q(p: i64, d: i64) -> Rational {
    rat(p, d)
}

fn build(
    points: Vec<Point<Rational>>,
    corners: usize,
    boundary: Vec<usize>,
    triangles: Vec<[usize; 3]>,
    sides: Vec<[Vec<usize>; 3]>,
) -> Fixture {
    for t in &triangles {
        let a = signed_area(&points[t[0]], &points[t[1]], &points[t[2]]);
        assert!(a > int(0), "fixture triangle {t:?} is not counterclockwise");
    }
    let corner_ids: Vec<usize> = (0..corners).collect();
    let collinear = build_reduced_collinearity(&triangles, &sides, &boundary, &corner_ids)
        .expect("fixture sides are consistent");
    let polygon = points[..corners].to_vec();
    let d = AbstractDissection::new(points.len(), boundary, corner_ids, triangles, collinear, polygon);
    (d, FramedMap::new(points))
}

fn no_sides(n: usize) -> Vec<[Vec<usize>; 3]> {
    vec![Default::default(); n]
}

fn square_corners() -> Vec<Point<Rational>> {
    vec![
        qpt(int(0), int(0)),
        qpt(int(1), int(0)),
        qpt(int(1), int(1)),
        qpt(int(0), int(1)),
    ]
}

/// Three triangles with one node at the midpoint of the bottom side.
pub fn three_triangle() -> Fixture {
    let mut pts = square_corners();
    pts.push(qpt(q(1, 2), int(0)));
    let tris = vec![[0, 4, 2], [4, 1, 2], [0, 2, 3]];
    build(pts, 4, vec![0, 4, 1, 2, 3], tris, no_sides(3))
}

/// Five triangles with a node on the bottom side and two nodes on one long triangle side.
///
/// Nodes: corners 0..4, bottom node 4 = (1/2, 0), then 5 = (2/3, 1/3), 6 = (5/6, 2/3)
/// on the segment from node 4 to corner 2.
pub fn long_side_nodes() -> Fixture {
    let mut pts = square_corners();
    pts.push(qpt(q(1, 2), int(0)));
    pts.push(qpt(q(2, 3), q(1, 3)));
    pts.push(qpt(q(5, 6), q(2, 3)));
    let tris = vec![[0, 4, 3], [4, 1, 2], [3, 4, 5], [3, 5, 6], [3, 6, 2]];
    let mut sides = no_sides(5);
    sides[1][2] = vec![6, 5];
    build(pts, 4, vec![0, 4, 1, 2, 3], tris, sides)
}

/// The same type as [`long_side_nodes`] with the long side fanned from the bottom node instead.
pub fn long_side_nodes_alternate_fan() -> Fixture {
    let (mut d, map) = long_side_nodes();
    d.collinear = vec![[1, 4, 0], [6, 5, 4], [2, 6, 4]];
    (d, map)
}

/// Three triangles with a node halfway up the right side.
pub fn right_midpoint() -> Fixture {
    let mut pts = square_corners();
    pts.push(qpt(int(1), q(1, 2)));
    let tris = vec![[0, 1, 4], [0, 4, 3], [4, 2, 3]];
    build(pts, 4, vec![0, 1, 4, 2, 3], tris, no_sides(3))
}

/// Four triangles with two nodes on the bottom side; the most even split is 1/2, 1/6, 1/6, 1/6.
pub fn bottom_pair() -> Fixture {
    let mut pts = square_corners();
    pts.push(qpt(q(1, 2), int(0)));
    pts.push(qpt(q(3, 4), int(0)));
    let tris = vec![[0, 4, 3], [4, 5, 2], [5, 1, 2], [3, 4, 2]];
    build(pts, 4, vec![0, 4, 5, 1, 2, 3], tris, no_sides(4))
}

/// Five triangles with one interior node (4) and one node on the right side (5).
pub fn five_triangle() -> Fixture {
    let mut pts = square_corners();
    pts.push(qpt(q(2, 5), q(3, 5)));
    pts.push(qpt(int(1), q(2, 5)));
    let tris = vec![[0, 1, 5], [0, 5, 4], [4, 5, 2], [3, 4, 2], [0, 4, 3]];
    build(pts, 4, vec![0, 1, 5, 2, 3], tris, no_sides(5))
}

/// Square cut along both diagonals; equal areas are reachable.
pub fn x_square() -> Fixture {
    let mut pts = square_corners();
    pts.push(qpt(q(1, 2), q(1, 2)));
    let tris = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
    build(pts, 4, vec![0, 1, 2, 3], tris, no_sides(4))
}

/// Eight-corner polygon of area 59/4 triangulated into 11 triangles.
pub fn octagon() -> Fixture {
    let pts = vec![
        qpt(int(0), int(0)),
        qpt(int(2), int(0)),
        qpt(int(3), int(3)),
        qpt(q(3, 2), q(5, 2)),
        qpt(int(2), int(5)),
        qpt(int(-2), int(4)),
        qpt(int(0), int(3)),
        qpt(int(-2), int(2)),
        qpt(int(1), q(5, 4)),
        qpt(int(-1), int(1)),
        qpt(int(0), q(3, 2)),
    ];
    let tris = vec![
        [0, 1, 8],
        [1, 3, 8],
        [1, 2, 3],
        [3, 6, 8],
        [3, 4, 6],
        [4, 5, 6],
        [6, 7, 9],
        [6, 9, 10],
        [9, 0, 10],
        [0, 8, 10],
        [8, 6, 10],
    ];
    build(pts, 8, vec![0, 1, 2, 3, 4, 5, 6, 7, 9], tris, no_sides(11))
}

/// Every fixture by name.
pub fn all_rational() -> Vec<(&'static str, AbstractDissection, FramedMap<Rational>)> {
    let mut v = Vec::new();
    for (name, f) in [
        ("three_triangle", three_triangle as fn() -> Fixture),
        ("long_side_nodes", long_side_nodes),
        ("long_side_nodes_alternate_fan", long_side_nodes_alternate_fan),
        ("right_midpoint", right_midpoint),
        ("bottom_pair", bottom_pair),
        ("five_triangle", five_triangle),
        ("x_square", x_square),
        ("octagon", octagon),
    ] {
        let (d, m) = f();
        v.push((name, d, m));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissection::{check_legality, sum_signed_areas, triangle_areas};

    #[test]
    fn fixtures_are_legal_and_areas_add_up() {
        for (name, d, m) in all_rational() {
            check_legality(&d, &m).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(sum_signed_areas(&d, &m), d.area, "{name}");
            let total: Rational = triangle_areas(&d, &m).into_iter().sum();
            assert_eq!(total, d.area, "{name}");
        }
    }

    #[test]
    fn octagon_area() {
        assert_eq!(octagon().0.area, rat(59, 4));
    }
}
