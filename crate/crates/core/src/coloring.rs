//! Three-coloring of rational points by 2-adic size and the parity certificate
//! it yields for odd dissections.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};

use crate::dissection::{face_area, signed_area, AbstractDissection, FramedMap, Point};
use crate::error::{Error, Result};
use crate::numerics::{int, val2, val2_max, Rational, Scalar, TwoAdicValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Red,
    Green,
    Blue,
}

impl Color {
    pub fn letter(self) -> char {
        match self {
            Color::Red => 'R',
            Color::Green => 'G',
            Color::Blue => 'B',
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Red when `|x|` is largest among `|x|, |y|, 1`, green when `|y|` is, blue otherwise;
/// ties go to the earlier entry.
pub fn color_point(x: &Rational, y: &Rational) -> Color {
    match val2_max(x, y, &int(1)) {
        0 => Color::Red,
        1 => Color::Green,
        _ => Color::Blue,
    }
}

/// 2-adic absolute value of the signed area of a triangle with three colors.
/// It is always at least 2.
pub fn colorful_area_check(
    p1: &Point<Rational>,
    p2: &Point<Rational>,
    p3: &Point<Rational>,
) -> Result<TwoAdicValue> {
    let cs = [
        color_point(&p1.x, &p1.y),
        color_point(&p2.x, &p2.y),
        color_point(&p3.x, &p3.y),
    ];
    if cs[0] == cs[1] || cs[1] == cs[2] || cs[0] == cs[2] {
        return Err(Error::NotColorful(format!(
            "colors {}{}{}",
            cs[0], cs[1], cs[2]
        )));
    }
    let v = val2(&signed_area(p1, p2, p3));
    assert!(
        v >= TwoAdicValue::Pow2(-1),
        "colorful triangle with |area|_2 = {v} < 2"
    );
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColorfulFace {
    pub triangle: usize,
    pub nodes: [usize; 3],
    pub area_value: TwoAdicValue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonskyCertificate {
    pub rb_boundary_edge_count: usize,
    pub colorful_face: Option<ColorfulFace>,
    pub corner_colors: BTreeMap<usize, Color>,
    pub colorful_face_count: usize,
}

impl MonskyCertificate {
    /// True when the certificate proves no triangle can have area `area / n`:
    /// the area is an integer, `n` is odd and a colorful face exists.
    pub fn excludes_equal_areas(&self, area: &Rational, n: usize) -> bool {
        area.is_integer() && n % 2 == 1 && self.colorful_face.is_some()
    }

    pub fn to_json(&self) -> Value {
        let colors: serde_json::Map<String, Value> = self
            .corner_colors
            .iter()
            .map(|(k, c)| (k.to_string(), Value::String(c.letter().to_string())))
            .collect();
        json!({
            "rb_edges": self.rb_boundary_edge_count,
            "colorful_face": self.colorful_face.as_ref().map(|f| f.nodes.to_vec()),
            "colors": colors,
        })
    }
}

/// Number of red-blue sides of a polygon given by its corners.
pub fn rb_count(points: &[Point<Rational>]) -> usize {
    let colors: Vec<Color> = points.iter().map(|p| color_point(&p.x, &p.y)).collect();
    (0..colors.len())
        .filter(|&i| is_rb(colors[i], colors[(i + 1) % colors.len()]))
        .count()
}

fn is_rb(a: Color, b: Color) -> bool {
    matches!((a, b), (Color::Red, Color::Blue) | (Color::Blue, Color::Red))
}

/// Colors every node, counts red-blue boundary edges and locates the first colorful triangle.
///
/// The map must be exact and constrained: corners in place and every
/// collinearity triple flat. Legality is not required.
pub fn certify<S: Scalar>(d: &AbstractDissection, map: &FramedMap<S>) -> Result<MonskyCertificate> {
    let exact: Vec<Point<Rational>> = map
        .points
        .iter()
        .map(|p| Some(Point::new(p.x.as_exact()?, p.y.as_exact()?)))
        .collect::<Option<_>>()
        .ok_or(Error::IrrationalCoordinates)?;
    let exact = FramedMap::new(exact);
    for (j, (&c, corner)) in d.corners.iter().zip(&d.polygon).enumerate() {
        if exact.points[c] != *corner {
            return Err(Error::NotConstrained(format!("corner node {c} is not at polygon corner {j}")));
        }
    }
    for f in &d.collinear {
        if face_area(&exact, f) != int(0) {
            return Err(Error::NotConstrained(format!("collinearity triple {f:?} is not flat")));
        }
    }
    let colors: Vec<Color> = exact.points.iter().map(|p| color_point(&p.x, &p.y)).collect();
    let b = &d.boundary;
    let rb = (0..b.len())
        .filter(|&i| is_rb(colors[b[i]], colors[b[(i + 1) % b.len()]]))
        .count();
    let mut first = None;
    let mut count = 0;
    for (i, t) in d.triangles.iter().enumerate() {
        let pts = [&exact.points[t[0]], &exact.points[t[1]], &exact.points[t[2]]];
        if let Ok(v) = colorful_area_check(pts[0], pts[1], pts[2]) {
            count += 1;
            if first.is_none() {
                first = Some(ColorfulFace {
                    triangle: i,
                    nodes: *t,
                    area_value: v,
                });
            }
        }
    }
    Ok(MonskyCertificate {
        rb_boundary_edge_count: rb,
        colorful_face: first,
        corner_colors: colors.into_iter().enumerate().collect(),
        colorful_face_count: count,
    })
}
