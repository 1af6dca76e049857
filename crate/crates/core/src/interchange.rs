//! JSON file format for a dissection type together with its framed map.
//!
//! ```json
//! {"n": 3, "K": 4, "polygon": [["0","0"], ...], "area": "1",
//!  "nodes": [{"id": 0, "x": "0", "y": "0"}, ...],
//!  "boundary": [...], "corners": [...], "triangles": [[i,j,k], ...],
//!  "collinear": [[i,j,k], ...], "scalar": "rational" | "bigfloat",
//!  "precision_bits": 128, "metadata": {...}}
//! ```
//!
//! Rationals are written `"p/q"`; floats as decimal strings with enough digits
//! to round-trip at `precision_bits`.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::dissection::{metrics, AbstractDissection, FramedMap, Metrics, Point};
use crate::error::{Error, Result};
use crate::numerics::{format_rational, parse_rational, BigFloat, Rational};

#[derive(Clone, Debug)]
pub enum AnyMap {
    Rational(FramedMap<Rational>),
    BigFloat {
        map: FramedMap<BigFloat>,
        precision: u32,
    },
}

impl AnyMap {
    pub fn node_count(&self) -> usize {
        match self {
            AnyMap::Rational(m) => m.points.len(),
            AnyMap::BigFloat { map, .. } => map.points.len(),
        }
    }

    /// Precision used when reporting RMS and lambda.
    pub fn report_precision(&self) -> u32 {
        match self {
            AnyMap::Rational(_) => 128,
            AnyMap::BigFloat { precision, .. } => *precision,
        }
    }

    pub fn to_bigfloat(&self, prec: u32) -> FramedMap<BigFloat> {
        match self {
            AnyMap::Rational(m) => FramedMap::new(
                m.points
                    .iter()
                    .map(|p| {
                        Point::new(
                            BigFloat::from_rational(&p.x, prec),
                            BigFloat::from_rational(&p.y, prec),
                        )
                    })
                    .collect(),
            ),
            AnyMap::BigFloat { map, .. } => FramedMap::new(
                map.points
                    .iter()
                    .map(|p| Point::new(p.x.with_precision(prec), p.y.with_precision(prec)))
                    .collect(),
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DissectionFile {
    pub dissection: AbstractDissection,
    pub map: AnyMap,
    pub metadata: Option<Value>,
}

/// Metrics with every value rendered as a string, ready for JSON output.
pub fn metrics_json_of<S: crate::numerics::Scalar>(m: &Metrics<S>, render: impl Fn(&S) -> String) -> Value {
    json!({
        "range": render(&m.range),
        "ssr": render(&m.ssr),
        "rms": m.rms.to_decimal_string(),
        "lambda": m.lambda.as_ref().map(|l| l.to_decimal_string()),
    })
}

fn ids(v: &Value, key: &str) -> Result<Vec<usize>> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse(format!("missing array {key:?}")))?
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::Parse(format!("non-integer id in {key:?}")))
        })
        .collect()
}

fn triples(v: &Value, key: &str) -> Result<Vec<[usize; 3]>> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse(format!("missing array {key:?}")))?
        .iter()
        .map(|t| {
            let a = t
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| Error::Parse(format!("entries of {key:?} must be triples")))?;
            let mut out = [0usize; 3];
            for (o, x) in out.iter_mut().zip(a) {
                *o = x
                    .as_u64()
                    .ok_or_else(|| Error::Parse(format!("non-integer id in {key:?}")))?
                    as usize;
            }
            Ok(out)
        })
        .collect()
}

fn number_text(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(Error::Parse(format!("expected a number, got {v}"))),
    }
}

fn rational_of(v: &Value) -> Result<Rational> {
    parse_rational(&number_text(v)?)
}

impl DissectionFile {
    pub fn rational(d: AbstractDissection, map: FramedMap<Rational>) -> Self {
        DissectionFile {
            dissection: d,
            map: AnyMap::Rational(map),
            metadata: None,
        }
    }

    pub fn bigfloat(d: AbstractDissection, map: FramedMap<BigFloat>, precision: u32) -> Self {
        DissectionFile {
            dissection: d,
            map: AnyMap::BigFloat { map, precision },
            metadata: None,
        }
    }

    pub fn with_metadata(mut self, metadata: Value) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn to_json(&self) -> Value {
        let d = &self.dissection;
        let nodes: Vec<Value> = match &self.map {
            AnyMap::Rational(m) => m
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| json!({"id": i, "x": format_rational(&p.x), "y": format_rational(&p.y)}))
                .collect(),
            AnyMap::BigFloat { map, .. } => map
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    json!({"id": i, "x": p.x.to_decimal_string(), "y": p.y.to_decimal_string()})
                })
                .collect(),
        };
        let mut obj = Map::new();
        obj.insert("n".into(), json!(d.n()));
        obj.insert("K".into(), json!(d.k()));
        obj.insert(
            "polygon".into(),
            Value::Array(
                d.polygon
                    .iter()
                    .map(|p| json!([format_rational(&p.x), format_rational(&p.y)]))
                    .collect(),
            ),
        );
        obj.insert("area".into(), json!(format_rational(&d.area)));
        obj.insert("nodes".into(), Value::Array(nodes));
        obj.insert("boundary".into(), json!(d.boundary));
        obj.insert("corners".into(), json!(d.corners));
        obj.insert("triangles".into(), json!(d.triangles));
        obj.insert("collinear".into(), json!(d.collinear));
        match &self.map {
            AnyMap::Rational(_) => {
                obj.insert("scalar".into(), json!("rational"));
            }
            AnyMap::BigFloat { precision, .. } => {
                obj.insert("scalar".into(), json!("bigfloat"));
                obj.insert("precision_bits".into(), json!(precision));
            }
        }
        if let Some(m) = &self.metadata {
            obj.insert("metadata".into(), m.clone());
        }
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let polygon: Vec<Point<Rational>> = v
            .get("polygon")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing array \"polygon\"".into()))?
            .iter()
            .map(|c| {
                let a = c
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| Error::Parse("polygon corners must be [x, y]".into()))?;
                Ok(Point::new(rational_of(&a[0])?, rational_of(&a[1])?))
            })
            .collect::<Result<_>>()?;
        let nodes = v
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing array \"nodes\"".into()))?;
        let mut coords: Vec<Option<(String, String)>> = vec![None; nodes.len()];
        for node in nodes {
            let id = node
                .get("id")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Parse("node without integer id".into()))? as usize;
            if id >= nodes.len() || coords[id].is_some() {
                return Err(Error::Parse(format!("node id {id} repeated or out of range")));
            }
            let x = number_text(node.get("x").unwrap_or(&Value::Null))?;
            let y = number_text(node.get("y").unwrap_or(&Value::Null))?;
            coords[id] = Some((x, y));
        }
        let coords: Vec<(String, String)> = coords.into_iter().map(|c| c.expect("filled")).collect();
        let scalar = v.get("scalar").and_then(Value::as_str).unwrap_or("rational");
        let map = match scalar {
            "rational" => AnyMap::Rational(FramedMap::new(
                coords
                    .iter()
                    .map(|(x, y)| Ok(Point::new(parse_rational(x)?, parse_rational(y)?)))
                    .collect::<Result<_>>()?,
            )),
            "bigfloat" => {
                let precision = v
                    .get("precision_bits")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Parse("bigfloat file without precision_bits".into()))?
                    as u32;
                AnyMap::BigFloat {
                    map: FramedMap::new(
                        coords
                            .iter()
                            .map(|(x, y)| {
                                Ok(Point::new(
                                    BigFloat::parse(x, precision)?,
                                    BigFloat::parse(y, precision)?,
                                ))
                            })
                            .collect::<Result<_>>()?,
                    ),
                    precision,
                }
            }
            other => return Err(Error::Parse(format!("unknown scalar kind {other:?}"))),
        };
        let d = AbstractDissection::new(
            nodes.len(),
            ids(v, "boundary")?,
            ids(v, "corners")?,
            triples(v, "triangles")?,
            triples(v, "collinear")?,
            polygon,
        );
        if let Some(area) = v.get("area") {
            let stated = rational_of(area)?;
            if stated != d.area {
                return Err(Error::Parse(format!(
                    "stated area {} differs from polygon area {}",
                    format_rational(&stated),
                    format_rational(&d.area)
                )));
            }
        }
        for (key, actual) in [("n", d.n()), ("K", d.k())] {
            if let Some(stated) = v.get(key).and_then(Value::as_u64) {
                if stated as usize != actual {
                    return Err(Error::Parse(format!("stated {key} = {stated}, file has {actual}")));
                }
            }
        }
        Ok(DissectionFile {
            dissection: d,
            map,
            metadata: v.get("metadata").cloned(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_json())? + "\n")?;
        Ok(())
    }

    /// Metrics of the stored map as a JSON object.
    pub fn metrics_json(&self) -> Value {
        match &self.map {
            AnyMap::Rational(m) => {
                metrics_json_of(&metrics(&self.dissection, m, 128), format_rational)
            }
            AnyMap::BigFloat { map, precision } => metrics_json_of(
                &metrics(&self.dissection, map, *precision),
                BigFloat::to_decimal_string,
            ),
        }
    }
}
