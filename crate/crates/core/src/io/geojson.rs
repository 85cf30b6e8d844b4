//! GeoJSON polygons in, per-location surfaces out.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::data::PointSet;
use crate::error::{Error, Result};
use crate::mgwr::{DiagnosticsReport, MgwrFit, Prediction};
use crate::weights::PolygonSet;

fn geometry_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Geometry {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_ring(v: &Value) -> Option<Vec<[f64; 2]>> {
    let mut ring: Vec<[f64; 2]> = v
        .as_array()?
        .iter()
        .map(|p| {
            let p = p.as_array()?;
            Some([p.first()?.as_f64()?, p.get(1)?.as_f64()?])
        })
        .collect::<Option<_>>()?;
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    Some(ring)
}

/// Rings of one polygon, outer ring first, as `(ring, is_outer)`.
fn parse_polygon(v: &Value) -> Option<Vec<(Vec<[f64; 2]>, bool)>> {
    v.as_array()?
        .iter()
        .enumerate()
        .map(|(r, ring)| parse_ring(ring).map(|ring| (ring, r == 0)))
        .collect()
}

fn feature_id(feature: &Value, id_property: &str) -> Option<String> {
    let raw = feature
        .get("properties")
        .and_then(|p| p.get(id_property))
        .or_else(|| feature.get("id"))?;
    match raw {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Load a FeatureCollection of Polygon or MultiPolygon features.
///
/// The id comes from `properties[id_property]`, falling back to the feature's
/// own `id`. The parts of a MultiPolygon form a single observation.
pub fn load_polygons_geojson(path: &Path, id_property: &str) -> Result<PolygonSet> {
    let doc: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(geometry_error(path, "expected a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| geometry_error(path, "missing `features` array"))?;
    let mut ids = Vec::with_capacity(features.len());
    let mut rings = Vec::with_capacity(features.len());
    let mut outer = Vec::with_capacity(features.len());
    for (f, feature) in features.iter().enumerate() {
        let id = feature_id(feature, id_property)
            .ok_or_else(|| geometry_error(path, format!("feature {f} has no `{id_property}`")))?;
        let geom = feature
            .get("geometry")
            .ok_or_else(|| geometry_error(path, format!("feature `{id}` has no geometry")))?;
        let kind = geom.get("type").and_then(Value::as_str).unwrap_or("null");
        let coords = geom.get("coordinates").unwrap_or(&Value::Null);
        let bad = || geometry_error(path, format!("feature `{id}`: malformed {kind} coordinates"));
        let parts: Vec<(Vec<[f64; 2]>, bool)> = match kind {
            "Polygon" => parse_polygon(coords).ok_or_else(bad)?,
            "MultiPolygon" => coords
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(parse_polygon)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(bad)?
                .into_iter()
                .flatten()
                .collect(),
            other => {
                return Err(geometry_error(
                    path,
                    format!("feature `{id}` has unsupported geometry type {other}"),
                ))
            }
        };
        let (r, o): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        ids.push(id);
        rings.push(r);
        outer.push(o);
    }
    PolygonSet::with_holes(ids, rings, outer)
}

/// Geometry attached to exported features.
#[derive(Debug, Clone, Copy)]
pub enum Geometry<'a> {
    Points(&'a PointSet),
    Polygons(&'a PolygonSet),
}

impl Geometry<'_> {
    fn len(&self) -> usize {
        match self {
            Geometry::Points(p) => p.len(),
            Geometry::Polygons(p) => p.len(),
        }
    }

    fn feature_geometry(&self, i: usize) -> Value {
        match self {
            Geometry::Points(p) => json!({"type": "Point", "coordinates": p.coords[i]}),
            Geometry::Polygons(p) => {
                // each outer ring opens a new part; holes attach to the preceding part
                let mut parts: Vec<Vec<Vec<[f64; 2]>>> = Vec::new();
                for (ring, &is_outer) in p.rings[i].iter().zip(&p.outer[i]) {
                    let mut r = ring.clone();
                    if let Some(&first) = r.first() {
                        r.push(first);
                    }
                    match parts.last_mut() {
                        Some(part) if !is_outer => part.push(r),
                        _ => parts.push(vec![r]),
                    }
                }
                json!({"type": "MultiPolygon", "coordinates": parts})
            }
        }
    }
}

/// Named per-location numeric columns, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTable {
    pub ids: Vec<String>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl SurfaceTable {
    /// Predicted response, residuals, surfaces, t-values, significance and Cook's D.
    pub fn from_fit(
        ids: &[String],
        fit: &MgwrFit,
        prediction: &Prediction,
        diagnostics: &DiagnosticsReport,
    ) -> Self {
        let n = fit.n();
        let mut columns = vec![
            ("predicted".to_string(), prediction.predicted.clone()),
            ("fitted".to_string(), prediction.fitted.clone()),
            ("additive".to_string(), prediction.additive.clone()),
            ("residual".to_string(), fit.residuals.clone()),
            ("cooks_d".to_string(), diagnostics.cooks_distance.values.clone()),
            (
                "wealth_bin".to_string(),
                prediction.bins.iter().map(|&b| b as f64).collect(),
            ),
        ];
        for (k, name) in fit.names.iter().enumerate() {
            let col = |m: &nalgebra::DMatrix<f64>| (0..n).map(|i| m[(i, k)]).collect::<Vec<_>>();
            columns.push((format!("beta[{name}]"), col(&fit.coefficient_surfaces)));
            columns.push((format!("t[{name}]"), col(&fit.local_t_values)));
            columns.push((
                format!("significant[{name}]"),
                diagnostics.inference.significant[k]
                    .iter()
                    .map(|&s| if s { 1.0 } else { 0.0 })
                    .collect(),
            ));
        }
        Self {
            ids: ids.to_vec(),
            columns,
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Write one feature per observation. Numbers use the shortest decimal that
/// round-trips exactly; non-finite values are written as `null`.
pub fn export_surfaces_geojson(table: &SurfaceTable, geometry: Geometry<'_>, path: &Path) -> Result<()> {
    let n = table.ids.len();
    if geometry.len() != n {
        return Err(Error::LengthMismatch {
            what: "geometry".into(),
            got: geometry.len(),
            expected: n,
        });
    }
    for (name, col) in &table.columns {
        if col.len() != n {
            return Err(Error::LengthMismatch {
                what: format!("column `{name}`"),
                got: col.len(),
                expected: n,
            });
        }
    }
    let features: Vec<Value> = (0..n)
        .map(|i| {
            let mut props = Map::new();
            props.insert("id".into(), Value::String(table.ids[i].clone()));
            for (name, col) in &table.columns {
                props.insert(name.clone(), number(col[i]));
            }
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": geometry.feature_geometry(i),
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Read back the property table written by [`export_surfaces_geojson`]; `null` becomes NaN.
pub fn read_surfaces_geojson(path: &Path) -> Result<SurfaceTable> {
    let doc: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| geometry_error(path, "missing `features` array"))?;
    let mut ids = Vec::with_capacity(features.len());
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (f, feature) in features.iter().enumerate() {
        let props = feature
            .get("properties")
            .and_then(Value::as_object)
            .ok_or_else(|| geometry_error(path, format!("feature {f} has no properties")))?;
        ids.push(feature_id(feature, "id").ok_or_else(|| geometry_error(path, format!("feature {f} has no id")))?);
        if f == 0 {
            columns = props
                .keys()
                .filter(|k| *k != "id")
                .map(|k| (k.clone(), Vec::with_capacity(features.len())))
                .collect();
        }
        for (name, col) in columns.iter_mut() {
            let v = props.get(name).ok_or_else(|| {
                geometry_error(path, format!("feature {f} lacks property `{name}`"))
            })?;
            col.push(v.as_f64().unwrap_or(f64::NAN));
        }
    }
    Ok(SurfaceTable { ids, columns })
}
