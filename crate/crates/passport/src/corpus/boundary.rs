//! Country boundaries from a GeoJSON-style admin-0 file.
//!
//! Edges are densified at load time so that point-to-boundary distance can
//! be approximated by a minimum over vertices with bounded error: with a
//! spacing of `s` km the nearest true boundary point is within `s / 2` of
//! some densified vertex.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::corpus::CountryCode;
use crate::error::{Error, Result};
use crate::geo::{great_circle_km, interpolate, point_in_rings, LatLon};

/// Default maximum spacing between densified vertices, kilometers.
pub const DENSIFY_SPACING_KM: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct CountryBoundary {
    pub country: CountryCode,
    /// Closed rings, in degrees. Outer rings and holes are both listed;
    /// containment uses the even-odd rule.
    pub rings: Vec<Vec<LatLon>>,
    /// Ring vertices plus interpolated points at <= the configured spacing.
    /// Contains every original vertex.
    pub densified: Vec<LatLon>,
}

impl CountryBoundary {
    pub fn new(country: CountryCode, rings: Vec<Vec<LatLon>>, spacing_km: f64) -> Result<Self> {
        for ring in &rings {
            if ring.len() < 4 {
                return Err(Error::BadBoundary(format!(
                    "{country}: ring with fewer than 4 vertices"
                )));
            }
            if ring.first() != ring.last() {
                return Err(Error::BadBoundary(format!("{country}: ring not closed")));
            }
            for p in ring {
                if !p.is_valid() {
                    return Err(Error::BadBoundary(format!(
                        "{country}: vertex out of range ({}, {})",
                        p.lat, p.lon
                    )));
                }
            }
        }
        let densified = densify(&rings, spacing_km);
        Ok(CountryBoundary {
            country,
            rings,
            densified,
        })
    }

    pub fn contains(&self, point: LatLon) -> bool {
        point_in_rings(point, &self.rings)
    }

    /// Distance from `point` to the nearest densified boundary vertex.
    pub fn min_vertex_distance_km(&self, point: LatLon) -> f64 {
        self.densified
            .iter()
            .map(|&v| great_circle_km(point, v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Bounding box as (min_lat, min_lon, max_lat, max_lon).
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut bb = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for ring in &self.rings {
            for p in ring {
                bb.0 = bb.0.min(p.lat);
                bb.1 = bb.1.min(p.lon);
                bb.2 = bb.2.max(p.lat);
                bb.3 = bb.3.max(p.lon);
            }
        }
        bb
    }
}

fn densify(rings: &[Vec<LatLon>], spacing_km: f64) -> Vec<LatLon> {
    let mut out = Vec::new();
    for ring in rings {
        for pair in ring.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            out.push(a);
            let d = great_circle_km(a, b);
            if d > spacing_km {
                let steps = (d / spacing_km).ceil() as usize;
                for i in 1..steps {
                    out.push(interpolate(a, b, i as f64 / steps as f64));
                }
            }
        }
        // close the loop vertex
        if let Some(&last) = ring.last() {
            out.push(last);
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct BoundarySet {
    countries: BTreeMap<CountryCode, CountryBoundary>,
}

impl BoundarySet {
    pub fn from_boundaries(list: Vec<CountryBoundary>) -> Result<Self> {
        let mut countries = BTreeMap::new();
        for b in list {
            if countries.insert(b.country, b).is_some() {
                return Err(Error::DuplicateEntry {
                    key: "country boundary".to_string(),
                });
            }
        }
        Ok(BoundarySet { countries })
    }

    pub fn get(&self, country: CountryCode) -> Option<&CountryBoundary> {
        self.countries.get(&country)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CountryBoundary> {
        self.countries.values()
    }

    pub fn codes(&self) -> Vec<CountryCode> {
        self.countries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }
}

/// Load a GeoJSON FeatureCollection whose features carry an `iso_a2`
/// property and Polygon/MultiPolygon geometry. GeoJSON positions are
/// `[lon, lat]`.
pub fn load_boundaries(path: &Path, spacing_km: f64) -> Result<BoundarySet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_boundaries(&text, spacing_km)
}

pub fn parse_boundaries(text: &str, spacing_km: f64) -> Result<BoundarySet> {
    let doc: Value = serde_json::from_str(text)?;
    if doc["type"] != "FeatureCollection" {
        return Err(Error::BadBoundary("not a FeatureCollection".to_string()));
    }
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::BadBoundary("missing features array".to_string()))?;

    let mut merged: BTreeMap<CountryCode, Vec<Vec<LatLon>>> = BTreeMap::new();
    for feature in features {
        let iso = feature["properties"]["iso_a2"]
            .as_str()
            .ok_or_else(|| Error::BadBoundary("feature without iso_a2".to_string()))?;
        let country = CountryCode::parse(iso)?;
        let geometry = &feature["geometry"];
        let rings = match geometry["type"].as_str() {
            Some("Polygon") => polygon_rings(&geometry["coordinates"])?,
            Some("MultiPolygon") => {
                let poly_list = geometry["coordinates"]
                    .as_array()
                    .ok_or_else(|| Error::BadBoundary("bad MultiPolygon".to_string()))?;
                let mut all = Vec::new();
                for poly in poly_list {
                    all.extend(polygon_rings(poly)?);
                }
                all
            }
            other => {
                return Err(Error::BadBoundary(format!(
                    "unsupported geometry type {other:?}"
                )))
            }
        };
        merged.entry(country).or_default().extend(rings);
    }

    let mut boundaries = Vec::new();
    for (country, rings) in merged {
        boundaries.push(CountryBoundary::new(country, rings, spacing_km)?);
    }
    BoundarySet::from_boundaries(boundaries)
}

fn polygon_rings(coords: &Value) -> Result<Vec<Vec<LatLon>>> {
    let rings = coords
        .as_array()
        .ok_or_else(|| Error::BadBoundary("bad Polygon coordinates".to_string()))?;
    let mut out = Vec::new();
    for ring in rings {
        let points = ring
            .as_array()
            .ok_or_else(|| Error::BadBoundary("bad ring".to_string()))?;
        let mut vertices = Vec::with_capacity(points.len());
        for p in points {
            let pair = p
                .as_array()
                .filter(|a| a.len() >= 2)
                .ok_or_else(|| Error::BadBoundary("bad position".to_string()))?;
            let lon = pair[0]
                .as_f64()
                .ok_or_else(|| Error::BadBoundary("bad longitude".to_string()))?;
            let lat = pair[1]
                .as_f64()
                .ok_or_else(|| Error::BadBoundary("bad latitude".to_string()))?;
            vertices.push(LatLon::new(lat, lon));
        }
        out.push(vertices);
    }
    Ok(out)
}
