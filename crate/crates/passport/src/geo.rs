//! Great-circle geometry on a spherical earth.
//!
//! All distances are kilometers, all coordinates degrees. Spherical model
//! (mean radius 6371.0088 km); the sub-0.5% error against an ellipsoid is
//! far below the propagation-model error of the feasibility radii built on
//! top of these primitives.

use serde::{Deserialize, Serialize};

/// Mean earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6_371.008_8;

/// Earth circumference in kilometers.
pub const EARTH_CIRCUMFERENCE_KM: f64 = 40_075.017;

/// A point on the sphere, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle distance via the haversine formula.
pub fn great_circle_km(a: LatLon, b: LatLon) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let s_lat = (dlat / 2.0).sin();
    let s_lon = (dlon / 2.0).sin();
    let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
    // Clamp guards rounding that could push h outside [0, 1].
    let h = h.clamp(0.0, 1.0);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    EARTH_RADIUS_KM * c
}

/// Point at fraction `t` along the great circle from `a` to `b` (slerp).
pub fn interpolate(a: LatLon, b: LatLon, t: f64) -> LatLon {
    let (va, vb) = (to_unit_vector(a), to_unit_vector(b));
    let dot = (va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]).clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega < 1e-12 {
        return a;
    }
    let sin_omega = omega.sin();
    let wa = ((1.0 - t) * omega).sin() / sin_omega;
    let wb = (t * omega).sin() / sin_omega;
    from_unit_vector([
        wa * va[0] + wb * vb[0],
        wa * va[1] + wb * vb[1],
        wa * va[2] + wb * vb[2],
    ])
}

pub(crate) fn to_unit_vector(p: LatLon) -> [f64; 3] {
    let lat = p.lat.to_radians();
    let lon = p.lon.to_radians();
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

pub(crate) fn from_unit_vector(v: [f64; 3]) -> LatLon {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let lat = (v[2] / norm).asin().to_degrees();
    let lon = v[1].atan2(v[0]).to_degrees();
    LatLon { lat, lon }
}

/// Even-odd ray-casting test over a set of rings.
///
/// Rings are closed vertex lists in degrees. Holes are handled by the
/// even-odd rule. Operates in lat/lon coordinates; rings crossing the
/// antimeridian are not supported.
pub fn point_in_rings(point: LatLon, rings: &[Vec<LatLon>]) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        if n < 3 {
            continue;
        }
        let mut j = n - 1;
        for i in 0..n {
            let (pi, pj) = (ring[i], ring[j]);
            if (pi.lat > point.lat) != (pj.lat > point.lat) {
                let slope = (pj.lon - pi.lon) / (pj.lat - pi.lat);
                let x = pi.lon + (point.lat - pi.lat) * slope;
                if point.lon < x {
                    inside = !inside;
                }
            }
            j = i;
        }
    }
    inside
}
