//! Shared test support: an independent brute-force feasibility oracle and
//! randomized geometry fixtures.
//!
//! The oracle deliberately avoids the library's feasibility code path: it
//! rasterizes the country at a fixed grid step and marks it feasible iff
//! some grid point inside the country lies within every cap, using its own
//! winding-number containment test.

#![allow(dead_code)]

use passport::corpus::{BoundarySet, CountryBoundary, CountryCode};
use passport::geo::{great_circle_km, LatLon};
use passport::sol::SphericalCap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ORACLE_GRID_STEP_DEG: f64 = 0.5;

/// Winding-number point-in-polygon, written independently of the library's
/// even-odd ray cast.
pub fn winding_contains(point: LatLon, rings: &[Vec<LatLon>]) -> bool {
    let mut winding = 0i32;
    for ring in rings {
        for pair in ring.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.lat <= point.lat {
                if b.lat > point.lat && cross(a, b, point) > 0.0 {
                    winding += 1;
                }
            } else if b.lat <= point.lat && cross(a, b, point) < 0.0 {
                winding -= 1;
            }
        }
    }
    winding != 0
}

fn cross(a: LatLon, b: LatLon, p: LatLon) -> f64 {
    (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat)
}

/// Brute-force oracle: the country is feasible iff some grid point inside
/// it lies within all caps.
pub fn grid_oracle_feasible(boundary: &CountryBoundary, caps: &[SphericalCap]) -> bool {
    let (min_lat, min_lon, max_lat, max_lon) = boundary.bounding_box();
    let start_lat = (min_lat / ORACLE_GRID_STEP_DEG).floor() * ORACLE_GRID_STEP_DEG;
    let start_lon = (min_lon / ORACLE_GRID_STEP_DEG).floor() * ORACLE_GRID_STEP_DEG;

    let mut lat = start_lat;
    while lat <= max_lat + ORACLE_GRID_STEP_DEG {
        let mut lon = start_lon;
        while lon <= max_lon + ORACLE_GRID_STEP_DEG {
            let point = LatLon::new(lat, lon);
            if winding_contains(point, &boundary.rings)
                && caps
                    .iter()
                    .all(|cap| great_circle_km(cap.center, point) <= cap.radius_km)
            {
                return true;
            }
            lon += ORACLE_GRID_STEP_DEG;
        }
        lat += ORACLE_GRID_STEP_DEG;
    }
    false
}

/// One randomized trial: a cap set around an anchor point plus a country
/// to test against.
pub struct GeometryFixture {
    pub caps: Vec<SphericalCap>,
    pub country: CountryCode,
}

/// Randomized (cap set, country) pairs over a boundary set. Caps are drawn
/// around an anchor inside a random country; most contain the anchor (the
/// realistic case of constraints formed around a true router position),
/// some are shrunk below the anchor distance to produce infeasible setups.
pub fn random_fixtures(
    boundaries: &BoundarySet,
    count: usize,
    seed: u64,
) -> Vec<GeometryFixture> {
    random_fixtures_with(boundaries, count, seed, 0.15)
}

/// As [`random_fixtures`], with an explicit probability of shrunken
/// (anchor-excluding) caps.
pub fn random_fixtures_with(
    boundaries: &BoundarySet,
    count: usize,
    seed: u64,
    shrunken_prob: f64,
) -> Vec<GeometryFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = boundaries.codes();
    let mut fixtures = Vec::with_capacity(count);

    for trial in 0..count {
        let anchor_country = codes[rng.gen_range(0..codes.len())];
        let boundary = boundaries.get(anchor_country).unwrap();
        let (min_lat, min_lon, max_lat, max_lon) = boundary.bounding_box();
        // rejection-sample an interior anchor
        let anchor = loop {
            let p = LatLon::new(
                rng.gen_range(min_lat..max_lat),
                rng.gen_range(min_lon..max_lon),
            );
            if boundary.contains(p) {
                break p;
            }
        };

        let n_caps = rng.gen_range(1..=4);
        let mut caps = Vec::with_capacity(n_caps);
        for c in 0..n_caps {
            let bearing = rng.gen_range(0.0..std::f64::consts::TAU);
            let distance = rng.gen_range(150.0..2_000.0f64);
            let center = offset_approx(anchor, distance, bearing);
            let true_distance = great_circle_km(center, anchor);
            // most caps contain the anchor comfortably; some fall short
            let factor = if rng.gen_bool(1.0 - shrunken_prob) {
                rng.gen_range(1.15..1.5)
            } else {
                rng.gen_range(0.5..0.8)
            };
            let radius_km = (true_distance * factor).max(150.0);
            caps.push(SphericalCap {
                center,
                radius_km,
                source_ip: format!("21.9.{}.{}", trial % 250, c + 1).parse().unwrap(),
                target_ip: "20.9.0.1".parse().unwrap(),
                origin: passport::corpus::MeasurementOrigin::Direct,
            });
        }

        // half the trials test the anchor's own country, half a random one
        let country = if rng.gen_bool(0.5) {
            anchor_country
        } else {
            codes[rng.gen_range(0..codes.len())]
        };

        // keep each radius clear of the tested country's decision band so
        // vertex quantization (25 km slack, ~27 km oracle grid) cannot flip
        // individual constraints
        let tested = boundaries.get(country).unwrap();
        for cap in &mut caps {
            let threshold = tested.min_vertex_distance_km(cap.center);
            if (threshold - cap.radius_km).abs() <= 60.0 {
                cap.radius_km = if cap.radius_km >= threshold {
                    threshold + 90.0
                } else {
                    (threshold - 90.0).max(140.0)
                };
            }
        }
        fixtures.push(GeometryFixture { caps, country });
    }
    fixtures
}

/// Move ~`distance_km` from `from` along a bearing (flat-earth small-step
/// approximation; adequate for fixture placement).
pub fn offset_approx(from: LatLon, distance_km: f64, bearing_rad: f64) -> LatLon {
    let dlat = distance_km * bearing_rad.cos() / 111.0;
    let dlon = distance_km * bearing_rad.sin() / (111.0 * from.lat.to_radians().cos().max(0.2));
    LatLon::new(
        (from.lat + dlat).clamp(-89.0, 89.0),
        ((from.lon + dlon + 180.0).rem_euclid(360.0)) - 180.0,
    )
}

/// The simplified western-Europe boundary fixture.
pub fn west_eu_boundaries() -> BoundarySet {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/boundaries_west_eu.geojson"
    ))
    .unwrap();
    passport::corpus::boundary::parse_boundaries(&text, 50.0).unwrap()
}
