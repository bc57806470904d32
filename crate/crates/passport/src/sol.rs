//! Speed-of-light feasibility: RTT-derived spherical caps, cap/country
//! intersection tests, landmark latency decomposition, and vantage-point
//! selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    AliasTable, BoundarySet, CountryBoundary, CountryCode, LocatedEndpoint, Measurement,
    MeasurementOrigin, MeasurementSet, RouterIp, TraceroutePath,
};
use crate::error::{Error, Result};
use crate::geo::{great_circle_km, LatLon, EARTH_CIRCUMFERENCE_KM};

/// Speed of light in vacuum, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

/// Fraction of c at which signals effectively propagate in fiber.
pub const PROPAGATION_FACTOR: f64 = 0.47;

/// Measurements at or above this RTT are ignored: the resulting disc
/// diameter would exceed 40% of the earth's circumference and constrain
/// nothing at country scale.
pub const RTT_CUTOFF_MS: f64 = 100.0;

/// Slack added to the vertex-distance test, half the boundary
/// densification spacing.
pub const DEFAULT_SLACK_KM: f64 = 25.0;

/// Feasibility radius for an RTT, without the cutoff check: the distance
/// light covers in fiber during half the round trip.
pub fn propagation_radius_km(min_rtt_ms: f64) -> f64 {
    (min_rtt_ms / 1_000.0) / 2.0 * PROPAGATION_FACTOR * SPEED_OF_LIGHT_KM_S
}

/// Feasibility radius for an RTT below the cutoff.
pub fn radius_km(min_rtt_ms: f64) -> Result<f64> {
    if !(0.0..RTT_CUTOFF_MS).contains(&min_rtt_ms) {
        return Err(Error::RttAboveCutoff {
            rtt_ms: min_rtt_ms,
            cutoff_ms: RTT_CUTOFF_MS,
        });
    }
    Ok(propagation_radius_km(min_rtt_ms))
}

/// The disc of points within `radius_km` of a measuring source: the region
/// a router can occupy given one RTT observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCap {
    pub center: LatLon,
    pub radius_km: f64,
    pub source_ip: RouterIp,
    pub target_ip: RouterIp,
    pub origin: MeasurementOrigin,
}

impl SphericalCap {
    /// Build a cap from a measurement; RTTs at or above the cutoff yield
    /// `None` and the measurement is ignored.
    pub fn from_measurement(m: &Measurement) -> Option<SphericalCap> {
        radius_km(m.min_rtt_ms).ok().map(|radius_km| SphericalCap {
            center: m.source.location,
            radius_km,
            source_ip: m.source.ip,
            target_ip: m.target,
            origin: m.origin,
        })
    }

    pub fn contains(&self, point: LatLon) -> bool {
        great_circle_km(self.center, point) <= self.radius_km
    }
}

/// True when the country's territory can intersect the cap: either the cap
/// center lies inside the country, or some densified boundary vertex is
/// within radius + slack of the center.
pub fn cap_intersects_country(boundary: &CountryBoundary, cap: &SphericalCap, slack_km: f64) -> bool {
    boundary.contains(cap.center)
        || boundary.min_vertex_distance_km(cap.center) <= cap.radius_km + slack_km
}

fn within_all(point: LatLon, caps: &[SphericalCap], slack_km: f64) -> bool {
    caps.iter()
        .all(|cap| great_circle_km(cap.center, point) <= cap.radius_km + slack_km)
}

/// A country is feasible when its territory intersects the caps' common
/// region. The test searches witness points — densified boundary
/// vertices, cap centers inside the country, and pairwise cap-lens
/// midpoints — for one that lies in the country and within every cap
/// (plus slack). Intersecting each cap individually is necessary but not
/// sufficient; a country strung between two caps without touching their
/// overlap is rejected.
pub fn country_feasible(boundary: &CountryBoundary, caps: &[SphericalCap], slack_km: f64) -> bool {
    // necessary condition, and the cheap rejection path
    if !caps
        .iter()
        .all(|cap| cap_intersects_country(boundary, cap, slack_km))
    {
        return false;
    }

    // boundary runs through the common region
    if boundary
        .densified
        .iter()
        .any(|&v| within_all(v, caps, slack_km))
    {
        return true;
    }

    // the region sits strictly inside the country: some cap center, or the
    // midpoint of some pairwise lens, must then fall inside it
    if caps
        .iter()
        .any(|cap| boundary.contains(cap.center) && within_all(cap.center, caps, slack_km))
    {
        return true;
    }
    for (i, a) in caps.iter().enumerate() {
        for b in caps.iter().skip(i + 1) {
            let d = great_circle_km(a.center, b.center);
            if d < 1e-9 {
                continue;
            }
            let lo = (d - b.radius_km).max(0.0);
            let hi = a.radius_km.min(d);
            if lo > hi {
                continue; // caps disjoint along the axis
            }
            let t = (lo + hi) / 2.0 / d;
            let witness = crate::geo::interpolate(a.center, b.center, t);
            if boundary.contains(witness) && within_all(witness, caps, slack_km) {
                return true;
            }
            // the corners of a multi-cap region are circle intersection
            // points
            for witness in cap_boundary_intersections(a, b) {
                if boundary.contains(witness) && within_all(witness, caps, slack_km) {
                    return true;
                }
            }
        }
    }
    false
}

/// The (zero or two) points where two cap boundary circles cross.
fn cap_boundary_intersections(a: &SphericalCap, b: &SphericalCap) -> Vec<LatLon> {
    let u1 = crate::geo::to_unit_vector(a.center);
    let u2 = crate::geo::to_unit_vector(b.center);
    let cos_a1 = (a.radius_km / crate::geo::EARTH_RADIUS_KM).cos();
    let cos_a2 = (b.radius_km / crate::geo::EARTH_RADIUS_KM).cos();
    let c = u1[0] * u2[0] + u1[1] * u2[1] + u1[2] * u2[2];
    let denom = 1.0 - c * c;
    if denom < 1e-12 {
        return Vec::new(); // concentric or antipodal centers
    }
    let alpha = (cos_a1 - c * cos_a2) / denom;
    let beta = (cos_a2 - c * cos_a1) / denom;
    let cross = [
        u1[1] * u2[2] - u1[2] * u2[1],
        u1[2] * u2[0] - u1[0] * u2[2],
        u1[0] * u2[1] - u1[1] * u2[0],
    ];
    let cross_sq = cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2];
    let gamma_sq = (1.0 - alpha * alpha - beta * beta - 2.0 * alpha * beta * c) / cross_sq;
    if gamma_sq < 0.0 {
        return Vec::new(); // circles do not intersect
    }
    let gamma = gamma_sq.sqrt();
    [gamma, -gamma]
        .iter()
        .map(|&g| {
            crate::geo::from_unit_vector([
                alpha * u1[0] + beta * u2[0] + g * cross[0],
                alpha * u1[1] + beta * u2[1] + g * cross[1],
                alpha * u1[2] + beta * u2[2] + g * cross[2],
            ])
        })
        .collect()
}

/// The constraint state for one router after merging caps across aliases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub caps: Vec<SphericalCap>,
    /// `None` when no valid caps exist: feasibility is undetermined and
    /// every country remains possible.
    pub feasible_countries: Option<BTreeSet<CountryCode>>,
}

impl FeasibleRegion {
    pub fn undetermined() -> Self {
        FeasibleRegion {
            caps: Vec::new(),
            feasible_countries: None,
        }
    }

    pub fn is_undetermined(&self) -> bool {
        self.feasible_countries.is_none()
    }

    pub fn all_caps_direct(&self) -> bool {
        self.caps
            .iter()
            .all(|c| c.origin == MeasurementOrigin::Direct)
    }

    /// The sole feasible country, when the region pins exactly one.
    pub fn singleton(&self) -> Option<CountryCode> {
        match &self.feasible_countries {
            Some(set) if set.len() == 1 => set.iter().next().copied(),
            _ => None,
        }
    }
}

/// Caps for a router, collected across all of its alias addresses.
pub fn collect_caps(
    target: RouterIp,
    measurements: &MeasurementSet,
    aliases: &AliasTable,
) -> Vec<SphericalCap> {
    let mut caps = Vec::new();
    for member in aliases.members(target) {
        for m in measurements.for_target(member) {
            if let Some(cap) = SphericalCap::from_measurement(m) {
                caps.push(cap);
            }
        }
    }
    caps
}

/// Feasible countries for a router given the loaded measurements, alias
/// sets, and boundaries. No valid caps means feasibility is undetermined;
/// caps that jointly exclude every country yield the empty set.
pub fn feasible_countries(
    target: RouterIp,
    measurements: &MeasurementSet,
    aliases: &AliasTable,
    boundaries: &BoundarySet,
    slack_km: f64,
) -> FeasibleRegion {
    let caps = collect_caps(target, measurements, aliases);
    region_from_caps(caps, boundaries, slack_km)
}

pub fn region_from_caps(
    caps: Vec<SphericalCap>,
    boundaries: &BoundarySet,
    slack_km: f64,
) -> FeasibleRegion {
    if caps.is_empty() {
        return FeasibleRegion::undetermined();
    }
    let feasible: BTreeSet<CountryCode> = boundaries
        .iter()
        .filter(|b| country_feasible(b, &caps, slack_km))
        .map(|b| b.country)
        .collect();
    FeasibleRegion {
        caps,
        feasible_countries: Some(feasible),
    }
}

/// Latency estimate between an on-path landmark and a target router,
/// decomposed from two RTTs measured at the same source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkEstimate {
    pub landmark_ip: RouterIp,
    pub landmark_location: LatLon,
    pub target_ip: RouterIp,
    pub est_latency_ms: f64,
    /// Landmark decomposition assumes shared return paths, which does not
    /// always hold; consumers treat these as a last resort.
    pub low_confidence: bool,
}

/// Half the absolute RTT difference: the average extra one-way delay
/// between the landmark and the router.
pub fn landmark_latency(
    rtt_source_to_router_ms: f64,
    rtt_source_to_landmark_ms: f64,
    landmark: LocatedEndpoint,
    target: RouterIp,
) -> LandmarkEstimate {
    LandmarkEstimate {
        landmark_ip: landmark.ip,
        landmark_location: landmark.location,
        target_ip: target,
        est_latency_ms: (rtt_source_to_router_ms - rtt_source_to_landmark_ms).abs() / 2.0,
        low_confidence: true,
    }
}

impl LandmarkEstimate {
    /// Express the estimate as a measurement centered on the landmark. The
    /// one-way latency is doubled back into RTT form so the cap radius
    /// comes out as latency x propagation speed.
    pub fn to_measurement(&self) -> Measurement {
        Measurement {
            source: LocatedEndpoint {
                ip: self.landmark_ip,
                location: self.landmark_location,
            },
            target: self.target_ip,
            min_rtt_ms: 2.0 * self.est_latency_ms,
            origin: MeasurementOrigin::LandmarkDerived,
        }
    }
}

/// Landmark-derived measurements for every (landmark, other-hop) pair on a
/// path, where a landmark is any hop whose address has a known location.
pub fn derive_landmark_measurements(
    path: &TraceroutePath,
    known_locations: &std::collections::BTreeMap<RouterIp, LatLon>,
) -> Vec<Measurement> {
    let mut out = Vec::new();
    for landmark_hop in &path.hops {
        let Some(&location) = known_locations.get(&landmark_hop.ip) else {
            continue;
        };
        let landmark = LocatedEndpoint {
            ip: landmark_hop.ip,
            location,
        };
        for target_hop in &path.hops {
            if target_hop.ip == landmark_hop.ip {
                continue;
            }
            let est = landmark_latency(
                target_hop.min_rtt_ms,
                landmark_hop.min_rtt_ms,
                landmark,
                target_hop.ip,
            );
            out.push(est.to_measurement());
        }
    }
    out
}

/// A located vantage point together with its measured RTT to some router.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VantagePoint {
    pub endpoint: LocatedEndpoint,
    pub rtt_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VpMode {
    /// The k vantage points with the lowest RTT.
    Greedy,
    /// A uniform k-subset drawn by seed.
    Random,
}

/// Select `k` vantage points.
pub fn select_vps(vps: &[VantagePoint], k: usize, mode: VpMode, seed: u64) -> Result<Vec<VantagePoint>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if k == 0 || k > vps.len() {
        return Err(Error::KTooLarge {
            k,
            available: vps.len(),
        });
    }
    match mode {
        VpMode::Greedy => {
            let mut sorted: Vec<VantagePoint> = vps.to_vec();
            sorted.sort_by(|a, b| {
                a.rtt_ms
                    .partial_cmp(&b.rtt_ms)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.endpoint.ip.cmp(&b.endpoint.ip))
            });
            sorted.truncate(k);
            Ok(sorted)
        }
        VpMode::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled: Vec<VantagePoint> = vps.to_vec();
            shuffled.shuffle(&mut rng);
            shuffled.truncate(k);
            Ok(shuffled)
        }
    }
}

/// Consistency of the configured constants: twice the cutoff radius stays
/// under 40% of the earth's circumference.
pub fn constants_consistent() -> bool {
    2.0 * propagation_radius_km(RTT_CUTOFF_MS) < 0.4 * EARTH_CIRCUMFERENCE_KM
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(s: &str) -> RouterIp {
        s.parse().unwrap()
    }

    #[test]
    fn radius_zero_rtt() {
        assert_eq!(radius_km(0.0).unwrap(), 0.0);
    }

    #[test]
    fn radius_fifty_ms() {
        // (50/1000)/2 * 0.47 * 299792.458
        let r = radius_km(50.0).unwrap();
        assert!((r - 3_522.561_381).abs() < 1e-5, "got {r}");
    }

    #[test]
    fn radius_above_cutoff_is_rejected() {
        assert!(matches!(
            radius_km(120.0),
            Err(Error::RttAboveCutoff { .. })
        ));
        assert!(matches!(
            radius_km(100.0),
            Err(Error::RttAboveCutoff { .. })
        ));
        assert!(radius_km(99.99).is_ok());
    }

    #[test]
    fn diameter_rule_holds() {
        assert!(constants_consistent());
        assert!(2.0 * propagation_radius_km(99.99) < 16_030.0);
    }

    #[test]
    fn landmark_latency_examples() {
        let landmark = LocatedEndpoint {
            ip: ip("9.9.9.1"),
            location: LatLon::new(40.0, 3.0),
        };
        let est = landmark_latency(80.0, 60.0, landmark, ip("9.9.9.2"));
        assert_eq!(est.est_latency_ms, 10.0);
        assert!(est.low_confidence);

        let eq = landmark_latency(60.0, 60.0, landmark, ip("9.9.9.2"));
        assert_eq!(eq.est_latency_ms, 0.0);

        let swapped = landmark_latency(60.0, 80.0, landmark, ip("9.9.9.2"));
        assert_eq!(swapped.est_latency_ms, 10.0);
    }

    #[test]
    fn landmark_measurement_radius_matches_latency_distance() {
        let landmark = LocatedEndpoint {
            ip: ip("9.9.9.1"),
            location: LatLon::new(40.0, 3.0),
        };
        let est = landmark_latency(80.0, 60.0, landmark, ip("9.9.9.2"));
        let m = est.to_measurement();
        assert_eq!(m.origin, MeasurementOrigin::LandmarkDerived);
        let cap = SphericalCap::from_measurement(&m).unwrap();
        // 10 ms of one-way latency at 0.47c
        let expected = 10.0 / 1_000.0 * PROPAGATION_FACTOR * SPEED_OF_LIGHT_KM_S;
        assert!((cap.radius_km - expected).abs() < 1e-9);
    }

    #[test]
    fn greedy_vp_selection_takes_lowest_rtt() {
        let vp = |addr: &str, rtt: f64| VantagePoint {
            endpoint: LocatedEndpoint {
                ip: ip(addr),
                location: LatLon::new(0.0, 0.0),
            },
            rtt_ms: rtt,
        };
        let vps = vec![vp("1.1.1.1", 40.0), vp("2.2.2.2", 10.0), vp("3.3.3.3", 90.0)];
        let picked = select_vps(&vps, 1, VpMode::Greedy, 0).unwrap();
        assert_eq!(picked[0].endpoint.ip, ip("2.2.2.2"));
    }

    #[test]
    fn k_too_large_is_rejected() {
        assert!(matches!(
            select_vps(&[], 1, VpMode::Greedy, 0),
            Err(Error::KTooLarge { .. })
        ));
    }

    #[test]
    fn random_vp_selection_is_seed_deterministic() {
        let vp = |addr: &str, rtt: f64| VantagePoint {
            endpoint: LocatedEndpoint {
                ip: ip(addr),
                location: LatLon::new(0.0, 0.0),
            },
            rtt_ms: rtt,
        };
        let vps: Vec<VantagePoint> = (1..=8)
            .map(|i| vp(&format!("10.1.0.{i}"), i as f64))
            .collect();
        let a = select_vps(&vps, 3, VpMode::Random, 7).unwrap();
        let b = select_vps(&vps, 3, VpMode::Random, 7).unwrap();
        assert_eq!(a, b);
    }
}
