//! External data: traceroutes, ground-truth labels, geolocation-source
//! snapshots, AS/whois data, router alias lists, country boundaries, and
//! RTT measurements.
//!
//! Loaders are single-threaded; every loaded structure is immutable after
//! construction and safe to share across threads.

pub mod alias;
pub mod asdata;
pub mod boundary;
pub mod ground_truth;
pub mod measurement;
pub mod snapshot;
pub mod traceroute;

use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geo::LatLon;

pub use alias::AliasTable;
pub use asdata::{AsDataSnapshot, AsRecord};
pub use boundary::{BoundarySet, CountryBoundary};
pub use ground_truth::{admit_crowdsourced, GroundTruthLabel, LabelOrigin};
pub use measurement::{LocatedEndpoint, Measurement, MeasurementOrigin, MeasurementSet};
pub use snapshot::{GeoSourceSnapshot, SnapshotLookup, GEO_SOURCES};
pub use traceroute::{parse_traceroute, Hop, PathDirection, TraceroutePath};

/// An IPv4 router address.
///
/// `numeric_code` is the big-endian integer value of the dotted quad and is
/// what classifiers consume.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RouterIp(Ipv4Addr);

impl RouterIp {
    pub fn new(addr: Ipv4Addr) -> Self {
        RouterIp(addr)
    }

    pub fn from_numeric(code: u32) -> Self {
        RouterIp(Ipv4Addr::from(code))
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.0
    }

    pub fn numeric_code(&self) -> u32 {
        u32::from(self.0)
    }

    /// Private and reserved ranges are flagged and excluded from prediction.
    pub fn is_private_or_reserved(&self) -> bool {
        let octets = self.0.octets();
        self.0.is_private()
            || self.0.is_loopback()
            || self.0.is_link_local()
            || self.0.is_broadcast()
            || self.0.is_documentation()
            || self.0.is_multicast()
            || octets[0] == 0
            || octets[0] >= 240
            // carrier-grade NAT, 100.64.0.0/10
            || (octets[0] == 100 && (64..128).contains(&octets[1]))
            // benchmarking, 198.18.0.0/15
            || (octets[0] == 198 && (octets[1] == 18 || octets[1] == 19))
    }
}

impl FromStr for RouterIp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<Ipv4Addr>()
            .map(RouterIp)
            .map_err(|_| Error::Invalid(format!("bad IPv4 address {s:?}")))
    }
}

impl fmt::Display for RouterIp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for RouterIp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RouterIp({})", self.0)
    }
}

impl Serialize for RouterIp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for RouterIp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// ISO-3166 alpha-2 style country code: two ASCII uppercase letters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn parse(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        if bytes.len() == 2 && bytes.iter().all(|b| b.is_ascii_uppercase()) {
            Ok(CountryCode([bytes[0], bytes[1]]))
        } else {
            Err(Error::BadCountryCode {
                code: s.to_string(),
            })
        }
    }

    pub fn as_str(&self) -> &str {
        // Construction guarantees ASCII.
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl FromStr for CountryCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CountryCode::parse(s)
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CountryCode::parse(&s).map_err(D::Error::custom)
    }
}

/// Everything the offline trainer and online predictor read.
#[derive(Debug, Default, Clone)]
pub struct Corpus {
    pub snapshots: std::collections::BTreeMap<String, GeoSourceSnapshot>,
    pub as_data: AsDataSnapshot,
    pub ground_truth: Vec<GroundTruthLabel>,
    pub aliases: AliasTable,
    pub boundaries: BoundarySet,
    pub measurements: MeasurementSet,
    pub continents: std::collections::BTreeMap<CountryCode, String>,
}

impl Corpus {
    /// Ground truth with crowdsourced labels filtered through the
    /// speed-of-light admission rule against the loaded measurements.
    pub fn admitted_labels(&self, slack_km: f64) -> Vec<GroundTruthLabel> {
        admit_crowdsourced(
            &self.ground_truth,
            &self.measurements,
            &self.aliases,
            &self.boundaries,
            slack_km,
        )
    }

    /// Every router IP the corpus knows anything about, sorted.
    pub fn known_ips(&self) -> Vec<RouterIp> {
        let mut set = std::collections::BTreeSet::new();
        for snap in self.snapshots.values() {
            set.extend(snap.ips());
        }
        set.extend(self.as_data.ips());
        set.extend(self.ground_truth.iter().map(|l| l.ip));
        set.extend(self.measurements.target_ips());
        set.into_iter().collect()
    }
}

/// Continent table: CSV `country,continent` with header.
pub fn load_continents(path: &Path) -> Result<std::collections::BTreeMap<CountryCode, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = std::collections::BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        if line_no == 0 || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(2, ',');
        let country = fields.next().unwrap_or_default().trim();
        let continent = fields.next().unwrap_or_default().trim();
        if continent.is_empty() {
            return Err(Error::UnparseableLine {
                line_no: line_no + 1,
                text: line.to_string(),
            });
        }
        out.insert(CountryCode::parse(country)?, continent.to_string());
    }
    Ok(out)
}

/// A geographically resolvable endpoint: address plus coordinates and,
/// when known, the country it sits in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceEndpoint {
    pub ip: RouterIp,
    pub location: LatLon,
    pub country: Option<CountryCode>,
}
