//! RTT measurements from located sources toward router IPs.
//!
//! Input CSV: `src_ip,src_lat,src_lon,target_ip,min_rtt_ms` with a header
//! row. Repeated (source, target) rows are reduced to their minimum RTT at
//! load time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::RouterIp;
use crate::error::{Error, Result};
use crate::geo::LatLon;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocatedEndpoint {
    pub ip: RouterIp,
    pub location: LatLon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementOrigin {
    /// RTT measured directly from the located source.
    Direct,
    /// Latency decomposed through an on-path landmark; low confidence.
    LandmarkDerived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub source: LocatedEndpoint,
    pub target: RouterIp,
    pub min_rtt_ms: f64,
    pub origin: MeasurementOrigin,
}

#[derive(Debug, Clone, Default)]
pub struct MeasurementSet {
    by_target: BTreeMap<RouterIp, Vec<Measurement>>,
    len: usize,
}

impl MeasurementSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a measurement, keeping the minimum RTT per (source, target).
    pub fn insert(&mut self, m: Measurement) {
        let entry = self.by_target.entry(m.target).or_default();
        if let Some(existing) = entry
            .iter_mut()
            .find(|e| e.source.ip == m.source.ip && e.origin == m.origin)
        {
            if m.min_rtt_ms < existing.min_rtt_ms {
                *existing = m;
            }
        } else {
            entry.push(m);
            self.len += 1;
        }
    }

    pub fn for_target(&self, ip: RouterIp) -> &[Measurement] {
        self.by_target.get(&ip).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn target_ips(&self) -> impl Iterator<Item = RouterIp> + '_ {
        self.by_target.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Measurement> {
        self.by_target.values().flatten()
    }

    /// Locations of all measurement sources; these double as landmark
    /// positions when a source address shows up on a measured path.
    pub fn source_locations(&self) -> BTreeMap<RouterIp, LatLon> {
        let mut out = BTreeMap::new();
        for m in self.iter() {
            out.insert(m.source.ip, m.source.location);
        }
        out
    }
}

const HEADER: &str = "src_ip,src_lat,src_lon,target_ip,min_rtt_ms";

pub fn load_measurements(path: &Path) -> Result<MeasurementSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_measurements(&text)
}

pub fn parse_measurements(text: &str) -> Result<MeasurementSet> {
    let mut set = MeasurementSet::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || (line_no == 0 && trimmed.eq_ignore_ascii_case(HEADER)) {
            continue;
        }
        let unparseable = || Error::UnparseableLine {
            line_no: line_no + 1,
            text: line.to_string(),
        };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(unparseable());
        }
        let src_ip: RouterIp = fields[0].parse().map_err(|_| unparseable())?;
        let lat: f64 = fields[1].parse().map_err(|_| unparseable())?;
        let lon: f64 = fields[2].parse().map_err(|_| unparseable())?;
        let target: RouterIp = fields[3].parse().map_err(|_| unparseable())?;
        let rtt: f64 = fields[4].parse().map_err(|_| unparseable())?;
        let location = LatLon::new(lat, lon);
        if !location.is_valid() || rtt < 0.0 || !rtt.is_finite() {
            return Err(unparseable());
        }
        set.insert(Measurement {
            source: LocatedEndpoint {
                ip: src_ip,
                location,
            },
            target,
            min_rtt_ms: rtt,
            origin: MeasurementOrigin::Direct,
        });
    }
    Ok(set)
}

pub fn header() -> &'static str {
    HEADER
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_pairs_keep_minimum() {
        let text = "src_ip,src_lat,src_lon,target_ip,min_rtt_ms\n\
                    1.1.1.1,50.0,6.0,9.9.9.9,12.0\n\
                    1.1.1.1,50.0,6.0,9.9.9.9,8.5\n\
                    1.1.1.1,50.0,6.0,9.9.9.9,10.0\n";
        let set = parse_measurements(text).unwrap();
        let ms = set.for_target("9.9.9.9".parse().unwrap());
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].min_rtt_ms, 8.5);
    }

    #[test]
    fn bad_coordinates_rejected() {
        let text = "src_ip,src_lat,src_lon,target_ip,min_rtt_ms\n1.1.1.1,99.0,6.0,9.9.9.9,12.0\n";
        assert!(parse_measurements(text).is_err());
    }

    #[test]
    fn unknown_target_is_empty_slice() {
        let set = MeasurementSet::new();
        assert!(set.for_target("9.9.9.9".parse().unwrap()).is_empty());
    }
}
