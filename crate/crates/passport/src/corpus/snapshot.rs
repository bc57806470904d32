//! File-backed snapshots of the unreliable geolocation sources.
//!
//! One CSV per source per date, `ip,country` with a header row. Lookups are
//! total: any IP missing from the file maps to the reserved UNKNOWN value.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{CountryCode, RouterIp};
use crate::error::{Error, Result};

/// The configured unreliable country sources, in feature order.
pub const GEO_SOURCES: [&str; 6] = [
    "ip2location",
    "ddec",
    "dbip",
    "maxmind",
    "apigurus",
    "ipinfo",
];

/// Outcome of a snapshot lookup. `Unknown` covers both IPs absent from the
/// snapshot and IPs the source explicitly could not locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotLookup {
    Country(CountryCode),
    Unknown,
}

impl SnapshotLookup {
    pub fn country(&self) -> Option<CountryCode> {
        match self {
            SnapshotLookup::Country(c) => Some(*c),
            SnapshotLookup::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GeoSourceSnapshot {
    pub source_name: String,
    pub snapshot_date: Option<String>,
    entries: BTreeMap<RouterIp, Option<CountryCode>>,
}

impl GeoSourceSnapshot {
    pub fn new(source_name: impl Into<String>) -> Self {
        GeoSourceSnapshot {
            source_name: source_name.into(),
            snapshot_date: None,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, ip: RouterIp, country: Option<CountryCode>) -> Result<()> {
        if self.entries.contains_key(&ip) {
            return Err(Error::DuplicateEntry {
                key: format!("{} in {}", ip, self.source_name),
            });
        }
        self.entries.insert(ip, country);
        Ok(())
    }

    /// Total lookup: absent IPs return `Unknown`.
    pub fn lookup(&self, ip: RouterIp) -> SnapshotLookup {
        match self.entries.get(&ip) {
            Some(Some(c)) => SnapshotLookup::Country(*c),
            _ => SnapshotLookup::Unknown,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ips(&self) -> impl Iterator<Item = RouterIp> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (RouterIp, Option<CountryCode>)> + '_ {
        self.entries.iter().map(|(ip, c)| (*ip, *c))
    }
}

/// Load a snapshot CSV. UNKNOWN is encoded as an empty country field.
pub fn load_snapshot(path: &Path, source_name: &str) -> Result<GeoSourceSnapshot> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_snapshot(&text, source_name)
}

pub fn parse_snapshot(text: &str, source_name: &str) -> Result<GeoSourceSnapshot> {
    let mut snapshot = GeoSourceSnapshot::new(source_name);
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 0 && trimmed.eq_ignore_ascii_case("ip,country") {
            continue;
        }
        let mut fields = trimmed.splitn(2, ',');
        let ip: RouterIp = fields
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|_| Error::UnparseableLine {
                line_no: line_no + 1,
                text: line.to_string(),
            })?;
        let country_field = fields.next().unwrap_or_default().trim();
        let country = if country_field.is_empty() {
            None
        } else {
            Some(CountryCode::parse(country_field)?)
        };
        snapshot.insert(ip, country)?;
    }
    Ok(snapshot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_present_ip() {
        let snap = parse_snapshot("ip,country\n1.2.3.4,US\n", "maxmind").unwrap();
        assert_eq!(
            snap.lookup("1.2.3.4".parse().unwrap()),
            SnapshotLookup::Country(CountryCode::parse("US").unwrap())
        );
    }

    #[test]
    fn absent_ip_is_unknown() {
        let snap = parse_snapshot("ip,country\n1.2.3.4,US\n", "maxmind").unwrap();
        assert_eq!(
            snap.lookup("5.6.7.8".parse().unwrap()),
            SnapshotLookup::Unknown
        );
    }

    #[test]
    fn empty_country_field_is_unknown() {
        let snap = parse_snapshot("ip,country\n1.2.3.4,\n", "dbip").unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(
            snap.lookup("1.2.3.4".parse().unwrap()),
            SnapshotLookup::Unknown
        );
    }

    #[test]
    fn duplicate_ip_is_rejected() {
        let err = parse_snapshot("ip,country\n1.2.3.4,US\n1.2.3.4,DE\n", "dbip").unwrap_err();
        assert!(matches!(err, Error::DuplicateEntry { .. }));
    }

    #[test]
    fn bad_country_code_is_rejected() {
        let err = parse_snapshot("ip,country\n1.2.3.4,usa\n", "dbip").unwrap_err();
        assert!(matches!(err, Error::BadCountryCode { .. }));
    }

    #[test]
    fn ten_thousand_rows_load() {
        let mut text = String::from("ip,country\n");
        for i in 0..10_000u32 {
            // spread over public space starting at 1.0.0.0
            let ip = RouterIp::from_numeric(0x0100_0000 + i);
            text.push_str(&format!("{ip},US\n"));
        }
        let started = std::time::Instant::now();
        let snap = parse_snapshot(&text, "bulk").unwrap();
        assert_eq!(snap.len(), 10_000);
        assert!(started.elapsed().as_secs() < 5);
    }
}
