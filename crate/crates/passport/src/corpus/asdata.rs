//! AS and ISP registry snapshot (whois / AS-rank derived fields).
//!
//! CSV columns:
//! `ip,prefix,as_number,as_name,as_registry,as_country,isp_name,isp_city,isp_region,isp_country,isp_num_ases,cone_ips,cone_prefixes`
//! Empty fields mean the value is unknown for that IP.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{CountryCode, RouterIp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AsRecord {
    pub prefix: Option<RouterIp>,
    pub as_number: Option<String>,
    pub as_name: Option<String>,
    pub as_registry: Option<String>,
    pub as_country: Option<CountryCode>,
    pub isp_name: Option<String>,
    pub isp_city: Option<String>,
    pub isp_region: Option<String>,
    pub isp_country: Option<CountryCode>,
    pub isp_num_ases: Option<u32>,
    pub cone_ips: Option<u64>,
    pub cone_prefixes: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct AsDataSnapshot {
    records: BTreeMap<RouterIp, AsRecord>,
}

impl AsDataSnapshot {
    pub fn insert(&mut self, ip: RouterIp, record: AsRecord) -> Result<()> {
        if self.records.contains_key(&ip) {
            return Err(Error::DuplicateEntry {
                key: format!("{ip} in AS data"),
            });
        }
        self.records.insert(ip, record);
        Ok(())
    }

    pub fn get(&self, ip: RouterIp) -> Option<&AsRecord> {
        self.records.get(&ip)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ips(&self) -> impl Iterator<Item = RouterIp> + '_ {
        self.records.keys().copied()
    }

    /// Routable prefix for an IP: the recorded prefix network address, or
    /// the enclosing /24 when the registry has no entry.
    pub fn prefix_code(&self, ip: RouterIp) -> u32 {
        self.records
            .get(&ip)
            .and_then(|r| r.prefix)
            .map(|p| p.numeric_code())
            .unwrap_or(ip.numeric_code() & 0xFFFF_FF00)
    }
}

const HEADER: &str = "ip,prefix,as_number,as_name,as_registry,as_country,isp_name,isp_city,isp_region,isp_country,isp_num_ases,cone_ips,cone_prefixes";

pub fn load_as_data(path: &Path) -> Result<AsDataSnapshot> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_as_data(&text)
}

pub fn parse_as_data(text: &str) -> Result<AsDataSnapshot> {
    let mut snapshot = AsDataSnapshot::default();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || (line_no == 0 && trimmed.eq_ignore_ascii_case(HEADER)) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 13 {
            return Err(Error::UnparseableLine {
                line_no: line_no + 1,
                text: line.to_string(),
            });
        }
        let unparseable = || Error::UnparseableLine {
            line_no: line_no + 1,
            text: line.to_string(),
        };
        let ip: RouterIp = fields[0].parse().map_err(|_| unparseable())?;
        let opt = |s: &str| {
            if s.is_empty() {
                None
            } else {
                Some(s.to_string())
            }
        };
        let country = |s: &str| -> Result<Option<CountryCode>> {
            if s.is_empty() {
                Ok(None)
            } else {
                CountryCode::parse(s).map(Some)
            }
        };
        let record = AsRecord {
            prefix: if fields[1].is_empty() {
                None
            } else {
                Some(fields[1].parse().map_err(|_| unparseable())?)
            },
            as_number: opt(fields[2]),
            as_name: opt(fields[3]),
            as_registry: opt(fields[4]),
            as_country: country(fields[5])?,
            isp_name: opt(fields[6]),
            isp_city: opt(fields[7]),
            isp_region: opt(fields[8]),
            isp_country: country(fields[9])?,
            isp_num_ases: parse_opt_num(fields[10]).ok_or_else(unparseable)?,
            cone_ips: parse_opt_num(fields[11]).ok_or_else(unparseable)?,
            cone_prefixes: parse_opt_num(fields[12]).ok_or_else(unparseable)?,
        };
        snapshot.insert(ip, record)?;
    }
    Ok(snapshot)
}

fn parse_opt_num<T: std::str::FromStr>(s: &str) -> Option<Option<T>> {
    if s.is_empty() {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}

pub fn header() -> &'static str {
    HEADER
}
