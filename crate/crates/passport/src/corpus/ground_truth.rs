//! Ground-truth router locations and the admission rule for crowdsourced
//! labels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{AliasTable, BoundarySet, CountryCode, MeasurementSet, RouterIp};
use crate::error::{Error, Result};
use crate::sol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelOrigin {
    Manual,
    Ixp,
    Crowdsourced,
    /// Singleton resolutions promoted into the training set during
    /// iterative refinement.
    Promoted,
}

impl LabelOrigin {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "manual" => Ok(LabelOrigin::Manual),
            "ixp" => Ok(LabelOrigin::Ixp),
            "crowdsourced" => Ok(LabelOrigin::Crowdsourced),
            "promoted" => Ok(LabelOrigin::Promoted),
            other => Err(Error::Invalid(format!("unknown label origin {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LabelOrigin::Manual => "manual",
            LabelOrigin::Ixp => "ixp",
            LabelOrigin::Crowdsourced => "crowdsourced",
            LabelOrigin::Promoted => "promoted",
        }
    }

    /// Curated labels are trusted and never replaced during refinement.
    pub fn is_curated(&self) -> bool {
        matches!(self, LabelOrigin::Manual | LabelOrigin::Ixp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub ip: RouterIp,
    pub country: CountryCode,
    pub origin: LabelOrigin,
    pub confidence_note: Option<String>,
}

/// Ground truth CSV: `ip,country,origin` with a header row.
pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthLabel>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_ground_truth(&text)
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthLabel>> {
    let mut labels = Vec::new();
    let mut curated_seen: BTreeMap<RouterIp, CountryCode> = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || (line_no == 0 && trimmed.eq_ignore_ascii_case("ip,country,origin"))
        {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::UnparseableLine {
                line_no: line_no + 1,
                text: line.to_string(),
            });
        }
        let ip: RouterIp = fields[0].parse().map_err(|_| Error::UnparseableLine {
            line_no: line_no + 1,
            text: line.to_string(),
        })?;
        let country = CountryCode::parse(fields[1])?;
        let origin = LabelOrigin::parse(fields[2])?;
        let confidence_note = fields.get(3).filter(|s| !s.is_empty()).map(|s| s.to_string());

        // Curated labels assert exactly one country per IP; a conflicting
        // curated duplicate is a corrupt file.
        if origin.is_curated() {
            if let Some(&existing) = curated_seen.get(&ip) {
                if existing != country {
                    return Err(Error::DuplicateEntry {
                        key: format!("conflicting curated labels for {ip}"),
                    });
                }
                continue; // exact duplicate row, drop
            }
            curated_seen.insert(ip, country);
        }
        labels.push(GroundTruthLabel {
            ip,
            country,
            origin,
            confidence_note,
        });
    }
    Ok(labels)
}

/// Crowdsourced admission: keep a crowdsourced label only when its country
/// is speed-of-light feasible under the loaded measurements, and drop
/// crowdsourced labels that map one IP to several countries. Curated labels
/// pass through untouched. With no measurements there are no constraints to
/// violate and every label is kept.
pub fn admit_crowdsourced(
    labels: &[GroundTruthLabel],
    measurements: &MeasurementSet,
    aliases: &AliasTable,
    boundaries: &BoundarySet,
    slack_km: f64,
) -> Vec<GroundTruthLabel> {
    // crowdsourced IPs mapped to multiple countries are ambiguous
    let mut crowd_countries: BTreeMap<RouterIp, std::collections::BTreeSet<CountryCode>> =
        BTreeMap::new();
    for label in labels {
        if label.origin == LabelOrigin::Crowdsourced {
            crowd_countries
                .entry(label.ip)
                .or_default()
                .insert(label.country);
        }
    }

    labels
        .iter()
        .filter(|label| {
            if label.origin != LabelOrigin::Crowdsourced {
                return true;
            }
            if crowd_countries
                .get(&label.ip)
                .is_some_and(|set| set.len() > 1)
            {
                return false;
            }
            let region =
                sol::feasible_countries(label.ip, measurements, aliases, boundaries, slack_km);
            match region.feasible_countries {
                None => true, // no constraints on this IP
                Some(feasible) => feasible.contains(&label.country),
            }
        })
        .cloned()
        .collect()
}
