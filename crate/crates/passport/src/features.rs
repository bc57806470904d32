//! Per-IP feature assembly and numeric encoding for classifier input.
//!
//! Each router is described by 18 features: the raw address and its
//! routable prefix as integers, the country reported by each of the six
//! unreliable geolocation sources, AS and ISP registry fields, and two ISP
//! size counts. Categorical values pass through a frozen per-feature
//! dictionary; the reserved code 0 means UNKNOWN.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, RouterIp, GEO_SOURCES};
use crate::error::{Error, Result};

/// Raw (pre-encoding) feature values for one router.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ip_code: u32,
    pub ip_prefix_code: u32,
    pub ip2location_country: Option<String>,
    pub ddec_country: Option<String>,
    pub dbip_country: Option<String>,
    pub maxmind_country: Option<String>,
    pub apigurus_country: Option<String>,
    pub ipinfo_country: Option<String>,
    pub as_country: Option<String>,
    pub as_name: Option<String>,
    pub as_number: Option<String>,
    pub as_registry: Option<String>,
    pub isp_name: Option<String>,
    pub isp_city: Option<String>,
    pub isp_region: Option<String>,
    pub isp_country: Option<String>,
    pub isp_size_num_ases: Option<u32>,
    pub cone_ips: Option<u64>,
    pub cone_prefixes: Option<u64>,
}

/// Names of the categorical features, in encoding order.
pub const CATEGORICAL_FEATURES: [&str; 14] = [
    "ip2location_country",
    "ddec_country",
    "dbip_country",
    "maxmind_country",
    "apigurus_country",
    "ipinfo_country",
    "as_country",
    "as_name",
    "as_number",
    "as_registry",
    "isp_name",
    "isp_city",
    "isp_region",
    "isp_country",
];

impl FeatureVector {
    fn categorical_values(&self) -> [&Option<String>; 14] {
        [
            &self.ip2location_country,
            &self.ddec_country,
            &self.dbip_country,
            &self.maxmind_country,
            &self.apigurus_country,
            &self.ipinfo_country,
            &self.as_country,
            &self.as_name,
            &self.as_number,
            &self.as_registry,
            &self.isp_name,
            &self.isp_city,
            &self.isp_region,
            &self.isp_country,
        ]
    }

    /// Number of fields carrying the reserved UNKNOWN value.
    pub fn unknown_count(&self) -> usize {
        let mut n = self
            .categorical_values()
            .iter()
            .filter(|v| v.is_none())
            .count();
        if self.isp_size_num_ases.is_none() {
            n += 1;
        }
        if self.cone_ips.is_none() && self.cone_prefixes.is_none() {
            n += 1;
        }
        n
    }
}

/// Controls feature materialization. The ISP customer cone ships as one
/// combined count by default; `cone_split` exposes IP and prefix counts as
/// two separate features instead.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub cone_split: bool,
}

impl FeatureConfig {
    /// Width of the encoded numeric row.
    pub fn row_width(&self) -> usize {
        if self.cone_split {
            19
        } else {
            18
        }
    }

    /// Column names of the encoded row, in order.
    pub fn column_names(&self) -> Vec<&'static str> {
        let mut cols = vec!["ip_code", "ip_prefix_code"];
        cols.extend(CATEGORICAL_FEATURES);
        cols.push("isp_size_num_ases");
        if self.cone_split {
            cols.push("isp_cone_ips");
            cols.push("isp_cone_prefixes");
        } else {
            cols.push("isp_cone_size");
        }
        cols
    }
}

/// Assemble the feature vector for one IP from the loaded corpus. A source
/// with no snapshot, or no entry for the IP, contributes UNKNOWN. The
/// result is a pure function of corpus content.
pub fn assemble(ip: RouterIp, corpus: &Corpus) -> FeatureVector {
    let source_country = |name: &str| -> Option<String> {
        corpus
            .snapshots
            .get(name)
            .and_then(|snap| snap.lookup(ip).country())
            .map(|c| c.as_str().to_string())
    };
    let asrec = corpus.as_data.get(ip);
    FeatureVector {
        ip_code: ip.numeric_code(),
        ip_prefix_code: corpus.as_data.prefix_code(ip),
        ip2location_country: source_country(GEO_SOURCES[0]),
        ddec_country: source_country(GEO_SOURCES[1]),
        dbip_country: source_country(GEO_SOURCES[2]),
        maxmind_country: source_country(GEO_SOURCES[3]),
        apigurus_country: source_country(GEO_SOURCES[4]),
        ipinfo_country: source_country(GEO_SOURCES[5]),
        as_country: asrec.and_then(|r| r.as_country).map(|c| c.as_str().to_string()),
        as_name: asrec.and_then(|r| r.as_name.clone()),
        as_number: asrec.and_then(|r| r.as_number.clone()),
        as_registry: asrec.and_then(|r| r.as_registry.clone()),
        isp_name: asrec.and_then(|r| r.isp_name.clone()),
        isp_city: asrec.and_then(|r| r.isp_city.clone()),
        isp_region: asrec.and_then(|r| r.isp_region.clone()),
        isp_country: asrec.and_then(|r| r.isp_country).map(|c| c.as_str().to_string()),
        isp_size_num_ases: asrec.and_then(|r| r.isp_num_ases),
        cone_ips: asrec.and_then(|r| r.cone_ips),
        cone_prefixes: asrec.and_then(|r| r.cone_prefixes),
    }
}

/// Per-feature map from raw string value to a dense positive integer code.
/// Code 0 is reserved for UNKNOWN; unseen values at prediction time map to
/// it. Frozen once built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryDictionary {
    maps: BTreeMap<String, BTreeMap<String, u32>>,
}

impl CategoryDictionary {
    /// Build the dictionary over a training universe of feature vectors.
    /// Values are coded in sorted order, so construction is independent of
    /// input order.
    pub fn build<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut values: BTreeMap<&'static str, std::collections::BTreeSet<String>> =
            BTreeMap::new();
        for vec in vectors {
            for (name, value) in CATEGORICAL_FEATURES.iter().zip(vec.categorical_values()) {
                if let Some(v) = value {
                    values.entry(name).or_default().insert(v.clone());
                }
            }
        }
        let mut maps = BTreeMap::new();
        for name in CATEGORICAL_FEATURES {
            let mut map = BTreeMap::new();
            if let Some(set) = values.get(name) {
                for (i, v) in set.iter().enumerate() {
                    map.insert(v.clone(), (i + 1) as u32);
                }
            }
            maps.insert(name.to_string(), map);
        }
        CategoryDictionary { maps }
    }

    /// Code for a raw value: 0 for UNKNOWN or unseen.
    pub fn code(&self, feature: &str, value: Option<&str>) -> u32 {
        match value {
            None => 0,
            Some(v) => self
                .maps
                .get(feature)
                .and_then(|m| m.get(v).copied())
                .unwrap_or(0),
        }
    }

    pub fn vocabulary_size(&self, feature: &str) -> usize {
        self.maps.get(feature).map_or(0, |m| m.len())
    }
}

/// Encode a feature vector as a numeric row: integer codes pass through,
/// categoricals run through the dictionary, counts pass through.
pub fn encode(raw: &FeatureVector, dict: &CategoryDictionary, config: &FeatureConfig) -> Vec<f64> {
    let mut row = Vec::with_capacity(config.row_width());
    row.push(raw.ip_code as f64);
    row.push(raw.ip_prefix_code as f64);
    for (name, value) in CATEGORICAL_FEATURES.iter().zip(raw.categorical_values()) {
        row.push(dict.code(name, value.as_deref()) as f64);
    }
    row.push(raw.isp_size_num_ases.unwrap_or(0) as f64);
    if config.cone_split {
        row.push(raw.cone_ips.unwrap_or(0) as f64);
        row.push(raw.cone_prefixes.unwrap_or(0) as f64);
    } else {
        let combined = raw.cone_ips.unwrap_or(0) + raw.cone_prefixes.unwrap_or(0);
        row.push(combined as f64);
    }
    row
}

/// Export a feature matrix with named columns plus a trailing label column.
pub fn export_matrix_csv(
    rows: &[(FeatureVector, Option<String>)],
    dict: &CategoryDictionary,
    config: &FeatureConfig,
) -> String {
    let mut out = String::new();
    out.push_str(&config.column_names().join(","));
    out.push_str(",label\n");
    for (vec, label) in rows {
        let encoded = encode(vec, dict, config);
        let fields: Vec<String> = encoded.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push(',');
        if let Some(l) = label {
            out.push_str(l);
        }
        out.push('\n');
    }
    out
}

/// Assemble and encode a batch of IPs against a frozen dictionary.
pub fn encode_batch(
    ips: &[RouterIp],
    corpus: &Corpus,
    dict: &CategoryDictionary,
    config: &FeatureConfig,
) -> Vec<Vec<f64>> {
    ips.iter()
        .map(|&ip| encode(&assemble(ip, corpus), dict, config))
        .collect()
}

pub fn widths_consistent(rows: &[Vec<f64>], width: usize) -> Result<()> {
    for row in rows {
        if row.len() != width {
            return Err(Error::WidthMismatch {
                expected: width,
                got: row.len(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::asdata::parse_as_data;
    use crate::corpus::snapshot::parse_snapshot;

    fn test_corpus() -> Corpus {
        let mut corpus = Corpus::default();
        for source in GEO_SOURCES {
            let snap = parse_snapshot("ip,country\n1.2.3.4,US\n", source).unwrap();
            corpus.snapshots.insert(source.to_string(), snap);
        }
        corpus.as_data = parse_as_data(&format!(
            "{}\n1.2.3.4,1.2.3.0,AS64500,examplenet,arin,US,example-isp,denver,colorado,US,2,1000,50\n",
            crate::corpus::asdata::header()
        ))
        .unwrap();
        corpus
    }

    #[test]
    fn ip_in_all_snapshots_has_zero_unknowns() {
        let corpus = test_corpus();
        let vec = assemble("1.2.3.4".parse().unwrap(), &corpus);
        assert_eq!(vec.unknown_count(), 0);
    }

    #[test]
    fn missing_source_yields_unknown() {
        let mut corpus = test_corpus();
        corpus.snapshots.remove("ddec");
        let vec = assemble("1.2.3.4".parse().unwrap(), &corpus);
        assert_eq!(vec.ddec_country, None);
        assert_eq!(vec.unknown_count(), 1);
    }

    #[test]
    fn assembly_is_deterministic() {
        let corpus = test_corpus();
        let a = assemble("1.2.3.4".parse().unwrap(), &corpus);
        let b = assemble("1.2.3.4".parse().unwrap(), &corpus);
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
    }

    #[test]
    fn dictionary_codes_and_unknown_rule() {
        let corpus = test_corpus();
        let vec = assemble("1.2.3.4".parse().unwrap(), &corpus);
        let dict = CategoryDictionary::build([&vec]);
        assert_eq!(dict.code("ip2location_country", Some("US")), 1);
        assert_eq!(dict.code("ip2location_country", Some("ZZ")), 0);
        assert_eq!(dict.code("ip2location_country", None), 0);
    }

    #[test]
    fn hand_encoded_fixture_row() {
        let corpus = test_corpus();
        let ip: RouterIp = "1.2.3.4".parse().unwrap();
        let vec = assemble(ip, &corpus);
        let dict = CategoryDictionary::build([&vec]);
        let config = FeatureConfig::default();
        let row = encode(&vec, &dict, &config);
        assert_eq!(row.len(), 18);
        // hand encoding: sole value of each categorical becomes code 1
        let expected = vec![
            f64::from(0x01020304u32), // ip_code
            f64::from(0x01020300u32), // prefix network address
            1.0, 1.0, 1.0, 1.0, 1.0, 1.0, // six source countries
            1.0, 1.0, 1.0, 1.0, // as country/name/number/registry
            1.0, 1.0, 1.0, 1.0, // isp name/city/region/country
            2.0,      // isp_size_num_ases
            1050.0,   // cone ips + prefixes
        ];
        assert_eq!(row, expected);
    }

    #[test]
    fn cone_split_yields_nineteen_columns() {
        let corpus = test_corpus();
        let vec = assemble("1.2.3.4".parse().unwrap(), &corpus);
        let dict = CategoryDictionary::build([&vec]);
        let config = FeatureConfig { cone_split: true };
        let row = encode(&vec, &dict, &config);
        assert_eq!(row.len(), 19);
        assert_eq!(row[16], 2.0);
        assert_eq!(row[17], 1000.0);
        assert_eq!(row[18], 50.0);
        assert_eq!(config.column_names().len(), 19);
    }

    #[test]
    fn encoding_is_injective_on_dictionary_values() {
        let mut vecs = Vec::new();
        for c in ["US", "DE", "FR", "JP"] {
            let mut v = FeatureVector {
                ip_code: 0,
                ip_prefix_code: 0,
                ip2location_country: Some(c.to_string()),
                ddec_country: None,
                dbip_country: None,
                maxmind_country: None,
                apigurus_country: None,
                ipinfo_country: None,
                as_country: None,
                as_name: None,
                as_number: None,
                as_registry: None,
                isp_name: None,
                isp_city: None,
                isp_region: None,
                isp_country: None,
                isp_size_num_ases: None,
                cone_ips: None,
                cone_prefixes: None,
            };
            v.ip_code = 1;
            vecs.push(v);
        }
        let dict = CategoryDictionary::build(vecs.iter());
        let mut codes: Vec<u32> = ["US", "DE", "FR", "JP"]
            .iter()
            .map(|c| dict.code("ip2location_country", Some(c)))
            .collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), 4);
        assert!(!codes.contains(&0));
    }

    #[test]
    fn snapshot_load_order_does_not_change_vectors() {
        // assemble reads from a BTreeMap, so insertion order is irrelevant;
        // verify vectors match when sources are registered in reverse.
        let corpus = test_corpus();
        let mut reversed = Corpus {
            as_data: corpus.as_data.clone(),
            ..Corpus::default()
        };
        for source in GEO_SOURCES.iter().rev() {
            reversed
                .snapshots
                .insert(source.to_string(), corpus.snapshots[*source].clone());
        }
        let ip: RouterIp = "1.2.3.4".parse().unwrap();
        assert_eq!(assemble(ip, &corpus), assemble(ip, &reversed));
    }

    #[test]
    fn matrix_export_has_named_header_and_label() {
        let corpus = test_corpus();
        let vec = assemble("1.2.3.4".parse().unwrap(), &corpus);
        let dict = CategoryDictionary::build([&vec]);
        let config = FeatureConfig::default();
        let csv = export_matrix_csv(&[(vec, Some("US".to_string()))], &dict, &config);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("ip_code,ip_prefix_code,ip2location_country"));
        assert!(header.ends_with("isp_cone_size,label"));
        assert!(lines.next().unwrap().ends_with(",US"));
    }
}
