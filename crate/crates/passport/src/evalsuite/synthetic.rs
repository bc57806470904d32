//! Synthetic-world generator for desk-scale experiments.
//!
//! Countries tile a lat/lon band as rectangular cells. Router counts per
//! country follow a Zipf law to mimic the heavy skew of real training
//! corpora. Geolocation sources err systematically: a source that is wrong
//! about an AS is wrong the same way for every router in it. Measurement
//! coverage (how many vantage points have an RTT to each router) is drawn
//! from a configurable distribution.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    AliasTable, AsDataSnapshot, AsRecord, BoundarySet, Corpus, CountryBoundary, CountryCode,
    GeoSourceSnapshot, GroundTruthLabel, LabelOrigin, LocatedEndpoint, Measurement,
    MeasurementOrigin, MeasurementSet, RouterIp, TraceroutePath, GEO_SOURCES,
};
use crate::corpus::traceroute::{Hop, PathDirection};
use crate::geo::{great_circle_km, LatLon};
use crate::sol::{PROPAGATION_FACTOR, SPEED_OF_LIGHT_KM_S};

/// Per-source behavior: how much of the router population the source
/// covers and what fraction of ASes it mislabels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    pub coverage: f64,
    pub as_error_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub cell_height_deg: f64,
    pub cell_width_deg: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub routers: usize,
    pub zipf_exponent: f64,
    pub min_routers_per_country: usize,
    pub ases_per_country: usize,
    /// Keep routers at least this far inside their country's border, km.
    pub router_margin_km: f64,
    /// When set, cluster routers within this distance of the country's
    /// vantage point instead of spreading them over the cell.
    pub router_cluster_km: Option<f64>,
    /// How far vantage points wander from their cell center, degrees.
    pub vp_jitter_deg: f64,
    /// Systematic error targets land at least this far from the true
    /// country's center (0 draws uniformly). Mirrors how real sources sink
    /// mislabels to distant default countries.
    pub error_min_separation_km: f64,
    /// (no caps, one cap, two-plus caps) probabilities.
    pub cap_coverage: (f64, f64, f64),
    pub max_caps: usize,
    /// RTTs inflate true propagation time by up to this factor.
    pub rtt_stretch_max: f64,
    /// Fraction of routers carrying a ground-truth label.
    pub label_fraction: f64,
    /// Fraction of routers given a second, aliased address.
    pub alias_fraction: f64,
    pub source_models: BTreeMap<&'static str, SourceModel>,
    pub whois_as_error_rate: f64,
    pub whois_isp_error_rate: f64,
}

impl WorldConfig {
    /// The default experiment world: 30 countries, Zipf-skewed routers,
    /// systematically erring sources, and two-plus caps for 63% of
    /// routers.
    pub fn default_world(seed: u64) -> Self {
        let mut source_models = BTreeMap::new();
        source_models.insert(GEO_SOURCES[0], SourceModel { coverage: 0.95, as_error_rate: 0.10 });
        source_models.insert(GEO_SOURCES[1], SourceModel { coverage: 0.08, as_error_rate: 0.05 });
        source_models.insert(GEO_SOURCES[2], SourceModel { coverage: 0.90, as_error_rate: 0.25 });
        source_models.insert(GEO_SOURCES[3], SourceModel { coverage: 0.92, as_error_rate: 0.22 });
        source_models.insert(GEO_SOURCES[4], SourceModel { coverage: 0.88, as_error_rate: 0.24 });
        source_models.insert(GEO_SOURCES[5], SourceModel { coverage: 0.90, as_error_rate: 0.20 });
        WorldConfig {
            seed,
            grid_rows: 5,
            grid_cols: 6,
            cell_height_deg: 8.0,
            cell_width_deg: 8.0,
            origin_lat: -20.0,
            origin_lon: 0.0,
            routers: 600,
            zipf_exponent: 1.7,
            min_routers_per_country: 3,
            ases_per_country: 3,
            router_margin_km: 60.0,
            router_cluster_km: None,
            vp_jitter_deg: 0.5,
            error_min_separation_km: 0.0,
            cap_coverage: (0.22, 0.15, 0.63),
            max_caps: 4,
            rtt_stretch_max: 1.06,
            label_fraction: 0.65,
            alias_fraction: 0.04,
            source_models,
            whois_as_error_rate: 0.30,
            whois_isp_error_rate: 0.28,
        }
    }

    /// World for the vantage-point selection study: every country hosts a
    /// VP at its center, routers cluster near it and sit deep inside their
    /// country, and RTTs carry no stretch, so a single good cap pins the
    /// country.
    pub fn vp_study_world(seed: u64) -> Self {
        let mut config = WorldConfig::default_world(seed);
        config.grid_rows = 3;
        config.grid_cols = 4;
        // cells sized so even corner-to-corner RTTs stay under the cutoff
        // and every vantage point contributes a cap
        config.cell_height_deg = 12.0;
        config.cell_width_deg = 12.0;
        config.origin_lat = -18.0;
        config.origin_lon = 0.0;
        config.routers = 360;
        config.zipf_exponent = 0.0; // uniform
        config.min_routers_per_country = 8;
        // sources err less than in the default world, mirroring the
        // precision the production corpus had in the selection study
        for model in config.source_models.values_mut() {
            model.as_error_rate = (model.as_error_rate * 0.4).min(0.08);
        }
        config.whois_as_error_rate = 0.10;
        config.whois_isp_error_rate = 0.10;
        config.error_min_separation_km = 3_500.0;
        config.router_cluster_km = Some(150.0);
        config.router_margin_km = 600.0;
        config.vp_jitter_deg = 1.5;
        config.cap_coverage = (0.0, 0.0, 1.0);
        config.rtt_stretch_max = 1.0;
        config.label_fraction = 0.95;
        config.alias_fraction = 0.0;
        config
    }

    /// High-redundancy corpus for poisoning: broad coverage, low error
    /// rates, and large per-AS cohorts, so multiple independent features
    /// and many cohort peers agree on the true country.
    pub fn redundant_world(seed: u64) -> Self {
        let mut config = WorldConfig::default_world(seed);
        config.grid_rows = 4;
        config.grid_cols = 5;
        config.routers = 1_500;
        config.zipf_exponent = 0.0;
        config.min_routers_per_country = 40;
        config.ases_per_country = 1;
        for (name, model) in config.source_models.iter_mut() {
            if *name == GEO_SOURCES[1] {
                model.coverage = 0.5;
            } else {
                model.coverage = 0.97;
            }
            model.as_error_rate = 0.04;
        }
        config.whois_as_error_rate = 0.08;
        config.whois_isp_error_rate = 0.08;
        config.label_fraction = 1.0;
        config
    }

    pub fn country_count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    pub corpus: Corpus,
    /// True location of every router.
    pub truth: BTreeMap<RouterIp, CountryCode>,
    pub positions: BTreeMap<RouterIp, LatLon>,
    pub routers: Vec<RouterIp>,
    /// One vantage point per country, at the (jittered) cell center.
    pub vps: Vec<LocatedEndpoint>,
    pub vp_countries: BTreeMap<RouterIp, CountryCode>,
}

/// Country code for cell index: "AA", "AB", ... stable across runs.
pub fn country_code(index: usize) -> CountryCode {
    let first = b'A' + (index / 26) as u8;
    let second = b'A' + (index % 26) as u8;
    CountryCode::parse(std::str::from_utf8(&[first, second]).unwrap()).unwrap()
}

/// True RTT for a distance at 0.47c, milliseconds, inflated by `stretch`.
pub fn rtt_for_distance_km(distance_km: f64, stretch: f64) -> f64 {
    2.0 * distance_km * stretch / (PROPAGATION_FACTOR * SPEED_OF_LIGHT_KM_S) * 1_000.0
}

pub fn generate(config: &WorldConfig) -> SyntheticWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // codes are assigned to cells in shuffled order: real country codes
    // carry no geographic ordering, and the integer-coded categorical
    // features must not either
    let mut countries: Vec<CountryCode> =
        (0..config.country_count()).map(country_code).collect();
    countries.shuffle(&mut rng);

    // cell geometry
    let mut boundaries = Vec::new();
    let mut cell_center: BTreeMap<CountryCode, LatLon> = BTreeMap::new();
    let mut continents: BTreeMap<CountryCode, String> = BTreeMap::new();
    for (i, &country) in countries.iter().enumerate() {
        let row = i / config.grid_cols;
        let col = i % config.grid_cols;
        let lat0 = config.origin_lat + row as f64 * config.cell_height_deg;
        let lon0 = config.origin_lon + col as f64 * config.cell_width_deg;
        let lat1 = lat0 + config.cell_height_deg;
        let lon1 = lon0 + config.cell_width_deg;
        let ring = vec![
            LatLon::new(lat0, lon0),
            LatLon::new(lat0, lon1),
            LatLon::new(lat1, lon1),
            LatLon::new(lat1, lon0),
            LatLon::new(lat0, lon0),
        ];
        boundaries.push(CountryBoundary::new(country, vec![ring], 50.0).unwrap());
        cell_center.insert(
            country,
            LatLon::new((lat0 + lat1) / 2.0, (lon0 + lon1) / 2.0),
        );
        continents.insert(country, format!("continent-{row}"));
    }
    let boundary_set = BoundarySet::from_boundaries(boundaries).unwrap();

    // Zipf router allocation over a shuffled country order
    let mut zipf_order = countries.clone();
    zipf_order.shuffle(&mut rng);
    let weights: Vec<f64> = (1..=zipf_order.len())
        .map(|k| 1.0 / (k as f64).powf(config.zipf_exponent))
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    let mut counts: BTreeMap<CountryCode, usize> = BTreeMap::new();
    let mut allocated = 0usize;
    for (country, w) in zipf_order.iter().zip(&weights) {
        let n = ((w / weight_sum) * config.routers as f64).round() as usize;
        let n = n.max(config.min_routers_per_country);
        counts.insert(*country, n);
        allocated += n;
    }
    // trim overshoot from the largest country
    if allocated > config.routers {
        let largest = *counts
            .iter()
            .max_by_key(|(_, &n)| n)
            .map(|(c, _)| c)
            .unwrap();
        let excess = allocated - config.routers;
        let entry = counts.get_mut(&largest).unwrap();
        *entry = entry.saturating_sub(excess).max(config.min_routers_per_country);
    }

    // vantage points: one per country at the jittered center
    let mut vps = Vec::new();
    let mut vp_countries = BTreeMap::new();
    for (k, &country) in countries.iter().enumerate() {
        let center = cell_center[&country];
        let jitter = config.vp_jitter_deg.max(1e-6);
        let location = LatLon::new(
            center.lat + rng.gen_range(-jitter..jitter),
            center.lon + rng.gen_range(-jitter..jitter),
        );
        let ip: RouterIp = format!("21.0.{k}.1").parse().unwrap();
        vps.push(LocatedEndpoint { ip, location });
        vp_countries.insert(ip, country);
    }

    // ASes: global list, per country
    struct AsInfo {
        index: usize,
        country: CountryCode,
    }
    let mut ases: Vec<AsInfo> = Vec::new();
    let mut country_ases: BTreeMap<CountryCode, Vec<usize>> = BTreeMap::new();
    for &country in &countries {
        for _ in 0..config.ases_per_country {
            let index = ases.len();
            ases.push(AsInfo { index, country });
            country_ases.entry(country).or_default().push(index);
        }
    }
    // address blocks are handed out in shuffled order so that numeric IP
    // ranges do not trace the country layout
    let mut as_block: Vec<usize> = (0..ases.len()).collect();
    as_block.shuffle(&mut rng);

    // systematic per-(source, AS) errors
    let wrong_country = |rng: &mut ChaCha8Rng, truth: CountryCode| -> CountryCode {
        for attempt in 0..64 {
            let candidate = countries[rng.gen_range(0..countries.len())];
            if candidate == truth {
                continue;
            }
            let far_enough = attempt >= 48
                || great_circle_km(cell_center[&truth], cell_center[&candidate])
                    >= config.error_min_separation_km;
            if far_enough {
                return candidate;
            }
        }
        countries[(countries.iter().position(|&c| c == truth).unwrap() + 1) % countries.len()]
    };
    let mut source_as_report: BTreeMap<(&'static str, usize), Option<CountryCode>> =
        BTreeMap::new();
    for (&source, model) in &config.source_models {
        for info in &ases {
            let report = if rng.gen_bool(model.as_error_rate) {
                Some(wrong_country(&mut rng, info.country))
            } else {
                None // correct
            };
            source_as_report.insert((source, info.index), report);
        }
    }
    let mut whois_as_report: BTreeMap<usize, Option<CountryCode>> = BTreeMap::new();
    let mut whois_isp_report: BTreeMap<usize, Option<CountryCode>> = BTreeMap::new();
    for info in &ases {
        whois_as_report.insert(
            info.index,
            rng.gen_bool(config.whois_as_error_rate)
                .then(|| wrong_country(&mut rng, info.country)),
        );
        whois_isp_report.insert(
            info.index,
            rng.gen_bool(config.whois_isp_error_rate)
                .then(|| wrong_country(&mut rng, info.country)),
        );
    }

    // routers: positions, addresses, AS membership
    let margin_deg = config.router_margin_km / 111.0;
    let mut routers: Vec<RouterIp> = Vec::new();
    let mut truth: BTreeMap<RouterIp, CountryCode> = BTreeMap::new();
    let mut positions: BTreeMap<RouterIp, LatLon> = BTreeMap::new();
    let mut router_as: BTreeMap<RouterIp, usize> = BTreeMap::new();
    let mut as_router_seq: BTreeMap<usize, u32> = BTreeMap::new();

    let vp_location: BTreeMap<CountryCode, LatLon> = vps
        .iter()
        .map(|vp| (vp_countries[&vp.ip], vp.location))
        .collect();
    for &country in &countries {
        let n = counts[&country];
        let center = cell_center[&country];
        let half_h = config.cell_height_deg / 2.0;
        let half_w = config.cell_width_deg / 2.0;
        for _ in 0..n {
            let position = match config.router_cluster_km {
                Some(radius_km) => {
                    let anchor = vp_location[&country];
                    let r_deg = radius_km / 111.0;
                    // annulus between 20% and 100% of the cluster radius
                    let rho = r_deg * rng.gen_range(0.2..1.0f64);
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    LatLon::new(anchor.lat + rho * theta.sin(), anchor.lon + rho * theta.cos())
                }
                None => LatLon::new(
                    center.lat + rng.gen_range(-(half_h - margin_deg)..(half_h - margin_deg)),
                    center.lon + rng.gen_range(-(half_w - margin_deg)..(half_w - margin_deg)),
                ),
            };
            let as_choices = &country_ases[&country];
            let as_index = as_choices[rng.gen_range(0..as_choices.len())];
            let seq = as_router_seq.entry(as_index).or_insert(0);
            let ip: RouterIp = format!(
                "20.{}.{}.{}",
                as_block[as_index],
                *seq / 250,
                *seq % 250 + 1
            )
            .parse()
            .unwrap();
            *seq += 1;

            routers.push(ip);
            truth.insert(ip, country);
            positions.insert(ip, position);
            router_as.insert(ip, as_index);
        }
    }

    // snapshots
    let mut snapshots: BTreeMap<String, GeoSourceSnapshot> = BTreeMap::new();
    for (&source, model) in &config.source_models {
        let mut snap = GeoSourceSnapshot::new(source);
        for &ip in &routers {
            if !rng.gen_bool(model.coverage) {
                continue;
            }
            let as_index = router_as[&ip];
            let reported = match source_as_report[&(source, as_index)] {
                Some(wrong) => wrong,
                None => truth[&ip],
            };
            snap.insert(ip, Some(reported)).unwrap();
        }
        snapshots.insert(source.to_string(), snap);
    }

    // AS / ISP registry data
    let mut as_data = AsDataSnapshot::default();
    for &ip in &routers {
        let as_index = router_as[&ip];
        let info = &ases[as_index];
        let as_country = whois_as_report[&as_index].unwrap_or(info.country);
        let isp_country = whois_isp_report[&as_index].unwrap_or(info.country);
        let block_routers = as_router_seq[&as_index] as u64;
        let record = AsRecord {
            prefix: Some(RouterIp::from_numeric(ip.numeric_code() & 0xFFFF_0000)),
            as_number: Some(format!("AS{}", 64_500 + as_index)),
            as_name: Some(format!("net-{as_index}")),
            as_registry: Some(format!("reg-{}", continents[&info.country])),
            as_country: Some(as_country),
            isp_name: Some(format!("isp-{as_index}")),
            isp_city: Some(format!("city-{as_index}")),
            isp_region: Some(format!("region-{as_index}")),
            isp_country: Some(isp_country),
            isp_num_ases: Some(1 + (as_index % 3) as u32),
            cone_ips: Some(block_routers * 137),
            cone_prefixes: Some(block_routers),
        };
        as_data.insert(ip, record).unwrap();
    }

    // aliases: a second address for a fraction of routers
    let mut aliases = AliasTable::new();
    let mut alias_of: BTreeMap<RouterIp, RouterIp> = BTreeMap::new();
    for (i, &ip) in routers.iter().enumerate() {
        if config.alias_fraction > 0.0 && rng.gen_bool(config.alias_fraction) {
            let alias: RouterIp = format!("22.0.{}.{}", i / 250, i % 250 + 1).parse().unwrap();
            aliases.add_pair(ip, alias);
            alias_of.insert(ip, alias);
        }
    }

    // measurements: nearest-VP RTTs per the cap-coverage distribution
    let mut measurements = MeasurementSet::new();
    for &ip in &routers {
        let position = positions[&ip];
        let (p0, p1, _) = config.cap_coverage;
        let roll: f64 = rng.gen();
        let n_caps = if roll < p0 {
            0
        } else if roll < p0 + p1 {
            1
        } else {
            2 + rng.gen_range(0..config.max_caps.saturating_sub(1).max(1))
        };
        if n_caps == 0 {
            continue;
        }
        let mut by_distance: Vec<(f64, &LocatedEndpoint)> = vps
            .iter()
            .map(|vp| (great_circle_km(vp.location, position), vp))
            .collect();
        by_distance.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (distance, vp) in by_distance.into_iter().take(n_caps) {
            let stretch = if config.rtt_stretch_max > 1.0 {
                rng.gen_range(1.0..config.rtt_stretch_max)
            } else {
                1.0
            };
            let rtt = rtt_for_distance_km(distance.max(1.0), stretch);
            // half the alias pairs are measured via their alias address
            let target = match alias_of.get(&ip) {
                Some(&alias) if rng.gen_bool(0.5) => alias,
                _ => ip,
            };
            measurements.insert(Measurement {
                source: *vp,
                target,
                min_rtt_ms: rtt,
                origin: MeasurementOrigin::Direct,
            });
        }
    }

    // ground truth labels
    let mut ground_truth = Vec::new();
    let mut labeled_countries: BTreeMap<CountryCode, bool> = BTreeMap::new();
    for &ip in &routers {
        let country = truth[&ip];
        let anchor = !labeled_countries.get(&country).copied().unwrap_or(false);
        if anchor || rng.gen_bool(config.label_fraction) {
            let origin = if anchor {
                LabelOrigin::Ixp
            } else {
                let roll: f64 = rng.gen();
                if roll < 0.70 {
                    LabelOrigin::Manual
                } else if roll < 0.75 {
                    LabelOrigin::Ixp
                } else {
                    LabelOrigin::Crowdsourced
                }
            };
            ground_truth.push(GroundTruthLabel {
                ip,
                country,
                origin,
                confidence_note: None,
            });
            labeled_countries.insert(country, true);
        }
    }

    let corpus = Corpus {
        snapshots,
        as_data,
        ground_truth,
        aliases,
        boundaries: boundary_set,
        measurements,
        continents,
    };

    SyntheticWorld {
        config: config.clone(),
        corpus,
        truth,
        positions,
        routers,
        vps,
        vp_countries,
    }
}

impl SyntheticWorld {
    /// Exact (unstretched) RTT from every vantage point to a router.
    pub fn vantage_rtts(&self, router: RouterIp) -> Vec<crate::sol::VantagePoint> {
        let position = self.positions[&router];
        self.vps
            .iter()
            .map(|vp| crate::sol::VantagePoint {
                endpoint: *vp,
                rtt_ms: rtt_for_distance_km(
                    great_circle_km(vp.location, position).max(1.0),
                    1.0,
                ),
            })
            .collect()
    }

    /// Fraction of routers with at least two valid caps.
    pub fn two_plus_cap_fraction(&self) -> f64 {
        let with_two = self
            .routers
            .iter()
            .filter(|&&ip| {
                crate::sol::collect_caps(ip, &self.corpus.measurements, &self.corpus.aliases).len()
                    >= 2
            })
            .count();
        with_two as f64 / self.routers.len() as f64
    }

    /// Synthetic traceroute paths through the world: source at a vantage
    /// point, hops drawn from the source, optional detour, and destination
    /// countries with monotone RTTs.
    pub fn gen_paths(&self, count: usize, seed: u64) -> Vec<TraceroutePath> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_country: BTreeMap<CountryCode, Vec<RouterIp>> = BTreeMap::new();
        for (&ip, &c) in &self.truth {
            by_country.entry(c).or_default().push(ip);
        }
        let countries: Vec<CountryCode> = by_country.keys().copied().collect();

        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let vp = &self.vps[rng.gen_range(0..self.vps.len())];
            let src_country = self.vp_countries[&vp.ip];
            let dst_country = countries[rng.gen_range(0..countries.len())];
            let mut hop_countries = vec![src_country];
            if rng.gen_bool(0.4) {
                hop_countries.push(countries[rng.gen_range(0..countries.len())]);
            }
            hop_countries.push(dst_country);

            let mut hops = Vec::new();
            for (index, &hc) in (1..).zip(hop_countries.iter()) {
                let pool = &by_country[&hc];
                let ip = pool[rng.gen_range(0..pool.len())];
                let distance = great_circle_km(vp.location, self.positions[&ip]);
                let rtt = rtt_for_distance_km(distance.max(1.0), rng.gen_range(1.0..1.08));
                hops.push(Hop {
                    ip,
                    min_rtt_ms: rtt,
                    hop_index: index,
                });
            }
            out.push(TraceroutePath {
                source: Some(crate::corpus::SourceEndpoint {
                    ip: vp.ip,
                    location: vp.location,
                    country: Some(src_country),
                }),
                destination: hops.last().map(|h| h.ip),
                hops,
                gaps: Vec::new(),
                direction: PathDirection::Forward,
                timestamp: None,
            });
        }
        out
    }
}

/// Write a world to disk as loadable corpus files plus a ready-to-use
/// `config.toml` and a demo traceroute.
pub fn write_corpus_files(world: &SyntheticWorld, dir: &std::path::Path) -> crate::error::Result<()> {
    use crate::error::Error;
    let write = |path: &std::path::Path, text: &str| -> crate::error::Result<()> {
        std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    };

    let snapshots_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snapshots_dir)
        .map_err(|e| Error::io(format!("creating {}", snapshots_dir.display()), e))?;

    for (name, snap) in &world.corpus.snapshots {
        let mut text = String::from("ip,country\n");
        for (ip, country) in snap.entries() {
            match country {
                Some(c) => text.push_str(&format!("{ip},{c}\n")),
                None => text.push_str(&format!("{ip},\n")),
            }
        }
        write(&snapshots_dir.join(format!("{name}.csv")), &text)?;
    }

    let mut asdata = format!("{}\n", crate::corpus::asdata::header());
    for ip in world.corpus.as_data.ips() {
        let r = world.corpus.as_data.get(ip).unwrap();
        let opt = |v: &Option<String>| v.clone().unwrap_or_default();
        let optc = |v: &Option<CountryCode>| v.map(|c| c.to_string()).unwrap_or_default();
        let optn = |v: Option<u64>| v.map(|n| n.to_string()).unwrap_or_default();
        asdata.push_str(&format!(
            "{ip},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.prefix.map(|p| p.to_string()).unwrap_or_default(),
            opt(&r.as_number),
            opt(&r.as_name),
            opt(&r.as_registry),
            optc(&r.as_country),
            opt(&r.isp_name),
            opt(&r.isp_city),
            opt(&r.isp_region),
            optc(&r.isp_country),
            r.isp_num_ases.map(|n| n.to_string()).unwrap_or_default(),
            optn(r.cone_ips),
            optn(r.cone_prefixes),
        ));
    }
    write(&dir.join("asdata.csv"), &asdata)?;

    let mut labels = String::from("ip,country,origin\n");
    for l in &world.corpus.ground_truth {
        labels.push_str(&format!("{},{},{}\n", l.ip, l.country, l.origin.as_str()));
    }
    write(&dir.join("ground_truth.csv"), &labels)?;

    let mut aliases = String::new();
    for set in world.corpus.aliases.sets() {
        let line: Vec<String> = set.iter().map(|ip| ip.to_string()).collect();
        aliases.push_str(&line.join(" "));
        aliases.push('\n');
    }
    write(&dir.join("aliases.txt"), &aliases)?;

    let mut measurements = format!("{}\n", crate::corpus::measurement::header());
    for m in world.corpus.measurements.iter() {
        measurements.push_str(&format!(
            "{},{},{},{},{}\n",
            m.source.ip, m.source.location.lat, m.source.location.lon, m.target, m.min_rtt_ms
        ));
    }
    write(&dir.join("measurements.csv"), &measurements)?;

    let mut continents = String::from("country,continent\n");
    for (country, continent) in &world.corpus.continents {
        continents.push_str(&format!("{country},{continent}\n"));
    }
    write(&dir.join("continents.csv"), &continents)?;

    // GeoJSON boundaries
    let features: Vec<serde_json::Value> = world
        .corpus
        .boundaries
        .iter()
        .map(|b| {
            let rings: Vec<Vec<[f64; 2]>> = b
                .rings
                .iter()
                .map(|ring| ring.iter().map(|p| [p.lon, p.lat]).collect())
                .collect();
            serde_json::json!({
                "type": "Feature",
                "properties": { "iso_a2": b.country.as_str() },
                "geometry": { "type": "Polygon", "coordinates": rings },
            })
        })
        .collect();
    let collection = serde_json::json!({
        "type": "FeatureCollection",
        "features": features,
    });
    write(
        &dir.join("boundaries.geojson"),
        &serde_json::to_string_pretty(&collection).expect("geojson"),
    )?;

    // reference truth for evaluation against the generator
    let mut truth = String::from("ip,country\n");
    for (ip, country) in &world.truth {
        truth.push_str(&format!("{ip},{country}\n"));
    }
    write(&dir.join("truth.csv"), &truth)?;

    // a demo traceroute through the world
    if let Some(path) = world.gen_paths(1, world.config.seed ^ 0xDEC0).into_iter().next() {
        write(
            &dir.join("demo_trace.txt"),
            &crate::corpus::traceroute::format_traceroute(&path),
        )?;
    }

    let config = format!(
        r#"seed = {seed}

[corpus]
snapshot_dir = "snapshots"
as_data = "asdata.csv"
ground_truth = "ground_truth.csv"
aliases = "aliases.txt"
boundaries = "boundaries.geojson"
measurements = "measurements.csv"
continents = "continents.csv"
"#,
        seed = world.config.seed
    );
    write(&dir.join("config.toml"), &config)?;
    Ok(())
}
