//! Desk-scale reproduction of the experiment battery: per-country accuracy
//! CDFs, precision histograms, label poisoning, consistency comparison,
//! vantage-point selection, and detour detection.

pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CountryCode, GeoSourceSnapshot, RouterIp, TraceroutePath};
use crate::dtree::{DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::pipeline::{Model, StagePrediction};
use crate::sol::{self, FeasibleRegion, VpMode};

pub use synthetic::{generate, SyntheticWorld, WorldConfig};

// --- per-country accuracy --------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCountryAccuracy {
    pub per_country: BTreeMap<CountryCode, f64>,
    /// Singleton predictions scored.
    pub counted: usize,
    /// Multi-country or empty predictions left out of the tally.
    pub excluded: usize,
}

impl PerCountryAccuracy {
    /// Sorted (accuracy, cumulative fraction of countries) pairs for
    /// plotting.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        let mut accs: Vec<f64> = self.per_country.values().copied().collect();
        accs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = accs.len() as f64;
        accs.iter()
            .enumerate()
            .map(|(i, &a)| (a, (i + 1) as f64 / n))
            .collect()
    }

    pub fn mean(&self) -> f64 {
        if self.per_country.is_empty() {
            return 0.0;
        }
        self.per_country.values().sum::<f64>() / self.per_country.len() as f64
    }
}

/// Fraction of each country's routers predicted correctly, over singleton
/// predictions. Multi-country predictions are excluded from numerator and
/// denominator; `count_multi_as_wrong` switches to the stricter tally.
pub fn per_country_accuracy(
    predictions: &BTreeMap<RouterIp, BTreeSet<CountryCode>>,
    truth: &BTreeMap<RouterIp, CountryCode>,
    count_multi_as_wrong: bool,
) -> PerCountryAccuracy {
    let mut totals: BTreeMap<CountryCode, (usize, usize)> = BTreeMap::new();
    let mut counted = 0usize;
    let mut excluded = 0usize;
    for (ip, &true_country) in truth {
        let Some(set) = predictions.get(ip) else {
            continue;
        };
        if set.len() != 1 {
            if count_multi_as_wrong {
                totals.entry(true_country).or_insert((0, 0)).1 += 1;
                counted += 1;
            } else {
                excluded += 1;
            }
            continue;
        }
        let entry = totals.entry(true_country).or_insert((0, 0));
        entry.1 += 1;
        counted += 1;
        if set.contains(&true_country) {
            entry.0 += 1;
        }
    }
    PerCountryAccuracy {
        per_country: totals
            .into_iter()
            .map(|(c, (correct, total))| (c, correct as f64 / total as f64))
            .collect(),
        counted,
        excluded,
    }
}

// --- precision histogram ----------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionHistogram {
    /// set size -> fraction of IPs
    pub buckets: BTreeMap<usize, f64>,
    pub total: usize,
}

impl PrecisionHistogram {
    pub fn fraction_with(&self, n: usize) -> f64 {
        self.buckets.get(&n).copied().unwrap_or(0.0)
    }

    pub fn fraction_at_most(&self, n: usize) -> f64 {
        self.buckets
            .iter()
            .filter(|(&size, _)| size <= n)
            .map(|(_, &f)| f)
            .sum()
    }

    pub fn sum(&self) -> f64 {
        self.buckets.values().sum()
    }
}

/// Bucket IPs by prediction-set size.
pub fn precision_histogram<I: IntoIterator<Item = usize>>(sizes: I) -> PrecisionHistogram {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for size in sizes {
        *counts.entry(size).or_default() += 1;
        total += 1;
    }
    PrecisionHistogram {
        buckets: counts
            .into_iter()
            .map(|(size, count)| (size, count as f64 / total.max(1) as f64))
            .collect(),
        total,
    }
}

/// Collapse country sets to continent sets through the mapping table.
pub fn continent_sets(
    sets: &BTreeMap<RouterIp, BTreeSet<CountryCode>>,
    continents: &BTreeMap<CountryCode, String>,
) -> BTreeMap<RouterIp, BTreeSet<String>> {
    sets.iter()
        .map(|(ip, set)| {
            let mapped: BTreeSet<String> = set
                .iter()
                .filter_map(|c| continents.get(c).cloned())
                .collect();
            (*ip, mapped)
        })
        .collect()
}

// --- poisoning ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonBreakdown {
    pub poison_fraction: f64,
    /// Predicted the true country.
    pub correct: f64,
    /// Row was poisoned and the classifier echoed the poisoned label.
    pub predicted_poisoned: f64,
    /// Wrong, but neither the truth nor the planted label.
    pub other_wrong: f64,
    /// No country could be assigned.
    pub unknown: f64,
}

impl PoisonBreakdown {
    pub fn sum(&self) -> f64 {
        self.correct + self.predicted_poisoned + self.other_wrong + self.unknown
    }
}

/// Tree parameters for the poisoning experiment. A fully-grown tree
/// memorizes every poisoned row as its own address-interval leaf, and
/// those leaves tile exactly the poisoned fraction of address space — the
/// cross-validated cost is then always ~p regardless of feature
/// redundancy. Requiring 20 samples per split keeps cohort majorities in
/// charge, which is what label-noise resilience means for a tree.
pub fn poison_params() -> TreeParams {
    TreeParams {
        max_depth: None,
        min_samples_split: 20,
    }
}

/// Replace a fraction of training labels with uniformly random wrong
/// countries, then measure 10-fold cross-validated outcomes against the
/// true labels.
pub fn poison_experiment(
    rows: &[Vec<f64>],
    codes: &[u32],
    poison_fraction: f64,
    seed: u64,
    params: &TreeParams,
) -> Result<PoisonBreakdown> {
    if !(0.0..1.0).contains(&poison_fraction) {
        return Err(Error::Invalid(format!(
            "poison fraction {poison_fraction} outside [0, 1)"
        )));
    }
    let n = rows.len();
    if n < 10 {
        return Err(Error::TooFewSamples { need: 10, got: n });
    }
    let classes: Vec<u32> = {
        let mut c: Vec<u32> = codes.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    if classes.len() < 2 {
        return Err(Error::Invalid("poisoning needs at least 2 classes".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poisoned_labels: Vec<u32> = codes.to_vec();
    let mut poisoned_as: Vec<Option<u32>> = vec![None; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let poison_count = (poison_fraction * n as f64).round() as usize;
    for &i in order.iter().take(poison_count) {
        let wrong = loop {
            let candidate = classes[rng.gen_range(0..classes.len())];
            if candidate != codes[i] {
                break candidate;
            }
        };
        poisoned_labels[i] = wrong;
        poisoned_as[i] = Some(wrong);
    }

    // 10-fold CV with training on poisoned labels, scoring against truth
    let k = 10;
    let mut fold_order: Vec<usize> = (0..n).collect();
    fold_order.shuffle(&mut rng);
    let mut correct = 0usize;
    let mut echoed = 0usize;
    let mut other = 0usize;
    let mut unknown = 0usize;
    for fold in 0..k {
        let test: Vec<usize> = fold_order.iter().copied().skip(fold).step_by(k).collect();
        let in_test: std::collections::HashSet<usize> = test.iter().copied().collect();
        let train_rows: Vec<Vec<f64>> = fold_order
            .iter()
            .filter(|i| !in_test.contains(i))
            .map(|&i| rows[i].clone())
            .collect();
        let train_labels: Vec<u32> = fold_order
            .iter()
            .filter(|i| !in_test.contains(i))
            .map(|&i| poisoned_labels[i])
            .collect();
        let tree = DecisionTree::fit(&train_rows, &train_labels, params)?;
        for &i in &test {
            match tree.predict(&rows[i]) {
                Ok(predicted) if predicted == codes[i] => correct += 1,
                Ok(predicted) if poisoned_as[i] == Some(predicted) => echoed += 1,
                Ok(_) => other += 1,
                Err(_) => unknown += 1,
            }
        }
    }

    let nf = n as f64;
    Ok(PoisonBreakdown {
        poison_fraction,
        correct: correct as f64 / nf,
        predicted_poisoned: echoed as f64 / nf,
        other_wrong: other as f64 / nf,
        unknown: unknown as f64 / nf,
    })
}

// --- consistency comparison ---------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub source_name: String,
    /// IPs with a singleton final prediction and an external country.
    pub compared_ips: usize,
    pub sol_violation_pct: f64,
    pub inconsistent_pct: f64,
    pub affected_path_pct: f64,
}

/// Compare an external snapshot against singleton final predictions:
/// inconsistencies, speed-of-light violations among them, and the fraction
/// of paths touching an inconsistent IP.
pub fn consistency_compare(
    passport_final: &BTreeMap<RouterIp, BTreeSet<CountryCode>>,
    external: &GeoSourceSnapshot,
    regions: &BTreeMap<RouterIp, FeasibleRegion>,
    paths: &[TraceroutePath],
) -> ConsistencyReport {
    let mut compared = 0usize;
    let mut inconsistent_ips: BTreeSet<RouterIp> = BTreeSet::new();
    let mut violations = 0usize;

    for (ip, set) in passport_final {
        if set.len() != 1 {
            continue;
        }
        let ours = *set.iter().next().unwrap();
        let Some(theirs) = external.lookup(*ip).country() else {
            continue;
        };
        compared += 1;
        if theirs != ours {
            inconsistent_ips.insert(*ip);
        }
        if let Some(region) = regions.get(ip) {
            if let Some(feasible) = &region.feasible_countries {
                if !feasible.contains(&theirs) {
                    violations += 1;
                    debug_assert!(theirs != ours, "violation must imply inconsistency");
                }
            }
        }
    }

    let affected = paths
        .iter()
        .filter(|p| p.hops.iter().any(|h| inconsistent_ips.contains(&h.ip)))
        .count();

    let pct = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    ConsistencyReport {
        source_name: external.source_name.clone(),
        compared_ips: compared,
        sol_violation_pct: pct(violations, compared),
        inconsistent_pct: pct(inconsistent_ips.len(), compared),
        affected_path_pct: pct(affected, paths.len()),
    }
}

// --- detour detection -----------------------------------------------------------

/// A path whose hops all carry singleton country resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPath {
    pub id: String,
    pub src_country: CountryCode,
    pub dst_country: CountryCode,
    pub hops: Vec<(RouterIp, CountryCode)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetourRecord {
    pub path_id: String,
    pub source_country: CountryCode,
    pub dest_country: CountryCode,
    /// On-path countries that are neither the source nor the destination.
    pub detour_countries: BTreeSet<CountryCode>,
    /// Source and destination coincide.
    pub domestic: bool,
}

/// Resolve a traceroute into a labeled path using per-IP predictions; any
/// hop without a singleton prediction skips the path.
pub fn label_path(
    path: &TraceroutePath,
    predictions: &BTreeMap<RouterIp, StagePrediction>,
    id: impl Into<String>,
) -> Result<LabeledPath> {
    let src_country = path
        .source
        .and_then(|s| s.country)
        .ok_or_else(|| Error::UnparseablePath("path source has no country".into()))?;
    let mut hops = Vec::with_capacity(path.hops.len());
    for hop in &path.hops {
        let country = predictions
            .get(&hop.ip)
            .and_then(|p| p.final_singleton())
            .ok_or(Error::SkippedPath {
                hop: hop.hop_index,
            })?;
        hops.push((hop.ip, country));
    }
    let dst_country = hops
        .last()
        .map(|(_, c)| *c)
        .ok_or(Error::EmptyPath)?;
    Ok(LabeledPath {
        id: id.into(),
        src_country,
        dst_country,
        hops,
    })
}

/// Detour record for one labeled path, when it has any detour countries.
pub fn detect_detour(path: &LabeledPath) -> Option<DetourRecord> {
    let endpoints = [path.src_country, path.dst_country];
    let detour_countries: BTreeSet<CountryCode> = path
        .hops
        .iter()
        .map(|(_, c)| *c)
        .filter(|c| !endpoints.contains(c))
        .collect();
    if detour_countries.is_empty() {
        return None;
    }
    Some(DetourRecord {
        path_id: path.id.clone(),
        source_country: path.src_country,
        dest_country: path.dst_country,
        detour_countries,
        domestic: path.src_country == path.dst_country,
    })
}

/// Detour records for every labeled path that has one.
pub fn detect_detours(paths: &[LabeledPath]) -> Vec<DetourRecord> {
    paths.iter().filter_map(detect_detour).collect()
}

// --- vantage-point selection study -----------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpStudyPoint {
    pub mode: VpMode,
    pub k: usize,
    pub singleton_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpStudy {
    pub all_vp_rate: f64,
    pub points: Vec<VpStudyPoint>,
}

impl VpStudy {
    pub fn rate(&self, mode: VpMode, k: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.mode == mode && p.k == k)
            .map(|p| p.singleton_rate)
    }
}

/// Singleton-resolution rate as a function of how many vantage points
///供给 constraints, for greedy (lowest RTT first) and random selection.
/// Random draws are nested by trial so the curve is monotone per seed.
pub fn vp_study(
    world: &SyntheticWorld,
    model: &Model,
    k_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<VpStudy> {
    if world.vps.len() < 8 {
        return Err(Error::Invalid(format!(
            "vp study needs at least 8 vantage points, world has {}",
            world.vps.len()
        )));
    }
    let slack = sol::DEFAULT_SLACK_KM;
    let boundaries = &world.corpus.boundaries;

    // fixed ensemble sets per router
    let mut ensemble_sets: BTreeMap<RouterIp, BTreeSet<CountryCode>> = BTreeMap::new();
    for &ip in &world.routers {
        ensemble_sets.insert(ip, model.predict_ip(ip, &world.corpus)?);
    }

    let singleton_with_vps = |ip: RouterIp, vps: &[sol::VantagePoint]| -> bool {
        let caps: Vec<sol::SphericalCap> = vps
            .iter()
            .filter_map(|vp| {
                sol::SphericalCap::from_measurement(&crate::corpus::Measurement {
                    source: vp.endpoint,
                    target: ip,
                    min_rtt_ms: vp.rtt_ms,
                    origin: crate::corpus::MeasurementOrigin::Direct,
                })
            })
            .collect();
        let region = sol::region_from_caps(caps, boundaries, slack);
        let (final_set, _) = crate::pipeline::resolve(&ensemble_sets[&ip], &region);
        final_set.len() == 1
    };

    // upper bound: all vantage points
    let mut all_singletons = 0usize;
    for &ip in &world.routers {
        let all = world.vantage_rtts(ip);
        if singleton_with_vps(ip, &all) {
            all_singletons += 1;
        }
    }
    let all_vp_rate = all_singletons as f64 / world.routers.len() as f64;

    let mut points = Vec::new();
    for &k in k_grid {
        if k > world.vps.len() {
            return Err(Error::KTooLarge {
                k,
                available: world.vps.len(),
            });
        }
        // greedy: deterministic, a single pass
        let mut greedy_singletons = 0usize;
        for &ip in &world.routers {
            let all = world.vantage_rtts(ip);
            let chosen = sol::select_vps(&all, k, VpMode::Greedy, 0)?;
            if singleton_with_vps(ip, &chosen) {
                greedy_singletons += 1;
            }
        }
        points.push(VpStudyPoint {
            mode: VpMode::Greedy,
            k,
            singleton_rate: greedy_singletons as f64 / world.routers.len() as f64,
        });

        // random: nested prefixes per trial
        let mut hits = 0usize;
        let mut total = 0usize;
        for trial in 0..trials {
            let mut order: Vec<usize> = (0..world.vps.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37));
            order.shuffle(&mut rng);
            for &ip in &world.routers {
                let all = world.vantage_rtts(ip);
                let chosen: Vec<sol::VantagePoint> =
                    order.iter().take(k).map(|&i| all[i]).collect();
                if singleton_with_vps(ip, &chosen) {
                    hits += 1;
                }
                total += 1;
            }
        }
        points.push(VpStudyPoint {
            mode: VpMode::Random,
            k,
            singleton_rate: hits as f64 / total.max(1) as f64,
        });
    }

    Ok(VpStudy { all_vp_rate, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(s: &str) -> CountryCode {
        CountryCode::parse(s).unwrap()
    }

    fn ip(s: &str) -> RouterIp {
        s.parse().unwrap()
    }

    #[test]
    fn accuracy_excludes_multi_country_predictions() {
        let truth = BTreeMap::from([
            (ip("1.0.0.1"), cc("US")),
            (ip("1.0.0.2"), cc("US")),
            (ip("1.0.0.3"), cc("US")),
        ]);
        let predictions = BTreeMap::from([
            (ip("1.0.0.1"), BTreeSet::from([cc("US")])),
            (ip("1.0.0.2"), BTreeSet::from([cc("US"), cc("CA")])),
            (ip("1.0.0.3"), BTreeSet::from([cc("DE")])),
        ]);
        let report = per_country_accuracy(&predictions, &truth, false);
        assert_eq!(report.per_country[&cc("US")], 0.5);
        assert_eq!(report.excluded, 1);

        let strict = per_country_accuracy(&predictions, &truth, true);
        assert!((strict.per_country[&cc("US")] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_correct_singletons_score_one_everywhere() {
        let mut truth = BTreeMap::new();
        let mut predictions = BTreeMap::new();
        for i in 1..=20u8 {
            let addr = ip(&format!("9.0.0.{i}"));
            let country = country_for(i);
            truth.insert(addr, country);
            predictions.insert(addr, BTreeSet::from([country]));
        }
        let report = per_country_accuracy(&predictions, &truth, false);
        assert!(report.per_country.values().all(|&a| a == 1.0));
    }

    fn country_for(i: u8) -> CountryCode {
        let c = [b'A' + (i % 5), b'A'];
        CountryCode::parse(std::str::from_utf8(&c).unwrap()).unwrap()
    }

    #[test]
    fn twenty_country_cdf_matches_brute_tally() {
        // synthetic 20-country world with known hit/miss pattern
        let mut truth = BTreeMap::new();
        let mut predictions = BTreeMap::new();
        let mut expected: BTreeMap<CountryCode, (usize, usize)> = BTreeMap::new();
        let mut n = 0u32;
        for c in 0..20usize {
            let country = synthetic::country_code(c);
            for j in 0..(c % 4 + 1) {
                n += 1;
                let addr = RouterIp::from_numeric(0x0900_0000 + n);
                truth.insert(addr, country);
                let correct = j % 2 == 0;
                predictions.insert(
                    addr,
                    BTreeSet::from([if correct {
                        country
                    } else {
                        synthetic::country_code((c + 1) % 20)
                    }]),
                );
                let e = expected.entry(country).or_insert((0, 0));
                e.1 += 1;
                if correct {
                    e.0 += 1;
                }
            }
        }
        let report = per_country_accuracy(&predictions, &truth, false);
        for (country, (correct, total)) in expected {
            assert!(
                (report.per_country[&country] - correct as f64 / total as f64).abs() < 1e-12
            );
        }
        let cdf = report.cdf_points();
        assert_eq!(cdf.len(), 20);
        assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_fractions_sum_to_one() {
        let hist = precision_histogram([1, 1, 2, 3, 1, 2]);
        assert!((hist.sum() - 1.0).abs() < 1e-9);
        assert_eq!(hist.fraction_with(1), 0.5);
        assert!((hist.fraction_at_most(2) - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn detour_examples() {
        // CA -> CA via US: domestic detour
        let domestic = LabeledPath {
            id: "p1".into(),
            src_country: cc("CA"),
            dst_country: cc("CA"),
            hops: vec![
                (ip("9.0.0.1"), cc("CA")),
                (ip("9.0.0.2"), cc("US")),
                (ip("9.0.0.3"), cc("CA")),
            ],
        };
        let record = detect_detour(&domestic).unwrap();
        assert!(record.domestic);
        assert_eq!(record.detour_countries, BTreeSet::from([cc("US")]));

        // US -> DE entirely within the endpoints: no record
        let clean = LabeledPath {
            id: "p2".into(),
            src_country: cc("US"),
            dst_country: cc("DE"),
            hops: vec![(ip("9.0.1.1"), cc("US")), (ip("9.0.1.2"), cc("DE"))],
        };
        assert!(detect_detour(&clean).is_none());

        // BR -> RU via US, FR, DE
        let long = LabeledPath {
            id: "p3".into(),
            src_country: cc("BR"),
            dst_country: cc("RU"),
            hops: vec![
                (ip("9.0.2.1"), cc("BR")),
                (ip("9.0.2.2"), cc("US")),
                (ip("9.0.2.3"), cc("FR")),
                (ip("9.0.2.4"), cc("DE")),
                (ip("9.0.2.5"), cc("RU")),
            ],
        };
        let record = detect_detour(&long).unwrap();
        assert!(!record.domestic);
        assert_eq!(
            record.detour_countries,
            BTreeSet::from([cc("US"), cc("FR"), cc("DE")])
        );
    }

    #[test]
    fn detour_set_ignores_hop_order_and_duplicates() {
        let a = LabeledPath {
            id: "a".into(),
            src_country: cc("BR"),
            dst_country: cc("RU"),
            hops: vec![
                (ip("9.0.3.1"), cc("US")),
                (ip("9.0.3.2"), cc("FR")),
                (ip("9.0.3.3"), cc("US")),
            ],
        };
        let b = LabeledPath {
            hops: vec![
                (ip("9.0.3.9"), cc("FR")),
                (ip("9.0.3.8"), cc("US")),
            ],
            ..a.clone()
        };
        assert_eq!(
            detect_detour(&a).unwrap().detour_countries,
            detect_detour(&b).unwrap().detour_countries
        );
    }

    #[test]
    fn poison_zero_matches_baseline_and_has_no_echoes() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rows = Vec::new();
        let mut codes = Vec::new();
        for _ in 0..200 {
            let class = rng.gen_range(0..4u32);
            rows.push(vec![class as f64, rng.gen_range(0.0..1.0)]);
            codes.push(class);
        }
        let baseline =
            poison_experiment(&rows, &codes, 0.0, 9, &TreeParams::default()).unwrap();
        assert_eq!(baseline.predicted_poisoned, 0.0);
        assert!(baseline.correct > 0.95);
        assert!((baseline.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn poison_fractions_sum_to_one() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        let mut codes = Vec::new();
        for _ in 0..300 {
            let class = rng.gen_range(0..5u32);
            rows.push(vec![
                class as f64,
                class as f64 + rng.gen_range(-0.2..0.2),
                rng.gen_range(0.0..1.0),
            ]);
            codes.push(class);
        }
        let report = poison_experiment(&rows, &codes, 0.2, 17, &TreeParams::default()).unwrap();
        assert!((report.sum() - 1.0).abs() < 1e-9);
        assert!(report.predicted_poisoned > 0.0);
    }

    #[test]
    fn consistency_report_matches_planted_rates() {
        use crate::corpus::traceroute::{Hop, PathDirection};

        // 100 singleton predictions; the external source disagrees on 10,
        // half of which are also outside the feasible region
        let mut finals = BTreeMap::new();
        let mut external = GeoSourceSnapshot::new("external");
        let mut regions = BTreeMap::new();
        let mut inconsistent_ips = Vec::new();
        for i in 0..100u32 {
            let addr = RouterIp::from_numeric(0x0B00_0000 + i);
            let ours = cc("AA");
            finals.insert(addr, BTreeSet::from([ours]));
            let (theirs, feasible) = match i {
                0..=4 => (cc("AB"), BTreeSet::from([cc("AA"), cc("AB")])), // inconsistent only
                5..=9 => (cc("AC"), BTreeSet::from([cc("AA")])),           // also a violation
                _ => (ours, BTreeSet::from([cc("AA")])),
            };
            if theirs != ours {
                inconsistent_ips.push(addr);
            }
            external.insert(addr, Some(theirs)).unwrap();
            regions.insert(
                addr,
                FeasibleRegion {
                    caps: Vec::new(),
                    feasible_countries: Some(feasible),
                },
            );
        }

        // 20 paths, 4 of which touch an inconsistent IP
        let paths: Vec<TraceroutePath> = (0..20)
            .map(|p| {
                let hop_ip = if p < 4 {
                    inconsistent_ips[p]
                } else {
                    RouterIp::from_numeric(0x0B00_0000 + 50 + p as u32)
                };
                TraceroutePath {
                    source: None,
                    destination: Some(hop_ip),
                    hops: vec![Hop {
                        ip: hop_ip,
                        min_rtt_ms: 5.0,
                        hop_index: 1,
                    }],
                    gaps: Vec::new(),
                    direction: PathDirection::Forward,
                    timestamp: None,
                }
            })
            .collect();

        let report = consistency_compare(&finals, &external, &regions, &paths);
        assert_eq!(report.compared_ips, 100);
        assert_eq!(report.inconsistent_pct, 10.0);
        assert_eq!(report.sol_violation_pct, 5.0);
        assert_eq!(report.affected_path_pct, 20.0);
    }

    #[test]
    fn consistency_identical_external_is_all_zeros() {
        let finals = BTreeMap::from([
            (ip("9.1.0.1"), BTreeSet::from([cc("US")])),
            (ip("9.1.0.2"), BTreeSet::from([cc("DE")])),
        ]);
        let mut external = GeoSourceSnapshot::new("mirror");
        external.insert(ip("9.1.0.1"), Some(cc("US"))).unwrap();
        external.insert(ip("9.1.0.2"), Some(cc("DE"))).unwrap();
        let report = consistency_compare(&finals, &external, &BTreeMap::new(), &[]);
        assert_eq!(report.compared_ips, 2);
        assert_eq!(report.sol_violation_pct, 0.0);
        assert_eq!(report.inconsistent_pct, 0.0);
        assert_eq!(report.affected_path_pct, 0.0);
    }
}

