//! Offline training with iterative refinement, staged per-IP resolution,
//! and the versioned model snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    Corpus, CountryCode, GroundTruthLabel, LabelOrigin, Measurement, MeasurementSet, RouterIp,
    TraceroutePath,
};
use crate::dtree::{DecisionTree, TreeParams};
use crate::ensemble::{
    self, Allocation, CountCriterion, Ensemble, LabelCodec, SamplingStrategy, SelectionStop,
    TrainedCandidate,
};
use crate::error::{Error, Result};
use crate::features::{self, CategoryDictionary, FeatureConfig};
use crate::sol::{self, FeasibleRegion};

/// Which resolution rule produced the final set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageProvenance {
    /// No usable constraints; the ensemble set stands.
    EnsembleOnly,
    /// Ensemble and feasible sets overlap; their intersection stands.
    Intersection,
    /// Constraints pin exactly one country from direct caps and the
    /// ensemble missed it; the constraint verdict overrides.
    SolOverride,
    /// Constraints and ensemble are irreconcilable.
    Conflict,
}

/// Per-IP outcome at each stage of the prediction pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePrediction {
    pub ip: RouterIp,
    pub ensemble_set: BTreeSet<CountryCode>,
    /// `None` when feasibility is undetermined (no valid caps).
    pub sol_set: Option<BTreeSet<CountryCode>>,
    pub intersected_set: BTreeSet<CountryCode>,
    pub final_set: BTreeSet<CountryCode>,
    pub provenance: StageProvenance,
}

impl StagePrediction {
    pub fn final_singleton(&self) -> Option<CountryCode> {
        if self.final_set.len() == 1 {
            self.final_set.iter().next().copied()
        } else {
            None
        }
    }

    /// The set before the singleton-override rule: what the
    /// ensemble-plus-constraints stage alone would report.
    pub fn pre_override_set(&self) -> &BTreeSet<CountryCode> {
        &self.intersected_set
    }
}

/// Resolution rules, in order: an undetermined region leaves the ensemble
/// set; a nonempty intersection wins; a direct-cap singleton region
/// overrides the ensemble; anything else is a conflict and resolves empty.
pub fn resolve(
    ensemble_set: &BTreeSet<CountryCode>,
    region: &FeasibleRegion,
) -> (BTreeSet<CountryCode>, StageProvenance) {
    match &region.feasible_countries {
        None => (ensemble_set.clone(), StageProvenance::EnsembleOnly),
        Some(sol_set) => {
            let intersection: BTreeSet<CountryCode> =
                ensemble_set.intersection(sol_set).copied().collect();
            if !intersection.is_empty() {
                (intersection, StageProvenance::Intersection)
            } else if sol_set.len() == 1 && region.all_caps_direct() {
                (sol_set.clone(), StageProvenance::SolOverride)
            } else {
                (BTreeSet::new(), StageProvenance::Conflict)
            }
        }
    }
}

/// Assemble a full staged prediction for one router.
pub fn stage_prediction(
    ip: RouterIp,
    ensemble_set: BTreeSet<CountryCode>,
    region: &FeasibleRegion,
) -> StagePrediction {
    let (final_set, provenance) = resolve(&ensemble_set, region);
    let intersected_set = match &region.feasible_countries {
        None => ensemble_set.clone(),
        Some(sol_set) => ensemble_set.intersection(sol_set).copied().collect(),
    };
    StagePrediction {
        ip,
        ensemble_set,
        sol_set: region.feasible_countries.clone(),
        intersected_set,
        final_set,
        provenance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub seed: u64,
    pub tree: TreeParams,
    pub features: FeatureConfig,
    /// Candidate selection: exactly this many members by default.
    pub member_count: Option<usize>,
    /// Marginal-gain stop used when `member_count` is `None`.
    pub gain_threshold: f64,
    /// Instance grid for the per-country accuracy curves.
    pub instance_grid: Vec<usize>,
    /// Number of equal-per-country candidates in the pool.
    pub equal_candidates: usize,
    /// Refinement stops when at most this fraction of routers change.
    pub convergence_fraction: f64,
    /// Hard cap on refinement iterations.
    pub iteration_cap: usize,
    /// Slack for the country-vs-cap vertex test, km.
    pub slack_km: f64,
    /// Offline retraining cadence, days. Exposed as configuration; the
    /// library schedules nothing itself.
    pub refresh_period_days: u32,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            seed: 42,
            tree: TreeParams::default(),
            features: FeatureConfig::default(),
            member_count: Some(4),
            gain_threshold: ensemble::DEFAULT_GAIN_THRESHOLD,
            instance_grid: vec![1, 2, 4, 8, 16],
            equal_candidates: ensemble::EQUAL_CANDIDATES,
            convergence_fraction: 0.01,
            iteration_cap: 10,
            slack_km: sol::DEFAULT_SLACK_KM,
            refresh_period_days: 7,
        }
    }
}

/// A trained, immutable model: the ensemble (with dictionary and codec)
/// plus the feature configuration it was encoded under.
#[derive(Debug, Clone)]
pub struct Model {
    pub ensemble: Ensemble,
    pub feature_config: FeatureConfig,
    pub format_version: u32,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl Model {
    /// Encode an IP against the model's dictionary and take the ensemble
    /// union prediction.
    pub fn predict_ip(&self, ip: RouterIp, corpus: &Corpus) -> Result<BTreeSet<CountryCode>> {
        let raw = features::assemble(ip, corpus);
        let row = features::encode(&raw, &self.ensemble.dictionary, &self.feature_config);
        self.ensemble.predict_countries(&row)
    }
}

/// Per-iteration refinement statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub labels_used: usize,
    pub validation_accuracy: f64,
    pub singleton_fraction: f64,
    pub conflict_count: usize,
    pub promoted: usize,
    pub replaced: usize,
    /// Fraction of routers whose final set changed from the previous
    /// iteration; 1.0 on the initial pass.
    pub changed_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<IterationStats>,
    /// Staged predictions from the initial (pre-refinement) ensemble.
    pub initial_predictions: BTreeMap<RouterIp, StagePrediction>,
    /// Staged predictions from the final model.
    pub final_predictions: BTreeMap<RouterIp, StagePrediction>,
    /// The training labels after refinement, with provenance.
    pub final_labels: Vec<GroundTruthLabel>,
    /// Refinement iterations after the initial pass.
    pub refinement_iterations: usize,
    pub converged: bool,
}

/// Offline training: train the ensemble on the admitted labels, resolve
/// every known router against the speed-of-light constraints, promote
/// singleton resolutions into the label set (never displacing curated
/// labels), and repeat until no more than the configured fraction of
/// routers change or the iteration cap is hit.
pub fn train_offline(corpus: &Corpus, config: &TrainingConfig) -> Result<TrainOutcome> {
    let admitted = corpus.admitted_labels(config.slack_km);
    if admitted.is_empty() {
        return Err(Error::NoGroundTruth);
    }

    // Label state: one entry per IP, curated labels taking precedence
    // over crowdsourced ones for the same address.
    let mut labels: BTreeMap<RouterIp, (CountryCode, LabelOrigin)> = BTreeMap::new();
    for l in admitted.iter().filter(|l| l.origin.is_curated()) {
        labels.entry(l.ip).or_insert((l.country, l.origin));
    }
    for l in &admitted {
        labels.entry(l.ip).or_insert((l.country, l.origin));
    }

    // Frozen dictionary over everything the corpus knows.
    let universe_ips = corpus.known_ips();
    let vectors: Vec<features::FeatureVector> = universe_ips
        .iter()
        .map(|&ip| features::assemble(ip, corpus))
        .collect();
    let dictionary = CategoryDictionary::build(vectors.iter());
    let encoded: BTreeMap<RouterIp, Vec<f64>> = universe_ips
        .iter()
        .zip(&vectors)
        .map(|(&ip, v)| (ip, features::encode(v, &dictionary, &config.features)))
        .collect();

    // Codec over every country we could ever assign.
    let mut countries: BTreeSet<CountryCode> = corpus.boundaries.codes().into_iter().collect();
    countries.extend(labels.values().map(|(c, _)| *c));
    let codec = LabelCodec::from_countries(countries);

    // Constraint regions are measurement-derived and fixed across
    // iterations.
    let prediction_universe: Vec<RouterIp> = universe_ips
        .iter()
        .copied()
        .filter(|ip| !ip.is_private_or_reserved())
        .collect();
    let regions: BTreeMap<RouterIp, FeasibleRegion> = prediction_universe
        .iter()
        .map(|&ip| {
            (
                ip,
                sol::feasible_countries(
                    ip,
                    &corpus.measurements,
                    &corpus.aliases,
                    &corpus.boundaries,
                    config.slack_km,
                ),
            )
        })
        .collect();

    let mut log: Vec<IterationStats> = Vec::new();
    let mut prev_finals: Option<BTreeMap<RouterIp, BTreeSet<CountryCode>>> = None;
    let mut initial_predictions: Option<BTreeMap<RouterIp, StagePrediction>> = None;
    let mut last: Option<(Ensemble, BTreeMap<RouterIp, StagePrediction>)> = None;
    let mut converged = false;

    for iteration in 0..=config.iteration_cap {
        let (ensemble_model, validation_accuracy) =
            train_ensemble(&labels, &encoded, &dictionary, &codec, config)?;

        // resolve every router
        let mut predictions: BTreeMap<RouterIp, StagePrediction> = BTreeMap::new();
        for &ip in &prediction_universe {
            let row = &encoded[&ip];
            let ensemble_set = ensemble_model.predict_countries(row)?;
            let region = regions.get(&ip).expect("region for universe ip");
            predictions.insert(ip, stage_prediction(ip, ensemble_set, region));
        }

        let finals: BTreeMap<RouterIp, BTreeSet<CountryCode>> = predictions
            .iter()
            .map(|(ip, p)| (*ip, p.final_set.clone()))
            .collect();
        let changed_fraction = match &prev_finals {
            None => 1.0,
            Some(prev) => {
                let changed = finals
                    .iter()
                    .filter(|(ip, set)| prev.get(ip) != Some(set))
                    .count();
                changed as f64 / finals.len().max(1) as f64
            }
        };

        // promote singleton resolutions backed by constraints
        let mut promoted = 0usize;
        let mut replaced = 0usize;
        for (ip, pred) in &predictions {
            let backed = matches!(
                pred.provenance,
                StageProvenance::Intersection | StageProvenance::SolOverride
            );
            let Some(country) = pred.final_singleton().filter(|_| backed) else {
                continue;
            };
            match labels.get(ip) {
                None => {
                    labels.insert(*ip, (country, LabelOrigin::Promoted));
                    promoted += 1;
                }
                Some((existing, origin)) if *existing != country => {
                    if !origin.is_curated() {
                        labels.insert(*ip, (country, LabelOrigin::Promoted));
                        replaced += 1;
                    }
                }
                Some(_) => {}
            }
        }

        let singleton_fraction = predictions
            .values()
            .filter(|p| p.final_set.len() == 1)
            .count() as f64
            / predictions.len().max(1) as f64;
        let conflict_count = predictions
            .values()
            .filter(|p| p.provenance == StageProvenance::Conflict)
            .count();

        log.push(IterationStats {
            iteration,
            labels_used: labels.len(),
            validation_accuracy,
            singleton_fraction,
            conflict_count,
            promoted,
            replaced,
            changed_fraction,
        });

        if initial_predictions.is_none() {
            initial_predictions = Some(predictions.clone());
        }
        prev_finals = Some(finals);
        last = Some((ensemble_model, predictions));

        if iteration > 0 && changed_fraction <= config.convergence_fraction {
            converged = true;
            break;
        }
    }

    let (ensemble_model, final_predictions) = last.expect("at least one iteration ran");
    let final_labels: Vec<GroundTruthLabel> = labels
        .iter()
        .map(|(ip, (country, origin))| GroundTruthLabel {
            ip: *ip,
            country: *country,
            origin: *origin,
            confidence_note: None,
        })
        .collect();

    Ok(TrainOutcome {
        model: Model {
            ensemble: ensemble_model,
            feature_config: config.features,
            format_version: MODEL_FORMAT_VERSION,
        },
        refinement_iterations: log.len().saturating_sub(1),
        converged,
        log,
        initial_predictions: initial_predictions.expect("initial pass ran"),
        final_predictions,
        final_labels,
    })
}

/// Train the candidate pool on a seeded 80% split, select members on the
/// held-out 20%, and assemble the ensemble.
///
/// The seed is fixed across refinement iterations: only the label set
/// evolves between rounds, so predictions can actually stabilize.
fn train_ensemble(
    labels: &BTreeMap<RouterIp, (CountryCode, LabelOrigin)>,
    encoded: &BTreeMap<RouterIp, Vec<f64>>,
    dictionary: &CategoryDictionary,
    codec: &LabelCodec,
    config: &TrainingConfig,
) -> Result<(Ensemble, f64)> {
    let labeled_ips: Vec<RouterIp> = labels.keys().copied().collect();

    // 80/20 split keyed on the address hash so membership is stable when
    // labels are promoted into or replaced in the training set
    let seed = config.seed;
    let is_validation =
        |ip: RouterIp| ensemble::mix64(ip.numeric_code() as u64 ^ ensemble::mix64(seed)).is_multiple_of(5);

    let mut train_rows = Vec::new();
    let mut train_codes = Vec::new();
    let mut val_rows = Vec::new();
    let mut val_codes = Vec::new();
    for &ip in &labeled_ips {
        let row = encoded[&ip].clone();
        let code = codec.code(labels[&ip].0).expect("label country in codec");
        if is_validation(ip) {
            val_rows.push(row);
            val_codes.push(code);
        } else {
            train_rows.push(row);
            train_codes.push(code);
        }
    }
    if val_rows.is_empty() && train_rows.len() > 1 {
        val_rows.push(train_rows.pop().unwrap());
        val_codes.push(train_codes.pop().unwrap());
    }
    if train_rows.is_empty() {
        std::mem::swap(&mut train_rows, &mut val_rows);
        std::mem::swap(&mut train_codes, &mut val_codes);
    }

    let candidates = train_candidate_pool(&train_rows, &train_codes, config, seed)?;
    let stop = match config.member_count {
        Some(count) => SelectionStop::MemberCount(count),
        None => SelectionStop::GainThreshold(config.gain_threshold),
    };
    let outcome = ensemble::build_ensemble(&candidates, &val_rows, &val_codes, stop)?;
    let accuracy = outcome.accuracy_trace.last().copied().unwrap_or(0.0);

    // Selection was scored on held-out data; the members that ship are
    // refit with their strategies and seeds over the full label set.
    let full_rows: Vec<Vec<f64>> = labeled_ips.iter().map(|ip| encoded[ip].clone()).collect();
    let full_codes: Vec<u32> = labeled_ips
        .iter()
        .map(|ip| codec.code(labels[ip].0).expect("label country in codec"))
        .collect();
    let mut members = Vec::with_capacity(outcome.selected.len());
    for &i in &outcome.selected {
        let strategy = refreshed_strategy(&candidates[i].strategy, &full_codes);
        let indices = ensemble::sample(&full_codes, &strategy, candidates[i].seed)?;
        let rows: Vec<Vec<f64>> = indices.iter().map(|&j| full_rows[j].clone()).collect();
        let sample_codes: Vec<u32> = indices.iter().map(|&j| full_codes[j]).collect();
        members.push(TrainedCandidate {
            tree: DecisionTree::fit(&rows, &sample_codes, &config.tree)?,
            strategy,
            seed: candidates[i].seed,
        });
    }
    Ok((
        Ensemble {
            members,
            dictionary: dictionary.clone(),
            codec: codec.clone(),
        },
        accuracy,
    ))
}

/// Adjust a selected strategy to the full label set: per-country classes
/// present only in the full set get their full count so refitting never
/// hits an unknown class.
fn refreshed_strategy(strategy: &SamplingStrategy, full_codes: &[u32]) -> SamplingStrategy {
    match strategy {
        SamplingStrategy::PerCountry {
            allocation,
            criterion,
            counts,
        } => {
            let mut counts = counts.clone();
            let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
            for &code in full_codes {
                *seen.entry(code).or_insert(0) += 1;
            }
            for (&class, &available) in &seen {
                counts.entry(class).or_insert(available.max(1));
            }
            SamplingStrategy::PerCountry {
                allocation: *allocation,
                criterion: *criterion,
                counts,
            }
        }
        other => other.clone(),
    }
}

/// The standard candidate pool: the default classifier, the four
/// curve-derived samplings (balanced/unbalanced x knee/max-accuracy), and
/// six equal-per-country classifiers at the mean instance count with
/// distinct seeds.
pub fn train_candidate_pool(
    rows: &[Vec<f64>],
    codes: &[u32],
    config: &TrainingConfig,
    seed: u64,
) -> Result<Vec<TrainedCandidate>> {
    let mut candidates = Vec::with_capacity(5 + config.equal_candidates);

    let fit_strategy = |strategy: SamplingStrategy, strategy_seed: u64| -> Result<TrainedCandidate> {
        let indices = ensemble::sample(codes, &strategy, strategy_seed)?;
        let sample_rows: Vec<Vec<f64>> = indices.iter().map(|&i| rows[i].clone()).collect();
        let sample_codes: Vec<u32> = indices.iter().map(|&i| codes[i]).collect();
        let tree = DecisionTree::fit(&sample_rows, &sample_codes, &config.tree)?;
        Ok(TrainedCandidate {
            tree,
            strategy,
            seed: strategy_seed,
        })
    };

    candidates.push(fit_strategy(SamplingStrategy::Default, seed)?);

    let classes: BTreeSet<u32> = codes.iter().copied().collect();
    for (allocation, criterion) in [
        (Allocation::Balanced, CountCriterion::Knee),
        (Allocation::Balanced, CountCriterion::MaxAccuracy),
        (Allocation::Unbalanced, CountCriterion::Knee),
        (Allocation::Unbalanced, CountCriterion::MaxAccuracy),
    ] {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &class in &classes {
            let available = codes.iter().filter(|&&c| c == class).count();
            let picked = match ensemble::instance_curve(
                class,
                rows,
                codes,
                &config.instance_grid,
                allocation,
                seed ^ (class as u64).wrapping_mul(0x9E37_79B9),
                &config.tree,
            ) {
                Ok(curve) => match criterion {
                    CountCriterion::Knee => curve.knee_count,
                    CountCriterion::MaxAccuracy => curve.max_accuracy_count,
                },
                // too few labels to draw a curve: use everything there is
                Err(Error::InsufficientData(_)) | Err(Error::EmptyCountry(_)) => available,
                Err(e) => return Err(e),
            };
            counts.insert(class, picked.max(1));
        }
        candidates.push(fit_strategy(
            SamplingStrategy::PerCountry {
                allocation,
                criterion,
                counts,
            },
            seed,
        )?);
    }

    let mean = ensemble::mean_instance_count(codes).max(1);
    for j in 0..config.equal_candidates {
        candidates.push(fit_strategy(
            SamplingStrategy::EqualPerCountry { count: mean },
            seed.wrapping_add(1 + j as u64),
        )?);
    }

    Ok(candidates)
}

/// Outcome for one hop of a predicted path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum HopOutcome {
    /// Private or reserved address; excluded from prediction.
    Skipped { reason: String },
    Predicted { prediction: StagePrediction },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopPrediction {
    pub hop_index: usize,
    pub ip: RouterIp,
    pub min_rtt_ms: f64,
    #[serde(flatten)]
    pub outcome: HopOutcome,
}

/// Predict every responsive hop of a path. Constraints come from the
/// stored measurement corpus, any caller-supplied measurements, the
/// path's own RTTs when its source is located, and landmark decomposition
/// for hops that would otherwise be unconstrained.
pub fn predict_path(
    path: &TraceroutePath,
    model: &Model,
    corpus: &Corpus,
    client_measurements: &[Measurement],
) -> Result<Vec<HopPrediction>> {
    // measurement view for this request: corpus + client + path-derived
    let mut merged = corpus.measurements.clone();
    for m in client_measurements {
        merged.insert(*m);
    }
    if let Some(source) = path.source {
        for hop in &path.hops {
            merged.insert(Measurement {
                source: crate::corpus::LocatedEndpoint {
                    ip: source.ip,
                    location: source.location,
                },
                target: hop.ip,
                min_rtt_ms: hop.min_rtt_ms,
                origin: crate::corpus::MeasurementOrigin::Direct,
            });
        }
    }
    // landmark decomposition only for hops with no direct constraints
    let landmark_pool = merged.source_locations();
    let landmark_measurements = sol::derive_landmark_measurements(path, &landmark_pool);
    for m in landmark_measurements {
        let has_direct = merged
            .for_target(m.target)
            .iter()
            .any(|e| e.origin == crate::corpus::MeasurementOrigin::Direct
                && sol::SphericalCap::from_measurement(e).is_some());
        if !has_direct {
            merged.insert(m);
        }
    }

    let mut out = Vec::with_capacity(path.hops.len());
    for hop in &path.hops {
        if hop.ip.is_private_or_reserved() {
            out.push(HopPrediction {
                hop_index: hop.hop_index,
                ip: hop.ip,
                min_rtt_ms: hop.min_rtt_ms,
                outcome: HopOutcome::Skipped {
                    reason: "private or reserved address".to_string(),
                },
            });
            continue;
        }
        let prediction = predict_router(hop.ip, model, corpus, &merged)?;
        out.push(HopPrediction {
            hop_index: hop.hop_index,
            ip: hop.ip,
            min_rtt_ms: hop.min_rtt_ms,
            outcome: HopOutcome::Predicted { prediction },
        });
    }
    Ok(out)
}

/// Parse and predict raw traceroute text.
pub fn predict_raw(
    text: &str,
    model: &Model,
    corpus: &Corpus,
    client_measurements: &[Measurement],
) -> Result<Vec<HopPrediction>> {
    let path = crate::corpus::parse_traceroute(text)
        .map_err(|e| match e {
            Error::EmptyPath => Error::EmptyPath,
            other => Error::UnparseablePath(other.to_string()),
        })?;
    predict_path(&path, model, corpus, client_measurements)
}

/// Staged prediction for a single router against an explicit measurement
/// view.
pub fn predict_router(
    ip: RouterIp,
    model: &Model,
    corpus: &Corpus,
    measurements: &MeasurementSet,
) -> Result<StagePrediction> {
    let ensemble_set = model.predict_ip(ip, corpus)?;
    let region = sol::feasible_countries(
        ip,
        measurements,
        &corpus.aliases,
        &corpus.boundaries,
        sol::DEFAULT_SLACK_KM,
    );
    Ok(stage_prediction(ip, ensemble_set, &region))
}

// --- model snapshot -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MemberManifest {
    strategy: SamplingStrategy,
    seed: u64,
    tree_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnapshotManifest {
    format_version: u32,
    feature_config: FeatureConfig,
    countries: Vec<CountryCode>,
    members: Vec<MemberManifest>,
}

/// Write a model snapshot directory: manifest, per-member tree files, the
/// category dictionary, the final labels with provenance, and the
/// refinement log. Output is byte-stable for identical inputs.
pub fn write_model_snapshot(
    dir: &Path,
    outcome: &TrainOutcome,
) -> Result<()> {
    let trees_dir = dir.join("trees");
    std::fs::create_dir_all(&trees_dir)
        .map_err(|e| Error::io(format!("creating {}", trees_dir.display()), e))?;

    let mut members = Vec::new();
    for (i, member) in outcome.model.ensemble.members.iter().enumerate() {
        let tree_file = format!("trees/member_{i:03}.json");
        let path = dir.join(&tree_file);
        std::fs::write(&path, member.tree.to_json())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        members.push(MemberManifest {
            strategy: member.strategy.clone(),
            seed: member.seed,
            tree_file,
        });
    }

    let manifest = SnapshotManifest {
        format_version: outcome.model.format_version,
        feature_config: outcome.model.feature_config,
        countries: outcome.model.ensemble.codec.countries().to_vec(),
        members,
    };
    write_json(dir, "manifest.json", &manifest)?;
    write_json(dir, "dictionary.json", &outcome.model.ensemble.dictionary)?;
    write_json(dir, "labels.json", &outcome.final_labels)?;
    write_json(dir, "refinement.json", &outcome.log)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Load a model snapshot written by [`write_model_snapshot`].
pub fn load_model_snapshot(dir: &Path) -> Result<Model> {
    let manifest_path = dir.join("manifest.json");
    let manifest_text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(format!("reading {}", manifest_path.display()), e))?;
    let manifest: SnapshotManifest = serde_json::from_str(&manifest_text)?;
    if manifest.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Invalid(format!(
            "unsupported snapshot format version {}",
            manifest.format_version
        )));
    }

    let dict_path = dir.join("dictionary.json");
    let dict_text = std::fs::read_to_string(&dict_path)
        .map_err(|e| Error::io(format!("reading {}", dict_path.display()), e))?;
    let dictionary: CategoryDictionary = serde_json::from_str(&dict_text)?;

    let mut members = Vec::new();
    for m in &manifest.members {
        let tree_path = dir.join(&m.tree_file);
        let tree_text = std::fs::read_to_string(&tree_path)
            .map_err(|e| Error::io(format!("reading {}", tree_path.display()), e))?;
        members.push(TrainedCandidate {
            tree: DecisionTree::from_json(&tree_text)?,
            strategy: m.strategy.clone(),
            seed: m.seed,
        });
    }

    Ok(Model {
        ensemble: Ensemble {
            members,
            dictionary,
            codec: LabelCodec::from_countries(manifest.countries),
        },
        feature_config: manifest.feature_config,
        format_version: manifest.format_version,
    })
}

/// FNV-1a digest over a snapshot directory's contents, for quick identity
/// checks between runs.
pub fn snapshot_digest(dir: &Path) -> Result<u64> {
    let mut entries: Vec<std::path::PathBuf> = Vec::new();
    collect_files(dir, &mut entries)?;
    entries.sort();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for path in entries {
        let rel = path.strip_prefix(dir).unwrap_or(&path);
        for chunk in [rel.to_string_lossy().as_bytes()] {
            for &b in chunk {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x1000_0000_01b3);
            }
        }
        let data = std::fs::read(&path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        for &b in &data {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
    }
    Ok(hash)
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io("reading directory entry", e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}
