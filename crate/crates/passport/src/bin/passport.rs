//! Command-line interface: offline training, path prediction, the
//! experiment battery, corpus validation, and the HTTP service.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use passport::config::{self, AppConfig};
use passport::corpus::{self, RouterIp};
use passport::error::{Error, Result};
use passport::evalsuite::{self, synthetic, WorldConfig};
use passport::pipeline::{self, HopOutcome, TrainingConfig};
use passport::service::{self, Engine, ServiceConfig, ServiceState};
use passport::sol::VpMode;

#[derive(Parser)]
#[command(
    name = "passport",
    about = "Country-level router geolocation from unreliable sources, tree ensembles, and speed-of-light constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from the corpus named in the config and write a
    /// snapshot directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the training feature matrix (named columns plus a
        /// label column) for offline inspection.
        #[arg(long)]
        export_features: Option<PathBuf>,
    },
    /// Predict the countries along a traceroute (or for a single IP).
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Raw traceroute text file.
        #[arg(long, conflicts_with = "ip")]
        input: Option<PathBuf>,
        /// Single IPv4 address.
        #[arg(long)]
        ip: Option<String>,
        /// Extra measurements CSV (same columns as the corpus file).
        #[arg(long)]
        measurements: Option<PathBuf>,
        /// Emit the full staged predictions as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run one experiment from the evaluation battery.
    Eval {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Start the HTTP prediction service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Override the configured port (PASSPORT_PORT also applies).
        #[arg(long)]
        port: Option<u16>,
    },
    /// Validate and summarize the corpus files named in the config.
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// Per-country accuracy CDF of the trained model on the synthetic
    /// world.
    Accuracy {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prediction-set size histograms per pipeline stage.
    Precision {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label-poisoning resilience: the four-way outcome breakdown.
    Poisoning {
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Consistency of each source snapshot against singleton predictions.
    Consistency {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Singleton rate vs number of vantage points, greedy and random.
    VpStudy {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detour records over predicted synthetic paths.
    Detours {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus (plus config.toml) to disk.
    GenCorpus {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = WorldKind::Default)]
        world: WorldKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WorldKind {
    Default,
    Redundant,
    VpStudy,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string(), "kind": e.kind() })
            );
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            export_features,
        } => train(&config, &out, export_features.as_deref()),
        Command::Predict {
            config,
            model,
            input,
            ip,
            measurements,
            json,
        } => predict(
            &config,
            &model,
            input.as_deref(),
            ip.as_deref(),
            measurements.as_deref(),
            json,
        ),
        Command::Eval { experiment } => eval(experiment),
        Command::Serve {
            config,
            model,
            port,
        } => serve(&config, &model, port),
        Command::Ingest { config } => ingest(&config),
    }
}

fn train(config_path: &Path, out: &Path, export_features: Option<&Path>) -> Result<()> {
    let config = AppConfig::load(config_path)?;
    let corpus = config::load_corpus(&config)?;
    let training = config.training_config();
    let outcome = pipeline::train_offline(&corpus, &training)?;

    if let Some(path) = export_features {
        let rows: Vec<(passport::features::FeatureVector, Option<String>)> = outcome
            .final_labels
            .iter()
            .map(|label| {
                (
                    passport::features::assemble(label.ip, &corpus),
                    Some(label.country.to_string()),
                )
            })
            .collect();
        let csv = passport::features::export_matrix_csv(
            &rows,
            &outcome.model.ensemble.dictionary,
            &outcome.model.feature_config,
        );
        write_file(path, &csv)?;
        println!("feature matrix written to {} ({} rows)", path.display(), rows.len());
    }

    for stats in &outcome.log {
        println!(
            "iteration {:>2}: labels {:>5}  val-accuracy {:.3}  singleton {:.3}  conflicts {:>4}  promoted {:>4}  replaced {:>3}  changed {:.3}",
            stats.iteration,
            stats.labels_used,
            stats.validation_accuracy,
            stats.singleton_fraction,
            stats.conflict_count,
            stats.promoted,
            stats.replaced,
            stats.changed_fraction,
        );
    }
    std::fs::create_dir_all(out)
        .map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    pipeline::write_model_snapshot(out, &outcome)?;
    let digest = pipeline::snapshot_digest(out)?;
    println!(
        "snapshot written to {} ({} members, digest {digest:016x}, converged: {})",
        out.display(),
        outcome.model.ensemble.members.len(),
        outcome.converged,
    );
    Ok(())
}

fn predict(
    config_path: &Path,
    model_dir: &Path,
    input: Option<&Path>,
    ip: Option<&str>,
    measurements: Option<&Path>,
    json: bool,
) -> Result<()> {
    let config = AppConfig::load(config_path)?;
    let corpus = config::load_corpus(&config)?;
    let model = pipeline::load_model_snapshot(model_dir)?;

    let client_measurements: Vec<corpus::Measurement> = match measurements {
        Some(path) => corpus::measurement::load_measurements(path)?
            .iter()
            .copied()
            .collect(),
        None => Vec::new(),
    };

    let hops = match (input, ip) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            pipeline::predict_raw(&text, &model, &corpus, &client_measurements)?
        }
        (None, Some(addr)) => {
            let target: RouterIp = addr.parse()?;
            let mut merged = corpus.measurements.clone();
            for m in &client_measurements {
                merged.insert(*m);
            }
            vec![pipeline::HopPrediction {
                hop_index: 1,
                ip: target,
                min_rtt_ms: 0.0,
                outcome: if target.is_private_or_reserved() {
                    HopOutcome::Skipped {
                        reason: "private or reserved address".to_string(),
                    }
                } else {
                    HopOutcome::Predicted {
                        prediction: pipeline::predict_router(target, &model, &corpus, &merged)?,
                    }
                },
            }]
        }
        _ => {
            return Err(Error::Invalid(
                "exactly one of --input or --ip is required".into(),
            ))
        }
    };

    if json {
        println!("{}", serde_json::to_string_pretty(&hops)?);
        return Ok(());
    }

    println!("{:>4}  {:<15}  {:<24}  status", "hop", "ip", "countries");
    for hop in &hops {
        match &hop.outcome {
            HopOutcome::Skipped { reason } => {
                println!(
                    "{:>4}  {:<15}  {:<24}  skipped ({reason})",
                    hop.hop_index,
                    hop.ip.to_string(),
                    "-"
                );
            }
            HopOutcome::Predicted { prediction } => {
                let countries: Vec<&str> =
                    prediction.final_set.iter().map(|c| c.as_str()).collect();
                let status = match countries.len() {
                    0 => "conflict",
                    1 | 2 => "ok",
                    _ => "ambiguous",
                };
                let shown = if countries.len() > 2 {
                    format!("({} candidates)", countries.len())
                } else if countries.is_empty() {
                    "-".to_string()
                } else {
                    countries.join(",")
                };
                println!(
                    "{:>4}  {:<15}  {:<24}  {status}",
                    hop.hop_index,
                    hop.ip.to_string(),
                    shown
                );
            }
        }
    }
    Ok(())
}

fn serve(config_path: &Path, model_dir: &Path, port: Option<u16>) -> Result<()> {
    let config = AppConfig::load(config_path)?;
    let corpus = config::load_corpus(&config)?;
    let model = pipeline::load_model_snapshot(model_dir)?;
    let state = ServiceState::new(
        Some(Arc::new(Engine { corpus, model })),
        ServiceConfig {
            cache_ttl: std::time::Duration::from_secs(config.service.cache_ttl_secs),
            detail_capacity: config.service.detail_capacity,
            workers: config.service.workers,
        },
    );
    let port = port.unwrap_or_else(|| config.port());
    service::http::serve(state, &format!("0.0.0.0:{port}"))
}

fn ingest(config_path: &Path) -> Result<()> {
    let config = AppConfig::load(config_path)?;
    let corpus = config::load_corpus(&config)?;
    println!("corpus validated:");
    for (name, snap) in &corpus.snapshots {
        println!("  snapshot {name}: {} entries", snap.len());
    }
    println!("  as data: {} records", corpus.as_data.len());
    println!("  ground truth: {} labels", corpus.ground_truth.len());
    println!("  alias sets: {}", corpus.aliases.sets().len());
    println!("  boundaries: {} countries", corpus.boundaries.len());
    println!("  measurements: {} rows", corpus.measurements.len());
    println!("  continents: {} mappings", corpus.continents.len());
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn eval(experiment: Experiment) -> Result<()> {
    match experiment {
        Experiment::Accuracy { seed, out } => eval_accuracy(seed, &out),
        Experiment::Precision { seed, out } => eval_precision(seed, &out),
        Experiment::Poisoning { p, seed, out } => eval_poisoning(p, seed, &out),
        Experiment::Consistency { seed, out } => eval_consistency(seed, &out),
        Experiment::VpStudy { seed, out } => eval_vp_study(seed, &out),
        Experiment::Detours { seed, out } => eval_detours(seed, &out),
        Experiment::GenCorpus { seed, world, out } => {
            let config = match world {
                WorldKind::Default => WorldConfig::default_world(seed),
                WorldKind::Redundant => WorldConfig::redundant_world(seed),
                WorldKind::VpStudy => WorldConfig::vp_study_world(seed),
            };
            let generated = synthetic::generate(&config);
            std::fs::create_dir_all(&out)
                .map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
            synthetic::write_corpus_files(&generated, &out)?;
            println!(
                "corpus written to {}: {} routers, {} countries, {} labels, {} measurements",
                out.display(),
                generated.routers.len(),
                generated.config.country_count(),
                generated.corpus.ground_truth.len(),
                generated.corpus.measurements.len(),
            );
            Ok(())
        }
    }
}

fn trained_world(seed: u64) -> Result<(evalsuite::SyntheticWorld, pipeline::TrainOutcome)> {
    let world = synthetic::generate(&WorldConfig::default_world(seed));
    let training = TrainingConfig {
        seed,
        ..TrainingConfig::default()
    };
    let outcome = pipeline::train_offline(&world.corpus, &training)?;
    Ok((world, outcome))
}

fn eval_accuracy(seed: u64, out: &Path) -> Result<()> {
    let (world, outcome) = trained_world(seed)?;
    let finals: BTreeMap<_, _> = outcome
        .final_predictions
        .iter()
        .map(|(ip, p)| (*ip, p.final_set.clone()))
        .collect();
    let report = evalsuite::per_country_accuracy(&finals, &world.truth, false);

    let mut cdf_csv = String::from("accuracy,fraction_of_countries\n");
    for (accuracy, fraction) in report.cdf_points() {
        cdf_csv.push_str(&format!("{accuracy},{fraction}\n"));
    }
    write_file(&out.join("per_country_accuracy_cdf.csv"), &cdf_csv)?;

    let mut per_country_csv = String::from("country,accuracy\n");
    for (country, accuracy) in &report.per_country {
        per_country_csv.push_str(&format!("{country},{accuracy}\n"));
    }
    write_file(&out.join("per_country_accuracy.csv"), &per_country_csv)?;

    let summary = serde_json::json!({
        "experiment": "accuracy",
        "seed": seed,
        "mean_per_country_accuracy": report.mean(),
        "countries": report.per_country.len(),
        "singleton_predictions_scored": report.counted,
        "excluded_non_singleton": report.excluded,
    });
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "accuracy: mean per-country {:.3} over {} countries ({} scored, {} excluded)",
        report.mean(),
        report.per_country.len(),
        report.counted,
        report.excluded
    );
    Ok(())
}

fn eval_precision(seed: u64, out: &Path) -> Result<()> {
    let (world, outcome) = trained_world(seed)?;

    let stages: Vec<(&str, Vec<usize>)> = vec![
        (
            "ensemble",
            outcome
                .initial_predictions
                .values()
                .map(|p| p.ensemble_set.len())
                .collect(),
        ),
        (
            "sol",
            outcome
                .final_predictions
                .values()
                .filter_map(|p| p.sol_set.as_ref().map(|s| s.len()))
                .collect(),
        ),
        (
            "ensemble_plus_sol",
            outcome
                .initial_predictions
                .values()
                .map(|p| p.pre_override_set().len())
                .collect(),
        ),
        (
            "retrained_plus_sol",
            outcome
                .final_predictions
                .values()
                .map(|p| p.pre_override_set().len())
                .collect(),
        ),
        (
            "final",
            outcome
                .final_predictions
                .values()
                .map(|p| p.final_set.len())
                .collect(),
        ),
    ];

    let mut csv = String::from("stage,set_size,fraction\n");
    let mut summary_stages = serde_json::Map::new();
    for (stage, sizes) in &stages {
        let histogram = evalsuite::precision_histogram(sizes.iter().copied());
        for (size, fraction) in &histogram.buckets {
            csv.push_str(&format!("{stage},{size},{fraction}\n"));
        }
        summary_stages.insert(
            stage.to_string(),
            serde_json::json!({
                "singleton_fraction": histogram.fraction_with(1),
                "at_most_two": histogram.fraction_at_most(2),
            }),
        );
        println!(
            "precision: {stage:<20} singleton {:.3}  at-most-two {:.3}",
            histogram.fraction_with(1),
            histogram.fraction_at_most(2)
        );
    }
    write_file(&out.join("precision_histogram.csv"), &csv)?;

    // continent-level histogram of the final stage
    let final_sets: BTreeMap<_, _> = outcome
        .final_predictions
        .iter()
        .map(|(ip, p)| (*ip, p.final_set.clone()))
        .collect();
    let continent = evalsuite::continent_sets(&final_sets, &world.corpus.continents);
    let continent_hist = evalsuite::precision_histogram(continent.values().map(|s| s.len()));
    let mut continent_csv = String::from("set_size,fraction\n");
    for (size, fraction) in &continent_hist.buckets {
        continent_csv.push_str(&format!("{size},{fraction}\n"));
    }
    write_file(&out.join("precision_continents.csv"), &continent_csv)?;

    let summary = serde_json::json!({
        "experiment": "precision",
        "seed": seed,
        "stages": summary_stages,
        "continent_singleton_fraction": continent_hist.fraction_with(1),
    });
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn eval_poisoning(p: f64, seed: u64, out: &Path) -> Result<()> {
    let world = synthetic::generate(&WorldConfig::redundant_world(seed));
    let (rows, codes) = encode_world(&world);

    let params = evalsuite::poison_params();
    let baseline = evalsuite::poison_experiment(&rows, &codes, 0.0, seed, &params)?;
    let poisoned = evalsuite::poison_experiment(&rows, &codes, p, seed, &params)?;

    let mut csv = String::from("poison_fraction,correct,predicted_poisoned,other_wrong,unknown\n");
    for report in [&baseline, &poisoned] {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            report.poison_fraction,
            report.correct,
            report.predicted_poisoned,
            report.other_wrong,
            report.unknown
        ));
    }
    write_file(&out.join("poisoning_breakdown.csv"), &csv)?;

    let summary = serde_json::json!({
        "experiment": "poisoning",
        "seed": seed,
        "poison_fraction": p,
        "baseline_accuracy": baseline.correct,
        "poisoned_accuracy": poisoned.correct,
        "accuracy_drop": baseline.correct - poisoned.correct,
    });
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "poisoning: baseline {:.3}, at p={p} accuracy {:.3} (drop {:.3})",
        baseline.correct,
        poisoned.correct,
        baseline.correct - poisoned.correct
    );
    Ok(())
}

fn encode_world(world: &evalsuite::SyntheticWorld) -> (Vec<Vec<f64>>, Vec<u32>) {
    let vectors: Vec<passport::features::FeatureVector> = world
        .routers
        .iter()
        .map(|&ip| passport::features::assemble(ip, &world.corpus))
        .collect();
    let dict = passport::features::CategoryDictionary::build(vectors.iter());
    let config = passport::features::FeatureConfig::default();
    let codec = passport::ensemble::LabelCodec::from_countries(world.truth.values().copied());
    let rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| passport::features::encode(v, &dict, &config))
        .collect();
    let codes: Vec<u32> = world
        .routers
        .iter()
        .map(|ip| codec.code(world.truth[ip]).unwrap())
        .collect();
    (rows, codes)
}

fn eval_consistency(seed: u64, out: &Path) -> Result<()> {
    let (world, outcome) = trained_world(seed)?;
    let finals: BTreeMap<_, _> = outcome
        .final_predictions
        .iter()
        .map(|(ip, p)| (*ip, p.final_set.clone()))
        .collect();
    let regions: BTreeMap<_, _> = world
        .routers
        .iter()
        .map(|&ip| {
            (
                ip,
                passport::sol::feasible_countries(
                    ip,
                    &world.corpus.measurements,
                    &world.corpus.aliases,
                    &world.corpus.boundaries,
                    passport::sol::DEFAULT_SLACK_KM,
                ),
            )
        })
        .collect();
    let paths = world.gen_paths(200, seed ^ 0xA11CE);

    let mut csv =
        String::from("source,compared_ips,sol_violation_pct,inconsistent_pct,affected_path_pct\n");
    let mut reports = Vec::new();
    for snapshot in world.corpus.snapshots.values() {
        let report = evalsuite::consistency_compare(&finals, snapshot, &regions, &paths);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            report.source_name,
            report.compared_ips,
            report.sol_violation_pct,
            report.inconsistent_pct,
            report.affected_path_pct
        ));
        println!(
            "consistency: {:<12} compared {:>4}  violations {:>5.1}%  inconsistent {:>5.1}%  paths affected {:>5.1}%",
            report.source_name,
            report.compared_ips,
            report.sol_violation_pct,
            report.inconsistent_pct,
            report.affected_path_pct
        );
        reports.push(report);
    }
    write_file(&out.join("consistency.csv"), &csv)?;
    let summary = serde_json::json!({
        "experiment": "consistency",
        "seed": seed,
        "sources": reports,
    });
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn eval_vp_study(seed: u64, out: &Path) -> Result<()> {
    let world = synthetic::generate(&WorldConfig::vp_study_world(seed));
    let training = TrainingConfig {
        seed,
        // per-country pools are small here; let the curves explore counts
        // up to full coverage
        instance_grid: vec![8, 16, 32, 64],
        ..TrainingConfig::default()
    };
    let outcome = pipeline::train_offline(&world.corpus, &training)?;
    let study = evalsuite::vp_study(&world, &outcome.model, &[1, 2, 4, 6, 8, 12], 5, seed)?;

    let mut csv = String::from("mode,k,singleton_rate\n");
    for point in &study.points {
        let mode = match point.mode {
            VpMode::Greedy => "greedy",
            VpMode::Random => "random",
        };
        csv.push_str(&format!("{mode},{},{}\n", point.k, point.singleton_rate));
        println!(
            "vp-study: {mode:<6} k={:<2} singleton rate {:.3}",
            point.k, point.singleton_rate
        );
    }
    write_file(&out.join("vp_study.csv"), &csv)?;
    println!("vp-study: all vantage points rate {:.3}", study.all_vp_rate);
    let summary = serde_json::json!({
        "experiment": "vp_study",
        "seed": seed,
        "all_vp_rate": study.all_vp_rate,
        "points": study.points,
    });
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn eval_detours(seed: u64, out: &Path) -> Result<()> {
    let (world, outcome) = trained_world(seed)?;
    let paths = world.gen_paths(150, seed ^ 0xDE70);

    let mut labeled = Vec::new();
    let mut skipped = 0usize;
    for (i, path) in paths.iter().enumerate() {
        match evalsuite::label_path(path, &outcome.final_predictions, format!("path-{i:03}")) {
            Ok(lp) => labeled.push(lp),
            Err(_) => skipped += 1,
        }
    }
    let records = evalsuite::detect_detours(&labeled);

    let mut csv = String::from("path_id,source_country,dest_country,detour_countries,domestic\n");
    for record in &records {
        let detours: Vec<&str> = record.detour_countries.iter().map(|c| c.as_str()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            record.path_id,
            record.source_country,
            record.dest_country,
            detours.join(";"),
            record.domestic
        ));
    }
    write_file(&out.join("detours.csv"), &csv)?;
    let summary = serde_json::json!({
        "experiment": "detours",
        "seed": seed,
        "paths": paths.len(),
        "fully_resolved": labeled.len(),
        "skipped_non_singleton": skipped,
        "detour_records": records.len(),
        "domestic_detours": records.iter().filter(|r| r.domestic).count(),
    });
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "detours: {} records over {} fully-resolved paths ({} skipped)",
        records.len(),
        labeled.len(),
        skipped
    );
    Ok(())
}
