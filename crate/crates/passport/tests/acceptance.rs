//! Acceptance suite: every release criterion, run in sequence, one
//! pass/fail line per criterion.
//!
//! Expected values follow the oracle-first rule: brute-force or
//! closed-form references live in this file (and tests/common), computed
//! independently of the library code paths they check.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use passport::corpus::CountryCode;
use passport::dtree::{self, DecisionTree, TreeParams};
use passport::ensemble::LabelCodec;
use passport::evalsuite::{self, generate, DetourRecord, LabeledPath, WorldConfig};
use passport::features::{self, CategoryDictionary, FeatureConfig};
use passport::pipeline::{self, TrainingConfig};
use passport::sol::{self, VpMode};

type Criterion = fn() -> Result<String, String>;

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 sol-oracle-equivalence", criterion_1),
        ("2 geometry-constants", criterion_2),
        ("3 decision-tree-soundness", criterion_3),
        ("4 union-semantics", criterion_4),
        ("5 pipeline-precision-improvement", criterion_5),
        ("6 poisoning-resilience", criterion_6),
        ("7 vp-selection", criterion_7),
        ("8 efficiency", criterion_8),
        ("9 detour-detection", criterion_9),
        ("10 train-determinism", criterion_10),
    ];

    let mut failures = Vec::new();
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|payload| {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            Err(format!("panicked: {message}"))
        });
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => {
                println!("[acceptance] criterion {name}: PASS ({elapsed:.1}s) — {detail}");
            }
            Err(detail) => {
                println!("[acceptance] criterion {name}: FAIL ({elapsed:.1}s) — {detail}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}

fn check(condition: bool, message: String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message)
    }
}

/// SoL oracle equivalence: the feasibility test agrees with the 0.5°-grid
/// brute-force oracle on >= 99% of 500 randomized (cap-set, country)
/// fixtures; disagreements stay within the 25 km slack band; under a
/// minute of runtime.
fn criterion_1() -> Result<String, String> {
    let started = Instant::now();
    let world = generate(&WorldConfig::default_world(1));
    let boundaries = &world.corpus.boundaries;
    let fixtures = common::random_fixtures(boundaries, 500, 17);

    let mut disagreements = 0usize;
    for fixture in &fixtures {
        let boundary = boundaries.get(fixture.country).unwrap();
        let ours = sol::country_feasible(boundary, &fixture.caps, sol::DEFAULT_SLACK_KM);
        let oracle = common::grid_oracle_feasible(boundary, &fixture.caps);
        if ours == oracle {
            continue;
        }
        disagreements += 1;
        // a feasibility miss (oracle yes, ours no) would be outside any
        // slack band; over-acceptances must vanish once the slack is
        // removed, or be grid-quantization artifacts of the oracle
        check(
            ours && !oracle,
            format!("feasibility miss on {}", fixture.country),
        )?;
        let without_slack = sol::country_feasible(boundary, &fixture.caps, 0.0);
        let slack_needed = !without_slack;
        // within the band either way: decision flipped by <= 25 km of
        // slack, or a true sliver region the 0.5° oracle grid missed
        check(
            slack_needed || !oracle,
            "disagreement outside the slack band".to_string(),
        )?;
    }
    let agreement = 1.0 - disagreements as f64 / fixtures.len() as f64;
    check(
        agreement >= 0.99,
        format!("agreement {agreement:.4} below 0.99"),
    )?;
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(60),
        format!("runtime {elapsed:?} exceeds one minute"),
    )?;
    Ok(format!(
        "agreement {:.1}% over 500 fixtures, {} in-band disagreements",
        agreement * 100.0,
        disagreements
    ))
}

/// Geometry constants: radius(100 ms) = 7,045.12 km ± 0.01 under 0.47c,
/// and twice that radius stays under 40% of the earth's circumference.
fn criterion_2() -> Result<String, String> {
    let radius = sol::propagation_radius_km(100.0);
    check(
        (radius - 7_045.12).abs() <= 0.01,
        format!("radius(100 ms) = {radius}"),
    )?;
    let diameter = 2.0 * radius;
    let bound = 0.4 * 40_075.017;
    check(
        diameter < bound,
        format!("diameter {diameter} not under {bound}"),
    )?;
    // the checked operation also enforces the cutoff itself
    check(
        sol::radius_km(100.0).is_err() && sol::radius_km(99.99).is_ok(),
        "cutoff behavior wrong".to_string(),
    )?;
    Ok(format!("radius(100ms) = {radius:.2} km, diameter under {bound:.0} km"))
}

/// Decision-tree soundness: full training accuracy on consistent data for
/// 100 seeds, importances sum to 1 ± 1e-9, and serialization preserves
/// every prediction on 10,000 random rows.
fn criterion_3() -> Result<String, String> {
    // labels are a deterministic function of the features, so any dataset
    // drawn this way is consistent by construction
    let mut trees_with_splits = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..5).map(|_| rng.gen_range(0..6) as f64).collect())
            .collect();
        let labels: Vec<u32> = rows
            .iter()
            .map(|row| {
                let mix = row.iter().fold(7u32, |acc, &v| {
                    acc.wrapping_mul(31).wrapping_add(v as u32)
                });
                mix % 5
            })
            .collect();
        let tree = DecisionTree::fit(&rows, &labels, &TreeParams::default())
            .map_err(|e| e.to_string())?;
        let accuracy = dtree::accuracy(&tree, &rows, &labels);
        check(
            accuracy == 1.0,
            format!("seed {seed}: training accuracy {accuracy}"),
        )?;
        let report = tree.importance().map_err(|e| e.to_string())?;
        if report.has_splits {
            trees_with_splits += 1;
            check(
                (report.sum() - 1.0).abs() <= 1e-9,
                format!("seed {seed}: importance sum {}", report.sum()),
            )?;
        }
    }
    check(trees_with_splits > 90, "too few non-trivial trees".to_string())?;

    // serialization round trip at scale
    let mut rng = ChaCha8Rng::seed_from_u64(424_242);
    let rows: Vec<Vec<f64>> = (0..2_000)
        .map(|_| (0..8).map(|_| rng.gen_range(-100.0..100.0)).collect())
        .collect();
    let labels: Vec<u32> = (0..2_000).map(|_| rng.gen_range(0..8)).collect();
    let tree = DecisionTree::fit(&rows, &labels, &TreeParams::default())
        .map_err(|e| e.to_string())?;
    let reloaded = DecisionTree::from_json(&tree.to_json()).map_err(|e| e.to_string())?;
    for i in 0..10_000 {
        let probe: Vec<f64> = (0..8).map(|_| rng.gen_range(-120.0..120.0)).collect();
        let a = tree.predict(&probe).map_err(|e| e.to_string())?;
        let b = reloaded.predict(&probe).map_err(|e| e.to_string())?;
        check(a == b, format!("probe {i}: {a} vs {b} after round trip"))?;
    }
    Ok(format!(
        "100 seeds at full training accuracy ({trees_with_splits} non-trivial), importances normalized, 10k-row round trip exact"
    ))
}

/// Union semantics: the ensemble's set prediction contains every member
/// prediction on 1,000 random rows, and its recall of the true country is
/// at least every member's recall on a labeled corpus.
fn criterion_4() -> Result<String, String> {
    let mut config = WorldConfig::default_world(23);
    config.routers = 300;
    let world = generate(&config);
    let outcome = pipeline::train_offline(
        &world.corpus,
        &TrainingConfig {
            seed: 23,
            ..TrainingConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let ensemble = &outcome.model.ensemble;

    // superset property on randomized rows
    let mut rng = ChaCha8Rng::seed_from_u64(4_000);
    let width = FeatureConfig::default().row_width();
    for _ in 0..1_000 {
        let row: Vec<f64> = (0..width)
            .map(|col| match col {
                0 | 1 => rng.gen_range(0.0..u32::MAX as f64),
                16 | 17 => rng.gen_range(0.0..100_000.0),
                _ => rng.gen_range(0.0..40.0),
            })
            .collect();
        let set = ensemble.predict_codes(&row).map_err(|e| e.to_string())?;
        check(!set.is_empty(), "empty union".to_string())?;
        check(
            set.len() <= ensemble.members.len(),
            "union exceeds member count".to_string(),
        )?;
        for member in &ensemble.members {
            let solo = member.tree.predict(&row).map_err(|e| e.to_string())?;
            check(
                set.contains(&solo),
                format!("member prediction {solo} not in union {set:?}"),
            )?;
        }
    }

    // recall property on the labeled corpus
    let labeled: Vec<_> = world.corpus.ground_truth.iter().collect();
    let dictionary = &ensemble.dictionary;
    let feature_config = outcome.model.feature_config;
    let mut union_recall = 0usize;
    let mut member_recall = vec![0usize; ensemble.members.len()];
    for label in &labeled {
        let raw = features::assemble(label.ip, &world.corpus);
        let row = features::encode(&raw, dictionary, &feature_config);
        let code = ensemble.codec.code(label.country).ok_or("label country missing")?;
        let set = ensemble.predict_codes(&row).map_err(|e| e.to_string())?;
        if set.contains(&code) {
            union_recall += 1;
        }
        for (i, member) in ensemble.members.iter().enumerate() {
            if member.tree.predict(&row).ok() == Some(code) {
                member_recall[i] += 1;
            }
        }
    }
    for (i, &recall) in member_recall.iter().enumerate() {
        check(
            union_recall >= recall,
            format!("member {i} recall {recall} exceeds union {union_recall}"),
        )?;
    }
    Ok(format!(
        "superset holds on 1,000 rows; union recall {union_recall}/{} >= members {member_recall:?}",
        labeled.len()
    ))
}

/// Pipeline precision: on the default synthetic world the final singleton
/// fraction reaches 0.80, strictly exceeds the ensemble-only singleton
/// fraction, and refinement converges within three rounds.
fn criterion_5() -> Result<String, String> {
    let world = generate(&WorldConfig::default_world(42));
    let two_plus = world.two_plus_cap_fraction();
    check(
        (0.53..0.73).contains(&two_plus),
        format!("two-plus-cap fraction {two_plus:.3} off the configured 0.63"),
    )?;

    let outcome = pipeline::train_offline(&world.corpus, &TrainingConfig::default())
        .map_err(|e| e.to_string())?;
    let final_singleton = outcome
        .final_predictions
        .values()
        .filter(|p| p.final_set.len() == 1)
        .count() as f64
        / outcome.final_predictions.len() as f64;
    let ensemble_only = outcome
        .initial_predictions
        .values()
        .filter(|p| p.ensemble_set.len() == 1)
        .count() as f64
        / outcome.initial_predictions.len() as f64;

    check(
        final_singleton >= 0.80,
        format!("final singleton fraction {final_singleton:.3} < 0.80"),
    )?;
    check(
        final_singleton > ensemble_only,
        format!("no improvement: final {final_singleton:.3} vs ensemble {ensemble_only:.3}"),
    )?;
    check(outcome.converged, "refinement did not converge".to_string())?;
    check(
        outcome.refinement_iterations <= 3,
        format!("{} refinement iterations", outcome.refinement_iterations),
    )?;
    Ok(format!(
        "singleton {:.1}% vs ensemble-only {:.1}%, converged in {} refinement round(s), 2+ caps for {:.0}% of routers",
        final_singleton * 100.0,
        ensemble_only * 100.0,
        outcome.refinement_iterations,
        two_plus * 100.0
    ))
}

/// Poisoning resilience: on the redundant-feature corpus, 10% label
/// poisoning costs at most 5 points of 10-fold CV accuracy and 20% at
/// most 10; the outcome fractions always sum to 1.
fn criterion_6() -> Result<String, String> {
    let world = generate(&WorldConfig::redundant_world(42));
    let (rows, codes) = encode_world(&world);
    let params = evalsuite::poison_params();

    let baseline = evalsuite::poison_experiment(&rows, &codes, 0.0, 42, &params)
        .map_err(|e| e.to_string())?;
    check(
        (baseline.sum() - 1.0).abs() <= 1e-9,
        "baseline fractions do not sum to 1".to_string(),
    )?;
    check(
        baseline.predicted_poisoned == 0.0,
        "baseline has poisoned echoes".to_string(),
    )?;

    let mut details = vec![format!("baseline {:.3}", baseline.correct)];
    for (p, max_drop) in [(0.10, 0.05), (0.20, 0.10)] {
        let report = evalsuite::poison_experiment(&rows, &codes, p, 42, &params)
            .map_err(|e| e.to_string())?;
        check(
            (report.sum() - 1.0).abs() <= 1e-9,
            format!("fractions at p={p} sum to {}", report.sum()),
        )?;
        let drop = baseline.correct - report.correct;
        check(
            drop <= max_drop,
            format!("p={p}: drop {drop:.3} exceeds {max_drop}"),
        )?;
        details.push(format!("p={p}: {:.3} (drop {:.3})", report.correct, drop));
    }
    Ok(details.join(", "))
}

/// Vantage-point selection: greedy k=1 equals the all-VP singleton rate,
/// random mode is nondecreasing in k, and random k=6 reaches 99% of the
/// all-VP rate.
fn criterion_7() -> Result<String, String> {
    let world = generate(&WorldConfig::vp_study_world(42));
    check(
        world.vps.len() >= 8,
        format!("only {} vantage points", world.vps.len()),
    )?;
    let outcome = pipeline::train_offline(
        &world.corpus,
        &TrainingConfig {
            seed: 42,
            instance_grid: vec![8, 16, 32, 64],
            ..TrainingConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let study = evalsuite::vp_study(&world, &outcome.model, &[1, 2, 4, 6, 8, 12], 5, 42)
        .map_err(|e| e.to_string())?;

    let greedy_one = study.rate(VpMode::Greedy, 1).ok_or("missing greedy k=1")?;
    check(
        greedy_one == study.all_vp_rate,
        format!("greedy k=1 {greedy_one:.4} != all-VP {:.4}", study.all_vp_rate),
    )?;

    let random_rates: Vec<f64> = [1, 2, 4, 6, 8, 12]
        .iter()
        .map(|&k| study.rate(VpMode::Random, k).unwrap())
        .collect();
    for pair in random_rates.windows(2) {
        check(
            pair[1] >= pair[0] - 1e-12,
            format!("random curve decreases: {random_rates:?}"),
        )?;
    }
    let random_six = study.rate(VpMode::Random, 6).unwrap();
    check(
        random_six >= 0.99 * study.all_vp_rate,
        format!(
            "random k=6 {random_six:.4} under 99% of all-VP {:.4}",
            study.all_vp_rate
        ),
    )?;
    Ok(format!(
        "greedy k=1 = all-VP = {:.3}; random curve {:?} (k=6 at {:.1}% of all-VP)",
        study.all_vp_rate,
        random_rates.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        100.0 * random_six / study.all_vp_rate
    ))
}

/// Efficiency: a single tree fits 100k 18-feature rows within 60 s, and
/// the warm service sustains 350 concurrent predictions with p99 under
/// 100 ms.
fn criterion_8() -> Result<String, String> {
    // classifier fit at scale
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let n = 100_000usize;
    let width = 18usize;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_range(0..30u32);
        let mut row: Vec<f64> = (0..width).map(|_| rng.gen_range(0.0..50.0)).collect();
        // a few informative columns so the fit resembles real corpora
        row[2] = label as f64 + rng.gen_range(-0.3..0.3);
        row[8] = (label % 7) as f64 * 10.0 + rng.gen_range(0.0..5.0);
        row[0] = rng.gen_range(0.0..u32::MAX as f64);
        labels.push(label);
        rows.push(row);
    }
    let started = Instant::now();
    let tree = DecisionTree::fit(&rows, &labels, &TreeParams::default())
        .map_err(|e| e.to_string())?;
    let fit_time = started.elapsed();
    check(
        fit_time <= Duration::from_secs(60),
        format!("100k-row fit took {fit_time:?}"),
    )?;
    check(tree.node_count() > 1, "degenerate tree".to_string())?;

    // concurrent service latency
    let p99 = service_load_p99().map_err(|e| e.to_string())?;
    check(
        p99 < Duration::from_millis(100),
        format!("p99 latency {p99:?} over 350 concurrent requests"),
    )?;
    Ok(format!(
        "100k-row fit in {:.1}s; 350-way concurrent p99 {:?}",
        fit_time.as_secs_f64(),
        p99
    ))
}

fn service_load_p99() -> passport::Result<Duration> {
    use passport::service::{http, Engine, ServiceConfig, ServiceState};
    use std::io::{Read, Write};

    let mut config = WorldConfig::default_world(314);
    config.routers = 240;
    config.grid_rows = 3;
    config.grid_cols = 4;
    let world = generate(&config);
    let outcome = pipeline::train_offline(
        &world.corpus,
        &TrainingConfig {
            seed: 314,
            ..TrainingConfig::default()
        },
    )?;
    let state = ServiceState::new(
        Some(std::sync::Arc::new(Engine {
            corpus: world.corpus.clone(),
            model: outcome.model,
        })),
        ServiceConfig {
            cache_ttl: Duration::from_secs(3600),
            detail_capacity: 10_000,
            workers: 8,
        },
    );
    let addr = http::serve_background(state)?;

    let ip = world.routers[0];
    let body = format!("{{\"ip\": \"{ip}\"}}");
    let message = std::sync::Arc::new(format!(
        "POST /v1/predict HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    ));

    // warm the cache first
    {
        let mut stream = std::net::TcpStream::connect(addr).unwrap();
        stream.write_all(message.as_bytes()).unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).unwrap();
        assert!(response.starts_with("HTTP/1.1 200"), "warmup: {response}");
    }

    // 350 requests in flight at once, driven by a handful of client
    // threads so the measurement is not dominated by client-side
    // scheduling on small machines: each thread opens and writes its
    // whole batch (putting every request in flight), then collects the
    // responses
    let burst = |_round: usize| -> Vec<Duration> {
        let clients = 5usize;
        let per_client = 70usize;
        let barrier = std::sync::Arc::new(std::sync::Barrier::new(clients));
        let mut handles = Vec::new();
        for _ in 0..clients {
            let barrier = std::sync::Arc::clone(&barrier);
            let message = std::sync::Arc::clone(&message);
            handles.push(std::thread::spawn(move || -> Vec<Duration> {
                barrier.wait();
                let mut in_flight = Vec::with_capacity(per_client);
                for _ in 0..per_client {
                    let started = Instant::now();
                    let mut stream = std::net::TcpStream::connect(addr).unwrap();
                    stream.set_nodelay(true).ok();
                    stream.write_all(message.as_bytes()).unwrap();
                    in_flight.push((started, stream));
                }
                in_flight
                    .into_iter()
                    .map(|(started, mut stream)| {
                        let mut response = String::new();
                        stream.read_to_string(&mut response).unwrap();
                        assert!(response.starts_with("HTTP/1.1 200"), "response: {response}");
                        started.elapsed()
                    })
                    .collect()
            }));
        }
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    };

    // one burst to settle allocator and socket state, then the measured one
    burst(0);
    let mut latencies = burst(1);
    assert_eq!(latencies.len(), 350);
    latencies.sort();
    Ok(latencies[(latencies.len() * 99 / 100).min(latencies.len() - 1)])
}

/// Detour detection: a 50-path labeled fixture with planted detours,
/// including a domestic source=destination case, is recovered exactly.
fn criterion_9() -> Result<String, String> {
    let cc = |s: &str| CountryCode::parse(s).unwrap();
    let pool: Vec<CountryCode> = ["US", "CA", "DE", "FR", "GB", "JP", "BR", "RU", "IN", "ZA"]
        .iter()
        .map(|s| cc(s))
        .collect();

    let mut next_ip = 0u32;
    let mut alloc = move || {
        next_ip += 1;
        // fixture address space under 20.0.0.0/8
        passport::corpus::RouterIp::from_numeric(0x1400_0000 + next_ip)
    };

    let mut paths = Vec::new();
    let mut expected: Vec<DetourRecord> = Vec::new();

    // planted domestic detour, the CA -> CA via US pattern
    let domestic = LabeledPath {
        id: "planted-domestic".into(),
        src_country: cc("CA"),
        dst_country: cc("CA"),
        hops: vec![
            (alloc(), cc("CA")),
            (alloc(), cc("US")),
            (alloc(), cc("CA")),
        ],
    };
    expected.push(DetourRecord {
        path_id: domestic.id.clone(),
        source_country: cc("CA"),
        dest_country: cc("CA"),
        detour_countries: BTreeSet::from([cc("US")]),
        domestic: true,
    });
    paths.push(domestic);

    // 24 more planted detours with known countries
    for i in 0..24 {
        let src = pool[i % pool.len()];
        let dst = pool[(i + 3) % pool.len()];
        let mut vias = BTreeSet::new();
        for j in 0..(i % 3 + 1) {
            let via = pool[(i + 5 + 2 * j) % pool.len()];
            if via != src && via != dst {
                vias.insert(via);
            }
        }
        if vias.is_empty() {
            vias.insert(if src != pool[9] && dst != pool[9] {
                pool[9]
            } else {
                pool[4]
            });
        }
        let mut hops = vec![(alloc(), src)];
        hops.extend(vias.iter().map(|&v| (alloc(), v)));
        hops.push((alloc(), dst));
        let path = LabeledPath {
            id: format!("planted-{i:02}"),
            src_country: src,
            dst_country: dst,
            hops,
        };
        expected.push(DetourRecord {
            path_id: path.id.clone(),
            source_country: src,
            dest_country: dst,
            detour_countries: vias,
            domestic: src == dst,
        });
        paths.push(path);
    }

    // 25 clean paths staying within their endpoint countries
    for i in 0..25 {
        let src = pool[i % pool.len()];
        let dst = pool[(i + 1) % pool.len()];
        paths.push(LabeledPath {
            id: format!("clean-{i:02}"),
            src_country: src,
            dst_country: dst,
            hops: vec![(alloc(), src), (alloc(), dst), (alloc(), dst)],
        });
    }
    check(paths.len() == 50, format!("{} fixture paths", paths.len()))?;

    let mut records = evalsuite::detect_detours(&paths);
    records.sort_by(|a, b| a.path_id.cmp(&b.path_id));
    expected.sort_by(|a, b| a.path_id.cmp(&b.path_id));
    check(
        records == expected,
        format!(
            "records differ: got {} records, expected {}",
            records.len(),
            expected.len()
        ),
    )?;
    let domestic_count = records.iter().filter(|r| r.domestic).count();
    Ok(format!(
        "{} planted detours recovered exactly from 50 paths ({} domestic)",
        records.len(),
        domestic_count
    ))
}

/// Determinism: `train` with fixed seeds produces byte-identical model
/// snapshots across two runs of the CLI.
fn criterion_10() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    let run = |args: &[&str]| -> Result<(), String> {
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_passport"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if output.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&output.stderr).to_string())
        }
    };
    run(&[
        "eval",
        "gen-corpus",
        "--seed",
        "10",
        "--out",
        corpus.to_str().unwrap(),
    ])?;
    let config = corpus.join("config.toml");
    let model_a = dir.path().join("model-a");
    let model_b = dir.path().join("model-b");
    run(&["train", "--config", config.to_str().unwrap(), "--out", model_a.to_str().unwrap()])?;
    run(&["train", "--config", config.to_str().unwrap(), "--out", model_b.to_str().unwrap()])?;

    let digest_a = pipeline::snapshot_digest(&model_a).map_err(|e| e.to_string())?;
    let digest_b = pipeline::snapshot_digest(&model_b).map_err(|e| e.to_string())?;
    check(
        digest_a == digest_b,
        format!("digests differ: {digest_a:016x} vs {digest_b:016x}"),
    )?;

    // byte-level comparison, not just the digest
    let mut names = Vec::new();
    collect(&model_a, &mut names);
    for name in &names {
        let a = std::fs::read(model_a.join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(model_b.join(name)).map_err(|e| e.to_string())?;
        check(a == b, format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "two CLI runs byte-identical across {} files (digest {digest_a:016x})",
        names.len()
    ))
}

fn collect(dir: &std::path::Path, out: &mut Vec<String>) {
    fn walk(dir: &std::path::Path, base: &std::path::Path, out: &mut Vec<String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, base, out);
            } else {
                out.push(path.strip_prefix(base).unwrap().to_string_lossy().to_string());
            }
        }
    }
    walk(dir, dir, out);
    out.sort();
}

fn encode_world(world: &evalsuite::SyntheticWorld) -> (Vec<Vec<f64>>, Vec<u32>) {
    let vectors: Vec<features::FeatureVector> = world
        .routers
        .iter()
        .map(|&ip| features::assemble(ip, &world.corpus))
        .collect();
    let dict = CategoryDictionary::build(vectors.iter());
    let config = FeatureConfig::default();
    let codec = LabelCodec::from_countries(world.truth.values().copied());
    let rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| features::encode(v, &dict, &config))
        .collect();
    let codes: Vec<u32> = world
        .routers
        .iter()
        .map(|ip| codec.code(world.truth[ip]).unwrap())
        .collect();
    (rows, codes)
}
