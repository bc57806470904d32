//! The union-predicting classifier ensemble and the sampling machinery
//! behind it.
//!
//! Members are decision trees trained on complementary draws of the
//! labeled data: the full dataset, equal instance counts per country, and
//! per-country counts picked from accuracy-vs-instances curves (knee and
//! maximum-accuracy criteria under balanced or doubled allocation for the
//! other countries). Member predictions combine by set union.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CountryCode;
use crate::dtree::{CountryClassifier, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::features::CategoryDictionary;

/// Bijective map between country codes and dense class codes; class code
/// order follows sorted country order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCodec {
    countries: Vec<CountryCode>,
}

impl LabelCodec {
    pub fn from_countries(countries: impl IntoIterator<Item = CountryCode>) -> Self {
        let mut list: Vec<CountryCode> = countries.into_iter().collect();
        list.sort_unstable();
        list.dedup();
        LabelCodec { countries: list }
    }

    pub fn code(&self, country: CountryCode) -> Option<u32> {
        self.countries
            .binary_search(&country)
            .ok()
            .map(|i| i as u32)
    }

    pub fn country(&self, code: u32) -> Option<CountryCode> {
        self.countries.get(code as usize).copied()
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// Other countries contribute the same count as the target country.
    Balanced,
    /// Other countries contribute double the target count.
    Unbalanced,
}

impl Allocation {
    pub fn other_country_count(&self, target_count: usize) -> usize {
        match self {
            Allocation::Balanced => target_count,
            Allocation::Unbalanced => 2 * target_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountCriterion {
    Knee,
    MaxAccuracy,
}

// Externally tagged so the integer-keyed counts map survives JSON
// round-trips (internal tagging buffers map keys as strings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// The entire labeled dataset, unchanged.
    Default,
    /// Exactly `count` instances per country, oversampling (with
    /// replacement) countries that have fewer.
    EqualPerCountry { count: usize },
    /// Per-country counts read off accuracy-vs-instances curves.
    PerCountry {
        allocation: Allocation,
        criterion: CountCriterion,
        counts: BTreeMap<u32, usize>,
    },
    /// A uniform draw without replacement.
    Random { count: usize },
}

/// SplitMix64: cheap, well-mixed seed derivation.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn class_rng(seed: u64, class: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed) ^ mix64(class as u64))
}

/// Draw a training subset (indices into `labels`) per the strategy.
///
/// Per-country draws derive their randomness from (seed, country), so a
/// label change in one country does not perturb the draws for any other.
pub fn sample(labels: &[u32], strategy: &SamplingStrategy, seed: u64) -> Result<Vec<usize>> {
    let by_country = group_by_class(labels);

    match strategy {
        SamplingStrategy::Default => Ok((0..labels.len()).collect()),
        SamplingStrategy::EqualPerCountry { count } => {
            if *count == 0 {
                return Err(Error::Invalid("equal_per_country count must be > 0".into()));
            }
            let mut out = Vec::with_capacity(count * by_country.len());
            for (&class, indices) in &by_country {
                draw(&mut out, indices, *count, &mut class_rng(seed, class));
            }
            Ok(out)
        }
        SamplingStrategy::PerCountry { counts, .. } => {
            let mut out = Vec::new();
            for (&class, &count) in counts {
                let indices = by_country
                    .get(&class)
                    .ok_or_else(|| Error::EmptyCountry(format!("class {class}")))?;
                draw(&mut out, indices, count, &mut class_rng(seed, class));
            }
            Ok(out)
        }
        SamplingStrategy::Random { count } => {
            if *count > labels.len() {
                return Err(Error::InsufficientData(format!(
                    "random sample of {count} from {} labels",
                    labels.len()
                )));
            }
            let mut all: Vec<usize> = (0..labels.len()).collect();
            all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            all.truncate(*count);
            Ok(all)
        }
    }
}

fn group_by_class(labels: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    map
}

/// `count` draws from `pool`: without replacement when the pool is large
/// enough; otherwise every element once, topped up with replacement.
fn draw(out: &mut Vec<usize>, pool: &[usize], count: usize, rng: &mut ChaCha8Rng) {
    if pool.len() >= count {
        let mut shuffled = pool.to_vec();
        shuffled.shuffle(rng);
        out.extend_from_slice(&shuffled[..count]);
    } else {
        out.extend_from_slice(pool);
        for _ in 0..count - pool.len() {
            out.push(pool[rng.gen_range(0..pool.len())]);
        }
    }
}

/// Ceiling of the mean label count per country: the representative
/// instance count used for the equal-per-country members.
pub fn mean_instance_count(labels: &[u32]) -> usize {
    let by_country = group_by_class(labels);
    if by_country.is_empty() {
        return 0;
    }
    labels.len().div_ceil(by_country.len())
}

/// Accuracy as a function of per-country training instances, with the two
/// operating points read off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCountCurve {
    pub class: u32,
    pub points: Vec<(usize, f64)>,
    pub knee_count: usize,
    pub max_accuracy_count: usize,
}

/// Tolerance on the discrete second difference when locating the knee.
pub const KNEE_EPSILON: f64 = 0.01;

/// First grid count from which the accuracy curve's discrete second
/// difference is within `eps` of zero; the smallest grid count for flat or
/// too-short curves, the last when the curve never settles.
pub fn knee_count(grid: &[usize], accuracies: &[f64], eps: f64) -> usize {
    assert_eq!(grid.len(), accuracies.len());
    if grid.len() < 3 {
        return grid[0];
    }
    for j in 0..grid.len() - 2 {
        let d2 = accuracies[j + 2] - 2.0 * accuracies[j + 1] + accuracies[j];
        // tiny slop absorbs rounding in the difference itself
        if d2.abs() <= eps + 1e-9 {
            return grid[j];
        }
    }
    grid[grid.len() - 1]
}

/// Minimal grid count attaining the maximum accuracy on the grid.
pub fn min_count_attaining_max(grid: &[usize], accuracies: &[f64]) -> usize {
    let max = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (count, acc) in grid.iter().zip(accuracies) {
        if *acc == max {
            return *count;
        }
    }
    grid[0]
}

/// Measure per-country accuracy as a function of the target country's
/// training instance count. A fixed seeded 80/20 split holds out target
/// instances for measurement; other countries contribute instances per the
/// allocation scheme.
#[allow(clippy::too_many_arguments)]
pub fn instance_curve(
    class: u32,
    rows: &[Vec<f64>],
    labels: &[u32],
    grid: &[usize],
    allocation: Allocation,
    seed: u64,
    params: &TreeParams,
) -> Result<InstanceCountCurve> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "instance grid must be nonempty and strictly increasing".into(),
        ));
    }
    let by_country = group_by_class(labels);
    let target_pool = by_country
        .get(&class)
        .ok_or_else(|| Error::EmptyCountry(format!("class {class}")))?;
    if target_pool.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "class {class} has {} labels, need at least 2 for a held-out split",
            target_pool.len()
        )));
    }

    // fixed held-out 20% of the target country's instances (at least one)
    let mut shuffled_target = target_pool.clone();
    shuffled_target.shuffle(&mut class_rng(seed, class));
    let held_out_len = (shuffled_target.len() / 5).max(1);
    let (held_out, target_train) = shuffled_target.split_at(held_out_len);

    let mut points = Vec::with_capacity(grid.len());
    for &count in grid {
        let count_seed = mix64(seed) ^ mix64(count as u64);
        let mut train_idx: Vec<usize> = Vec::new();
        draw(
            &mut train_idx,
            target_train,
            count,
            &mut class_rng(count_seed, class),
        );
        let other_count = allocation.other_country_count(count);
        for (&other, indices) in &by_country {
            if other == class {
                continue;
            }
            draw(
                &mut train_idx,
                indices,
                other_count,
                &mut class_rng(count_seed ^ mix64(class as u64), other),
            );
        }
        let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
        let train_labels: Vec<u32> = train_idx.iter().map(|&i| labels[i]).collect();
        let tree = DecisionTree::fit(&train_rows, &train_labels, params)?;
        let correct = held_out
            .iter()
            .filter(|&&i| tree.predict(&rows[i]).ok() == Some(class))
            .count();
        points.push((count, correct as f64 / held_out.len() as f64));
    }

    let accuracies: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(InstanceCountCurve {
        class,
        knee_count: knee_count(grid, &accuracies, KNEE_EPSILON),
        max_accuracy_count: min_count_attaining_max(grid, &accuracies),
        points,
    })
}

/// A trained candidate for ensemble selection.
#[derive(Debug, Clone)]
pub struct TrainedCandidate {
    pub tree: DecisionTree,
    pub strategy: SamplingStrategy,
    pub seed: u64,
}

impl CountryClassifier for TrainedCandidate {
    fn predict_code(&self, row: &[f64]) -> Result<u32> {
        self.tree.predict(row)
    }
}

/// Union of the members' predictions for one row.
pub fn predict_set<C: CountryClassifier>(members: &[&C], row: &[f64]) -> Result<BTreeSet<u32>> {
    let mut set = BTreeSet::new();
    for member in members {
        set.insert(member.predict_code(row)?);
    }
    Ok(set)
}

/// Mean per-country fraction of rows whose union prediction contains the
/// true class. This is the selection metric for ensemble construction: it
/// is monotone under adding members, so gains measure genuine coverage.
pub fn union_containment_accuracy<C: CountryClassifier>(
    members: &[&C],
    rows: &[Vec<f64>],
    labels: &[u32],
) -> f64 {
    if members.is_empty() || rows.is_empty() {
        return 0.0;
    }
    let mut per_country: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (row, &label) in rows.iter().zip(labels) {
        let entry = per_country.entry(label).or_insert((0, 0));
        entry.1 += 1;
        let contained = members
            .iter()
            .any(|m| m.predict_code(row).ok() == Some(label));
        if contained {
            entry.0 += 1;
        }
    }
    let sum: f64 = per_country
        .values()
        .map(|&(correct, total)| correct as f64 / total as f64)
        .sum();
    sum / per_country.len() as f64
}

/// How member selection terminates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStop {
    /// Stop when the marginal accuracy gain drops below the threshold.
    GainThreshold(f64),
    /// Select exactly this many members (fewer only if the pool is small).
    MemberCount(usize),
}

/// Default marginal-gain threshold: half a point of mean per-country
/// accuracy.
pub const DEFAULT_GAIN_THRESHOLD: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Indices into the candidate list, in selection order.
    pub selected: Vec<usize>,
    /// Validation accuracy after each selection step.
    pub accuracy_trace: Vec<f64>,
}

/// Greedy forward selection maximizing the union's mean per-country
/// accuracy on a validation set.
pub fn build_ensemble<C: CountryClassifier>(
    candidates: &[C],
    val_rows: &[Vec<f64>],
    val_labels: &[u32],
    stop: SelectionStop,
) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut accuracy_trace: Vec<f64> = Vec::new();
    let mut current = 0.0f64;

    loop {
        if let SelectionStop::MemberCount(cap) = stop {
            if selected.len() >= cap {
                break;
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, candidate) in candidates.iter().enumerate() {
            if selected.contains(&i) {
                continue;
            }
            let mut members: Vec<&C> = selected.iter().map(|&j| &candidates[j]).collect();
            members.push(candidate);
            let acc = union_containment_accuracy(&members, val_rows, val_labels);
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((i, acc));
            }
        }
        let Some((winner, acc)) = best else { break };
        let gain = acc - current;
        match stop {
            SelectionStop::GainThreshold(threshold) => {
                if !selected.is_empty() && gain < threshold {
                    break;
                }
            }
            SelectionStop::MemberCount(_) => {}
        }
        selected.push(winner);
        accuracy_trace.push(acc);
        current = acc;
    }

    if selected.is_empty() {
        // a single candidate always forms an ensemble of one
        selected.push(0);
        accuracy_trace.push(union_containment_accuracy(
            &[&candidates[0]],
            val_rows,
            val_labels,
        ));
    }
    Ok(SelectionOutcome {
        selected,
        accuracy_trace,
    })
}

/// The number of equal-per-country candidates in the standard pool.
pub const EQUAL_CANDIDATES: usize = 6;

/// The assembled ensemble: an ordered member list plus the shared feature
/// dictionary and label codec. Immutable once built.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub members: Vec<TrainedCandidate>,
    pub dictionary: CategoryDictionary,
    pub codec: LabelCodec,
}

impl Ensemble {
    /// Union of member predictions, as class codes. Never empty for a
    /// nonempty ensemble.
    pub fn predict_codes(&self, row: &[f64]) -> Result<BTreeSet<u32>> {
        let refs: Vec<&TrainedCandidate> = self.members.iter().collect();
        predict_set(&refs, row)
    }

    /// Union of member predictions, as countries.
    pub fn predict_countries(&self, row: &[f64]) -> Result<BTreeSet<CountryCode>> {
        Ok(self
            .predict_codes(row)?
            .into_iter()
            .filter_map(|code| self.codec.country(code))
            .collect())
    }
}
