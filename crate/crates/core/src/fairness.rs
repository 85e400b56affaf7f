//! Disputable instances, individual-fairness verdicts, ambiguity, discrepancy
//! and the favourable-class-wins ensemble, all computed per performance band.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banding::PerformanceBand;
use crate::error::{Error, Result};
use crate::prediction::{
    confusion_matrix, ConfusionMatrix, LabelVector, MetricKind, ModelRun, PredictionVector, RunSet,
};
use crate::ratio::{ExactRatio, SignedRatio};

/// Default number of runs retained when sampling a band for discrepancy.
pub const DEFAULT_DISCREPANCY_CAP: usize = 500;

fn members<'a>(band: &PerformanceBand, set: &'a RunSet) -> Result<Vec<&'a ModelRun>> {
    if band.is_empty() {
        return Err(Error::EmptyBand);
    }
    set.resolve(band.runs())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputedInstance {
    pub instance_id: String,
    /// Members predicting the favourable class.
    pub favourable: usize,
    /// Members predicting the unfavourable class.
    pub unfavourable: usize,
}

/// Fairness-set instances on which at least two band members disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisputableSet {
    pub band_label: String,
    /// Disputed instances in fairness-index order.
    pub instances: Vec<DisputedInstance>,
    /// Positions of the disputed instances in the fairness index.
    pub positions: Vec<usize>,
    pub index_size: usize,
}

impl DisputableSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.instances.iter().map(|d| d.instance_id.as_str())
    }

    pub fn contains(&self, instance_id: &str) -> bool {
        self.instances.iter().any(|d| d.instance_id == instance_id)
    }
}

pub fn disputable_instances(band: &PerformanceBand, set: &RunSet) -> Result<DisputableSet> {
    let runs = members(band, set)?;
    let index = set.fairness_index();
    let total = runs.len();
    let votes: Vec<(usize, usize)> = (0..index.len())
        .into_par_iter()
        .filter_map(|i| {
            let favourable = runs
                .iter()
                .filter(|r| r.preds_fairness().preds()[i])
                .count();
            (favourable > 0 && favourable < total).then_some((i, favourable))
        })
        .collect();
    let ids = index.ids();
    Ok(DisputableSet {
        band_label: band.label(),
        instances: votes
            .iter()
            .map(|&(i, fav)| DisputedInstance {
                instance_id: ids[i].clone(),
                favourable: fav,
                unfavourable: total - fav,
            })
            .collect(),
        positions: votes.iter().map(|&(i, _)| i).collect(),
        index_size: index.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum FairnessVerdict {
    Fair,
    Unfair {
        witness_run: String,
        instance_id: String,
    },
}

/// A run is fair when every other band member predicts identically on the
/// whole fairness set. Otherwise the first disagreeing (run, instance) pair
/// in run-id then index order is returned as a witness.
pub fn is_individually_fair(
    run_id: &str,
    band: &PerformanceBand,
    set: &RunSet,
) -> Result<FairnessVerdict> {
    if !band.contains(run_id) {
        return Err(Error::RunNotInBand {
            run_id: run_id.to_string(),
            band: band.label(),
        });
    }
    let subject = set.get(run_id)?;
    for other in members(band, set)? {
        if other.run_id() == run_id {
            continue;
        }
        let pos = subject
            .preds_fairness()
            .preds()
            .iter()
            .zip(other.preds_fairness().preds())
            .position(|(a, b)| a != b);
        if let Some(pos) = pos {
            return Ok(FairnessVerdict::Unfair {
                witness_run: other.run_id().to_string(),
                instance_id: set.fairness_index().ids()[pos].clone(),
            });
        }
    }
    Ok(FairnessVerdict::Fair)
}

/// Share of fairness-set instances that are disputable within the band.
pub fn ambiguity(band: &PerformanceBand, set: &RunSet) -> Result<ExactRatio> {
    let d = disputable_instances(band, set)?;
    ExactRatio::new(d.len() as u64, d.index_size as u64)
}

/// Pairwise disagreement among (a sample of) band members.
///
/// Fractions share the denominator `instances`, so they are stored as raw
/// disagreement counts; [`DiscrepancyStats::pair_fractions`] gives the ratios.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscrepancyStats {
    pub band_size: usize,
    pub sampled_runs: usize,
    pub seed: u64,
    pub instances: usize,
    /// Disagreement count per unordered pair `(i, j)`, `i < j`, over the
    /// sampled runs sorted by run id.
    pub pair_disagreements: Vec<u64>,
    /// The band has a single run, so no pair exists.
    pub single_run: bool,
    pub min: Option<ExactRatio>,
    pub max: Option<ExactRatio>,
    pub mean: Option<ExactRatio>,
}

impl DiscrepancyStats {
    pub fn pair_fractions(&self) -> Vec<ExactRatio> {
        self.pair_disagreements
            .iter()
            .map(|&c| ExactRatio::new(c, self.instances as u64).expect("count within index size"))
            .collect()
    }

    pub fn pair_count(&self) -> usize {
        self.pair_disagreements.len()
    }

    /// All sampled members agree everywhere (and there are at least two).
    pub fn all_identical(&self) -> bool {
        !self.single_run && self.pair_disagreements.iter().all(|&c| c == 0)
    }
}

fn pack(preds: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; preds.len().div_ceil(64)];
    for (i, &p) in preds.iter().enumerate() {
        if p {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// Indices of the runs kept for discrepancy: all of them when the band fits
/// under `cap`, otherwise a seeded sample without replacement, returned in
/// ascending order.
pub fn sample_runs(band_size: usize, cap: usize, seed: u64) -> Vec<usize> {
    if band_size <= cap {
        return (0..band_size).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, band_size, cap).into_vec();
    picked.sort_unstable();
    picked
}

pub fn discrepancy(
    band: &PerformanceBand,
    set: &RunSet,
    cap: usize,
    seed: u64,
) -> Result<DiscrepancyStats> {
    let runs = members(band, set)?;
    if runs.len() >= 2 && cap < 2 {
        return Err(Error::InvalidCap {
            cap,
            band_size: runs.len(),
        });
    }
    let instances = set.fairness_index().len();
    let kept = sample_runs(runs.len(), cap, seed);
    let packed: Vec<Vec<u64>> = kept
        .iter()
        .map(|&i| pack(runs[i].preds_fairness().preds()))
        .collect();
    let m = packed.len();
    let pair_disagreements: Vec<u64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let packed = &packed;
            (i + 1..m).map(move |j| {
                packed[i]
                    .iter()
                    .zip(&packed[j])
                    .map(|(a, b)| (a ^ b).count_ones() as u64)
                    .sum::<u64>()
            })
        })
        .collect();

    let n = instances as u64;
    let (min, max, mean) = if pair_disagreements.is_empty() {
        (None, None, None)
    } else {
        let lo = *pair_disagreements.iter().min().unwrap();
        let hi = *pair_disagreements.iter().max().unwrap();
        let sum: u64 = pair_disagreements.iter().sum();
        (
            Some(ExactRatio::new(lo, n)?),
            Some(ExactRatio::new(hi, n)?),
            Some(ExactRatio::new(sum, n * pair_disagreements.len() as u64)?),
        )
    };
    Ok(DiscrepancyStats {
        band_size: runs.len(),
        sampled_runs: m,
        seed,
        instances,
        pair_disagreements,
        single_run: runs.len() == 1,
        min,
        max,
        mean,
    })
}

/// Metrics of one classifier on a labelled index. Recall and specificity are
/// `None` when the labels contain no instance of the relevant class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: ExactRatio,
    pub recall: Option<ExactRatio>,
    pub specificity: Option<ExactRatio>,
}

impl ClassifierMetrics {
    pub fn evaluate(preds: &PredictionVector, labels: &LabelVector) -> Result<Self> {
        let confusion = confusion_matrix(preds, labels)?;
        Ok(Self {
            accuracy: confusion.metric(MetricKind::Accuracy)?,
            recall: confusion.metric(MetricKind::Recall).ok(),
            specificity: confusion.metric(MetricKind::Specificity).ok(),
            confusion,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberDelta {
    pub run_id: String,
    /// `metric(f*) - metric(member)`.
    pub accuracy: SignedRatio,
    pub recall: Option<SignedRatio>,
    pub specificity: Option<SignedRatio>,
}

/// f* evaluated against the members on one labelled index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleEvaluation {
    pub index: String,
    pub fstar: ClassifierMetrics,
    pub deltas: Vec<MemberDelta>,
}

#[derive(Clone, Debug)]
pub struct FairEnsembleReport {
    pub band_label: String,
    /// f* on the fairness set.
    pub fstar_preds: PredictionVector,
    /// f* on the performance validation set.
    pub fstar_validation: PredictionVector,
    pub validation: EnsembleEvaluation,
    /// Present when the fairness set is distinct from the validation set and
    /// carries labels.
    pub fairness: Option<EnsembleEvaluation>,
}

/// Per-instance maximum over the given prediction vectors.
pub fn favourable_max<'a, I>(vectors: I) -> Option<Vec<bool>>
where
    I: IntoIterator<Item = &'a [bool]>,
{
    let mut it = vectors.into_iter();
    let mut acc = it.next()?.to_vec();
    for v in it {
        for (a, &b) in acc.iter_mut().zip(v) {
            *a |= b;
        }
    }
    Some(acc)
}

fn evaluate_ensemble(
    index_name: &str,
    fstar: &PredictionVector,
    members: &[(&str, &PredictionVector)],
    labels: &LabelVector,
) -> Result<EnsembleEvaluation> {
    let fstar_metrics = ClassifierMetrics::evaluate(fstar, labels)?;
    let mut deltas = Vec::with_capacity(members.len());
    for (run_id, preds) in members {
        let m = ClassifierMetrics::evaluate(preds, labels)?;
        let delta = MemberDelta {
            run_id: run_id.to_string(),
            accuracy: fstar_metrics.accuracy.sub(&m.accuracy),
            recall: fstar_metrics.recall.zip(m.recall).map(|(a, b)| a.sub(&b)),
            specificity: fstar_metrics
                .specificity
                .zip(m.specificity)
                .map(|(a, b)| a.sub(&b)),
        };
        // f* only ever turns predictions favourable, so recall cannot drop
        // and specificity cannot rise.
        if delta.recall.is_some_and(|d| d.signum() < 0)
            || delta.specificity.is_some_and(|d| d.signum() > 0)
        {
            return Err(Error::Invariant(format!(
                "fair ensemble on `{index_name}` violates recall/specificity bounds against run `{run_id}`"
            )));
        }
        deltas.push(delta);
    }
    Ok(EnsembleEvaluation {
        index: index_name.to_string(),
        fstar: fstar_metrics,
        deltas,
    })
}

/// Builds f*, which grants the favourable class wherever any band member does,
/// and compares it with every member.
pub fn fair_ensemble(band: &PerformanceBand, set: &RunSet) -> Result<FairEnsembleReport> {
    let runs = members(band, set)?;
    let fv = favourable_max(runs.iter().map(|r| r.preds_validation().preds()))
        .ok_or(Error::EmptyBand)?;
    let ff = favourable_max(runs.iter().map(|r| r.preds_fairness().preds()))
        .ok_or(Error::EmptyBand)?;
    let fstar_validation = PredictionVector::new(set.labels().index().clone(), fv)?;
    let fstar_preds = PredictionVector::new(set.fairness_index().clone(), ff)?;

    let val_members: Vec<(&str, &PredictionVector)> = runs
        .iter()
        .map(|r| (r.run_id(), r.preds_validation()))
        .collect();
    let validation = evaluate_ensemble(
        set.labels().index().name(),
        &fstar_validation,
        &val_members,
        set.labels(),
    )?;

    let fairness = match set.fairness_labels() {
        Some(labels) if !set.shares_index() => {
            let fair_members: Vec<(&str, &PredictionVector)> = runs
                .iter()
                .map(|r| (r.run_id(), r.preds_fairness()))
                .collect();
            Some(evaluate_ensemble(
                set.fairness_index().name(),
                &fstar_preds,
                &fair_members,
                labels,
            )?)
        }
        _ => None,
    };

    Ok(FairEnsembleReport {
        band_label: band.label(),
        fstar_preds,
        fstar_validation,
        validation,
        fairness,
    })
}

/// Share of disputable instances within each group of the fairness set.
pub fn ambiguity_by_group(
    band: &PerformanceBand,
    set: &RunSet,
    grouping: &HashMap<String, String>,
) -> Result<BTreeMap<String, ExactRatio>> {
    let index = set.fairness_index();
    let mut sizes: BTreeMap<&str, u64> = BTreeMap::new();
    for id in index.ids() {
        let group = grouping
            .get(id)
            .ok_or_else(|| Error::MissingGroup(id.clone()))?;
        *sizes.entry(group.as_str()).or_default() += 1;
    }
    let disputed = disputable_instances(band, set)?;
    let mut hits: BTreeMap<&str, u64> = BTreeMap::new();
    for id in disputed.ids() {
        *hits.entry(grouping[id].as_str()).or_default() += 1;
    }
    sizes
        .into_iter()
        .map(|(g, size)| {
            let hit = hits.get(g).copied().unwrap_or(0);
            Ok((g.to_string(), ExactRatio::new(hit, size)?))
        })
        .collect()
}

/// Runs of a band sharing one fairness-set prediction vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorGroup {
    pub count: usize,
    pub runs: Vec<String>,
}

/// Distinct fairness-set prediction vectors of a band, most common first
/// (ties broken by the smallest member run id).
pub fn prediction_vector_groups(band: &PerformanceBand, set: &RunSet) -> Result<Vec<VectorGroup>> {
    let runs = members(band, set)?;
    let mut groups: HashMap<&[bool], Vec<String>> = HashMap::new();
    for run in runs {
        groups
            .entry(run.preds_fairness().preds())
            .or_default()
            .push(run.run_id().to_string());
    }
    let mut out: Vec<VectorGroup> = groups
        .into_values()
        .map(|mut runs| {
            runs.sort();
            VectorGroup {
                count: runs.len(),
                runs,
            }
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.runs[0].cmp(&b.runs[0])));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banding::{partition, BandKey, BandingPolicy};
    use crate::prediction::InstanceIndex;
    use proptest::prelude::*;

    fn r(n: u64, d: u64) -> ExactRatio {
        ExactRatio::new(n, d).unwrap()
    }

    /// Runs given as fairness-set class rows; labels are all favourable so the
    /// shared index validates.
    fn set_from_rows(rows: &[&[u8]]) -> RunSet {
        let n = rows[0].len();
        let index = InstanceIndex::sequential("v", n).unwrap();
        let labels = LabelVector::new(index.clone(), vec![true; n]).unwrap();
        let runs = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let pv = PredictionVector::from_classes(index.clone(), row).unwrap();
                ModelRun::on_shared_index(format!("r{i}"), "t", pv, &labels).unwrap()
            })
            .collect();
        RunSet::on_shared_index(labels, runs).unwrap()
    }

    fn whole_band(set: &RunSet) -> PerformanceBand {
        PerformanceBand::new(
            BandKey::Exact(r(1, 1)),
            set.runs().iter().map(|r| r.run_id().to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_run_band_has_nothing_disputable() {
        let set = set_from_rows(&[&[1, 0, 1, 1]]);
        let band = whole_band(&set);
        assert!(disputable_instances(&band, &set).unwrap().is_empty());
        assert_eq!(
            is_individually_fair("r0", &band, &set).unwrap(),
            FairnessVerdict::Fair
        );
        assert_eq!(ambiguity(&band, &set).unwrap(), r(0, 4));
        let d = discrepancy(&band, &set, 500, 1).unwrap();
        assert!(d.single_run);
        assert!(d.pair_disagreements.is_empty());
        assert!(!d.all_identical());
    }

    #[test]
    fn two_runs_differing_on_i7() {
        let mut a = [1u8; 10];
        let b = a;
        a[7] = 0;
        let set = set_from_rows(&[&a, &b]);
        let band = whole_band(&set);
        let d = disputable_instances(&band, &set).unwrap();
        assert_eq!(
            d.instances,
            vec![DisputedInstance {
                instance_id: "i7".into(),
                favourable: 1,
                unfavourable: 1
            }]
        );
        for run in ["r0", "r1"] {
            match is_individually_fair(run, &band, &set).unwrap() {
                FairnessVerdict::Unfair { instance_id, .. } => assert_eq!(instance_id, "i7"),
                FairnessVerdict::Fair => panic!("{run} should be unfair"),
            }
        }
        assert!(matches!(
            is_individually_fair("zz", &band, &set),
            Err(Error::RunNotInBand { .. })
        ));
    }

    #[test]
    fn ambiguity_three_runs_mixed_on_2_5_9() {
        let base = [0u8, 1, 0, 1, 1, 0, 0, 1, 1, 0];
        let mut b = base;
        b[2] = 1;
        b[5] = 1;
        let mut c = base;
        c[9] = 1;
        let set = set_from_rows(&[&base, &b, &c]);
        let band = whole_band(&set);
        // oracle: columns whose multiset holds both classes
        let rows = [base, b, c];
        let mixed: Vec<usize> = (0..10)
            .filter(|&j| {
                let ones = rows.iter().filter(|row| row[j] == 1).count();
                ones > 0 && ones < rows.len()
            })
            .collect();
        assert_eq!(mixed, vec![2, 5, 9]);
        assert_eq!(ambiguity(&band, &set).unwrap(), r(3, 10));

        let stats = discrepancy(&band, &set, 500, 9).unwrap();
        assert_eq!(stats.pair_count(), 3);
        // brute force over the three pairs
        let mut brute = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                brute.push((0..10).filter(|&k| rows[i][k] != rows[j][k]).count() as u64);
            }
        }
        assert_eq!(stats.pair_disagreements, brute);
        assert!(stats.max.unwrap() <= r(3, 10));
    }

    #[test]
    fn identical_runs_give_zero_discrepancy() {
        let row = [1u8, 0, 1, 0, 0];
        let set = set_from_rows(&[&row, &row, &row, &row]);
        let band = whole_band(&set);
        let d = discrepancy(&band, &set, 500, 3).unwrap();
        assert_eq!(d.pair_count(), 6);
        assert!(d.all_identical());
        assert_eq!(ambiguity(&band, &set).unwrap(), r(0, 5));
    }

    #[test]
    fn two_of_hundred_disagreement() {
        let a = [1u8; 100];
        let mut b = a;
        b[10] = 0;
        b[20] = 0;
        let set = set_from_rows(&[&a, &b]);
        let d = discrepancy(&whole_band(&set), &set, 500, 0).unwrap();
        assert_eq!(d.pair_fractions(), vec![r(2, 100)]);
    }

    #[test]
    fn cap_below_two_is_rejected() {
        let set = set_from_rows(&[&[1, 0], &[0, 1]]);
        assert!(matches!(
            discrepancy(&whole_band(&set), &set, 1, 0),
            Err(Error::InvalidCap { cap: 1, band_size: 2 })
        ));
    }

    #[test]
    fn sampling_is_capped_and_seeded() {
        let rows: Vec<Vec<u8>> = (0..12)
            .map(|i| (0..8).map(|j| ((i >> (j % 4)) & 1) as u8).collect())
            .collect();
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let set = set_from_rows(&refs);
        let band = whole_band(&set);
        let a = discrepancy(&band, &set, 5, 77).unwrap();
        let b = discrepancy(&band, &set, 5, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sampled_runs, 5);
        assert_eq!(a.pair_count(), 10);
        // no sampling: seed irrelevant
        let full1 = discrepancy(&band, &set, 500, 1).unwrap();
        let full2 = discrepancy(&band, &set, 500, 2).unwrap();
        assert_eq!(full1.pair_disagreements, full2.pair_disagreements);
    }

    #[test]
    fn ensemble_of_agreeing_members_is_the_member() {
        let row = [1u8, 0, 1, 0];
        let set = set_from_rows(&[&row, &row]);
        let report = fair_ensemble(&whole_band(&set), &set).unwrap();
        assert_eq!(report.fstar_preds, *set.runs()[0].preds_fairness());
        for d in &report.validation.deltas {
            assert_eq!(d.accuracy, SignedRatio::zero());
        }
    }

    #[test]
    fn group_ambiguity() {
        let index_ids: Vec<String> = (1..=10).map(|i| format!("i{i}")).collect();
        let index = InstanceIndex::new("v", index_ids.clone()).unwrap();
        let labels = LabelVector::new(index.clone(), vec![true; 10]).unwrap();
        let a = PredictionVector::new(index.clone(), vec![true; 10]).unwrap();
        let mut bv = vec![true; 10];
        bv[0] = false; // i1
        bv[1] = false; // i2
        let b = PredictionVector::new(index, bv).unwrap();
        let runs = vec![
            ModelRun::on_shared_index("a", "t", a, &labels).unwrap(),
            ModelRun::on_shared_index("b", "t", b, &labels).unwrap(),
        ];
        let set = RunSet::on_shared_index(labels, runs).unwrap();
        let band = whole_band(&set);
        let mut grouping: HashMap<String, String> = HashMap::new();
        for (k, id) in index_ids.iter().enumerate() {
            let g = if k == 0 || (2..5).contains(&k) { "A" } else { "B" };
            grouping.insert(id.clone(), g.into());
        }
        let by_group = ambiguity_by_group(&band, &set, &grouping).unwrap();
        assert_eq!(by_group["A"], r(1, 4));
        assert_eq!(by_group["B"], r(1, 6));

        let one: HashMap<String, String> =
            index_ids.iter().map(|id| (id.clone(), "all".into())).collect();
        let single = ambiguity_by_group(&band, &set, &one).unwrap();
        assert_eq!(single["all"], ambiguity(&band, &set).unwrap());

        grouping.remove("i3");
        assert!(matches!(
            ambiguity_by_group(&band, &set, &grouping),
            Err(Error::MissingGroup(id)) if id == "i3"
        ));
    }

    #[test]
    fn vector_groups_sorted_by_count() {
        let a = [1u8, 0, 0];
        let b = [1u8, 1, 0];
        let set = set_from_rows(&[&b, &a, &a, &b, &a]);
        let groups = prediction_vector_groups(&whole_band(&set), &set).unwrap();
        let counts: Vec<usize> = groups.iter().map(|g| g.count).collect();
        assert_eq!(counts, vec![3, 2]);
        assert_eq!(groups[0].runs, vec!["r1", "r2", "r4"]);
    }

    /// A random labelled band: 2..=20 runs over 10..=200 instances.
    fn random_band() -> impl Strategy<Value = (Vec<bool>, Vec<Vec<bool>>)> {
        (10usize..=200, 2usize..=20).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), m),
            )
        })
    }

    fn build(labels: &[bool], rows: &[Vec<bool>]) -> (RunSet, PerformanceBand) {
        let index = InstanceIndex::sequential("v", labels.len()).unwrap();
        let lv = LabelVector::new(index.clone(), labels.to_vec()).unwrap();
        let runs: Vec<ModelRun> = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let pv = PredictionVector::new(index.clone(), row.clone()).unwrap();
                ModelRun::on_shared_index(format!("r{i:02}"), "t", pv, &lv).unwrap()
            })
            .collect();
        let ids = runs.iter().map(|r| r.run_id().to_string()).collect();
        let set = RunSet::on_shared_index(lv, runs).unwrap();
        (set, PerformanceBand::new(BandKey::Exact(r(0, 1)), ids).unwrap())
    }

    proptest! {
        #[test]
        fn ensemble_respects_recall_and_specificity_bounds((labels, rows) in random_band()) {
            let (set, band) = build(&labels, &rows);
            let report = fair_ensemble(&band, &set).unwrap();
            let fstar = &report.validation.fstar;
            for run in set.runs() {
                let m = ClassifierMetrics::evaluate(run.preds_validation(), set.labels()).unwrap();
                if let (Some(a), Some(b)) = (fstar.recall, m.recall) { prop_assert!(a >= b); }
                if let (Some(a), Some(b)) = (fstar.specificity, m.specificity) { prop_assert!(a <= b); }
                // f* differs from the member exactly where it says 0 and someone says 1
                for (k, (&fs, &own)) in report.fstar_preds.preds().iter().zip(run.preds_fairness().preds()).enumerate() {
                    let someone = rows.iter().any(|row| row[k]);
                    prop_assert_eq!(fs != own, !own && someone);
                }
            }
        }

        #[test]
        fn fairness_ambiguity_and_unique_vectors_agree((labels, rows) in random_band(), dup in 0usize..3) {
            // duplicate some rows so the all-fair case is exercised
            let mut rows = rows;
            if dup > 0 { let first = rows[0].clone(); for row in rows.iter_mut() { *row = first.clone(); } }
            let (set, band) = build(&labels, &rows);
            let amb = ambiguity(&band, &set).unwrap();
            let all_fair = band.runs().iter().all(|id| is_individually_fair(id, &band, &set).unwrap() == FairnessVerdict::Fair);
            let unique = prediction_vector_groups(&band, &set).unwrap().len();
            prop_assert_eq!(amb.is_zero(), all_fair);
            prop_assert_eq!(amb.is_zero(), unique == 1);
            let d = discrepancy(&band, &set, 500, 0).unwrap();
            for f in d.pair_fractions() { prop_assert!(f <= amb); }
        }

        #[test]
        fn ambiguity_grows_when_bands_merge((labels, rows) in random_band(), split in 1usize..20) {
            let (set, band) = build(&labels, &rows);
            let split = split.min(band.len() - 1);
            let left = PerformanceBand::new(BandKey::Exact(r(0, 1)), band.runs()[..split].to_vec()).unwrap();
            let left_set = disputable_instances(&left, &set).unwrap();
            let whole_set = disputable_instances(&band, &set).unwrap();
            prop_assert!(left_set.positions.iter().all(|p| whole_set.positions.contains(p)));
            prop_assert!(ambiguity(&left, &set).unwrap() <= ambiguity(&band, &set).unwrap());
        }
    }

    #[test]
    fn strict_band_from_partition_works_end_to_end() {
        let set = set_from_rows(&[&[1, 1, 0], &[1, 0, 1], &[0, 1, 1]]);
        // all-favourable labels: every run has utility 2/3, one band
        let banding = partition(&set, &BandingPolicy::strict()).unwrap();
        assert_eq!(banding.bands.len(), 1);
        assert_eq!(ambiguity(&banding.bands[0], &set).unwrap(), r(3, 3));
    }
}
