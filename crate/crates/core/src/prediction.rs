//! Labelled validation data, crisp binary predictions and the exact metrics
//! derived from their confusion matrices.
//!
//! Class `1` (`true`) is always the favourable outcome.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio::ExactRatio;

#[derive(Debug)]
struct IndexInner {
    name: String,
    ids: Vec<String>,
    positions: HashMap<String, usize>,
}

/// Ordered, unique instance identifiers shared by labels and predictions.
///
/// Cloning is cheap; all clones refer to the same identifiers.
#[derive(Clone, Debug)]
pub struct InstanceIndex(Arc<IndexInner>);

impl InstanceIndex {
    pub fn new(name: impl Into<String>, ids: Vec<String>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut positions = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if positions.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateInstance(id.clone()));
            }
        }
        Ok(Self(Arc::new(IndexInner {
            name: name.into(),
            ids,
            positions,
        })))
    }

    /// Index with ids `i0 .. i{n-1}`.
    pub fn sequential(name: impl Into<String>, n: usize) -> Result<Self> {
        Self::new(name, (0..n).map(|i| format!("i{i}")).collect())
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn ids(&self) -> &[String] {
        &self.0.ids
    }

    pub fn len(&self) -> usize {
        self.0.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ids.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.0.positions.get(id).copied()
    }

    /// Same identifiers in the same order.
    pub fn same_as(&self, other: &InstanceIndex) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.ids == other.0.ids
    }

    pub(crate) fn ensure_same(&self, other: &InstanceIndex) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::IndexMismatch {
                left: self.name().to_string(),
                right: other.name().to_string(),
            })
        }
    }
}

impl PartialEq for InstanceIndex {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl Eq for InstanceIndex {}

fn classes_to_bools(classes: &[u8]) -> Result<Vec<bool>> {
    classes
        .iter()
        .map(|&c| match c {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::InvalidClass(other)),
        })
        .collect()
}

fn check_len(index: &InstanceIndex, len: usize) -> Result<()> {
    if index.len() != len {
        return Err(Error::LengthMismatch {
            expected: index.len(),
            actual: len,
        });
    }
    Ok(())
}

/// Ground-truth classes aligned with an [`InstanceIndex`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    index: InstanceIndex,
    labels: Vec<bool>,
}

impl LabelVector {
    pub fn new(index: InstanceIndex, labels: Vec<bool>) -> Result<Self> {
        check_len(&index, labels.len())?;
        Ok(Self { index, labels })
    }

    pub fn from_classes(index: InstanceIndex, classes: &[u8]) -> Result<Self> {
        Self::new(index, classes_to_bools(classes)?)
    }

    pub fn index(&self) -> &InstanceIndex {
        &self.index
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Crisp binary predictions aligned with an [`InstanceIndex`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionVector {
    index: InstanceIndex,
    preds: Vec<bool>,
}

impl PredictionVector {
    pub fn new(index: InstanceIndex, preds: Vec<bool>) -> Result<Self> {
        check_len(&index, preds.len())?;
        Ok(Self { index, preds })
    }

    pub fn from_classes(index: InstanceIndex, classes: &[u8]) -> Result<Self> {
        Self::new(index, classes_to_bools(classes)?)
    }

    pub fn index(&self) -> &InstanceIndex {
        &self.index
    }

    pub fn preds(&self) -> &[bool] {
        &self.preds
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    /// Number of positions where the two vectors differ.
    pub fn disagreements(&self, other: &PredictionVector) -> Result<usize> {
        self.index.ensure_same(&other.index)?;
        Ok(self
            .preds
            .iter()
            .zip(&other.preds)
            .filter(|(a, b)| a != b)
            .count())
    }
}

/// Binary confusion matrix with the favourable class as positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn metric(&self, kind: MetricKind) -> Result<ExactRatio> {
        metric(self, kind)
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{tp:{}, fn:{}, fp:{}, tn:{}}}",
            self.tp, self.fn_, self.fp, self.tn
        )
    }
}

pub fn confusion_matrix(preds: &PredictionVector, labels: &LabelVector) -> Result<ConfusionMatrix> {
    preds.index.ensure_same(&labels.index)?;
    let mut cm = ConfusionMatrix {
        tp: 0,
        fn_: 0,
        fp: 0,
        tn: 0,
    };
    for (&p, &y) in preds.preds.iter().zip(&labels.labels) {
        match (y, p) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Accuracy,
    Recall,
    Specificity,
    Precision,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Recall => "recall",
            MetricKind::Specificity => "specificity",
            MetricKind::Precision => "precision",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accuracy" => Ok(MetricKind::Accuracy),
            "recall" => Ok(MetricKind::Recall),
            "specificity" => Ok(MetricKind::Specificity),
            "precision" => Ok(MetricKind::Precision),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// Exact value of a confusion-matrix metric. A zero denominator is an error.
pub fn metric(cm: &ConfusionMatrix, kind: MetricKind) -> Result<ExactRatio> {
    let (num, den, reason) = match kind {
        MetricKind::Accuracy => (cm.tp + cm.tn, cm.total(), "empty evaluation set"),
        MetricKind::Recall => (cm.tp, cm.tp + cm.fn_, "no favourable labels (tp + fn = 0)"),
        MetricKind::Specificity => (cm.tn, cm.tn + cm.fp, "no unfavourable labels (tn + fp = 0)"),
        MetricKind::Precision => (cm.tp, cm.tp + cm.fp, "no favourable predictions (tp + fp = 0)"),
    };
    if den == 0 {
        return Err(Error::UndefinedMetric {
            metric: kind,
            reason: reason.to_string(),
        });
    }
    ExactRatio::new(num, den)
}

/// One classifier execution.
#[derive(Clone, Debug)]
pub struct ModelRun {
    run_id: String,
    family_tag: String,
    preds_validation: PredictionVector,
    preds_fairness: PredictionVector,
    utility: ExactRatio,
    complexity: Option<f64>,
}

impl ModelRun {
    /// Builds a run and computes its utility (accuracy) from `labels`.
    pub fn new(
        run_id: impl Into<String>,
        family_tag: impl Into<String>,
        preds_validation: PredictionVector,
        preds_fairness: PredictionVector,
        labels: &LabelVector,
    ) -> Result<Self> {
        let utility = confusion_matrix(&preds_validation, labels)?.metric(MetricKind::Accuracy)?;
        Ok(Self {
            run_id: run_id.into(),
            family_tag: family_tag.into(),
            preds_validation,
            preds_fairness,
            utility,
            complexity: None,
        })
    }

    /// Run whose fairness set is the performance validation set.
    pub fn on_shared_index(
        run_id: impl Into<String>,
        family_tag: impl Into<String>,
        preds: PredictionVector,
        labels: &LabelVector,
    ) -> Result<Self> {
        Self::new(run_id, family_tag, preds.clone(), preds, labels)
    }

    pub fn with_complexity(mut self, complexity: f64) -> Self {
        self.complexity = Some(complexity);
        self
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn family_tag(&self) -> &str {
        &self.family_tag
    }

    pub fn preds_validation(&self) -> &PredictionVector {
        &self.preds_validation
    }

    pub fn preds_fairness(&self) -> &PredictionVector {
        &self.preds_fairness
    }

    pub fn utility(&self) -> ExactRatio {
        self.utility
    }

    pub fn complexity(&self) -> Option<f64> {
        self.complexity
    }

    pub fn confusion(&self, labels: &LabelVector) -> Result<ConfusionMatrix> {
        confusion_matrix(&self.preds_validation, labels)
    }
}

/// The runs of one audit together with the labels and indices they share.
#[derive(Clone, Debug)]
pub struct RunSet {
    labels: LabelVector,
    fairness_index: InstanceIndex,
    fairness_labels: Option<LabelVector>,
    runs: Vec<ModelRun>,
    positions: HashMap<String, usize>,
}

impl RunSet {
    /// Validates that every run is aligned with the shared indices and that
    /// its stored utility matches the labels.
    pub fn new(
        labels: LabelVector,
        fairness_index: InstanceIndex,
        fairness_labels: Option<LabelVector>,
        runs: Vec<ModelRun>,
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::EmptyRunSet);
        }
        if let Some(fl) = &fairness_labels {
            fl.index().ensure_same(&fairness_index)?;
        }
        let mut positions = HashMap::with_capacity(runs.len());
        for (i, run) in runs.iter().enumerate() {
            if positions.insert(run.run_id.clone(), i).is_some() {
                return Err(Error::DuplicateRun(run.run_id.clone()));
            }
            run.preds_validation.index().ensure_same(labels.index())?;
            run.preds_fairness.index().ensure_same(&fairness_index)?;
            let recomputed = run.confusion(&labels)?.metric(MetricKind::Accuracy)?;
            if recomputed != run.utility {
                return Err(Error::UtilityMismatch {
                    run_id: run.run_id.clone(),
                    stored: run.utility.to_string(),
                    recomputed: recomputed.to_string(),
                });
            }
        }
        Ok(Self {
            labels,
            fairness_index,
            fairness_labels,
            runs,
            positions,
        })
    }

    /// Run set whose fairness set is the labelled validation set.
    pub fn on_shared_index(labels: LabelVector, runs: Vec<ModelRun>) -> Result<Self> {
        let index = labels.index().clone();
        let fairness_labels = Some(labels.clone());
        Self::new(labels, index, fairness_labels, runs)
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn fairness_index(&self) -> &InstanceIndex {
        &self.fairness_index
    }

    /// Labels for the fairness set, when known. For a shared index these are
    /// the validation labels.
    pub fn fairness_labels(&self) -> Option<&LabelVector> {
        self.fairness_labels.as_ref()
    }

    /// True when fairness and performance validation use the same instances.
    pub fn shares_index(&self) -> bool {
        self.fairness_index.same_as(self.labels.index())
    }

    pub fn runs(&self) -> &[ModelRun] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn get(&self, run_id: &str) -> Result<&ModelRun> {
        self.positions
            .get(run_id)
            .map(|&i| &self.runs[i])
            .ok_or_else(|| Error::UnknownRun(run_id.to_string()))
    }

    pub fn contains(&self, run_id: &str) -> bool {
        self.positions.contains_key(run_id)
    }

    /// Resolve run ids, rejecting unknown and duplicate ids.
    pub fn resolve<I>(&self, ids: I) -> Result<Vec<&ModelRun>>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut seen = HashSet::new();
        ids.into_iter()
            .map(|id| {
                let id = id.as_ref();
                if !seen.insert(id.to_string()) {
                    return Err(Error::DuplicateRun(id.to_string()));
                }
                self.get(id)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels_50_50() -> LabelVector {
        let index = InstanceIndex::sequential("validation", 100).unwrap();
        let classes: Vec<u8> = (0..100).map(|i| u8::from(i < 50)).collect();
        LabelVector::from_classes(index, &classes).unwrap()
    }

    fn flip(labels: &LabelVector, positions: &[usize]) -> PredictionVector {
        let mut preds = labels.labels().to_vec();
        for &p in positions {
            preds[p] = !preds[p];
        }
        PredictionVector::new(labels.index().clone(), preds).unwrap()
    }

    fn r(n: u64, d: u64) -> ExactRatio {
        ExactRatio::new(n, d).unwrap()
    }

    #[test]
    fn violet_model_confusion() {
        let labels = labels_50_50();
        let cm = confusion_matrix(&flip(&labels, &[3, 7]), &labels).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 48,
                fn_: 2,
                fp: 0,
                tn: 50
            }
        );
        assert_eq!(cm.metric(MetricKind::Accuracy).unwrap().ratio_string(), "98/100");
        assert_eq!(cm.metric(MetricKind::Specificity).unwrap().ratio_string(), "50/50");
    }

    #[test]
    fn orange_and_green_models() {
        let labels = labels_50_50();
        let orange = confusion_matrix(&flip(&labels, &[3, 70]), &labels).unwrap();
        assert_eq!((orange.tp, orange.fn_, orange.fp, orange.tn), (49, 1, 1, 49));
        let green = confusion_matrix(&flip(&labels, &[60, 70]), &labels).unwrap();
        assert_eq!((green.tp, green.fn_, green.fp, green.tn), (50, 0, 2, 48));
        assert_eq!(green.metric(MetricKind::Recall).unwrap(), r(50, 50));
        assert_eq!(green.metric(MetricKind::Specificity).unwrap(), r(48, 50));
    }

    #[test]
    fn identity_predictions() {
        let labels = labels_50_50();
        let cm = confusion_matrix(&flip(&labels, &[]), &labels).unwrap();
        assert_eq!((cm.tp, cm.fn_, cm.fp, cm.tn), (50, 0, 0, 50));
    }

    #[test]
    fn index_mismatch_names_both_indices() {
        let labels = labels_50_50();
        let other = InstanceIndex::sequential("fairness", 100).unwrap();
        let other = InstanceIndex::new(
            "fairness",
            other.ids().iter().rev().cloned().collect(),
        )
        .unwrap();
        let preds = PredictionVector::new(other, vec![true; 100]).unwrap();
        let err = confusion_matrix(&preds, &labels).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("fairness") && msg.contains("validation"), "{msg}");
    }

    #[test]
    fn precision_without_positive_predictions_is_an_error() {
        let cm = ConfusionMatrix {
            tp: 0,
            fn_: 5,
            fp: 0,
            tn: 5,
        };
        assert!(matches!(
            cm.metric(MetricKind::Precision),
            Err(Error::UndefinedMetric {
                metric: MetricKind::Precision,
                ..
            })
        ));
    }

    #[test]
    fn rejects_bad_classes_and_lengths() {
        let index = InstanceIndex::sequential("v", 3).unwrap();
        assert!(matches!(
            LabelVector::from_classes(index.clone(), &[0, 2, 1]),
            Err(Error::InvalidClass(2))
        ));
        assert!(PredictionVector::new(index, vec![true]).is_err());
        assert!(InstanceIndex::new("v", vec!["a".into(), "a".into()]).is_err());
        assert!(InstanceIndex::new("v", vec![]).is_err());
    }

    #[test]
    fn run_set_validates_members() {
        let labels = labels_50_50();
        let a = ModelRun::on_shared_index("a", "t", flip(&labels, &[1]), &labels).unwrap();
        assert_eq!(a.utility().ratio_string(), "99/100");
        let dup = a.clone();
        assert!(matches!(
            RunSet::on_shared_index(labels.clone(), vec![a.clone(), dup]),
            Err(Error::DuplicateRun(_))
        ));
        assert!(matches!(
            RunSet::on_shared_index(labels.clone(), vec![]),
            Err(Error::EmptyRunSet)
        ));
        // utility computed against different labels must be rejected
        let other_labels = LabelVector::new(labels.index().clone(), vec![true; 100]).unwrap();
        let stale = ModelRun::on_shared_index("b", "t", flip(&labels, &[]), &other_labels).unwrap();
        assert!(matches!(
            RunSet::on_shared_index(labels.clone(), vec![stale]),
            Err(Error::UtilityMismatch { .. })
        ));
        let set = RunSet::on_shared_index(labels, vec![a]).unwrap();
        assert!(set.get("a").is_ok());
        assert!(matches!(set.get("zz"), Err(Error::UnknownRun(_))));
    }

    fn vectors() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (1usize..200).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn cells_sum_to_index_size((preds, labels) in vectors()) {
            let index = InstanceIndex::sequential("v", preds.len()).unwrap();
            let p = PredictionVector::new(index.clone(), preds.clone()).unwrap();
            let l = LabelVector::new(index, labels).unwrap();
            let cm = confusion_matrix(&p, &l).unwrap();
            prop_assert_eq!(cm.total() as usize, preds.len());
        }

        #[test]
        fn swapping_favourable_class_swaps_cells((preds, labels) in vectors()) {
            let index = InstanceIndex::sequential("v", preds.len()).unwrap();
            let p = PredictionVector::new(index.clone(), preds.clone()).unwrap();
            let l = LabelVector::new(index.clone(), labels.clone()).unwrap();
            let ps = PredictionVector::new(index.clone(), preds.iter().map(|b| !b).collect()).unwrap();
            let ls = LabelVector::new(index, labels.iter().map(|b| !b).collect()).unwrap();
            let cm = confusion_matrix(&p, &l).unwrap();
            let sw = confusion_matrix(&ps, &ls).unwrap();
            prop_assert_eq!((cm.tp, cm.fn_, cm.fp, cm.tn), (sw.tn, sw.fp, sw.fn_, sw.tp));
            prop_assert_eq!(cm.metric(MetricKind::Accuracy).unwrap(), sw.metric(MetricKind::Accuracy).unwrap());
            if let (Ok(rec), Ok(spec)) = (cm.metric(MetricKind::Recall), sw.metric(MetricKind::Specificity)) {
                prop_assert_eq!(rec, spec);
            }
        }
    }
}
