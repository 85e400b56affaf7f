//! Grouping runs into performance bands.
//!
//! Three policies are supported: strict equality of utility, rounding of the
//! utility to `k` decimal digits, and tolerance intervals `[ε − δ, ε + δ]`
//! around anchor utilities. Strict and rounded bands partition the run set;
//! tolerance bands may overlap and are flagged as such.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{MetricKind, ModelRun, RunSet};
use crate::ratio::{format_scaled, ExactRatio, MAX_DIGITS};

/// Digits used for the decimal display of strict band utilities.
const STRICT_DISPLAY_PLACES: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BandMode {
    Strict,
    Tolerance {
        delta: ExactRatio,
        /// Explicit interval centres; `None` uses every distinct utility.
        anchors: Option<Vec<ExactRatio>>,
    },
    Rounded {
        digits: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandingPolicy {
    mode: BandMode,
    tie_break: Vec<MetricKind>,
}

impl BandingPolicy {
    pub fn strict() -> Self {
        Self {
            mode: BandMode::Strict,
            tie_break: Vec::new(),
        }
    }

    pub fn rounded(digits: u32) -> Result<Self> {
        if digits == 0 || digits > MAX_DIGITS {
            return Err(Error::InvalidPolicy(format!(
                "rounding digits must be in 1..={MAX_DIGITS}, got {digits}"
            )));
        }
        Ok(Self {
            mode: BandMode::Rounded { digits },
            tie_break: Vec::new(),
        })
    }

    pub fn tolerance(delta: ExactRatio) -> Self {
        Self {
            mode: BandMode::Tolerance {
                delta,
                anchors: None,
            },
            tie_break: Vec::new(),
        }
    }

    pub fn with_anchors(mut self, anchors: Vec<ExactRatio>) -> Result<Self> {
        match &mut self.mode {
            BandMode::Tolerance { anchors: slot, .. } => {
                *slot = Some(anchors);
                Ok(self)
            }
            _ => Err(Error::InvalidPolicy(
                "anchors only apply to tolerance policies".into(),
            )),
        }
    }

    /// Lexicographic refinement applied inside each band, in the given order.
    pub fn with_tie_break(mut self, order: Vec<MetricKind>) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &order {
            if !seen.insert(*m) {
                return Err(Error::InvalidPolicy(format!("duplicate tie-break metric `{m}`")));
            }
        }
        if order.first() == Some(&MetricKind::Accuracy) {
            return Err(Error::InvalidPolicy(
                "tie-break must not start with the banding metric (accuracy)".into(),
            ));
        }
        self.tie_break = order;
        Ok(self)
    }

    pub fn mode(&self) -> &BandMode {
        &self.mode
    }

    pub fn tie_break(&self) -> &[MetricKind] {
        &self.tie_break
    }

    pub fn is_strict(&self) -> bool {
        self.mode == BandMode::Strict
    }

    /// Whether bands produced by this policy are guaranteed disjoint.
    pub fn partitions(&self) -> bool {
        !matches!(self.mode, BandMode::Tolerance { .. })
    }
}

impl fmt::Display for BandingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mode {
            BandMode::Strict => f.write_str("strict"),
            BandMode::Rounded { digits } => write!(f, "round:{digits}"),
            BandMode::Tolerance { delta, .. } => write!(f, "tol:{delta}"),
        }
    }
}

impl FromStr for BandingPolicy {
    type Err = Error;

    /// Parses `strict`, `round:<k>` or `tol:<delta>` (delta as `n/d` or a
    /// decimal).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "strict" {
            return Ok(Self::strict());
        }
        if let Some(k) = s.strip_prefix("round:") {
            let digits = k
                .parse::<u32>()
                .map_err(|_| Error::InvalidPolicy(format!("bad rounding digits in `{s}`")))?;
            return Self::rounded(digits);
        }
        if let Some(d) = s.strip_prefix("tol:") {
            let delta = d
                .parse::<ExactRatio>()
                .map_err(|_| Error::InvalidPolicy(format!("bad tolerance in `{s}`")))?;
            return Ok(Self::tolerance(delta));
        }
        Err(Error::InvalidPolicy(format!(
            "expected `strict`, `round:<k>` or `tol:<delta>`, got `{s}`"
        )))
    }
}

impl Serialize for BandingPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("BandingPolicy", 2)?;
        st.serialize_field("band", &self.to_string())?;
        st.serialize_field("tie_break", &self.tie_break)?;
        st.end()
    }
}

#[derive(Deserialize)]
struct PolicyRepr {
    band: String,
    #[serde(default)]
    tie_break: Vec<MetricKind>,
}

impl<'de> Deserialize<'de> for BandingPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PolicyRepr::deserialize(deserializer)?;
        let policy: BandingPolicy = repr.band.parse().map_err(serde::de::Error::custom)?;
        policy
            .with_tie_break(repr.tie_break)
            .map_err(serde::de::Error::custom)
    }
}

/// Canonical identity of a band under its policy.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BandKey {
    Exact(ExactRatio),
    Rounded { digits: u32, scaled: u64 },
    Interval { anchor: ExactRatio, delta: ExactRatio },
}

impl BandKey {
    /// Representative utility as `(numerator, denominator)`, used for ordering.
    fn value(&self) -> (u128, u128) {
        match self {
            BandKey::Exact(r) => (r.num() as u128, r.den() as u128),
            BandKey::Rounded { digits, scaled } => (*scaled as u128, 10u128.pow(*digits)),
            BandKey::Interval { anchor, .. } => (anchor.num() as u128, anchor.den() as u128),
        }
    }

    pub fn label(&self) -> String {
        match self {
            BandKey::Exact(r) => r.ratio_string(),
            BandKey::Rounded { digits, scaled } => format_scaled(*scaled, *digits),
            BandKey::Interval { anchor, delta } => format!(
                "[{}, {}]",
                anchor.sub(delta).to_decimal(STRICT_DISPLAY_PLACES),
                anchor.add(delta).to_decimal(STRICT_DISPLAY_PLACES)
            ),
        }
    }

    /// Whether a run of this utility belongs under this key.
    pub fn admits(&self, utility: &ExactRatio) -> bool {
        match self {
            BandKey::Exact(r) => r == utility,
            BandKey::Rounded { digits, scaled } => utility.round_scaled(*digits) == *scaled,
            BandKey::Interval { anchor, delta } => utility.within(anchor, delta),
        }
    }

    pub fn epsilon_display(&self) -> String {
        match self {
            BandKey::Exact(r) => r.to_decimal(STRICT_DISPLAY_PLACES),
            BandKey::Rounded { .. } => self.label(),
            BandKey::Interval { anchor, delta } => format!(
                "{}±{}",
                anchor.to_decimal(STRICT_DISPLAY_PLACES),
                delta.to_decimal(STRICT_DISPLAY_PLACES)
            ),
        }
    }
}

impl PartialOrd for BandKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BandKey {
    /// Orders by representative utility; keys of different kinds or widths
    /// that share a value are ordered by kind, then digits or delta.
    fn cmp(&self, other: &Self) -> Ordering {
        fn rank(k: &BandKey) -> u8 {
            match k {
                BandKey::Exact(_) => 0,
                BandKey::Rounded { .. } => 1,
                BandKey::Interval { .. } => 2,
            }
        }
        let (an, ad) = self.value();
        let (bn, bd) = other.value();
        (an * bd).cmp(&(bn * ad)).then_with(|| match (self, other) {
            (BandKey::Rounded { digits: a, .. }, BandKey::Rounded { digits: b, .. }) => a.cmp(b),
            (BandKey::Interval { delta: a, .. }, BandKey::Interval { delta: b, .. }) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        })
    }
}

/// A set of runs equivalent under a banding policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerformanceBand {
    key: BandKey,
    refinement: Vec<(MetricKind, ExactRatio)>,
    runs: Vec<String>,
}

impl PerformanceBand {
    /// Builds a band from run ids; ids are sorted and must be non-empty and
    /// unique.
    pub fn new(key: BandKey, runs: Vec<String>) -> Result<Self> {
        Self::with_refinement(key, Vec::new(), runs)
    }

    fn with_refinement(
        key: BandKey,
        refinement: Vec<(MetricKind, ExactRatio)>,
        mut runs: Vec<String>,
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::EmptyBand);
        }
        runs.sort();
        if let Some(w) = runs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateRun(w[0].clone()));
        }
        Ok(Self {
            key,
            refinement,
            runs,
        })
    }

    pub fn key(&self) -> &BandKey {
        &self.key
    }

    /// Metric values shared by every member after lexicographic refinement.
    pub fn refinement(&self) -> &[(MetricKind, ExactRatio)] {
        &self.refinement
    }

    /// Member run ids in sorted order.
    pub fn runs(&self) -> &[String] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn contains(&self, run_id: &str) -> bool {
        self.runs.binary_search_by(|r| r.as_str().cmp(run_id)).is_ok()
    }

    pub fn label(&self) -> String {
        if self.refinement.is_empty() {
            return self.key.label();
        }
        let parts: Vec<String> = self
            .refinement
            .iter()
            .map(|(m, v)| format!("{m}={v}"))
            .collect();
        format!("{} | {}", self.key.label(), parts.join(", "))
    }

    pub fn epsilon_display(&self) -> String {
        self.key.epsilon_display()
    }

    /// Union of two bands; the key of `self` is kept.
    pub fn merged(&self, other: &PerformanceBand) -> PerformanceBand {
        let mut runs: Vec<String> = self.runs.iter().chain(&other.runs).cloned().collect();
        runs.sort();
        runs.dedup();
        PerformanceBand {
            key: self.key.clone(),
            refinement: Vec::new(),
            runs,
        }
    }
}

/// Output of [`partition`].
#[derive(Clone, Debug)]
pub struct Banding {
    pub policy: BandingPolicy,
    /// Bands sorted by descending utility.
    pub bands: Vec<PerformanceBand>,
    /// True when every run belongs to exactly one band.
    pub is_partition: bool,
    /// True when some run belongs to more than one band (tolerance mode only).
    pub overlapping: bool,
}

impl Banding {
    pub fn find(&self, key_or_display: &str) -> Option<&PerformanceBand> {
        self.bands
            .iter()
            .find(|b| b.label() == key_or_display || b.epsilon_display() == key_or_display)
    }
}

fn group_descending<K: Ord>(
    runs: &[ModelRun],
    key_of: impl Fn(&ModelRun) -> K,
) -> Vec<(K, Vec<String>)> {
    let mut groups: BTreeMap<K, Vec<String>> = BTreeMap::new();
    for run in runs {
        groups
            .entry(key_of(run))
            .or_default()
            .push(run.run_id().to_string());
    }
    groups.into_iter().rev().collect()
}

/// Groups the runs of `set` into bands sorted by descending utility.
pub fn partition(set: &RunSet, policy: &BandingPolicy) -> Result<Banding> {
    let runs = set.runs();
    if runs.is_empty() {
        return Err(Error::EmptyRunSet);
    }
    let mut bands = match policy.mode() {
        BandMode::Strict => group_descending(runs, |r| r.utility())
            .into_iter()
            .map(|(u, ids)| {
                // every utility shares the validation-set denominator
                PerformanceBand::new(BandKey::Exact(u), ids)
            })
            .collect::<Result<Vec<_>>>()?,
        BandMode::Rounded { digits } => group_descending(runs, |r| r.utility().round_scaled(*digits))
            .into_iter()
            .map(|(scaled, ids)| {
                PerformanceBand::new(
                    BandKey::Rounded {
                        digits: *digits,
                        scaled,
                    },
                    ids,
                )
            })
            .collect::<Result<Vec<_>>>()?,
        BandMode::Tolerance { delta, anchors } => {
            let mut anchors: Vec<ExactRatio> = match anchors {
                Some(a) => a.clone(),
                None => runs.iter().map(|r| r.utility()).collect(),
            };
            anchors.sort_by(|a, b| b.cmp(a));
            anchors.dedup();
            let mut out = Vec::new();
            for anchor in anchors {
                let ids: Vec<String> = runs
                    .iter()
                    .filter(|r| r.utility().within(&anchor, delta))
                    .map(|r| r.run_id().to_string())
                    .collect();
                if !ids.is_empty() {
                    out.push(PerformanceBand::new(
                        BandKey::Interval {
                            anchor,
                            delta: *delta,
                        },
                        ids,
                    )?);
                }
            }
            out
        }
    };

    if !policy.tie_break().is_empty() {
        let mut refined = Vec::with_capacity(bands.len());
        for band in &bands {
            refined.extend(refine_lexicographic(band, set, policy.tie_break())?);
        }
        bands = refined;
    }

    let overlapping = if policy.partitions() {
        false
    } else {
        let total: usize = bands.iter().map(|b| b.len()).sum();
        let distinct: HashSet<&str> = bands
            .iter()
            .flat_map(|b| b.runs().iter().map(String::as_str))
            .collect();
        total != distinct.len()
    };

    Ok(Banding {
        policy: policy.clone(),
        bands,
        is_partition: policy.partitions(),
        overlapping,
    })
}

/// Splits a band by exact equality of the metric tuple taken in `order`.
/// Sub-bands come out in descending lexicographic order.
pub fn refine_lexicographic(
    band: &PerformanceBand,
    set: &RunSet,
    order: &[MetricKind],
) -> Result<Vec<PerformanceBand>> {
    if order.is_empty() {
        return Ok(vec![band.clone()]);
    }
    let mut groups: BTreeMap<Vec<ExactRatio>, Vec<String>> = BTreeMap::new();
    for run in set.resolve(band.runs())? {
        let cm = run.confusion(set.labels())?;
        let tuple = order
            .iter()
            .map(|&m| {
                cm.metric(m).map_err(|_| Error::UndefinedMetricForRun {
                    run_id: run.run_id().to_string(),
                    metric: m,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        groups
            .entry(tuple)
            .or_default()
            .push(run.run_id().to_string());
    }
    groups
        .into_iter()
        .rev()
        .map(|(tuple, ids)| {
            let mut refinement = band.refinement.clone();
            refinement.extend(order.iter().copied().zip(tuple));
            PerformanceBand::with_refinement(band.key.clone(), refinement, ids)
        })
        .collect()
}

/// Number of bands produced by each policy.
pub fn band_counts(set: &RunSet, policies: &[BandingPolicy]) -> Result<Vec<(BandingPolicy, usize)>> {
    policies
        .iter()
        .map(|p| Ok((p.clone(), partition(set, p)?.bands.len())))
        .collect()
}
