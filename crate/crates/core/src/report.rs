//! Audit orchestration and the versioned JSON report.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banding::{partition, Banding, BandingPolicy, PerformanceBand};
use crate::error::{Error, Result};
use crate::fairness::{
    ambiguity, ambiguity_by_group, disputable_instances, discrepancy, fair_ensemble, prediction_vector_groups,
    DiscrepancyStats, DisputedInstance, EnsembleEvaluation, DEFAULT_DISCREPANCY_CAP,
};
use crate::ingest::{AuditManifest, SEED_ENV};
use crate::prediction::{MetricKind, RunSet};
use crate::profiles::{
    fairness_profile, multiplicity_panel, stability_profile, BandSummary, FoldResult, ProfileStyle, ProfileVariant,
};
use crate::ratio::ExactRatio;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Analysis settings independent of where the runs came from.
#[derive(Clone, Debug)]
pub struct AuditConfig {
    pub policy: BandingPolicy,
    pub compare: Vec<BandingPolicy>,
    pub discrepancy_cap: usize,
    pub seed: u64,
    pub top_n: usize,
    pub max_instances: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            policy: BandingPolicy::strict(),
            compare: vec![
                BandingPolicy::strict(),
                BandingPolicy::rounded(3).expect("valid digits"),
                BandingPolicy::rounded(2).expect("valid digits"),
            ],
            discrepancy_cap: DEFAULT_DISCREPANCY_CAP,
            seed: 0,
            top_n: 5,
            max_instances: 250,
        }
    }
}

impl AuditConfig {
    pub fn from_manifest(m: &AuditManifest) -> Result<Self> {
        Ok(Self {
            policy: m.policy()?,
            compare: m.comparison_policies()?,
            discrepancy_cap: m.discrepancy_cap,
            seed: m.seed,
            top_n: m.top_n,
            max_instances: m.max_instances,
        })
    }
}

/// Stable per-band seed: FNV-1a over the label, mixed with the audit seed.
pub fn band_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEcho {
    pub labels_path: String,
    pub predictions_path: String,
    pub fairness_predictions_path: Option<String>,
    pub fairness_labels_path: Option<String>,
    pub group_map_path: Option<String>,
    pub favourable_label: String,
    pub unfavourable_label: String,
    /// `manifest` or the name of the overriding environment variable.
    pub seed_source: String,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub band: String,
    pub tie_break: Vec<MetricKind>,
    pub compare: Vec<String>,
    pub discrepancy_cap: usize,
    pub seed: u64,
    pub top_n: usize,
    pub max_instances: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSummary {
    pub runs: usize,
    pub validation_instances: usize,
    pub validation_favourable: usize,
    pub fairness_instances: usize,
    pub shared_index: bool,
    pub fairness_labelled: bool,
}

/// The classifier granting the favourable class to everyone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub name: String,
    pub accuracy: ExactRatio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscrepancyRecord {
    pub band_size: usize,
    pub sampled_runs: usize,
    pub seed: u64,
    pub pair_count: usize,
    pub single_run: bool,
    pub min: Option<ExactRatio>,
    pub max: Option<ExactRatio>,
    pub mean: Option<ExactRatio>,
}

impl From<&DiscrepancyStats> for DiscrepancyRecord {
    fn from(d: &DiscrepancyStats) -> Self {
        Self {
            band_size: d.band_size,
            sampled_runs: d.sampled_runs,
            seed: d.seed,
            pair_count: d.pair_count(),
            single_run: d.single_run,
            min: d.min,
            max: d.max,
            mean: d.mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairEnsembleRecord {
    /// Instances of the fairness set granted the favourable class by f*.
    pub fairness_favourable: usize,
    pub validation: EnsembleEvaluation,
    pub fairness: Option<EnsembleEvaluation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandRecord {
    pub label: String,
    pub epsilon_display: String,
    pub run_ids: Vec<String>,
    /// Runs per distinct fairness-set prediction vector, most common first.
    pub unique_vector_counts: Vec<usize>,
    pub ambiguity: ExactRatio,
    /// Every member is individually fair (they all predict identically).
    pub individually_fair: bool,
    pub discrepancy: DiscrepancyRecord,
    pub disputable: Vec<DisputedInstance>,
    pub fair_ensemble: FairEnsembleRecord,
    pub group_ambiguity: Option<BTreeMap<String, ExactRatio>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: String,
    pub band_count: usize,
    pub top_band: String,
    pub top_band_runs: usize,
    pub top_band_ambiguity: ExactRatio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub format_version: u32,
    pub manifest: Option<ManifestEcho>,
    pub config: ConfigEcho,
    pub data: DataSummary,
    pub baseline: Baseline,
    /// Descending utility.
    pub bands: Vec<BandRecord>,
    pub policy_comparison: Vec<PolicyRow>,
    /// Files written next to the report.
    pub artifacts: Vec<String>,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Accuracy of always predicting the favourable class.
pub fn always_favourable_baseline(set: &RunSet) -> Result<Baseline> {
    let labels = set.labels();
    Ok(Baseline {
        name: "always favourable".into(),
        accuracy: ExactRatio::new(labels.positives() as u64, labels.len() as u64)?,
    })
}

/// Band counts and top-band ambiguity per policy, strict policies first.
pub fn compare_policies(set: &RunSet, policies: &[BandingPolicy]) -> Result<Vec<PolicyRow>> {
    if policies.len() < 2 {
        return Err(Error::InvalidArgument("comparison needs at least two policies".into()));
    }
    let mut ordered: Vec<&BandingPolicy> = policies.iter().filter(|p| p.is_strict()).collect();
    ordered.extend(policies.iter().filter(|p| !p.is_strict()));
    ordered
        .into_par_iter()
        .map(|p| {
            let banding = partition(set, p)?;
            let top = &banding.bands[0];
            Ok(PolicyRow {
                policy: p.to_string(),
                band_count: banding.bands.len(),
                top_band: top.label(),
                top_band_runs: top.len(),
                top_band_ambiguity: ambiguity(top, set)?,
            })
        })
        .collect()
}

struct BandAnalysis {
    record: BandRecord,
    stats: DiscrepancyStats,
}

fn analyse_band(
    band: &PerformanceBand,
    set: &RunSet,
    groups: Option<&HashMap<String, String>>,
    config: &AuditConfig,
) -> Result<BandAnalysis> {
    let label = band.label();
    let disputed = disputable_instances(band, set)?;
    let amb = ExactRatio::new(disputed.len() as u64, disputed.index_size as u64)?;
    let stats = discrepancy(band, set, config.discrepancy_cap, band_seed(config.seed, &label))?;
    let vectors = prediction_vector_groups(band, set)?;
    let fstar = fair_ensemble(band, set)?;
    let group_ambiguity = match groups {
        Some(g) => Some(ambiguity_by_group(band, set, g)?),
        None => None,
    };
    Ok(BandAnalysis {
        record: BandRecord {
            label,
            epsilon_display: band.epsilon_display(),
            run_ids: band.runs().to_vec(),
            unique_vector_counts: vectors.iter().map(|v| v.count).collect(),
            ambiguity: amb,
            individually_fair: vectors.len() == 1,
            discrepancy: DiscrepancyRecord::from(&stats),
            disputable: disputed.instances,
            fair_ensemble: FairEnsembleRecord {
                fairness_favourable: fstar.fstar_preds.preds().iter().filter(|&&p| p).count(),
                validation: fstar.validation,
                fairness: fstar.fairness,
            },
            group_ambiguity,
        },
        stats,
    })
}

/// An audit held in memory: the report plus what the profiles need.
pub struct Audit {
    pub report: AuditReport,
    pub banding: Banding,
    pub fold: FoldResult,
}

/// Bands the runs and analyses every band.
pub fn audit_runs(set: &RunSet, groups: Option<&HashMap<String, String>>, config: &AuditConfig) -> Result<Audit> {
    let banding = partition(set, &config.policy)?;
    let analyses = banding
        .bands
        .par_iter()
        .map(|b| analyse_band(b, set, groups, config))
        .collect::<Result<Vec<_>>>()?;
    let fold = FoldResult {
        fold_id: "audit".into(),
        bands: banding
            .bands
            .iter()
            .zip(&analyses)
            .map(|(b, a)| BandSummary {
                key: Some(b.key().clone()),
                label: a.record.label.clone(),
                ambiguity: a.record.ambiguity,
                discrepancy: a.stats.clone(),
                run_count: b.len(),
            })
            .collect(),
    };
    let compare = if config.compare.len() >= 2 {
        compare_policies(set, &config.compare)?
    } else {
        Vec::new()
    };
    let report = AuditReport {
        format_version: REPORT_FORMAT_VERSION,
        manifest: None,
        config: ConfigEcho {
            band: config.policy.to_string(),
            tie_break: config.policy.tie_break().to_vec(),
            compare: config.compare.iter().map(ToString::to_string).collect(),
            discrepancy_cap: config.discrepancy_cap,
            seed: config.seed,
            top_n: config.top_n,
            max_instances: config.max_instances,
        },
        data: DataSummary {
            runs: set.len(),
            validation_instances: set.labels().len(),
            validation_favourable: set.labels().positives(),
            fairness_instances: set.fairness_index().len(),
            shared_index: set.shares_index(),
            fairness_labelled: set.fairness_labels().is_some(),
        },
        baseline: always_favourable_baseline(set)?,
        bands: analyses.into_iter().map(|a| a.record).collect(),
        policy_comparison: compare,
        artifacts: Vec::new(),
    };
    Ok(Audit { report, banding, fold })
}

/// Writes the stability, fairness (both variants) and multiplicity profiles
/// for an audit into `out`; returns the file names.
pub fn write_profiles(audit: &Audit, set: &RunSet, config: &AuditConfig, out: &Path) -> Result<Vec<String>> {
    let style = ProfileStyle::default();
    let top = &audit.banding.bands[..config.top_n.min(audit.banding.bands.len())];
    let mut files = Vec::new();
    let mut push = |(svg, json): (PathBuf, PathBuf)| {
        for p in [svg, json] {
            files.push(p.file_name().expect("file name").to_string_lossy().into_owned());
        }
    };
    // tie-break refinement can repeat a key, which profiles accept
    push(stability_profile(top, set, config.top_n, &style)?.write(out, "stability")?);
    for variant in [ProfileVariant::Faithful, ProfileVariant::Summary] {
        let p = fairness_profile(top, set, variant, config.max_instances, config.seed, &style)?;
        push(p.write(out, &format!("fairness-{variant}"))?);
    }
    push(multiplicity_panel(std::slice::from_ref(&audit.fold), &style)?.write(out, "panel")?);
    Ok(files)
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

pub fn manifest_echo(m: &AuditManifest, unfavourable_label: &str) -> ManifestEcho {
    ManifestEcho {
        labels_path: path_string(&m.labels_path),
        predictions_path: path_string(&m.predictions_path),
        fairness_predictions_path: m.fairness_predictions_path.as_deref().map(path_string),
        fairness_labels_path: m.fairness_labels_path.as_deref().map(path_string),
        group_map_path: m.group_map_path.as_deref().map(path_string),
        favourable_label: m.favourable_label.clone(),
        unfavourable_label: unfavourable_label.to_string(),
        seed_source: if m.seed_overridden { SEED_ENV.into() } else { "manifest".into() },
        provenance: m
            .provenance
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null)))
            .collect(),
    }
}

/// Loads the manifest's inputs, audits them and writes `report.json` and the
/// profiles into `out`.
pub fn audit(manifest_path: &Path, out: &Path) -> Result<AuditReport> {
    let manifest = AuditManifest::load(manifest_path)?;
    let input = manifest.load_inputs()?;
    let config = AuditConfig::from_manifest(&manifest)?;
    let mut result = audit_runs(&input.set, input.groups.as_ref(), &config)?;
    let mut artifacts = write_profiles(&result, &input.set, &config, out)?;
    artifacts.sort();
    result.report.manifest = Some(manifest_echo(&manifest, &input.vocab.unfavourable));
    result.report.artifacts = artifacts;
    let path = out.join("report.json");
    fs::write(&path, result.report.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(result.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::{InstanceIndex, LabelVector, ModelRun, PredictionVector};
    use crate::ratio::SignedRatio;

    fn r(n: u64, d: u64) -> ExactRatio {
        ExactRatio::new(n, d).unwrap()
    }

    fn set(labels: &[u8], rows: &[&[u8]]) -> RunSet {
        let index = InstanceIndex::sequential("v", labels.len()).unwrap();
        let lv = LabelVector::from_classes(index.clone(), labels).unwrap();
        let runs = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let pv = PredictionVector::from_classes(index.clone(), row).unwrap();
                ModelRun::on_shared_index(format!("r{i}"), "t", pv, &lv).unwrap()
            })
            .collect();
        RunSet::on_shared_index(lv, runs).unwrap()
    }

    #[test]
    fn single_run_audit() {
        let s = set(&[1, 0, 1, 0], &[&[1, 1, 1, 0]]);
        let a = audit_runs(&s, None, &AuditConfig::default()).unwrap();
        let rep = &a.report;
        assert_eq!(rep.bands.len(), 1);
        let b = &rep.bands[0];
        assert!(b.ambiguity.is_zero());
        assert!(b.individually_fair);
        assert!(b.discrepancy.single_run);
        assert_eq!(b.fair_ensemble.validation.fstar.accuracy, r(3, 4));
        assert_eq!(b.fair_ensemble.validation.deltas[0].accuracy, SignedRatio::zero());
        assert_eq!(rep.baseline.accuracy, r(2, 4));
    }

    #[test]
    fn seventy_percent_baseline() {
        let labels: Vec<u8> = (0..100).map(|i| (i < 70) as u8).collect();
        let always = vec![1u8; 100];
        let s = set(&labels, &[&always, &labels]);
        let rep = audit_runs(&s, None, &AuditConfig::default()).unwrap().report;
        assert_eq!(rep.baseline.accuracy, r(70, 100));
        let band = rep.bands.iter().find(|b| b.run_ids == ["r0"]).unwrap();
        assert_eq!(band.fair_ensemble.validation.fstar.accuracy, rep.baseline.accuracy);
    }

    #[test]
    fn comparison_orders_strict_first() {
        let s = set(&[1, 0, 1, 0, 1], &[&[1, 0, 1, 0, 1], &[1, 1, 1, 0, 1], &[0, 1, 1, 0, 1]]);
        let rows = compare_policies(
            &s,
            &["round:1".parse().unwrap(), BandingPolicy::strict(), "round:2".parse().unwrap()],
        )
        .unwrap();
        assert_eq!(rows[0].policy, "strict");
        assert_eq!(rows[0].band_count, 3);
        assert!(compare_policies(&s, &[BandingPolicy::strict()]).is_err());
    }

    #[test]
    fn report_round_trips_through_json() {
        let s = set(&[1, 0, 1, 0], &[&[1, 1, 1, 0], &[1, 0, 1, 1], &[0, 0, 1, 0]]);
        let mut groups = HashMap::new();
        for (i, id) in s.fairness_index().ids().iter().enumerate() {
            groups.insert(id.clone(), if i % 2 == 0 { "a".to_string() } else { "b".to_string() });
        }
        let rep = audit_runs(&s, Some(&groups), &AuditConfig::default()).unwrap().report;
        let text = rep.to_json().unwrap();
        assert_eq!(AuditReport::from_json(&text).unwrap(), rep);
        assert_eq!(rep.to_json().unwrap(), text);
        assert!(text.contains("\"exact\": \"2/4\""));
    }

    #[test]
    fn band_seeds_are_stable() {
        assert_eq!(band_seed(0, "98/100"), band_seed(0, "98/100"));
        assert_ne!(band_seed(0, "98/100"), band_seed(1, "98/100"));
        assert_ne!(band_seed(0, "98/100"), band_seed(0, "97/100"));
    }
}
