//! CSV ingestion, audit manifests and run-set export.
//!
//! Labels are read from `instance_id,label` files and predictions from long
//! `run_id,instance_id,prediction` files. Utilities are always recomputed.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::banding::BandingPolicy;
use crate::error::{Error, Result};
use crate::fairness::DEFAULT_DISCREPANCY_CAP;
use crate::prediction::{InstanceIndex, LabelVector, MetricKind, ModelRun, PredictionVector, RunSet};

pub const SEED_ENV: &str = "MULTIMAX_SEED";

/// The two class values used in label and prediction files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub favourable: String,
    pub unfavourable: String,
}

impl Vocabulary {
    pub fn new(favourable: impl Into<String>, unfavourable: impl Into<String>) -> Result<Self> {
        let v = Self {
            favourable: favourable.into(),
            unfavourable: unfavourable.into(),
        };
        if v.favourable == v.unfavourable {
            return Err(Error::InvalidArgument(format!(
                "favourable and unfavourable labels are both `{}`",
                v.favourable
            )));
        }
        Ok(v)
    }

    pub fn binary() -> Self {
        Self {
            favourable: "1".into(),
            unfavourable: "0".into(),
        }
    }

    pub fn class_of(&self, value: &str) -> Option<bool> {
        if value == self.favourable {
            Some(true)
        } else if value == self.unfavourable {
            Some(false)
        } else {
            None
        }
    }

    pub fn value_of(&self, favourable: bool) -> &str {
        if favourable {
            &self.favourable
        } else {
            &self.unfavourable
        }
    }
}

fn ingest_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| ingest_err(path, 1, e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(ingest_err(
            path,
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(reader)
}

fn records<'a>(
    path: &Path,
    reader: &'a mut csv::Reader<fs::File>,
    width: usize,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'a {
    let path = path.to_path_buf();
    reader.records().map(move |rec| {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            ingest_err(&path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width || rec.iter().any(str::is_empty) {
            return Err(ingest_err(&path, line, format!("expected {width} non-empty fields")));
        }
        Ok((line, rec))
    })
}

/// Raw `instance_id,label` rows in file order.
pub fn read_label_rows(path: &Path) -> Result<Vec<(u64, String, String)>> {
    let mut reader = open_csv(path, &["instance_id", "label"])?;
    let rows = records(path, &mut reader, 2)
        .map(|r| r.map(|(line, rec)| (line, rec[0].to_string(), rec[1].to_string())))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(ingest_err(path, 1, "no instances"));
    }
    Ok(rows)
}

/// Vocabulary of a label file: the favourable value must occur; the other
/// value is `unfavourable` when given, otherwise the single other value seen.
pub fn infer_vocabulary(path: &Path, favourable: &str, unfavourable: Option<&str>) -> Result<Vocabulary> {
    let rows = read_label_rows(path)?;
    let mut values: Vec<&str> = rows.iter().map(|(_, _, v)| v.as_str()).collect();
    values.sort_unstable();
    values.dedup();
    if !values.contains(&favourable) {
        return Err(ingest_err(path, 1, format!("favourable label `{favourable}` does not occur")));
    }
    let others: Vec<&str> = values.into_iter().filter(|v| *v != favourable).collect();
    match (unfavourable, others.as_slice()) {
        (Some(u), _) => Vocabulary::new(favourable, u),
        (None, [u]) => Vocabulary::new(favourable, *u),
        (None, []) => Err(ingest_err(
            path,
            1,
            "every label is favourable; set unfavourable_label in the manifest",
        )),
        (None, many) => Err(ingest_err(path, 1, format!("more than two label values: {}", many.join(", ")))),
    }
}

/// Loads a label file; the instance index follows file order.
pub fn load_labels(path: &Path, index_name: &str, vocab: &Vocabulary) -> Result<LabelVector> {
    let rows = read_label_rows(path)?;
    let mut seen = HashMap::with_capacity(rows.len());
    let mut ids = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, id, value) in rows {
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(ingest_err(path, line, format!("instance `{id}` already listed on line {first}")));
        }
        let class = vocab.class_of(&value).ok_or_else(|| {
            ingest_err(
                path,
                line,
                format!("label `{value}` is neither `{}` nor `{}`", vocab.favourable, vocab.unfavourable),
            )
        })?;
        ids.push(id);
        labels.push(class);
    }
    LabelVector::new(InstanceIndex::new(index_name, ids)?, labels)
}

/// Per-run prediction vectors over `index`, in order of first appearance.
#[derive(Clone, Debug)]
pub struct PredictionTable {
    pub runs: Vec<(String, PredictionVector)>,
}

type Cells = (u64, Vec<Option<(bool, u64)>>);

/// Reads a long-format prediction file. Every run must cover the whole index
/// exactly once.
pub fn load_prediction_table(path: &Path, index: &InstanceIndex, vocab: &Vocabulary) -> Result<PredictionTable> {
    let mut reader = open_csv(path, &["run_id", "instance_id", "prediction"])?;
    let mut order: Vec<String> = Vec::new();
    // run -> (first line, per-position (class, line))
    let mut cells: HashMap<String, Cells> = HashMap::new();
    for row in records(path, &mut reader, 3) {
        let (line, rec) = row?;
        let (run, id, value) = (&rec[0], &rec[1], &rec[2]);
        let pos = index
            .position(id)
            .ok_or_else(|| ingest_err(path, line, format!("unknown instance `{id}`")))?;
        let class = vocab.class_of(value).ok_or_else(|| {
            ingest_err(
                path,
                line,
                format!("prediction `{value}` is neither `{}` nor `{}`", vocab.favourable, vocab.unfavourable),
            )
        })?;
        let entry = cells.entry(run.to_string()).or_insert_with(|| {
            order.push(run.to_string());
            (line, vec![None; index.len()])
        });
        if let Some((_, first)) = entry.1[pos] {
            return Err(ingest_err(
                path,
                line,
                format!("duplicate prediction for run `{run}`, instance `{id}` (first on line {first})"),
            ));
        }
        entry.1[pos] = Some((class, line));
    }
    if order.is_empty() {
        return Err(ingest_err(path, 1, "no predictions"));
    }
    let mut runs = Vec::with_capacity(order.len());
    for run in order {
        let (line, row) = cells.remove(&run).expect("run recorded");
        let mut preds = Vec::with_capacity(row.len());
        for (pos, cell) in row.into_iter().enumerate() {
            match cell {
                Some((class, _)) => preds.push(class),
                None => {
                    return Err(ingest_err(
                        path,
                        line,
                        format!("run `{run}` has no prediction for instance `{}`", index.ids()[pos]),
                    ))
                }
            }
        }
        runs.push((run, PredictionVector::new(index.clone(), preds)?));
    }
    Ok(PredictionTable { runs })
}

/// One `ModelRun` per run id, with utility computed against `labels`.
pub fn load_predictions(path: &Path, labels: &LabelVector, vocab: &Vocabulary) -> Result<Vec<ModelRun>> {
    load_prediction_table(path, labels.index(), vocab)?
        .runs
        .into_iter()
        .map(|(id, pv)| ModelRun::on_shared_index(id, "ingested", pv, labels))
        .collect()
}

/// Instance ids of a prediction file in order of first appearance; used as
/// the fairness index when the fairness set is unlabelled.
pub fn prediction_instances(path: &Path) -> Result<Vec<String>> {
    let mut reader = open_csv(path, &["run_id", "instance_id", "prediction"])?;
    let mut seen = std::collections::HashSet::new();
    let mut ids = Vec::new();
    for row in records(path, &mut reader, 3) {
        let (_, rec) = row?;
        if seen.insert(rec[1].to_string()) {
            ids.push(rec[1].to_string());
        }
    }
    Ok(ids)
}

/// `instance_id,group` rows.
pub fn load_group_map(path: &Path) -> Result<HashMap<String, String>> {
    let mut reader = open_csv(path, &["instance_id", "group"])?;
    let mut out = HashMap::new();
    for row in records(path, &mut reader, 2) {
        let (line, rec) = row?;
        if out.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
            return Err(ingest_err(path, line, format!("instance `{}` listed twice", &rec[0])));
        }
    }
    Ok(out)
}

fn default_cap() -> usize {
    DEFAULT_DISCREPANCY_CAP
}

fn default_band() -> String {
    "strict".into()
}

fn default_top_n() -> usize {
    5
}

fn default_max_instances() -> usize {
    250
}

fn default_compare() -> Vec<String> {
    vec!["strict".into(), "round:3".into(), "round:2".into()]
}

/// Flat key-value audit configuration. Relative paths resolve against the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditManifest {
    pub labels_path: PathBuf,
    pub predictions_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness_predictions_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness_labels_path: Option<PathBuf>,
    pub favourable_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unfavourable_label: Option<String>,
    /// `strict`, `round:<k>` or `tol:<delta>`.
    #[serde(default = "default_band")]
    pub band: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tie_break: Vec<MetricKind>,
    #[serde(default = "default_cap")]
    pub discrepancy_cap: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_map_path: Option<PathBuf>,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default = "default_max_instances")]
    pub max_instances: usize,
    /// Policies for the comparison table.
    #[serde(default = "default_compare")]
    pub compare: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, toml::Value>,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub seed_overridden: bool,
}

impl AuditManifest {
    /// Minimal manifest with defaults for every optional key.
    pub fn new(labels_path: impl Into<PathBuf>, predictions_path: impl Into<PathBuf>, favourable_label: &str) -> Self {
        Self {
            labels_path: labels_path.into(),
            predictions_path: predictions_path.into(),
            fairness_predictions_path: None,
            fairness_labels_path: None,
            favourable_label: favourable_label.to_string(),
            unfavourable_label: None,
            band: default_band(),
            tie_break: Vec::new(),
            discrepancy_cap: DEFAULT_DISCREPANCY_CAP,
            seed: 0,
            group_map_path: None,
            top_n: default_top_n(),
            max_instances: default_max_instances(),
            compare: default_compare(),
            provenance: BTreeMap::new(),
            base_dir: PathBuf::from("."),
            seed_overridden: false,
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m: AuditManifest = toml::from_str(text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate(path)?;
        Ok(m)
    }

    /// Reads, validates and applies the `MULTIMAX_SEED` override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text, path)?;
        m.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())
            .map_err(|message| Error::Manifest {
                path: path.to_path_buf(),
                message,
            })?;
        Ok(m)
    }

    pub fn apply_seed_override(&mut self, value: Option<&str>) -> std::result::Result<(), String> {
        if let Some(v) = value {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| format!("{SEED_ENV}=`{v}` is not an unsigned integer"))?;
            self.seed_overridden = true;
        }
        Ok(())
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let bad = |message: String| Error::Manifest {
            path: path.to_path_buf(),
            message,
        };
        if self.top_n == 0 || self.max_instances == 0 {
            return Err(bad("top_n and max_instances must be at least 1".into()));
        }
        if self.discrepancy_cap < 2 {
            return Err(bad("discrepancy_cap must be at least 2".into()));
        }
        self.policy().map_err(|e| bad(e.to_string()))?;
        for p in &self.compare {
            p.parse::<BandingPolicy>().map_err(|e| bad(e.to_string()))?;
        }
        for p in self.input_paths() {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(bad(format!("cannot find `{}`", full.display())));
            }
        }
        Ok(())
    }

    fn input_paths(&self) -> Vec<&PathBuf> {
        let mut out = vec![&self.labels_path, &self.predictions_path];
        out.extend(&self.fairness_predictions_path);
        out.extend(&self.fairness_labels_path);
        out.extend(&self.group_map_path);
        out
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Banding policy with the manifest's tie-break applied.
    pub fn policy(&self) -> Result<BandingPolicy> {
        let band: BandingPolicy = self.band.parse()?;
        if self.tie_break.is_empty() {
            Ok(band)
        } else {
            band.with_tie_break(self.tie_break.clone())
        }
    }

    pub fn comparison_policies(&self) -> Result<Vec<BandingPolicy>> {
        self.compare.iter().map(|p| p.parse()).collect()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Loads every input the manifest names.
    pub fn load_inputs(&self) -> Result<AuditInput> {
        let labels_path = self.resolve(&self.labels_path);
        let vocab = infer_vocabulary(&labels_path, &self.favourable_label, self.unfavourable_label.as_deref())?;
        let labels = load_labels(&labels_path, "validation", &vocab)?;
        let table = load_prediction_table(&self.resolve(&self.predictions_path), labels.index(), &vocab)?;

        let set = match &self.fairness_predictions_path {
            None => {
                let runs = table
                    .runs
                    .into_iter()
                    .map(|(id, pv)| ModelRun::on_shared_index(id, "ingested", pv, &labels))
                    .collect::<Result<Vec<_>>>()?;
                RunSet::on_shared_index(labels, runs)?
            }
            Some(fp) => {
                let fp = self.resolve(fp);
                let fairness_labels = match &self.fairness_labels_path {
                    Some(p) => Some(load_labels(&self.resolve(p), "fairness", &vocab)?),
                    None => None,
                };
                let index = match &fairness_labels {
                    Some(fl) => fl.index().clone(),
                    None => InstanceIndex::new("fairness", prediction_instances(&fp)?)?,
                };
                let mut fair = load_prediction_table(&fp, &index, &vocab)?
                    .runs
                    .into_iter()
                    .collect::<HashMap<_, _>>();
                if fair.len() != table.runs.len() {
                    return Err(ingest_err(
                        &fp,
                        1,
                        format!("{} runs, but the validation predictions have {}", fair.len(), table.runs.len()),
                    ));
                }
                let runs = table
                    .runs
                    .into_iter()
                    .map(|(id, pv)| {
                        let pf = fair
                            .remove(&id)
                            .ok_or_else(|| ingest_err(&fp, 1, format!("run `{id}` has no fairness predictions")))?;
                        ModelRun::new(id, "ingested", pv, pf, &labels)
                    })
                    .collect::<Result<Vec<_>>>()?;
                RunSet::new(labels, index, fairness_labels, runs)?
            }
        };
        let groups = match &self.group_map_path {
            Some(p) => Some(load_group_map(&self.resolve(p))?),
            None => None,
        };
        Ok(AuditInput { set, vocab, groups })
    }
}

#[derive(Clone, Debug)]
pub struct AuditInput {
    pub set: RunSet,
    pub vocab: Vocabulary,
    pub groups: Option<HashMap<String, String>>,
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let to_err = |e: csv::Error| Error::InvalidArgument(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_labels(path: &Path, labels: &LabelVector, vocab: &Vocabulary) -> Result<()> {
    write_csv(
        path,
        &["instance_id", "label"],
        labels
            .index()
            .ids()
            .iter()
            .zip(labels.labels())
            .map(|(id, &l)| vec![id.clone(), vocab.value_of(l).to_string()]),
    )
}

fn write_predictions<'a>(
    path: &Path,
    runs: &'a [ModelRun],
    preds: impl Fn(&'a ModelRun) -> &'a PredictionVector,
    vocab: &Vocabulary,
) -> Result<()> {
    let rows = runs.iter().flat_map(|r| {
        let pv = preds(r);
        pv.index()
            .ids()
            .iter()
            .zip(pv.preds())
            .map(move |(id, &p)| vec![r.run_id().to_string(), id.clone(), vocab.value_of(p).to_string()])
    });
    write_csv(path, &["run_id", "instance_id", "prediction"], rows)
}

/// Writes a run set as label and prediction CSVs plus `manifest.toml` in
/// `dir`, returning the manifest path.
pub fn export_run_set(
    dir: &Path,
    set: &RunSet,
    vocab: &Vocabulary,
    provenance: BTreeMap<String, toml::Value>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_labels(&dir.join("labels.csv"), set.labels(), vocab)?;
    write_predictions(&dir.join("predictions.csv"), set.runs(), |r| r.preds_validation(), vocab)?;
    let mut m = AuditManifest::new("labels.csv", "predictions.csv", &vocab.favourable);
    m.unfavourable_label = Some(vocab.unfavourable.clone());
    if !set.shares_index() {
        write_predictions(&dir.join("fairness_predictions.csv"), set.runs(), |r| r.preds_fairness(), vocab)?;
        m.fairness_predictions_path = Some("fairness_predictions.csv".into());
        if let Some(fl) = set.fairness_labels() {
            write_labels(&dir.join("fairness_labels.csv"), fl, vocab)?;
            m.fairness_labels_path = Some("fairness_labels.csv".into());
        }
    }
    m.provenance = provenance;
    let path = dir.join("manifest.toml");
    fs::write(&path, m.to_toml()?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::ExactRatio;
    use std::io::Write;

    fn file(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn r(n: u64, d: u64) -> ExactRatio {
        ExactRatio::new(n, d).unwrap()
    }

    #[test]
    fn utilities_are_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let l = file(dir.path(), "l.csv", "instance_id,label\na,yes\nb,no\nc,yes\n");
        let p = file(
            dir.path(),
            "p.csv",
            "run_id,instance_id,prediction\nA,a,yes\nA,b,no\nA,c,yes\nB,c,yes\nB,b,yes\nB,a,yes\n",
        );
        let vocab = infer_vocabulary(&l, "yes", None).unwrap();
        assert_eq!(vocab.unfavourable, "no");
        let labels = load_labels(&l, "v", &vocab).unwrap();
        let runs = load_predictions(&p, &labels, &vocab).unwrap();
        assert_eq!(runs[0].run_id(), "A");
        assert_eq!(runs[0].utility(), r(3, 3));
        assert_eq!(runs[1].utility(), r(2, 3));
    }

    #[test]
    fn rejects_malformed_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let l = file(dir.path(), "l.csv", "instance_id,label\na,1\nb,0\n");
        let vocab = Vocabulary::binary();
        let labels = load_labels(&l, "v", &vocab).unwrap();
        let cases = [
            ("run_id,instance_id,prediction\nA,a,1\nA,b,0\nA,a,1\n", 4, "duplicate"),
            ("run_id,instance_id,prediction\nA,a,1\nA,z,0\n", 3, "unknown instance"),
            ("run_id,instance_id,prediction\nA,a,1\nA,b,2\n", 3, "neither"),
            ("run_id,instance_id,prediction\nA,a,1\nA,b,0\nB,a,1\n", 4, "no prediction for instance `b`"),
            ("run_id,instance_id,prediction\nA,a,1\nA,b,\n", 3, "non-empty"),
            ("run,instance_id,prediction\nA,a,1\n", 1, "expected header"),
        ];
        for (body, want_line, want) in cases {
            let p = file(dir.path(), "p.csv", body);
            match load_predictions(&p, &labels, &vocab) {
                Err(Error::Ingest { line, message, .. }) => {
                    assert_eq!(line, want_line, "{body}");
                    assert!(message.contains(want), "{message}");
                }
                other => panic!("{body}: {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_malformed_labels() {
        let dir = tempfile::tempdir().unwrap();
        let dup = file(dir.path(), "d.csv", "instance_id,label\na,1\na,0\n");
        assert!(matches!(load_labels(&dup, "v", &Vocabulary::binary()), Err(Error::Ingest { line: 3, .. })));
        let three = file(dir.path(), "t.csv", "instance_id,label\na,1\nb,0\nc,2\n");
        assert!(infer_vocabulary(&three, "1", None).is_err());
        assert!(infer_vocabulary(&three, "9", Some("0")).is_err());
        let all_fav = file(dir.path(), "f.csv", "instance_id,label\na,1\nb,1\n");
        assert!(infer_vocabulary(&all_fav, "1", None).is_err());
        assert_eq!(infer_vocabulary(&all_fav, "1", Some("0")).unwrap(), Vocabulary::binary());
    }

    #[test]
    fn manifest_defaults_and_paths() {
        let dir = tempfile::tempdir().unwrap();
        file(dir.path(), "l.csv", "instance_id,label\na,1\nb,0\n");
        file(dir.path(), "p.csv", "run_id,instance_id,prediction\nA,a,1\nA,b,1\n");
        let mpath = file(
            dir.path(),
            "m.toml",
            "labels_path = \"l.csv\"\npredictions_path = \"p.csv\"\nfavourable_label = \"1\"\nband = \"round:2\"\n\n[provenance]\ntask = 31\n",
        );
        let m = AuditManifest::parse(&fs::read_to_string(&mpath).unwrap(), &mpath).unwrap();
        assert_eq!(m.policy().unwrap(), "round:2".parse().unwrap());
        assert_eq!(m.discrepancy_cap, DEFAULT_DISCREPANCY_CAP);
        assert_eq!(m.provenance["task"], toml::Value::Integer(31));
        let input = m.load_inputs().unwrap();
        assert_eq!(input.set.len(), 1);
        assert_eq!(input.set.runs()[0].utility(), r(1, 2));

        let missing = file(dir.path(), "x.toml", "labels_path = \"nope.csv\"\npredictions_path = \"p.csv\"\nfavourable_label = \"1\"\n");
        assert!(matches!(AuditManifest::load(&missing), Err(Error::Manifest { .. })));
        let unknown = file(dir.path(), "y.toml", "labels_path = \"l.csv\"\npredictions_path = \"p.csv\"\nfavourable_label = \"1\"\ncolour = 3\n");
        assert!(AuditManifest::load(&unknown).is_err());
    }

    #[test]
    fn seed_override() {
        let mut m = AuditManifest::new("l", "p", "1");
        m.apply_seed_override(None).unwrap();
        assert_eq!((m.seed, m.seed_overridden), (0, false));
        m.apply_seed_override(Some("42")).unwrap();
        assert_eq!((m.seed, m.seed_overridden), (42, true));
        assert!(m.apply_seed_override(Some("x")).is_err());
    }

    #[test]
    fn unlabelled_fairness_set() {
        let dir = tempfile::tempdir().unwrap();
        file(dir.path(), "l.csv", "instance_id,label\na,1\nb,0\n");
        file(dir.path(), "p.csv", "run_id,instance_id,prediction\nA,a,1\nA,b,0\nB,a,1\nB,b,1\n");
        file(dir.path(), "fp.csv", "run_id,instance_id,prediction\nB,x,1\nB,y,0\nA,y,1\nA,x,1\n");
        let mut m = AuditManifest::new("l.csv", "p.csv", "1");
        m.base_dir = dir.path().to_path_buf();
        m.fairness_predictions_path = Some("fp.csv".into());
        let set = m.load_inputs().unwrap().set;
        assert!(!set.shares_index());
        assert_eq!(set.fairness_index().ids(), &["x".to_string(), "y".to_string()]);
        assert_eq!(set.get("A").unwrap().preds_fairness().preds(), &[true, true]);
        assert!(set.fairness_labels().is_none());
    }

    #[test]
    fn export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        file(dir.path(), "l.csv", "instance_id,label\na,1\nb,0\nc,0\n");
        file(dir.path(), "p.csv", "run_id,instance_id,prediction\nA,a,1\nA,b,0\nA,c,1\nB,a,0\nB,b,0\nB,c,0\n");
        let mut m = AuditManifest::new("l.csv", "p.csv", "1");
        m.base_dir = dir.path().to_path_buf();
        let set = m.load_inputs().unwrap().set;
        let out = dir.path().join("out");
        let mut prov = BTreeMap::new();
        prov.insert("source".to_string(), toml::Value::String("test".into()));
        let mpath = export_run_set(&out, &set, &Vocabulary::binary(), prov).unwrap();
        let back = AuditManifest::load(&mpath).unwrap().load_inputs().unwrap().set;
        assert_eq!(back.len(), set.len());
        for (a, b) in set.runs().iter().zip(back.runs()) {
            assert_eq!(a.run_id(), b.run_id());
            assert_eq!(a.utility(), b.utility());
            assert_eq!(a.preds_fairness().preds(), b.preds_fairness().preds());
        }
    }
}
