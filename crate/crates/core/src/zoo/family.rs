use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset2D, DomainBox};
use super::model::{fit_polynomial, grow_tree, Knn, Model};
use crate::error::{Error, Result};
use crate::prediction::{ModelRun, PredictionVector, RunSet};

/// Grid used to detect runs that are the same function in disguise.
pub const DEDUP_RESOLUTION: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    Linear,
    Polynomial { degree: u32 },
    Knn { k: usize },
    Tree { max_depth: usize },
}

impl FamilyKind {
    pub fn tag(&self) -> String {
        match self {
            FamilyKind::Linear => "linear".into(),
            FamilyKind::Polynomial { degree } => format!("poly:{degree}"),
            FamilyKind::Knn { k } => format!("knn:{k}"),
            FamilyKind::Tree { max_depth } => format!("tree:{max_depth}"),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown family `{s}`"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<usize> {
            a.ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())
        };
        let kind = match name {
            "linear" if arg.is_none() => FamilyKind::Linear,
            "poly" => FamilyKind::Polynomial {
                degree: num(arg)? as u32,
            },
            "knn" => FamilyKind::Knn { k: num(arg)? },
            "tree" => FamilyKind::Tree {
                max_depth: num(arg)?,
            },
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl FamilyKind {
    fn validate(&self) -> Result<()> {
        let zero = match self {
            FamilyKind::Linear => false,
            FamilyKind::Polynomial { degree } => *degree == 0,
            FamilyKind::Knn { k } => *k == 0,
            FamilyKind::Tree { max_depth } => *max_depth == 0,
        };
        if zero {
            return Err(Error::InvalidArgument(format!(
                "family `{self}` needs a positive parameter"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainingPerturbation {
    None,
    /// One run per dropped training point.
    LeaveOneOut,
    /// One run per training point with its label flipped.
    LabelFlip,
    /// Seeded subsamples keeping `fraction` of the training set.
    Subsample { count: usize, fraction: f64, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Enumeration {
    /// Linear separators over `angles` normal directions in `[0, π)` and
    /// `offsets` evenly spaced thresholds across the domain box.
    Grid { angles: usize, offsets: usize },
    /// Seeded variants: coefficient perturbations of a fitted polynomial, or
    /// split-order randomisations of a tree. Sample 0 is the unperturbed fit.
    Sampled { count: usize, seed: u64, scale: f64 },
    /// Neighbour counts, each with the base training set and its perturbations.
    Neighbours {
        ks: Vec<usize>,
        perturbation: TrainingPerturbation,
    },
    #[serde(skip)]
    Explicit(Vec<Model>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub min_k: Option<usize>,
    pub max_depth: Option<usize>,
    pub max_complexity: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub enumeration: Enumeration,
    #[serde(default)]
    pub constraints: Constraints,
    /// Keep runs that predict identically everywhere on the dedup grid.
    #[serde(default)]
    pub retain_duplicates: bool,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, enumeration: Enumeration) -> Self {
        Self {
            kind,
            enumeration,
            constraints: Constraints::default(),
            retain_duplicates: false,
        }
    }

    /// A reasonable enumeration for each kind.
    pub fn default_for(kind: FamilyKind, seed: u64) -> Self {
        let enumeration = match kind {
            FamilyKind::Linear => Enumeration::Grid {
                angles: 36,
                offsets: 101,
            },
            FamilyKind::Polynomial { .. } => Enumeration::Sampled {
                count: 64,
                seed,
                scale: 0.05,
            },
            FamilyKind::Knn { k } => Enumeration::Neighbours {
                ks: vec![k],
                perturbation: TrainingPerturbation::LeaveOneOut,
            },
            FamilyKind::Tree { .. } => Enumeration::Sampled {
                count: 64,
                seed,
                scale: 0.0,
            },
        };
        Self::new(kind, enumeration)
    }

    pub fn with_constraints(mut self, constraints: Constraints) -> Self {
        self.constraints = constraints;
        self
    }

    pub fn retaining_duplicates(mut self, retain: bool) -> Self {
        self.retain_duplicates = retain;
        self
    }

    /// All parameterisations, as `(run id, model)`, in enumeration order.
    pub fn candidates(&self, train: &Dataset2D, domain: DomainBox) -> Result<Vec<(String, Model)>> {
        self.kind.validate()?;
        let tag = self.kind.tag().replace(':', "");
        let points = train.points();
        let labels = train.labels().labels();
        let out: Vec<(String, Model)> = match (&self.kind, &self.enumeration) {
            (_, Enumeration::Explicit(models)) => models
                .iter()
                .enumerate()
                .map(|(i, m)| (format!("{tag}-m{i:04}"), m.clone()))
                .collect(),
            (FamilyKind::Linear, Enumeration::Grid { angles, offsets }) => {
                let mut out = Vec::with_capacity(angles * offsets);
                for a in 0..*angles {
                    let theta = std::f64::consts::PI * a as f64 / *angles as f64;
                    let w = [theta.cos(), theta.sin()];
                    let proj: Vec<f64> = domain.corners().iter().map(|p| w[0] * p[0] + w[1] * p[1]).collect();
                    let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    for o in 0..*offsets {
                        let c = lo + (o as f64 + 0.5) * (hi - lo) / *offsets as f64;
                        out.push((format!("{tag}-a{a:03}-o{o:04}"), Model::linear(w, c)));
                    }
                }
                out
            }
            (FamilyKind::Polynomial { degree }, Enumeration::Sampled { count, seed, scale }) => {
                let base = fit_polynomial(points, labels, *degree)?;
                let Model::Polynomial { coef, .. } = &base else {
                    unreachable!("fit returns a polynomial")
                };
                let noise = Normal::new(0.0, scale.abs()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|s| {
                        let coef: Vec<f64> = if s == 0 {
                            coef.clone()
                        } else {
                            coef.iter().map(|b| b + noise.sample(&mut rng)).collect()
                        };
                        (
                            format!("{tag}-s{s:04}"),
                            Model::Polynomial {
                                degree: *degree,
                                coef,
                            },
                        )
                    })
                    .collect()
            }
            (FamilyKind::Tree { max_depth }, Enumeration::Sampled { count, seed, .. }) => {
                let depth = self
                    .constraints
                    .max_depth
                    .map_or(*max_depth, |c| c.min(*max_depth));
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|s| {
                        let tree = if s == 0 {
                            grow_tree::<ChaCha8Rng>(points, labels, depth, None)
                        } else {
                            grow_tree(points, labels, depth, Some(&mut rng))
                        };
                        (format!("{tag}-s{s:04}"), Model::Tree(Arc::new(tree)))
                    })
                    .collect()
            }
            (FamilyKind::Knn { k }, Enumeration::Neighbours { ks, perturbation }) => {
                let mut ks = if ks.is_empty() { vec![*k] } else { ks.clone() };
                ks.sort_unstable();
                ks.dedup();
                let mut out = Vec::new();
                for k in ks {
                    if self.constraints.min_k.is_some_and(|m| k < m) {
                        continue;
                    }
                    out.extend(knn_variants(&tag, k, points, labels, perturbation)?);
                }
                out
            }
            (kind, e) => {
                return Err(Error::InvalidArgument(format!(
                    "enumeration {e:?} does not apply to family `{kind}`"
                )))
            }
        };
        Ok(out
            .into_iter()
            .filter(|(_, m)| {
                self.constraints
                    .max_complexity
                    .is_none_or(|c| m.complexity() <= c)
            })
            .collect())
    }
}

fn knn_variants(
    tag: &str,
    k: usize,
    points: &[[f64; 2]],
    labels: &[bool],
    perturbation: &TrainingPerturbation,
) -> Result<Vec<(String, Model)>> {
    let knn = |pts: Vec<[f64; 2]>, lab: Vec<bool>| -> Result<Model> {
        Ok(Model::Knn(Arc::new(Knn::new(k, pts, lab)?)))
    };
    let prefix = format!("{tag}-k{k:03}");
    let mut out = vec![(format!("{prefix}-base"), knn(points.to_vec(), labels.to_vec())?)];
    let n = points.len();
    match perturbation {
        TrainingPerturbation::None => {}
        TrainingPerturbation::LeaveOneOut => {
            for j in 0..n {
                out.push((format!("{prefix}-loo{j:04}"), knn(without(points, j), without(labels, j))?));
            }
        }
        TrainingPerturbation::LabelFlip => {
            for j in 0..n {
                let mut lab = labels.to_vec();
                lab[j] = !lab[j];
                out.push((format!("{prefix}-flip{j:04}"), knn(points.to_vec(), lab)?));
            }
        }
        TrainingPerturbation::Subsample {
            count,
            fraction,
            seed,
        } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidArgument(format!("subsample fraction {fraction}")));
            }
            let keep = ((n as f64 * fraction).round() as usize).max(k);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for s in 0..*count {
                let mut idx = rand::seq::index::sample(&mut rng, n, keep.min(n)).into_vec();
                idx.sort_unstable();
                out.push((
                    format!("{prefix}-sub{s:04}"),
                    knn(idx.iter().map(|&i| points[i]).collect(), idx.iter().map(|&i| labels[i]).collect())?,
                ));
            }
        }
    }
    Ok(out)
}

fn without<T: Copy>(v: &[T], drop: usize) -> Vec<T> {
    v.iter()
        .enumerate()
        .filter(|(i, _)| *i != drop)
        .map(|(_, x)| *x)
        .collect()
}

/// A run together with the model that produced it.
#[derive(Clone, Debug)]
pub struct ZooRun {
    pub run: ModelRun,
    pub model: Model,
}

/// Training, validation and (optionally distinct) fairness data.
#[derive(Clone, Debug)]
pub struct Zoo {
    train: Dataset2D,
    validation: Dataset2D,
    fairness: Option<Dataset2D>,
}

impl Zoo {
    pub fn new(train: Dataset2D, validation: Dataset2D) -> Result<Self> {
        if validation.is_empty() {
            return Err(Error::EmptyIndex);
        }
        Ok(Self {
            train,
            validation,
            fairness: None,
        })
    }

    pub fn with_fairness(mut self, fairness: Dataset2D) -> Result<Self> {
        if fairness.index().same_as(self.validation.index()) {
            return Err(Error::InvalidArgument(
                "fairness data must use its own instance index".into(),
            ));
        }
        self.fairness = Some(fairness);
        Ok(self)
    }

    pub fn train(&self) -> &Dataset2D {
        &self.train
    }

    pub fn validation(&self) -> &Dataset2D {
        &self.validation
    }

    pub fn fairness(&self) -> &Dataset2D {
        self.fairness.as_ref().unwrap_or(&self.validation)
    }

    /// Box covering every dataset of the zoo.
    pub fn domain_box(&self) -> DomainBox {
        let mut b = self.validation.domain_box();
        for d in [Some(&self.train), self.fairness.as_ref()].into_iter().flatten() {
            let o = d.domain_box();
            b.x1 = (b.x1.0.min(o.x1.0), b.x1.1.max(o.x1.1));
            b.x2 = (b.x2.0.min(o.x2.0), b.x2.1.max(o.x2.1));
        }
        b
    }

    /// Evaluates a model into a run; utility comes from the validation labels.
    pub fn evaluate(&self, run_id: &str, family_tag: &str, model: Model) -> Result<ZooRun> {
        let predict = |d: &Dataset2D| d.points().iter().map(|p| model.predict(*p)).collect::<Vec<bool>>();
        let pv = PredictionVector::new(self.validation.index().clone(), predict(&self.validation))?;
        let pf = match &self.fairness {
            Some(f) => PredictionVector::new(f.index().clone(), predict(f))?,
            None => pv.clone(),
        };
        let run = ModelRun::new(run_id, family_tag, pv, pf, self.validation.labels())?
            .with_complexity(model.complexity());
        Ok(ZooRun { run, model })
    }

    pub fn enumerate(&self, family: &FamilySpec) -> Result<Vec<ZooRun>> {
        let candidates = family.candidates(&self.train, self.domain_box())?;
        if candidates.is_empty() {
            return Err(Error::EmptyEnumeration);
        }
        let tag = family.kind.tag();
        let runs = candidates
            .into_par_iter()
            .map(|(id, model)| self.evaluate(&id, &tag, model))
            .collect::<Result<Vec<_>>>()?;
        Ok(if family.retain_duplicates {
            runs
        } else {
            dedup_runs(runs, self.domain_box(), DEDUP_RESOLUTION)
        })
    }

    pub fn run_set(&self, runs: &[ZooRun]) -> Result<RunSet> {
        let runs: Vec<ModelRun> = runs.iter().map(|z| z.run.clone()).collect();
        match &self.fairness {
            None => RunSet::on_shared_index(self.validation.labels().clone(), runs),
            Some(f) => RunSet::new(
                self.validation.labels().clone(),
                f.index().clone(),
                Some(f.labels().clone()),
                runs,
            ),
        }
    }
}

/// One run per parameterisation of `family`, evaluated on `validation`,
/// which also serves as the fairness set.
pub fn enumerate_family(family: &FamilySpec, train: &Dataset2D, validation: &Dataset2D) -> Result<Vec<ZooRun>> {
    Zoo::new(train.clone(), validation.clone())?.enumerate(family)
}

/// Drops runs whose predictions on the validation set, the fairness set and a
/// `resolution²` grid all repeat an earlier run. Order is preserved.
pub fn dedup_runs(runs: Vec<ZooRun>, domain: DomainBox, resolution: usize) -> Vec<ZooRun> {
    let keys: Vec<Vec<bool>> = runs
        .par_iter()
        .map(|z| {
            let mut key: Vec<bool> = z.run.preds_validation().preds().to_vec();
            key.extend_from_slice(z.run.preds_fairness().preds());
            for j in 0..resolution {
                for i in 0..resolution {
                    key.push(z.model.predict(domain.cell_centre(i, j, resolution)));
                }
            }
            key
        })
        .collect();
    let mut seen = HashSet::new();
    runs.into_iter()
        .zip(keys)
        .filter_map(|(run, key)| seen.insert(key).then_some(run))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::dataset::{generate_dataset, ClusterSpec};

    fn blobs(seed: u64) -> Dataset2D {
        generate_dataset(
            &ClusterSpec::Blobs {
                favourable_mean: [-2.0, 0.0],
                unfavourable_mean: [2.0, 0.0],
                spread: 0.4,
            },
            50,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn parses_family_tags() {
        assert_eq!("linear".parse::<FamilyKind>().unwrap(), FamilyKind::Linear);
        assert_eq!(
            "poly:3".parse::<FamilyKind>().unwrap(),
            FamilyKind::Polynomial { degree: 3 }
        );
        assert_eq!("knn:5".parse::<FamilyKind>().unwrap(), FamilyKind::Knn { k: 5 });
        assert_eq!(
            "tree:2".parse::<FamilyKind>().unwrap(),
            FamilyKind::Tree { max_depth: 2 }
        );
        for bad in ["knn:0", "poly", "tree:x", "svm:1", "linear:2"] {
            assert!(bad.parse::<FamilyKind>().is_err(), "{bad}");
        }
    }

    #[test]
    fn stored_utilities_match_recomputation() {
        let data = blobs(3);
        let zoo = Zoo::new(data.clone(), data.clone()).unwrap();
        for kind in ["linear", "poly:2", "knn:3", "tree:2"] {
            let spec = FamilySpec::default_for(kind.parse().unwrap(), 7);
            let runs = zoo.enumerate(&spec).unwrap();
            assert!(!runs.is_empty());
            for z in &runs {
                let correct = data
                    .points()
                    .iter()
                    .zip(data.labels().labels())
                    .filter(|(p, l)| z.model.predict(**p) == **l)
                    .count() as u64;
                assert_eq!(z.run.utility(), crate::ratio::ExactRatio::new(correct, 100).unwrap());
            }
        }
    }

    #[test]
    fn separable_data_has_many_perfect_lines() {
        let data = blobs(11);
        let runs = enumerate_family(&FamilySpec::default_for(FamilyKind::Linear, 0), &data, &data).unwrap();
        let perfect = runs.iter().filter(|z| z.run.utility().num() == z.run.utility().den()).count();
        assert!(perfect > 1);
    }

    #[test]
    fn dedup_keeps_first_copy() {
        let data = blobs(1);
        let zoo = Zoo::new(data.clone(), data).unwrap();
        let m = Model::linear([1.0, 0.0], 0.0);
        let spec = FamilySpec::new(FamilyKind::Linear, Enumeration::Explicit(vec![m.clone(), m.clone(), Model::linear([1.0, 0.0], 0.5)]));
        let runs = zoo.enumerate(&spec).unwrap();
        let ids: Vec<&str> = runs.iter().map(|z| z.run.run_id()).collect();
        assert_eq!(ids, vec!["linear-m0000", "linear-m0002"]);
        let all = zoo.enumerate(&spec.retaining_duplicates(true)).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn constraints_filter_knn() {
        let data = blobs(2);
        let spec = FamilySpec::new(
            FamilyKind::Knn { k: 1 },
            Enumeration::Neighbours {
                ks: vec![1, 5, 9],
                perturbation: TrainingPerturbation::None,
            },
        )
        .with_constraints(Constraints {
            min_k: Some(5),
            ..Constraints::default()
        })
        .retaining_duplicates(true);
        let runs = enumerate_family(&spec, &data, &data).unwrap();
        let ids: Vec<&str> = runs.iter().map(|z| z.run.run_id()).collect();
        assert_eq!(ids, vec!["knn1-k005-base", "knn1-k009-base"]);
    }

    #[test]
    fn mismatched_enumeration_is_rejected() {
        let data = blobs(2);
        let spec = FamilySpec::new(FamilyKind::Linear, Enumeration::Sampled { count: 2, seed: 0, scale: 0.1 });
        assert!(matches!(enumerate_family(&spec, &data, &data), Err(Error::InvalidArgument(_))));
        let empty = FamilySpec::new(FamilyKind::Linear, Enumeration::Explicit(vec![]));
        assert!(matches!(enumerate_family(&empty, &data, &data), Err(Error::EmptyEnumeration)));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let data = blobs(4);
        let spec = FamilySpec::default_for(FamilyKind::Tree { max_depth: 3 }, 9);
        let a = enumerate_family(&spec, &data, &data).unwrap();
        let b = enumerate_family(&spec, &data, &data).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.run.run_id(), y.run.run_id());
            assert_eq!(x.run.preds_validation(), y.run.preds_validation());
        }
    }
}
