//! Ready-made datasets and families with known band structure.

use super::dataset::{generate_named, Borderline, ClusterSpec, Dataset2D, DomainBox};
use super::family::{Enumeration, FamilyKind, FamilySpec, TrainingPerturbation, Zoo, ZooRun};
use super::model::Model;
use crate::banding::{partition, BandKey, BandingPolicy, PerformanceBand};
use crate::error::{Error, Result};
use crate::prediction::RunSet;
use crate::ratio::ExactRatio;

pub const SCENARIOS: [&str; 5] = [
    "separable",
    "two-borderline-errors",
    "merged-linear",
    "label-flip-knn",
    "leave-one-out-knn",
];

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub zoo: Zoo,
    pub family: FamilySpec,
    pub runs: Vec<ZooRun>,
    pub set: RunSet,
}

impl Scenario {
    fn build(name: &str, zoo: Zoo, family: FamilySpec) -> Result<Self> {
        let runs = zoo.enumerate(&family)?;
        let set = zoo.run_set(&runs)?;
        Ok(Self {
            name: name.to_string(),
            zoo,
            family,
            runs,
            set,
        })
    }

    /// The strict band at `utility`.
    pub fn strict_band(&self, utility: ExactRatio) -> Result<PerformanceBand> {
        partition(&self.set, &BandingPolicy::strict())?
            .bands
            .into_iter()
            .find(|b| b.key() == &BandKey::Exact(utility))
            .ok_or(Error::EmptyBand)
    }

    pub fn members(&self, band: &PerformanceBand) -> Vec<&ZooRun> {
        self.runs
            .iter()
            .filter(|z| band.contains(z.run.run_id()))
            .collect()
    }
}

#[cfg(test)]
fn ratio(n: u64, d: u64) -> ExactRatio {
    ExactRatio::new(n, d).expect("valid constant")
}

pub fn separable(seed: u64) -> Result<Scenario> {
    let spec = ClusterSpec::Blobs {
        favourable_mean: [-2.5, 0.0],
        unfavourable_mean: [2.5, 0.0],
        spread: 0.5,
    };
    let data = generate_named(&spec, 50, seed, "p")?;
    let zoo = Zoo::new(data.clone(), data)?;
    Scenario::build("separable", zoo, FamilySpec::default_for(FamilyKind::Linear, seed))
}

/// 50/50 set with two borderline points of each class interleaved around
/// x₁ = 0, so a 98/100 linear band holds every two-error confusion matrix.
pub fn two_borderline_errors(seed: u64) -> Result<Scenario> {
    let spec = ClusterSpec::HalfPlanes {
        domain: DomainBox::new((-5.0, 5.0), (-2.0, 2.0))?,
        gap: 2.0,
        borderline: vec![
            Borderline::unfavourable(-0.3, 0.0),
            Borderline::favourable(-0.1, 0.0),
            Borderline::unfavourable(0.1, 0.0),
            Borderline::favourable(0.3, 0.0),
        ],
    };
    let data = generate_named(&spec, 50, seed, "p")?;
    let zoo = Zoo::new(data.clone(), data)?;
    let family = FamilySpec::new(
        FamilyKind::Linear,
        Enumeration::Grid {
            angles: 36,
            offsets: 101,
        },
    );
    Scenario::build("two-borderline-errors", zoo, family)
}

/// Three lines with one error each whose favourable-wins join makes two.
pub fn merged_linear(seed: u64) -> Result<Scenario> {
    let spec = ClusterSpec::HalfPlanes {
        domain: DomainBox::new((-5.0, 5.0), (-0.5, 0.5))?,
        gap: 6.0,
        borderline: vec![
            Borderline::favourable(0.5, 0.0),
            Borderline::unfavourable(-0.5, 0.5),
            Borderline::unfavourable(-0.5, -0.5),
        ],
    };
    let data = generate_named(&spec, 50, seed, "p")?;
    let zoo = Zoo::new(data.clone(), data)?;
    let family = FamilySpec::new(FamilyKind::Linear, Enumeration::Explicit(merged_linear_members()));
    Scenario::build("merged-linear", zoo, family)
}

pub fn merged_linear_members() -> Vec<Model> {
    vec![
        Model::linear([1.0, -3.0], 0.75),
        Model::linear([1.0, 3.0], 0.75),
        Model::linear([1.0, 0.0], -1.75),
    ]
}

/// 1-NN trained on the validation set, once per single-label flip: every
/// validation point is the lone error of exactly one run.
pub fn label_flip_knn(seed: u64) -> Result<Scenario> {
    let data = separated_blobs(seed)?;
    let zoo = Zoo::new(data.clone(), data)?;
    let family = FamilySpec::new(
        FamilyKind::Knn { k: 1 },
        Enumeration::Neighbours {
            ks: vec![1],
            perturbation: TrainingPerturbation::LabelFlip,
        },
    );
    Scenario::build("label-flip-knn", zoo, family)
}

fn separated_blobs(seed: u64) -> Result<Dataset2D> {
    let spec = ClusterSpec::Blobs {
        favourable_mean: [-2.5, 0.0],
        unfavourable_mean: [2.5, 0.0],
        spread: 0.5,
    };
    generate_named(&spec, 50, seed, "p")
}

/// Instance ids of the close pair in [`leave_one_out_knn`], favourable first.
pub const CLOSE_PAIR: [&str; 2] = ["p0049", "p0099"];

/// 1-NN with leave-one-out training sets and a close favourable/unfavourable
/// pair: dropping either member of the pair makes it the sole error.
pub fn leave_one_out_knn(seed: u64) -> Result<Scenario> {
    let spec = ClusterSpec::HalfPlanes {
        domain: DomainBox::new((-5.0, 5.0), (-2.0, 2.0))?,
        gap: 2.0,
        borderline: vec![
            Borderline::favourable(0.0, 0.05),
            Borderline::unfavourable(0.0, -0.05),
        ],
    };
    let data = generate_named(&spec, 50, seed, "p")?;
    let zoo = Zoo::new(data.clone(), data)?;
    let family = FamilySpec::new(
        FamilyKind::Knn { k: 1 },
        Enumeration::Neighbours {
            ks: vec![1],
            perturbation: TrainingPerturbation::LeaveOneOut,
        },
    );
    Scenario::build("leave-one-out-knn", zoo, family)
}

pub fn by_name(name: &str, seed: u64) -> Result<Scenario> {
    match name {
        "separable" => separable(seed),
        "two-borderline-errors" => two_borderline_errors(seed),
        "merged-linear" => merged_linear(seed),
        "label-flip-knn" => label_flip_knn(seed),
        "leave-one-out-knn" => leave_one_out_knn(seed),
        _ => Err(Error::InvalidArgument(format!(
            "unknown scenario `{name}`; expected one of {}",
            SCENARIOS.join(", ")
        ))),
    }
}

/// Overlapping blobs with separate training, validation and fairness draws,
/// enumerated with a compact version of the family. Gives several bands.
pub fn demo(kind: FamilyKind, seed: u64, n_per_class: usize, fairness_per_class: usize) -> Result<Scenario> {
    let spec = ClusterSpec::Blobs {
        favourable_mean: [-1.0, 0.3],
        unfavourable_mean: [1.0, -0.3],
        spread: 0.9,
    };
    let train = generate_named(&spec, n_per_class, seed, "t")?;
    let validation = generate_named(&spec, n_per_class, seed.wrapping_add(1), "v")?;
    let fairness = generate_named(&spec, fairness_per_class, seed.wrapping_add(2), "f")?;
    let zoo = Zoo::new(train, validation)?.with_fairness(fairness)?;
    let enumeration = match kind {
        FamilyKind::Linear => Enumeration::Grid {
            angles: 12,
            offsets: 24,
        },
        FamilyKind::Polynomial { .. } => Enumeration::Sampled {
            count: 48,
            seed,
            scale: 0.15,
        },
        FamilyKind::Knn { k } => Enumeration::Neighbours {
            ks: vec![k],
            perturbation: TrainingPerturbation::Subsample {
                count: 48,
                fraction: 0.8,
                seed,
            },
        },
        FamilyKind::Tree { .. } => Enumeration::Sampled {
            count: 48,
            seed,
            scale: 0.0,
        },
    };
    Scenario::build(&format!("demo-{}", kind.tag()), zoo, FamilySpec::new(kind, enumeration))
}
