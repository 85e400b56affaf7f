//! Synthetic 2-D data and enumerable classifier families.

mod dataset;
mod family;
mod flip;
mod model;
mod region;
pub mod scenarios;

pub use dataset::{generate_dataset, generate_named, Borderline, ClusterSpec, Dataset2D, DomainBox};
pub use family::{
    dedup_runs, enumerate_family, Constraints, Enumeration, FamilyKind, FamilySpec,
    TrainingPerturbation, Zoo, ZooRun, DEDUP_RESOLUTION,
};
pub use flip::{flip_search, FlipOutcome};
pub use model::{fit_polynomial, grow_tree, monomial_count, monomials, Knn, Model, TreeNode};
pub use region::{estimate_disputable_region, RegionEstimate, DEFAULT_RESOLUTION};
