use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{InstanceIndex, LabelVector};

/// Axis-aligned rectangle `[x1.0, x1.1] × [x2.0, x2.1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl DomainBox {
    pub fn new(x1: (f64, f64), x2: (f64, f64)) -> Result<Self> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(x1) || !ok(x2) {
            return Err(Error::DegenerateSpec(format!(
                "domain box {x1:?} × {x2:?} has an empty or non-finite side"
            )));
        }
        Ok(Self { x1, x2 })
    }

    pub fn width(&self) -> f64 {
        self.x1.1 - self.x1.0
    }

    pub fn height(&self) -> f64 {
        self.x2.1 - self.x2.0
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x1.0..=self.x1.1).contains(&p[0]) && (self.x2.0..=self.x2.1).contains(&p[1])
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.x1.0, self.x2.0],
            [self.x1.1, self.x2.0],
            [self.x1.0, self.x2.1],
            [self.x1.1, self.x2.1],
        ]
    }

    /// Centre of cell `(i, j)` in a `resolution × resolution` grid, `i` along
    /// x₁ and `j` along x₂.
    pub fn cell_centre(&self, i: usize, j: usize, resolution: usize) -> [f64; 2] {
        let r = resolution as f64;
        [
            self.x1.0 + (i as f64 + 0.5) * self.width() / r,
            self.x2.0 + (j as f64 + 0.5) * self.height() / r,
        ]
    }
}

/// A hand-placed point added on top of the bulk of a class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Borderline {
    pub point: [f64; 2],
    pub favourable: bool,
}

impl Borderline {
    pub fn favourable(x1: f64, x2: f64) -> Self {
        Self {
            point: [x1, x2],
            favourable: true,
        }
    }

    pub fn unfavourable(x1: f64, x2: f64) -> Self {
        Self {
            point: [x1, x2],
            favourable: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterSpec {
    /// Two isotropic Gaussian blobs.
    Blobs {
        favourable_mean: [f64; 2],
        unfavourable_mean: [f64; 2],
        spread: f64,
    },
    /// Favourable points fill the left part of the box and unfavourable
    /// points the right part, separated by a vertical gap. Borderline points
    /// count towards their class total.
    HalfPlanes {
        domain: DomainBox,
        gap: f64,
        borderline: Vec<Borderline>,
    },
}

#[derive(Clone, Debug)]
pub struct Dataset2D {
    points: Vec<[f64; 2]>,
    labels: LabelVector,
    domain_box: DomainBox,
    seed: u64,
}

impl Dataset2D {
    pub fn new(
        name: &str,
        points: Vec<[f64; 2]>,
        labels: Vec<bool>,
        domain_box: DomainBox,
        seed: u64,
    ) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                actual: labels.len(),
            });
        }
        if let Some(p) = points.iter().find(|p| !domain_box.contains(**p)) {
            return Err(Error::DegenerateSpec(format!(
                "point {p:?} lies outside the domain box"
            )));
        }
        let ids = (0..points.len()).map(|i| format!("{name}{i:04}")).collect();
        let index = InstanceIndex::new(name, ids)?;
        Ok(Self {
            labels: LabelVector::new(index, labels)?,
            points,
            domain_box,
            seed,
        })
    }

    /// Same points and labels under a fresh instance index named `name`.
    pub fn renamed(&self, name: &str) -> Result<Self> {
        Self::new(
            name,
            self.points.clone(),
            self.labels.labels().to_vec(),
            self.domain_box,
            self.seed,
        )
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn index(&self) -> &InstanceIndex {
        self.labels.index()
    }

    pub fn domain_box(&self) -> DomainBox {
        self.domain_box
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point_of(&self, instance_id: &str) -> Option<[f64; 2]> {
        self.index().position(instance_id).map(|i| self.points[i])
    }
}

/// Samples `n_per_class` points of each class. Favourable points come first.
pub fn generate_dataset(spec: &ClusterSpec, n_per_class: usize, seed: u64) -> Result<Dataset2D> {
    generate_named(spec, n_per_class, seed, "p")
}

pub fn generate_named(
    spec: &ClusterSpec,
    n_per_class: usize,
    seed: u64,
    name: &str,
) -> Result<Dataset2D> {
    if n_per_class == 0 {
        return Err(Error::DegenerateSpec("n_per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        ClusterSpec::Blobs {
            favourable_mean,
            unfavourable_mean,
            spread,
        } => {
            if !spread.is_finite() || *spread < 0.0 {
                return Err(Error::DegenerateSpec(format!("spread {spread} is invalid")));
            }
            if *spread == 0.0 && favourable_mean == unfavourable_mean {
                return Err(Error::DegenerateSpec(
                    "zero spread with coincident class means".into(),
                ));
            }
            let pad = 4.0 * spread + 0.5;
            let lo = |k: usize| favourable_mean[k].min(unfavourable_mean[k]) - pad;
            let hi = |k: usize| favourable_mean[k].max(unfavourable_mean[k]) + pad;
            let domain = DomainBox::new((lo(0), hi(0)), (lo(1), hi(1)))?;
            let mut points = Vec::with_capacity(2 * n_per_class);
            let mut labels = Vec::with_capacity(2 * n_per_class);
            for (mean, label) in [(favourable_mean, true), (unfavourable_mean, false)] {
                for _ in 0..n_per_class {
                    let mut p = [0.0; 2];
                    for k in 0..2 {
                        let v = if *spread == 0.0 {
                            mean[k]
                        } else {
                            rng.sample(Normal::new(mean[k], *spread).expect("finite spread"))
                        };
                        let (a, b) = if k == 0 { domain.x1 } else { domain.x2 };
                        p[k] = v.clamp(a, b);
                    }
                    points.push(p);
                    labels.push(label);
                }
            }
            Dataset2D::new(name, points, labels, domain, seed)
        }
        ClusterSpec::HalfPlanes {
            domain,
            gap,
            borderline,
        } => {
            let mid = (domain.x1.0 + domain.x1.1) / 2.0;
            if !gap.is_finite() || *gap < 0.0 || *gap >= domain.width() {
                return Err(Error::DegenerateSpec(format!(
                    "gap {gap} does not fit in a box of width {}",
                    domain.width()
                )));
            }
            let mut points = Vec::with_capacity(2 * n_per_class);
            let mut labels = Vec::with_capacity(2 * n_per_class);
            for favourable in [true, false] {
                let extra: Vec<&Borderline> = borderline
                    .iter()
                    .filter(|b| b.favourable == favourable)
                    .collect();
                if extra.len() > n_per_class {
                    return Err(Error::DegenerateSpec(format!(
                        "{} borderline points exceed {n_per_class} per class",
                        extra.len()
                    )));
                }
                let x1 = if favourable {
                    (domain.x1.0, mid - gap / 2.0)
                } else {
                    (mid + gap / 2.0, domain.x1.1)
                };
                for _ in 0..n_per_class - extra.len() {
                    points.push([
                        rng.random_range(x1.0..=x1.1),
                        rng.random_range(domain.x2.0..=domain.x2.1),
                    ]);
                    labels.push(favourable);
                }
                for b in extra {
                    points.push(b.point);
                    labels.push(favourable);
                }
            }
            Dataset2D::new(name, points, labels, *domain, seed)
        }
    }
}
