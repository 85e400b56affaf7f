use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::dataset::DomainBox;
use super::family::ZooRun;
use super::model::Model;
use crate::banding::PerformanceBand;
use crate::error::{Error, Result};
use crate::ratio::ExactRatio;

pub const DEFAULT_RESOLUTION: usize = 512;

/// Grid view of where band members disagree over the whole domain box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegionEstimate {
    pub band_label: String,
    pub grid_resolution: usize,
    pub disputable_fraction: ExactRatio,
    /// Row-major, row `j` runs along x₁ at the `j`-th x₂ step from the bottom.
    #[serde(skip)]
    pub mask: Vec<bool>,
}

impl RegionEstimate {
    pub fn is_marked(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.grid_resolution + i]
    }

    pub fn marked(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Binary PGM, top row at the largest x₂; disputable cells are white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let r = self.grid_resolution;
        let mut out = format!("P5\n{r} {r}\n255\n").into_bytes();
        for j in (0..r).rev() {
            out.extend((0..r).map(|i| if self.is_marked(i, j) { 255u8 } else { 0 }));
        }
        out
    }

    /// True when every 4-connected disputable component fills its bounding box.
    pub fn components_are_rectangles(&self) -> bool {
        let r = self.grid_resolution;
        let mut seen = vec![false; r * r];
        for start in 0..r * r {
            if !self.mask[start] || seen[start] {
                continue;
            }
            let (mut lo_i, mut hi_i, mut lo_j, mut hi_j) = (r, 0, r, 0);
            let mut count = 0usize;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(c) = stack.pop() {
                let (i, j) = (c % r, c / r);
                count += 1;
                lo_i = lo_i.min(i);
                hi_i = hi_i.max(i);
                lo_j = lo_j.min(j);
                hi_j = hi_j.max(j);
                let mut push = |n: usize| {
                    if self.mask[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                };
                if i > 0 {
                    push(c - 1);
                }
                if i + 1 < r {
                    push(c + 1);
                }
                if j > 0 {
                    push(c - r);
                }
                if j + 1 < r {
                    push(c + r);
                }
            }
            if count != (hi_i - lo_i + 1) * (hi_j - lo_j + 1) {
                return false;
            }
        }
        true
    }
}

/// Marks every grid cell whose centre receives both classes from the band's
/// members. Each member must be a zoo run carrying its model.
pub fn estimate_disputable_region(
    band: &PerformanceBand,
    runs: &[ZooRun],
    domain: DomainBox,
    resolution: usize,
) -> Result<RegionEstimate> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    if band.is_empty() {
        return Err(Error::EmptyBand);
    }
    let by_id: HashMap<&str, &Model> = runs.iter().map(|z| (z.run.run_id(), &z.model)).collect();
    let models: Vec<&Model> = band
        .runs()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::NoDecisionFunction(id.clone()))
        })
        .collect::<Result<_>>()?;

    let mask: Vec<bool> = (0..resolution)
        .into_par_iter()
        .flat_map_iter(|j| {
            let models = &models;
            (0..resolution).map(move |i| {
                let x = domain.cell_centre(i, j, resolution);
                let first = models[0].predict(x);
                models[1..].iter().any(|m| m.predict(x) != first)
            })
        })
        .collect();
    let marked = mask.iter().filter(|&&m| m).count() as u64;
    Ok(RegionEstimate {
        band_label: band.label(),
        grid_resolution: resolution,
        disputable_fraction: ExactRatio::new(marked, (resolution * resolution) as u64)?,
        mask,
    })
}
