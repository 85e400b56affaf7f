use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::style::ProfileStyle;
use super::svg::{text_width, Anchor, Svg};
use super::{check_descending, fit, Profile};
use crate::banding::PerformanceBand;
use crate::error::{Error, Result};
use crate::fairness::disputable_instances;
use crate::prediction::RunSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileVariant {
    /// One row per run, exactly as predicted.
    Faithful,
    /// Each column sorted within each band, favourable shade on top.
    Summary,
}

impl fmt::Display for ProfileVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileVariant::Faithful => "faithful",
            ProfileVariant::Summary => "summary",
        })
    }
}

impl FromStr for ProfileVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(ProfileVariant::Faithful),
            "summary" => Ok(ProfileVariant::Summary),
            _ => Err(Error::InvalidArgument(format!(
                "unknown profile variant `{s}` (expected faithful or summary)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBand {
    pub label: String,
    pub colour: String,
    pub first_row: usize,
    pub runs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessSidecar {
    pub variant: ProfileVariant,
    /// Instance ids, left to right.
    pub columns: Vec<String>,
    /// Instances disputable within at least one rendered band.
    pub disputable_total: usize,
    pub disputable_shown: usize,
    pub sampled: bool,
    pub seed: Option<u64>,
    pub bands: Vec<GridBand>,
    /// One string per row, `1` for favourable; rows of the summary variant
    /// do not correspond to particular runs.
    pub cells: Vec<String>,
}

struct Columns {
    positions: Vec<usize>,
    disputable_total: usize,
    disputable_shown: usize,
    sampled: bool,
}

/// Column selection: every instance when the index fits in `max_instances`;
/// otherwise all disputable instances topped up with a seeded sample of
/// stable ones, or a seeded sample of disputable instances when those alone
/// exceed `max_instances`.
fn select_columns(
    n: usize,
    disputable: &BTreeSet<usize>,
    max_instances: usize,
    seed: u64,
    variant: ProfileVariant,
) -> Columns {
    let sample = |pool: &[usize], k: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        let mut idx = rand::seq::index::sample(rng, pool.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i]).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, sampled): (Vec<usize>, bool) = if n <= max_instances {
        ((0..n).collect(), false)
    } else if disputable.len() >= max_instances {
        let pool: Vec<usize> = disputable.iter().copied().collect();
        (sample(&pool, max_instances, &mut rng), true)
    } else {
        let stable: Vec<usize> = (0..n).filter(|i| !disputable.contains(i)).collect();
        let mut chosen: Vec<usize> = disputable.iter().copied().collect();
        chosen.extend(sample(&stable, max_instances - disputable.len(), &mut rng));
        chosen.sort_unstable();
        (chosen, true)
    };
    let disputable_shown = chosen.iter().filter(|i| disputable.contains(i)).count();
    let positions = if variant == ProfileVariant::Summary && sampled {
        let (mut d, s): (Vec<usize>, Vec<usize>) = chosen.into_iter().partition(|i| disputable.contains(i));
        d.extend(s);
        d
    } else {
        chosen
    };
    Columns {
        positions,
        disputable_total: disputable.len(),
        disputable_shown,
        sampled,
    }
}

const LEFT: f64 = 80.0;
const STRIP: f64 = 8.0;
const RIGHT: f64 = 10.0;
const TOP: f64 = 24.0;

/// Grid of predicted classes: one row per run grouped by band, one column per
/// selected fairness-set instance.
pub fn fairness_profile(
    bands: &[PerformanceBand],
    set: &RunSet,
    variant: ProfileVariant,
    max_instances: usize,
    seed: u64,
    style: &ProfileStyle,
) -> Result<Profile<FairnessSidecar>> {
    style.validate()?;
    if max_instances == 0 {
        return Err(Error::InvalidArgument("max_instances must be at least 1".into()));
    }
    if bands.is_empty() {
        return Err(Error::EmptyBand);
    }
    let index = set.fairness_index();
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    check_descending(bands)?;

    let mut disputable = BTreeSet::new();
    for band in bands {
        disputable.extend(disputable_instances(band, set)?.positions);
    }
    let cols = select_columns(index.len(), &disputable, max_instances, seed, variant);

    // rows of predicted classes, band by band
    let mut grid_bands = Vec::with_capacity(bands.len());
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (rank, band) in bands.iter().enumerate() {
        let members = set.resolve(band.runs())?;
        let mut block: Vec<Vec<bool>> = members
            .iter()
            .map(|r| cols.positions.iter().map(|&p| r.preds_fairness().preds()[p]).collect())
            .collect();
        if variant == ProfileVariant::Summary {
            for c in 0..cols.positions.len() {
                let fav = block.iter().filter(|row| row[c]).count();
                for (r, row) in block.iter_mut().enumerate() {
                    row[c] = r < fav;
                }
            }
        }
        grid_bands.push(GridBand {
            label: band.label(),
            colour: style.band_colour(rank).to_string(),
            first_row: rows.len(),
            runs: band.runs().to_vec(),
        });
        rows.extend(block);
    }

    let fs = style.font_size;
    let ncols = cols.positions.len() as f64;
    let nrows = rows.len() as f64;
    let cs_w = ((style.max_width as f64 - LEFT - STRIP - RIGHT) / ncols).floor();
    let cs_h = ((style.max_height as f64 - TOP - 60.0) / nrows).floor();
    let cs = (style.cell_px as f64).min(cs_w).min(cs_h).max(1.0);

    let legend = legend_lines(variant, &cols, index.len(), seed);
    let legend_w = legend.iter().map(|l| text_width(l, fs)).fold(0.0, f64::max);
    let grid_w = LEFT + STRIP + ncols * cs + RIGHT;
    let width = grid_w.max(legend_w + 2.0 * RIGHT);
    let grid_bottom = TOP + nrows * cs;
    let line_h = fs as f64 + 4.0;
    let height = grid_bottom + 10.0 + line_h * legend.len() as f64 + 6.0;

    let mut svg = Svg::new(width, height, fs);
    svg.comment(&format!("fairness profile ({variant})"));
    svg.label(RIGHT, TOP - 8.0, Anchor::Start, &fit("runs by band (rows) x instances (columns)", width - 2.0 * RIGHT, fs));
    let x_cells = LEFT + STRIP;
    for (rank, gb) in grid_bands.iter().enumerate() {
        let y0 = TOP + gb.first_row as f64 * cs;
        let h = gb.runs.len() as f64 * cs;
        svg.open_group(&format!("band-{rank}"));
        svg.rect(LEFT, y0, STRIP - 1.0, h, &gb.colour, &style.dash_attr(rank));
        if h >= fs as f64 {
            let eps = bands[rank].epsilon_display();
            svg.label(LEFT - 4.0, y0 + h / 2.0 + fs as f64 * 0.35, Anchor::End, &fit(&eps, LEFT - 8.0, fs));
        }
        let fav = style.shade(rank, true);
        let unfav = style.shade(rank, false);
        for (r, row) in rows.iter().enumerate().skip(gb.first_row).take(gb.runs.len()) {
            let y = TOP + r as f64 * cs;
            // run-length encode each row into rects
            let mut start = 0;
            while start < row.len() {
                let v = row[start];
                let mut end = start + 1;
                while end < row.len() && row[end] == v {
                    end += 1;
                }
                let fill = if v { &fav } else { &unfav };
                svg.rect(x_cells + start as f64 * cs, y, (end - start) as f64 * cs, cs, fill, "");
                start = end;
            }
        }
        svg.close_group();
    }
    for (i, line) in legend.iter().enumerate() {
        svg.label(RIGHT, grid_bottom + 10.0 + line_h * (i as f64 + 1.0) - 4.0, Anchor::Start, line);
    }

    let ids = index.ids();
    Ok(Profile {
        svg: svg.finish(),
        sidecar: FairnessSidecar {
            variant,
            columns: cols.positions.iter().map(|&p| ids[p].clone()).collect(),
            disputable_total: cols.disputable_total,
            disputable_shown: cols.disputable_shown,
            sampled: cols.sampled,
            seed: cols.sampled.then_some(seed),
            bands: grid_bands,
            cells: rows
                .iter()
                .map(|row| row.iter().map(|&v| if v { '1' } else { '0' }).collect())
                .collect(),
        },
    })
}

fn legend_lines(variant: ProfileVariant, cols: &Columns, n: usize, seed: u64) -> Vec<String> {
    let mut out = vec!["dark cell: favourable, light cell: unfavourable".to_string()];
    out.push(match variant {
        ProfileVariant::Faithful => "faithful: one row per run".into(),
        ProfileVariant::Summary => "summary: columns sorted within each band, favourable on top".into(),
    });
    out.push(if cols.sampled {
        format!(
            "sampled {} of {n} instances ({} of {} disputable shown), seed {seed}",
            cols.positions.len(),
            cols.disputable_shown,
            cols.disputable_total
        )
    } else {
        format!("all {n} instances, {} disputable", cols.disputable_total)
    });
    out
}
