use serde::{Deserialize, Serialize};

use super::style::ProfileStyle;
use super::svg::{Anchor, Svg};
use super::{fit, Profile};
use crate::banding::{BandKey, Banding};
use crate::error::{Error, Result};
use crate::fairness::{ambiguity, discrepancy, DiscrepancyStats};
use crate::prediction::RunSet;
use crate::ratio::ExactRatio;

/// Per-band numbers of one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    #[serde(skip)]
    pub key: Option<BandKey>,
    pub label: String,
    pub ambiguity: ExactRatio,
    pub discrepancy: DiscrepancyStats,
    pub run_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_id: String,
    /// Descending utility.
    pub bands: Vec<BandSummary>,
}

impl FoldResult {
    pub fn from_banding(fold_id: &str, set: &RunSet, banding: &Banding, cap: usize, seed: u64) -> Result<Self> {
        let bands = banding
            .bands
            .iter()
            .map(|b| {
                Ok(BandSummary {
                    key: Some(b.key().clone()),
                    label: b.label(),
                    ambiguity: ambiguity(b, set)?,
                    discrepancy: discrepancy(b, set, cap, seed)?,
                    run_count: b.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fold_id: fold_id.to_string(),
            bands,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscrepancyMarker {
    /// Mirrored histogram of pair fractions.
    Violin,
    /// Single-run band: no pairs.
    Cross,
    /// Every pair agrees everywhere.
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelBand {
    pub label: String,
    pub marker: DiscrepancyMarker,
    /// Per fold, `None` where the fold has no such band.
    pub ambiguity: Vec<Option<ExactRatio>>,
    pub run_counts: Vec<Option<usize>>,
    pub pair_count: usize,
    /// Pair-fraction histogram pooled over folds.
    pub histogram: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelSidecar {
    pub folds: Vec<String>,
    pub bands: Vec<PanelBand>,
    pub ambiguity_axis_max: f64,
    pub discrepancy_axis_max: f64,
}

pub const HISTOGRAM_BINS: usize = 12;

const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 24.0;
const PANEL_H: f64 = 150.0;
const COUNT_H: f64 = 110.0;
const PANEL_GAP: f64 = 34.0;
const SLOT_MAX: f64 = 56.0;

fn axis_max(v: f64) -> f64 {
    ((v * 10.0).ceil() / 10.0).clamp(0.1, 1.0)
}

/// Bands across all folds, ordered by descending key (or by first
/// appearance when keys are absent).
fn band_order(folds: &[FoldResult]) -> Vec<(String, Option<BandKey>)> {
    let mut out: Vec<(String, Option<BandKey>)> = Vec::new();
    for fold in folds {
        for b in &fold.bands {
            if !out.iter().any(|(l, _)| l == &b.label) {
                out.push((b.label.clone(), b.key.clone()));
            }
        }
    }
    if out.iter().all(|(_, k)| k.is_some()) {
        out.sort_by(|a, b| b.1.cmp(&a.1));
    }
    out
}

/// Three stacked panels over bands: ambiguity per fold, pooled discrepancy
/// violins, and run counts on a log scale.
pub fn multiplicity_panel(folds: &[FoldResult], style: &ProfileStyle) -> Result<Profile<PanelSidecar>> {
    style.validate()?;
    if folds.is_empty() || folds.iter().all(|f| f.bands.is_empty()) {
        return Err(Error::InvalidArgument("multiplicity panel needs at least one fold with bands".into()));
    }
    let order = band_order(folds);
    let nb = order.len() as f64;
    let slot = ((style.max_width as f64 - LEFT - RIGHT) / nb).clamp(4.0, SLOT_MAX);
    let width = LEFT + nb * slot + RIGHT;
    let fs = style.font_size;

    let mut records = Vec::with_capacity(order.len());
    let mut max_amb: f64 = 0.0;
    let mut max_disc: f64 = 0.0;
    for (label, _) in &order {
        let per_fold: Vec<Option<&BandSummary>> =
            folds.iter().map(|f| f.bands.iter().find(|b| &b.label == label)).collect();
        let present: Vec<&BandSummary> = per_fold.iter().flatten().copied().collect();
        let fractions: Vec<f64> = present
            .iter()
            .flat_map(|b| b.discrepancy.pair_fractions().into_iter().map(|r| r.to_f64()))
            .collect();
        let marker = if present.iter().all(|b| b.discrepancy.single_run) {
            DiscrepancyMarker::Cross
        } else if fractions.iter().all(|&f| f == 0.0) {
            DiscrepancyMarker::Flat
        } else {
            DiscrepancyMarker::Violin
        };
        max_amb = max_amb.max(present.iter().map(|b| b.ambiguity.to_f64()).fold(0.0, f64::max));
        max_disc = max_disc.max(fractions.iter().copied().fold(0.0, f64::max));
        records.push((
            PanelBand {
                label: label.clone(),
                marker,
                ambiguity: per_fold.iter().map(|b| b.map(|b| b.ambiguity)).collect(),
                run_counts: per_fold.iter().map(|b| b.map(|b| b.run_count)).collect(),
                pair_count: fractions.len(),
                histogram: Vec::new(),
            },
            fractions,
        ));
    }
    let amb_max = axis_max(max_amb);
    let disc_max = axis_max(max_disc);
    for (rec, fractions) in records.iter_mut() {
        let mut hist = vec![0usize; HISTOGRAM_BINS];
        for f in fractions.iter() {
            let bin = ((f / disc_max) * HISTOGRAM_BINS as f64) as usize;
            hist[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        rec.histogram = hist;
    }
    let max_count = folds
        .iter()
        .flat_map(|f| f.bands.iter().map(|b| b.run_count))
        .max()
        .unwrap_or(1);
    let log_max = ((1.0 + max_count as f64).log10()).ceil().max(1.0);

    let amb_top = TOP;
    let disc_top = amb_top + PANEL_H + PANEL_GAP;
    let count_top = disc_top + PANEL_H + PANEL_GAP;
    let height = count_top + COUNT_H + 40.0;
    let cx = |i: usize| LEFT + (i as f64 + 0.5) * slot;

    let mut svg = Svg::new(width, height, fs);
    svg.comment("multiplicity panel: ambiguity, discrepancy, run count (log10(1 + runs))");
    let titles = [
        (amb_top, "ambiguity per fold"),
        (disc_top, "pairwise discrepancy"),
        (count_top, "runs per band, log10(1 + n)"),
    ];
    for (top, title) in titles {
        svg.label(LEFT, top - 8.0, Anchor::Start, &fit(title, width - LEFT - RIGHT, fs));
    }
    for (top, h, max) in [(amb_top, PANEL_H, amb_max), (disc_top, PANEL_H, disc_max)] {
        svg.line(LEFT, top, LEFT, top + h, "#444444", 1.0, "");
        svg.line(LEFT, top + h, width - RIGHT, top + h, "#444444", 1.0, "");
        svg.label(LEFT - 4.0, top + h, Anchor::End, "0%");
        svg.label(LEFT - 4.0, top + fs as f64, Anchor::End, &format!("{:.0}%", max * 100.0));
    }
    svg.line(LEFT, count_top, LEFT, count_top + COUNT_H, "#444444", 1.0, "");
    svg.line(LEFT, count_top + COUNT_H, width - RIGHT, count_top + COUNT_H, "#444444", 1.0, "");
    svg.label(LEFT - 4.0, count_top + fs as f64, Anchor::End, &format!("1e{log_max:.0}"));

    // ambiguity trajectories
    svg.open_group("ambiguity");
    for f in 0..folds.len() {
        let colour = style.band_colour(f).to_string();
        let mut segment: Vec<(f64, f64)> = Vec::new();
        let flush = |seg: &mut Vec<(f64, f64)>, svg: &mut Svg| {
            if seg.len() > 1 {
                svg.polyline(seg, &colour, 1.5, &format!(" opacity=\"0.8\"{}", style.dash_attr(f)));
            }
            seg.clear();
        };
        for (i, (rec, _)) in records.iter().enumerate() {
            match rec.ambiguity[f] {
                Some(a) => {
                    let y = amb_top + PANEL_H * (1.0 - a.to_f64() / amb_max);
                    segment.push((cx(i), y));
                    svg.circle(cx(i), y, 2.5, &colour);
                }
                None => flush(&mut segment, &mut svg),
            }
        }
        flush(&mut segment, &mut svg);
    }
    svg.close_group();

    // discrepancy violins
    svg.open_group("discrepancy");
    let bin_h = PANEL_H / HISTOGRAM_BINS as f64;
    let half = (slot / 2.0 - 3.0).max(1.0);
    for (i, (rec, _)) in records.iter().enumerate() {
        let colour = style.band_colour(i).to_string();
        match rec.marker {
            DiscrepancyMarker::Cross => {
                let (x, y, d) = (cx(i), disc_top + PANEL_H - 8.0, half.min(5.0));
                svg.line(x - d, y - d, x + d, y + d, &colour, 1.5, "");
                svg.line(x - d, y + d, x + d, y - d, &colour, 1.5, "");
            }
            DiscrepancyMarker::Flat => {
                let y = disc_top + PANEL_H - 1.0;
                svg.line(cx(i) - half, y, cx(i) + half, y, &colour, 2.0, "");
            }
            DiscrepancyMarker::Violin => {
                let peak = *rec.histogram.iter().max().unwrap_or(&1) as f64;
                for (b, &count) in rec.histogram.iter().enumerate() {
                    if count == 0 {
                        continue;
                    }
                    let w = half * count as f64 / peak;
                    let y = disc_top + PANEL_H - (b as f64 + 1.0) * bin_h;
                    svg.rect(cx(i) - w, y, 2.0 * w, bin_h, &colour, &style.dash_attr(i));
                }
            }
        }
    }
    svg.close_group();

    // run counts
    svg.open_group("counts");
    let nf = folds.len() as f64;
    let bar_w = ((slot - 6.0) / nf).max(0.5);
    for (i, (rec, _)) in records.iter().enumerate() {
        let colour = style.band_colour(i).to_string();
        for (f, count) in rec.run_counts.iter().enumerate() {
            if let Some(c) = count {
                let h = COUNT_H * (1.0 + *c as f64).log10() / log_max;
                let x = LEFT + i as f64 * slot + 3.0 + f as f64 * bar_w;
                svg.rect(x, count_top + COUNT_H - h, bar_w, h, &colour, "");
            }
        }
        svg.label(cx(i), count_top + COUNT_H + 16.0, Anchor::Middle, &fit(&rec.label, slot, fs));
    }
    svg.close_group();

    Ok(Profile {
        svg: svg.finish(),
        sidecar: PanelSidecar {
            folds: folds.iter().map(|f| f.fold_id.clone()).collect(),
            bands: records.into_iter().map(|(r, _)| r).collect(),
            ambiguity_axis_max: amb_max,
            discrepancy_axis_max: disc_max,
        },
    })
}
