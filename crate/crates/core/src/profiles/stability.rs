use serde::{Deserialize, Serialize};

use super::style::ProfileStyle;
use super::svg::{text_width, Anchor, Svg};
use super::{check_descending, fit, Profile};
use crate::banding::PerformanceBand;
use crate::error::{Error, Result};
use crate::fairness::prediction_vector_groups;
use crate::prediction::RunSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub count: usize,
    pub width_px: f64,
    pub runs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PyramidRecord {
    pub label: String,
    pub epsilon_display: String,
    pub colour: String,
    pub run_count: usize,
    /// Bottom (most common vector) first.
    pub segments: Vec<SegmentRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySidecar {
    pub bands: Vec<PyramidRecord>,
}

const MARGIN: f64 = 20.0;
const GAP: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const MAX_SEGMENT: f64 = 18.0;

/// One pyramid per band (the first `top_n` bands): a segment per distinct
/// fairness-set prediction vector, widest at the bottom, width proportional
/// to the number of runs sharing the vector.
pub fn stability_profile(
    bands: &[PerformanceBand],
    set: &RunSet,
    top_n: usize,
    style: &ProfileStyle,
) -> Result<Profile<StabilitySidecar>> {
    style.validate()?;
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    if bands.is_empty() {
        return Err(Error::EmptyBand);
    }
    check_descending(bands)?;
    let bands = &bands[..top_n.min(bands.len())];
    let groups = bands
        .iter()
        .map(|b| prediction_vector_groups(b, set))
        .collect::<Result<Vec<_>>>()?;

    let n = bands.len() as f64;
    let max_w = style.max_width as f64;
    let col_w = ((max_w - 2.0 * MARGIN - (n - 1.0) * GAP) / n).clamp(20.0, 160.0);
    let width = 2.0 * MARGIN + n * col_w + (n - 1.0) * GAP;
    let max_segments = groups.iter().map(Vec::len).max().unwrap_or(1) as f64;
    let seg_h = ((style.max_height as f64 - TOP - BOTTOM) / max_segments).clamp(1.0, MAX_SEGMENT);
    let height = TOP + max_segments * seg_h + BOTTOM;
    let base_y = TOP + max_segments * seg_h;
    let fs = style.font_size;
    let count_fs = (seg_h as u32).saturating_sub(4).clamp(1, fs);

    let mut svg = Svg::new(width, height, fs);
    svg.comment("stability profile: segment width proportional to runs sharing a prediction vector");
    svg.label(MARGIN, TOP - 12.0, Anchor::Start, &fit("unique prediction vectors per band", width - 2.0 * MARGIN, fs));

    let mut records = Vec::with_capacity(bands.len());
    for (rank, (band, groups)) in bands.iter().zip(&groups).enumerate() {
        let colour = style.band_colour(rank).to_string();
        let x0 = MARGIN + rank as f64 * (col_w + GAP);
        let cx = x0 + col_w / 2.0;
        let widest = groups[0].count as f64;
        svg.open_group(&format!("band-{rank}"));
        let mut segments = Vec::with_capacity(groups.len());
        for (level, g) in groups.iter().enumerate() {
            let w = col_w * g.count as f64 / widest;
            let y = base_y - (level as f64 + 1.0) * seg_h;
            svg.rect(
                cx - w / 2.0,
                y,
                w,
                seg_h,
                &colour,
                &format!(" stroke=\"#ffffff\" stroke-width=\"0.5\"{}", style.dash_attr(rank)),
            );
            let text = g.count.to_string();
            if text_width(&text, count_fs) <= col_w {
                svg.text(cx, y + seg_h / 2.0 + count_fs as f64 * 0.35, Anchor::Middle, count_fs, &text);
            }
            segments.push(SegmentRecord {
                count: g.count,
                width_px: (w * 100.0).round() / 100.0,
                runs: g.runs.clone(),
            });
        }
        let eps = band.epsilon_display();
        svg.label(cx, base_y + 16.0, Anchor::Middle, &fit(&eps, col_w, fs));
        let summary = format!("{} runs, {} vectors", band.len(), groups.len());
        svg.label(cx, base_y + 32.0, Anchor::Middle, &fit(&summary, col_w, fs));
        svg.close_group();
        records.push(PyramidRecord {
            label: band.label(),
            epsilon_display: eps,
            colour,
            run_count: band.len(),
            segments,
        });
    }
    Ok(Profile {
        svg: svg.finish(),
        sidecar: StabilitySidecar { bands: records },
    })
}
