//! Deterministic SVG profiles of bands, each with a JSON side-car.

mod grid;
mod panel;
mod stability;
mod style;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::banding::PerformanceBand;
use crate::error::{Error, Result};

pub use grid::{fairness_profile, FairnessSidecar, GridBand, ProfileVariant};
pub use panel::{
    multiplicity_panel, BandSummary, DiscrepancyMarker, FoldResult, PanelBand, PanelSidecar,
    HISTOGRAM_BINS,
};
pub use stability::{stability_profile, PyramidRecord, SegmentRecord, StabilitySidecar};
pub use style::{contrast_ratio, ProfileStyle, MIN_SHADE_CONTRAST};

/// A rendered document and the data behind its elements.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile<T> {
    pub svg: String,
    pub sidecar: T,
}

impl<T: Serialize> Profile<T> {
    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.sidecar)? + "\n")
    }

    /// Writes `<stem>.svg` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let svg_path = dir.join(format!("{stem}.svg"));
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&svg_path, &self.svg).map_err(|e| Error::io(&svg_path, e))?;
        fs::write(&json_path, self.sidecar_json()?).map_err(|e| Error::io(&json_path, e))?;
        Ok((svg_path, json_path))
    }
}

/// Truncates `text` with an ellipsis so it fits in `width` pixels.
pub(crate) fn fit(text: &str, width: f64, size: u32) -> String {
    if svg::text_width(text, size) <= width {
        return text.to_string();
    }
    let keep = (width / (size as f64 * 0.6)).floor() as usize;
    if keep == 0 {
        return String::new();
    }
    let mut out: String = text.chars().take(keep - 1).collect();
    out.push('…');
    out
}

pub(crate) fn check_descending(bands: &[PerformanceBand]) -> Result<()> {
    if bands.windows(2).any(|w| w[0].key() < w[1].key()) {
        return Err(Error::InvalidArgument(
            "bands must be ordered by descending utility".into(),
        ));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::banding::{partition, BandKey, BandingPolicy};
    use crate::fairness::{discrepancy, prediction_vector_groups};
    use crate::prediction::{InstanceIndex, LabelVector, ModelRun, PredictionVector, RunSet};
    use crate::ratio::ExactRatio;
    use proptest::prelude::*;
    use std::collections::HashMap;

    /// Runs over a shared index with all-favourable labels, so utility is the
    /// share of favourable predictions.
    fn set_from_rows(rows: &[Vec<bool>]) -> RunSet {
        let n = rows[0].len();
        let index = InstanceIndex::sequential("v", n).unwrap();
        let labels = LabelVector::new(index.clone(), vec![true; n]).unwrap();
        let runs = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let pv = PredictionVector::new(index.clone(), row.clone()).unwrap();
                ModelRun::on_shared_index(format!("r{i:03}"), "t", pv, &labels).unwrap()
            })
            .collect();
        RunSet::on_shared_index(labels, runs).unwrap()
    }

    fn band_of(set: &RunSet) -> PerformanceBand {
        PerformanceBand::new(
            BandKey::Exact(set.runs()[0].utility()),
            set.runs().iter().map(|r| r.run_id().to_string()).collect(),
        )
        .unwrap()
    }

    /// 36 runs at the same utility spread over 12 distinct vectors.
    fn pyramid_set() -> RunSet {
        let counts = [8, 6, 5, 4, 3, 2, 2, 2, 1, 1, 1, 1];
        assert_eq!(counts.iter().sum::<usize>(), 36);
        let mut rows = Vec::new();
        for (v, &c) in counts.iter().enumerate() {
            // every vector has 93 favourable predictions out of 100
            let mut row = vec![true; 100];
            for k in 0..7 {
                row[(v * 7 + k) % 100] = false;
            }
            for _ in 0..c {
                rows.push(row.clone());
            }
        }
        set_from_rows(&rows)
    }

    #[test]
    fn pyramid_segments_match_vector_groups() {
        let set = pyramid_set();
        let band = band_of(&set);
        let p = stability_profile(std::slice::from_ref(&band), &set, 5, &ProfileStyle::default()).unwrap();
        let segs = &p.sidecar.bands[0].segments;
        assert_eq!(segs.len(), 12);
        assert_eq!(segs.iter().map(|s| s.count).sum::<usize>(), 36);
        let groups = prediction_vector_groups(&band, &set).unwrap();
        assert_eq!(segs.iter().map(|s| s.count).collect::<Vec<_>>(), groups.iter().map(|g| g.count).collect::<Vec<_>>());
        assert!(segs.windows(2).all(|w| w[0].width_px >= w[1].width_px));
        viewbox::check(&p.svg).unwrap();
        let again = stability_profile(&[band], &set, 5, &ProfileStyle::default()).unwrap();
        assert_eq!(p.svg, again.svg);
    }

    #[test]
    fn identical_runs_give_one_full_segment() {
        let set = set_from_rows(&vec![vec![true, false, true]; 4]);
        let p = stability_profile(&[band_of(&set)], &set, 1, &ProfileStyle::default()).unwrap();
        let segs = &p.sidecar.bands[0].segments;
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].count, 4);
        assert_eq!(segs[0].width_px, 160.0);
        let single = set_from_rows(&[vec![true, false]]);
        let p = stability_profile(&[band_of(&single)], &single, 1, &ProfileStyle::default()).unwrap();
        assert_eq!(p.sidecar.bands[0].segments[0].count, 1);
    }

    #[test]
    fn stability_rejects_bad_input() {
        let set = set_from_rows(&[vec![true, false], vec![false, false]]);
        let bands = partition(&set, &BandingPolicy::strict()).unwrap().bands;
        assert!(stability_profile(&bands, &set, 0, &ProfileStyle::default()).is_err());
        let reversed: Vec<_> = bands.iter().rev().cloned().collect();
        assert!(stability_profile(&reversed, &set, 2, &ProfileStyle::default()).is_err());
        assert!(stability_profile(&[], &set, 2, &ProfileStyle::default()).is_err());
    }

    #[test]
    fn agreeing_runs_give_single_shade_columns() {
        let set = set_from_rows(&vec![vec![true, false, true, true]; 3]);
        let p = fairness_profile(&[band_of(&set)], &set, ProfileVariant::Faithful, 10, 0, &ProfileStyle::default()).unwrap();
        let cells = &p.sidecar.cells;
        for c in 0..4 {
            let col: Vec<char> = cells.iter().map(|r| r.chars().nth(c).unwrap()).collect();
            assert!(col.windows(2).all(|w| w[0] == w[1]));
        }
        assert_eq!(p.sidecar.disputable_total, 0);
    }

    #[test]
    fn summary_of_two_runs_disagreeing_once() {
        let set = set_from_rows(&[vec![false, true, true], vec![true, true, false]]);
        // utilities 2/3 each: one band
        let band = band_of(&set);
        let faithful = fairness_profile(std::slice::from_ref(&band), &set, ProfileVariant::Faithful, 10, 0, &ProfileStyle::default()).unwrap();
        let summary = fairness_profile(&[band], &set, ProfileVariant::Summary, 10, 0, &ProfileStyle::default()).unwrap();
        assert_eq!(faithful.sidecar.cells, vec!["011", "110"]);
        assert_eq!(summary.sidecar.cells, vec!["111", "010"]);
        viewbox::check(&summary.svg).unwrap();
    }

    #[test]
    fn sampling_picks_disputable_columns() {
        // 30 disputable instances out of 60, cap 12
        let a: Vec<bool> = (0..60).map(|i| i % 2 == 0).collect();
        let b: Vec<bool> = (0..60).map(|i| i % 4 == 0 || i % 2 == 1).collect();
        let set = set_from_rows(&[a, b]);
        let band = PerformanceBand::new(BandKey::Exact(ExactRatio::one()), vec!["r000".into(), "r001".into()]).unwrap();
        let p = fairness_profile(std::slice::from_ref(&band), &set, ProfileVariant::Faithful, 12, 5, &ProfileStyle::default()).unwrap();
        assert!(p.sidecar.sampled);
        assert_eq!(p.sidecar.columns.len(), 12);
        assert_eq!(p.sidecar.disputable_shown, 12);
        assert!(p.svg.contains("seed 5"));
        let again = fairness_profile(std::slice::from_ref(&band), &set, ProfileVariant::Faithful, 12, 5, &ProfileStyle::default()).unwrap();
        assert_eq!(p, again);
        let other = fairness_profile(&[band], &set, ProfileVariant::Faithful, 12, 6, &ProfileStyle::default()).unwrap();
        assert_ne!(p.sidecar.columns, other.sidecar.columns);
    }

    #[test]
    fn summary_with_sampling_puts_disputable_first() {
        let mut a = vec![true; 40];
        let mut b = vec![true; 40];
        a[30] = false;
        b[35] = false;
        let set = set_from_rows(&[a, b]);
        let band = band_of(&set);
        let p = fairness_profile(&[band], &set, ProfileVariant::Summary, 10, 1, &ProfileStyle::default()).unwrap();
        assert!(p.sidecar.sampled);
        assert_eq!(&p.sidecar.columns[..2], &["i30".to_string(), "i35".to_string()]);
    }

    fn fold(set: &RunSet, id: &str) -> FoldResult {
        let banding = partition(set, &BandingPolicy::strict()).unwrap();
        FoldResult::from_banding(id, set, &banding, 500, 3).unwrap()
    }

    #[test]
    fn panel_markers() {
        // band 1/1 has one run, band 2/3 has identical runs, band 1/3 disagrees
        let set = set_from_rows(&[
            vec![true, true, true],
            vec![true, true, false],
            vec![true, true, false],
            vec![true, false, false],
            vec![false, true, false],
        ]);
        let p = multiplicity_panel(&[fold(&set, "f0")], &ProfileStyle::default()).unwrap();
        let markers: Vec<DiscrepancyMarker> = p.sidecar.bands.iter().map(|b| b.marker).collect();
        assert_eq!(markers, vec![DiscrepancyMarker::Cross, DiscrepancyMarker::Flat, DiscrepancyMarker::Violin]);
        viewbox::check(&p.svg).unwrap();
    }

    #[test]
    fn ten_fair_folds_are_flat_at_zero() {
        let set = set_from_rows(&vec![vec![true, false, true]; 3]);
        let folds: Vec<FoldResult> = (0..10).map(|i| fold(&set, &format!("f{i}"))).collect();
        let p = multiplicity_panel(&folds, &ProfileStyle::default()).unwrap();
        assert_eq!(p.sidecar.folds.len(), 10);
        for b in &p.sidecar.bands {
            assert!(b.ambiguity.iter().all(|a| a.unwrap().is_zero()));
        }
        assert!(multiplicity_panel(&[], &ProfileStyle::default()).is_err());
    }

    #[test]
    fn sidecar_round_trips_and_writes() {
        let set = pyramid_set();
        let p = stability_profile(&[band_of(&set)], &set, 1, &ProfileStyle::default()).unwrap();
        let back: StabilitySidecar = serde_json::from_str(&p.sidecar_json().unwrap()).unwrap();
        assert_eq!(back, p.sidecar);
        let dir = tempfile::tempdir().unwrap();
        let (svg, json) = p.write(dir.path(), "stability").unwrap();
        assert!(svg.exists() && json.exists());
    }

    #[test]
    fn fit_truncates() {
        assert_eq!(fit("abc", 100.0, 10), "abc");
        let t = fit("abcdefghij", 30.0, 10);
        assert_eq!(t.chars().count(), 5);
        assert!(t.ends_with('…'));
    }

    fn random_rows() -> impl Strategy<Value = Vec<Vec<bool>>> {
        (5usize..40, 2usize..12).prop_flat_map(|(n, m)| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), m)
        })
    }

    fn column_multisets(p: &FairnessSidecar) -> HashMap<(usize, usize), usize> {
        let mut out = HashMap::new();
        for (bi, b) in p.bands.iter().enumerate() {
            for r in b.first_row..b.first_row + b.runs.len() {
                for (c, ch) in p.cells[r].chars().enumerate() {
                    if ch == '1' {
                        *out.entry((bi, c)).or_default() += 1;
                    }
                }
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn summary_preserves_column_multisets(rows in random_rows(), cap in 1usize..50, seed in 0u64..1000) {
            let set = set_from_rows(&rows);
            let bands = partition(&set, &BandingPolicy::strict()).unwrap().bands;
            let style = ProfileStyle::default();
            let f = fairness_profile(&bands, &set, ProfileVariant::Faithful, cap, seed, &style).unwrap();
            let s = fairness_profile(&bands, &set, ProfileVariant::Summary, cap, seed, &style).unwrap();
            // same selected columns, possibly reordered
            let mut fc = f.sidecar.columns.clone();
            let mut sc = s.sidecar.columns.clone();
            fc.sort();
            sc.sort();
            prop_assert_eq!(fc, sc);
            let fm = column_multisets(&f.sidecar);
            let sm = column_multisets(&s.sidecar);
            for ((b, c), count) in &fm {
                let id = &f.sidecar.columns[*c];
                let sc = s.sidecar.columns.iter().position(|x| x == id).unwrap();
                prop_assert_eq!(sm.get(&(*b, sc)).copied().unwrap_or(0), *count);
            }
            prop_assert_eq!(fm.values().sum::<usize>(), sm.values().sum::<usize>());
            viewbox::check(&f.svg).unwrap();
            viewbox::check(&s.svg).unwrap();
        }

        #[test]
        fn every_profile_stays_in_its_viewbox(rows in random_rows()) {
            let set = set_from_rows(&rows);
            let bands = partition(&set, &BandingPolicy::strict()).unwrap().bands;
            let style = ProfileStyle::default();
            viewbox::check(&stability_profile(&bands, &set, 20, &style).unwrap().svg).unwrap();
            let folds = vec![fold(&set, "a"), fold(&set, "b")];
            viewbox::check(&multiplicity_panel(&folds, &style).unwrap().svg).unwrap();
            for b in &bands {
                let d = discrepancy(b, &set, 500, 0).unwrap();
                prop_assert_eq!(d.single_run, b.len() == 1);
            }
        }
    }
}
