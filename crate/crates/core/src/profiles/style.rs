use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dash patterns used once the palette has been cycled through.
const DASHES: [&str; 4] = ["", "6 3", "2 2", "8 2 2 2"];

/// Minimum luminance contrast between the two shades of any band colour.
pub const MIN_SHADE_CONTRAST: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileStyle {
    /// `#rrggbb` colours assigned to bands by descending-utility rank.
    pub band_palette: Vec<String>,
    pub cell_px: u32,
    /// Opacity of the band colour for favourable cells, mixed over white.
    pub favourable_shade: f64,
    /// Same for unfavourable cells; must stay visibly lighter.
    pub unfavourable_shade: f64,
    pub max_width: u32,
    pub max_height: u32,
    pub font_size: u32,
}

impl Default for ProfileStyle {
    fn default() -> Self {
        Self {
            band_palette: [
                "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                "#7f7f7f", "#bcbd22", "#17becf",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            cell_px: 6,
            favourable_shade: 1.0,
            unfavourable_shade: 0.2,
            max_width: 4000,
            max_height: 4000,
            font_size: 11,
        }
    }
}

fn parse_hex(c: &str) -> Option<[f64; 3]> {
    let h = c.strip_prefix('#')?;
    if h.len() != 6 {
        return None;
    }
    let ch = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).ok().map(|v| v as f64 / 255.0);
    Some([ch(0)?, ch(2)?, ch(4)?])
}

fn hex(rgb: [f64; 3]) -> String {
    let b = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", b(rgb[0]), b(rgb[1]), b(rgb[2]))
}

fn luminance(rgb: [f64; 3]) -> f64 {
    let lin = |v: f64| {
        if v <= 0.03928 {
            v / 12.92
        } else {
            ((v + 0.055) / 1.055).powf(2.4)
        }
    };
    0.2126 * lin(rgb[0]) + 0.7152 * lin(rgb[1]) + 0.0722 * lin(rgb[2])
}

/// WCAG contrast ratio between two `#rrggbb` colours.
pub fn contrast_ratio(a: &str, b: &str) -> Option<f64> {
    let (la, lb) = (luminance(parse_hex(a)?), luminance(parse_hex(b)?));
    let (hi, lo) = if la > lb { (la, lb) } else { (lb, la) };
    Some((hi + 0.05) / (lo + 0.05))
}

impl ProfileStyle {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("profile style: {m}")));
        if self.band_palette.is_empty() {
            return bad("palette is empty".into());
        }
        if let Some(c) = self.band_palette.iter().find(|c| parse_hex(c).is_none()) {
            return bad(format!("colour `{c}` is not #rrggbb"));
        }
        if self.cell_px == 0 || self.font_size == 0 || self.max_width == 0 || self.max_height == 0 {
            return bad("sizes must be positive".into());
        }
        for s in [self.favourable_shade, self.unfavourable_shade] {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("shade {s} outside [0, 1]"));
            }
        }
        for i in 0..self.band_palette.len() {
            let ratio = contrast_ratio(&self.shade(i, true), &self.shade(i, false)).unwrap_or(1.0);
            if ratio < MIN_SHADE_CONTRAST {
                return bad(format!(
                    "shades of `{}` have contrast {ratio:.2} < {MIN_SHADE_CONTRAST}",
                    self.band_palette[i]
                ));
            }
        }
        Ok(())
    }

    /// Colour of the band at descending-utility rank `rank`.
    pub fn band_colour(&self, rank: usize) -> &str {
        &self.band_palette[rank % self.band_palette.len()]
    }

    /// Dash pattern distinguishing bands that share a palette colour.
    pub fn band_dash(&self, rank: usize) -> &'static str {
        DASHES[(rank / self.band_palette.len()) % DASHES.len()]
    }

    /// Stroke attribute for a band outline, empty for the first cycle.
    pub(crate) fn dash_attr(&self, rank: usize) -> String {
        match self.band_dash(rank) {
            "" => String::new(),
            d => format!(" stroke-dasharray=\"{d}\""),
        }
    }

    /// Cell colour: the band colour mixed over white at the class shade.
    pub fn shade(&self, rank: usize, favourable: bool) -> String {
        let base = parse_hex(self.band_colour(rank)).unwrap_or([0.0; 3]);
        let a = if favourable {
            self.favourable_shade
        } else {
            self.unfavourable_shade
        };
        hex([0, 1, 2].map(|k| 1.0 - a * (1.0 - base[k])))
    }
}
