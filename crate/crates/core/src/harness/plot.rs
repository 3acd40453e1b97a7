use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::tile::Tile;
use crate::verify::{Analysis, PieceLabel, VerificationReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH + 2.0 * MARGIN,
        h = HEIGHT + 2.0 * MARGIN
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, WIDTH + 2.0 * MARGIN, HEIGHT + 2.0 * MARGIN);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="14">{}</text>"#, MARGIN / 2.0, escape(title));
}

fn axes(out: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH}" height="{HEIGHT}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        MARGIN + WIDTH / 2.0,
        HEIGHT + 1.7 * MARGIN,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 {x} {y})">{}</text>"#,
        escape(ylabel),
        x = MARGIN / 3.0,
        y = MARGIN + HEIGHT / 2.0
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn color(label: PieceLabel) -> String {
    match label {
        (None, _) => "#bbbbbb".to_string(),
        (Some(n), alpha) => {
            let hue = (n * 47) % 360;
            let light = 35 + alpha.map_or(0, |a| (a.rem_euclid(4) * 10) as u32);
            format!("hsl({hue},70%,{light}%)")
        }
    }
}

/// Rectangle of `t` in plot coordinates: time on x, frequency on y (upwards).
pub fn tile_rect(t: &Tile, resolution: u32) -> (f64, f64, f64, f64) {
    let w = WIDTH * t.time_len();
    let x = MARGIN + t.j as f64 * w;
    let full = (1u64 << resolution) as f64;
    let h = HEIGHT * t.freq_len() / full;
    let y = MARGIN + HEIGHT - (t.freq_start() as f64 / full) * HEIGHT - h;
    (x, y, w, h)
}

/// Time-frequency diagram of labelled tiles.
pub fn tiles_svg_from(tiles: &[(Tile, PieceLabel)], resolution: u32) -> String {
    let mut out = String::new();
    header(&mut out, &format!("tiles K={resolution}"));
    axes(&mut out, "time", "frequency");
    for (t, label) in tiles {
        let (x, y, w, h) = tile_rect(t, resolution);
        let _ = writeln!(
            out,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{h:.3}" fill="{}" fill-opacity="0.6" stroke="black" stroke-width="0.2"><title>{t}</title></rect>"#,
            color(*label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Tiles with nonempty `E(P)`, colored by level and class.
pub fn tiles_svg(an: &Analysis) -> String {
    let lin = an.model.linearizing();
    let cfg = an.model.config();
    let mut seen = BTreeSet::new();
    for k in cfg.scales() {
        for x in 0..an.f.len() {
            seen.insert(lin.tile_at(k, x));
        }
    }
    let tiles: Vec<(Tile, PieceLabel)> = seen.into_iter().map(|t| (t, an.label(&t))).collect();
    tiles_svg_from(&tiles, an.resolution())
}

/// Step plot of an integer-valued function on the grid.
pub fn counting_svg(values: &[u32], title: &str) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "x", "count");
    let top = values.iter().copied().max().unwrap_or(0).max(1) as f64;
    let n = values.len().max(1) as f64;
    let mut path = String::new();
    for (i, &v) in values.iter().enumerate() {
        let x0 = MARGIN + WIDTH * i as f64 / n;
        let x1 = MARGIN + WIDTH * (i + 1) as f64 / n;
        let y = MARGIN + HEIGHT - HEIGHT * v as f64 / top;
        let _ = write!(path, "{}{x0:.3},{y:.3} L{x1:.3},{y:.3} ", if i == 0 { "M" } else { "L" });
    }
    if !path.is_empty() {
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="steelblue"/>"#, path.trim_end());
    }
    out.push_str("</svg>\n");
    out
}

/// Check families drawn in the decay chart.
pub const DECAY_SERIES: [&str; 3] = ["c.l2decay", "b.lweak1", "b.weak"];

/// `log2` of the per-level maximum ratio against `n`.
pub fn decay_svg(report: &VerificationReport) -> String {
    let mut series: BTreeMap<&str, BTreeMap<u32, f64>> = BTreeMap::new();
    for name in DECAY_SERIES {
        let mut pts: BTreeMap<u32, f64> = BTreeMap::new();
        for c in report.records(name) {
            if let Some(n) = c.context.n {
                if c.ratio > 0.0 && c.ratio.is_finite() {
                    let e = pts.entry(n).or_insert(c.ratio);
                    *e = e.max(c.ratio);
                }
            }
        }
        if !pts.is_empty() {
            series.insert(name, pts);
        }
    }
    let mut out = String::new();
    header(&mut out, &format!("per-level ratios K={} seed={}", report.meta.resolution, report.meta.seed));
    axes(&mut out, "n", "log2 ratio");
    let all = series.values().flat_map(|s| s.iter());
    let (mut n_lo, mut n_hi, mut y_lo, mut y_hi) = (u32::MAX, 0u32, f64::INFINITY, f64::NEG_INFINITY);
    for (&n, &r) in all {
        n_lo = n_lo.min(n);
        n_hi = n_hi.max(n);
        y_lo = y_lo.min(r.log2());
        y_hi = y_hi.max(r.log2());
    }
    if series.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let span_n = (n_hi - n_lo).max(1) as f64;
    let span_y = if y_hi > y_lo { y_hi - y_lo } else { 1.0 };
    let px = |n: u32| MARGIN + WIDTH * (n - n_lo) as f64 / span_n;
    let py = |r: f64| MARGIN + HEIGHT - HEIGHT * (r.log2() - y_lo) / span_y;
    let palette = ["crimson", "steelblue", "darkgreen"];
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = palette[i % palette.len()];
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(j, (&n, &r))| format!("{}{:.3},{:.3}", if j == 0 { "M" } else { "L" }, px(n), py(r)))
            .collect();
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{colour}"/>"#, d.join(" "));
        for (&n, &r) in pts {
            let _ = writeln!(out, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{colour}"/>"#, px(n), py(r));
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12" fill="{colour}">{}</text>"#,
            MARGIN + WIDTH - 100.0,
            MARGIN + 16.0 * (i + 1) as f64,
            escape(name)
        );
    }
    for n in n_lo..=n_hi {
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="middle">{n}</text>"#,
            px(n),
            MARGIN + HEIGHT + 14.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="end">{y_hi:.2}</text><text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="end">{y_lo:.2}</text>"#,
        MARGIN - 4.0,
        MARGIN + 10.0,
        MARGIN - 4.0,
        MARGIN + HEIGHT
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_single_tile() {
        let empty = tiles_svg_from(&[], 4);
        assert!(empty.starts_with("<svg") && empty.ends_with("</svg>\n"));
        assert_eq!(empty.matches("<rect").count(), 2);
        // I = [1/4, 1/2), ω = [4, 8) out of [0, 16)
        let t = Tile { k: 2, j: 1, m: 1 };
        let (x, y, w, h) = tile_rect(&t, 4);
        assert_eq!((x, w), (MARGIN + WIDTH / 4.0, WIDTH / 4.0));
        assert_eq!((y, h), (MARGIN + HEIGHT / 2.0, HEIGHT / 4.0));
        let one = tiles_svg_from(&[(t, (Some(0), Some(1)))], 4);
        assert_eq!(one.matches("<rect").count(), 3);
        assert!(one.contains(r#"x="208.000" y="288.000" width="160.000" height="120.000""#));
        let c = counting_svg(&[0, 2, 1, 0], "count");
        assert_eq!(c.matches("<path").count(), 1);
    }
}
