//! Raster heatmaps of a grid field over the triangle, as plain SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, TdError};

use super::{atomic_write, read_grid_csv, GridRow};

const PIXELS_X: usize = 200;
const PIXELS_Y: usize = 100;
const SCALE: usize = 3;
const MARGIN: usize = 30;
const LEGEND_WIDTH: usize = 110;
const FILL_RADIUS: usize = 8;

const VIRIDIS: [(u8, u8, u8); 9] = [
    (0x44, 0x01, 0x54),
    (0x47, 0x2d, 0x7b),
    (0x3b, 0x52, 0x8b),
    (0x2c, 0x72, 0x8e),
    (0x21, 0x91, 0x8c),
    (0x28, 0xae, 0x80),
    (0x5e, 0xc9, 0x62),
    (0xad, 0xdc, 0x30),
    (0xfd, 0xe7, 0x25),
];

/// Viridis colour for `s ∈ [0, 1]`.
pub fn viridis(s: f64) -> (u8, u8, u8) {
    let x = s.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let k = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let w = x - k as f64;
    let mix = |p: u8, q: u8| (p as f64 + w * (q as f64 - p as f64)).round() as u8;
    let (p, q) = (VIRIDIS[k], VIRIDIS[k + 1]);
    (mix(p.0, q.0), mix(p.1, q.1), mix(p.2, q.2))
}

fn hex((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn pixel_center(i: usize, j: usize) -> (f64, f64) {
    (-1.0 + 2.0 * (i as f64 + 0.5) / PIXELS_X as f64, (j as f64 + 0.5) / PIXELS_Y as f64)
}

fn inside(x1: f64, x2: f64) -> bool {
    x2 >= 0.0 && x1 <= 1.0 && x2 <= (x1 + 1.0) / 2.0
}

/// Bins the named field onto a pixel raster, filling empty pixels inside the
/// triangle from the nearest occupied pixel.
fn raster(rows: &[GridRow], field: &str) -> Result<Vec<Option<f64>>> {
    let mut sum = vec![0.0; PIXELS_X * PIXELS_Y];
    let mut count = vec![0usize; PIXELS_X * PIXELS_Y];
    for r in rows {
        let v = r
            .field(field)
            .ok_or_else(|| TdError::InvalidParameter(format!("unknown field {field}")))?;
        if !v.is_finite() {
            continue;
        }
        let i = (((r.x1 + 1.0) / 2.0 * PIXELS_X as f64) as usize).min(PIXELS_X - 1);
        let j = ((r.x2 * PIXELS_Y as f64) as usize).min(PIXELS_Y - 1);
        sum[j * PIXELS_X + i] += v;
        count[j * PIXELS_X + i] += 1;
    }
    let binned: Vec<Option<f64>> = sum.iter().zip(&count).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect();
    let mut out = binned.clone();
    for j in 0..PIXELS_Y {
        for i in 0..PIXELS_X {
            let (cx, cy) = pixel_center(i, j);
            if !inside(cx, cy) {
                out[j * PIXELS_X + i] = None;
                continue;
            }
            if binned[j * PIXELS_X + i].is_some() {
                continue;
            }
            'rings: for rad in 1..=FILL_RADIUS {
                let mut best: Option<(usize, f64)> = None;
                for jj in j.saturating_sub(rad)..=(j + rad).min(PIXELS_Y - 1) {
                    for ii in i.saturating_sub(rad)..=(i + rad).min(PIXELS_X - 1) {
                        if ii.abs_diff(i).max(jj.abs_diff(j)) != rad {
                            continue;
                        }
                        if let Some(v) = binned[jj * PIXELS_X + ii] {
                            let d = ii.abs_diff(i).pow(2) + jj.abs_diff(j).pow(2);
                            if best.is_none_or(|(bd, _)| d < bd) {
                                best = Some((d, v));
                            }
                        }
                    }
                }
                if let Some((_, v)) = best {
                    out[j * PIXELS_X + i] = Some(v);
                    break 'rings;
                }
            }
        }
    }
    Ok(out)
}

/// SVG document for one field. Output depends only on `rows` and `field`.
pub fn render_heatmap(rows: &[GridRow], field: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(TdError::InvalidParameter("grid has no rows".into()));
    }
    let px = raster(rows, field)?;
    let values = px.iter().flatten();
    let lo = values.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = values.copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return Err(TdError::InvalidParameter(format!("field {field} has no finite values")));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let level = |v: f64| (((v - lo) / span) * 255.0).round() as usize;

    let (w, h) = (PIXELS_X * SCALE, PIXELS_Y * SCALE);
    let total_w = w + 2 * MARGIN + LEGEND_WIDTH;
    let total_h = h + 2 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{total_w}" height="{total_h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="14">{field}</text>"#,
        MARGIN - 10
    );
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for j in 0..PIXELS_Y {
        let y = MARGIN + (PIXELS_Y - 1 - j) * SCALE;
        let mut i = 0;
        while i < PIXELS_X {
            let Some(v) = px[j * PIXELS_X + i] else {
                i += 1;
                continue;
            };
            let l = level(v);
            let start = i;
            while i < PIXELS_X && px[j * PIXELS_X + i].is_some_and(|u| level(u) == l) {
                i += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{}" height="{SCALE}" fill="{}"/>"#,
                MARGIN + start * SCALE,
                (i - start) * SCALE,
                hex(viridis(l as f64 / 255.0))
            );
        }
    }
    let _ = writeln!(s, "</g>");
    // Triangle outline: (-1,0), (1,0), (1,1).
    let (x0, x1) = (MARGIN, MARGIN + w);
    let (y0, y1) = (MARGIN + h, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y0} L{x1} {y0} L{x1} {y1} Z" fill="none" stroke="black" stroke-width="1"/>"#
    );

    let lx = MARGIN + w + 30;
    let _ = writeln!(s, r#"<defs><linearGradient id="legend" x1="0" y1="1" x2="0" y2="0">"#);
    for (k, c) in VIRIDIS.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<stop offset="{}" stop-color="{}"/>"#,
            k as f64 / (VIRIDIS.len() - 1) as f64,
            hex(*c)
        );
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        r#"<rect x="{lx}" y="{MARGIN}" width="16" height="{h}" fill="url(#legend)" stroke="black" stroke-width="0.5"/>"#
    );
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let y = MARGIN + h - (frac * h as f64).round() as usize;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10">{:.3e}</text>"#,
            lx + 20,
            y + 3,
            lo + frac * (hi - lo)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_heatmap_file(grid_csv: &Path, out_svg: &Path, field: &str) -> Result<()> {
    let rows = read_grid_csv(grid_csv)?;
    atomic_write(out_svg, render_heatmap(&rows, field)?.as_bytes())
}
