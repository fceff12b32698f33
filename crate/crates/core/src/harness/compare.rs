//! Seed-aggregated learning curves, combined CSV, SVG plot and threshold
//! report.

use super::records::read_records;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// EMA curves of one result directory, one per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCurves {
    pub label: String,
    pub seeds: Vec<Vec<f64>>,
}

/// Median and interquartile band per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
}

/// Loads `dir/episodes.csv`, or every `dir/seed-*/episodes.csv` in name order.
pub fn load_run(dir: &Path) -> Result<RunCurves> {
    let label = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let direct = dir.join("episodes.csv");
    let mut files = Vec::new();
    if direct.is_file() {
        files.push(direct);
    } else {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut subdirs: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("seed-")))
            .collect();
        subdirs.sort();
        files.extend(subdirs.into_iter().map(|d| d.join("episodes.csv")).filter(|f| f.is_file()));
    }
    if files.is_empty() {
        return Err(Error::Io(format!("{}: no episodes.csv found", dir.display())));
    }
    let seeds = files
        .iter()
        .map(|f| Ok(read_records(f)?.iter().map(|r| r.ema_reward).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(RunCurves { label, seeds })
}

/// Checks every curve has the same number of episodes.
pub fn check_alignment(runs: &[RunCurves]) -> Result<usize> {
    let mut len = None;
    for run in runs {
        for (i, c) in run.seeds.iter().enumerate() {
            match len {
                None => len = Some(c.len()),
                Some(n) if n != c.len() => {
                    return Err(Error::Domain(format!(
                        "episode counts differ: {} (seed #{}) has {} episodes, expected {n}",
                        run.label,
                        i + 1,
                        c.len()
                    )))
                }
                _ => {}
            }
        }
    }
    len.ok_or_else(|| Error::Domain("no curves to compare".into()))
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn band(run: &RunCurves) -> Band {
    let n = run.seeds.first().map_or(0, Vec::len);
    let mut b = Band { label: run.label.clone(), median: Vec::with_capacity(n), q1: Vec::with_capacity(n), q3: Vec::with_capacity(n) };
    for i in 0..n {
        let mut col: Vec<f64> = run.seeds.iter().map(|c| c[i]).collect();
        col.sort_by(f64::total_cmp);
        b.q1.push(quantile(&col, 0.25));
        b.median.push(quantile(&col, 0.5));
        b.q3.push(quantile(&col, 0.75));
    }
    b
}

/// Makes labels unique by suffixing repeats with `#2`, `#3`, ...
pub fn dedupe_labels(runs: &mut [RunCurves]) {
    let mut seen: Vec<String> = Vec::new();
    for run in runs.iter_mut() {
        let base = run.label.clone();
        let mut label = base.clone();
        let mut k = 1;
        while seen.contains(&label) {
            k += 1;
            label = format!("{base}#{k}");
        }
        seen.push(label.clone());
        run.label = label;
    }
}

pub fn combined_csv(bands: &[Band]) -> String {
    let mut out = String::from("episode");
    for b in bands {
        let _ = write!(out, ",{0}_median,{0}_q1,{0}_q3", b.label);
    }
    out.push('\n');
    let n = bands.first().map_or(0, |b| b.median.len());
    for i in 0..n {
        let _ = write!(out, "{}", i + 1);
        for b in bands {
            let _ = write!(out, ",{:.6},{:.6},{:.6}", b.median[i], b.q1[i], b.q3[i]);
        }
        out.push('\n');
    }
    out
}

/// First 1-based episode whose median EMA reaches `threshold`.
pub fn first_reaching(curve: &[f64], threshold: f64) -> Option<usize> {
    curve.iter().position(|&v| v >= threshold).map(|i| i + 1)
}

pub fn threshold_report(bands: &[Band], threshold: f64) -> String {
    let mut out = String::new();
    for b in bands {
        let hit = first_reaching(&b.median, threshold).map_or("never".to_string(), |e| e.to_string());
        let _ = writeln!(out, "{} threshold={} first_episode={}", b.label, threshold, hit);
    }
    out
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line chart of median EMA with shaded interquartile bands.
pub fn svg_plot(bands: &[Band], title: &str) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 60.0);
    let n = bands.first().map_or(0, |b| b.median.len()).max(1);
    let all = bands.iter().flat_map(|b| b.q1.iter().chain(&b.q3).chain(&b.median));
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &v| (l.min(v), u.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let px = |i: usize| left + (w - left - right) * if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
    let py = |v: f64| top + (h - top - bottom) * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, w / 2.0, escape(title));
    // axes and ticks
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#);
    for k in 0..=5 {
        let v = lo + (hi - lo) * k as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.1}</text>"#, x0 - 8.0, y + 4.0);
        let ep = 1 + (n - 1) * k / 5;
        let x = px(ep - 1);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{ep}</text>"#, y1 + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">Episodes</text>"#, (x0 + x1) / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="18" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {})">Average total reward</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0);

    for (k, b) in bands.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut poly = String::new();
        for (i, v) in b.q3.iter().enumerate() {
            let _ = write!(poly, "{:.2},{:.2} ", px(i), py(*v));
        }
        for (i, v) in b.q1.iter().enumerate().rev() {
            let _ = write!(poly, "{:.2},{:.2} ", px(i), py(*v));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.trim_end());
        let line: Vec<String> = b.median.iter().enumerate().map(|(i, v)| format!("{:.2},{:.2}", px(i), py(*v))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = top + 10.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, x1 - 150.0, x1 - 130.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#, x1 - 125.0, ly + 4.0, escape(&b.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Header, root element and closing tag are present and balanced.
pub fn is_well_formed_svg(text: &str) -> bool {
    let t = text.trim();
    t.starts_with("<?xml")
        && t.contains("<svg ")
        && t.ends_with("</svg>")
        && t.matches("<svg").count() == 1
        && t.matches("</svg>").count() == 1
}
