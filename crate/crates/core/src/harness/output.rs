use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::algorithms::{AlgorithmId, DecisionMode, RegretTrace, TraceRecord};
use crate::error::{Error, Result};

use super::stats::RegretStat;

pub fn raw_path(dir: &Path, algo: AlgorithmId, function: &str) -> PathBuf {
    dir.join(format!("raw_{}_{}.csv", algo.as_str(), function))
}

pub fn summary_path(dir: &Path, function: &str) -> PathBuf {
    dir.join(format!("summary_{function}.csv"))
}

pub fn plot_path(dir: &Path, function: &str) -> PathBuf {
    dir.join(format!("regret_{function}.svg"))
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn raw_header(dim: usize) -> String {
    let mut s = String::from("trial,iteration,mode");
    for j in 1..=dim {
        let _ = write!(s, ",x{j}");
    }
    s.push_str(",y,f,regret,cum_regret\n");
    s
}

/// CSV rows of one trial. Floats use the shortest exact round-trip form.
pub fn raw_rows(trial: usize, trace: &RegretTrace) -> String {
    let mut s = String::new();
    for r in &trace.records {
        let _ = write!(s, "{trial},{},{}", r.iteration, r.mode.as_str());
        for x in &r.point {
            let _ = write!(s, ",{x}");
        }
        let _ = writeln!(s, ",{},{},{},{}", r.y, r.f, r.regret, r.cum_regret);
    }
    s
}

/// Parses a raw CSV back into `(trial, record)` pairs.
pub fn parse_raw(text: &str) -> Result<Vec<(usize, TraceRecord)>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty raw file"))?;
    let cols = header.split(',').count();
    if cols < 8 {
        return Err(Error::invalid(format!("unexpected raw header {header:?}")));
    }
    let dim = cols - 7;
    let bad = |n: usize, what: &str| Error::invalid(format!("raw line {n}: {what}"));
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let n = n + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols {
            return Err(bad(n, "wrong column count"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "bad number"));
        let trial = f[0].parse().map_err(|_| bad(n, "bad trial"))?;
        let iteration = f[1].parse().map_err(|_| bad(n, "bad iteration"))?;
        let mode: DecisionMode = f[2].parse()?;
        let point = f[3..3 + dim].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        out.push((
            trial,
            TraceRecord {
                iteration,
                mode,
                point,
                y: num(f[3 + dim])?,
                f: num(f[4 + dim])?,
                regret: num(f[5 + dim])?,
                cum_regret: num(f[6 + dim])?,
            },
        ));
    }
    Ok(out)
}

/// The rows of `trial` exactly as they appear in a raw CSV file.
pub fn trial_rows_from_file(path: &Path, trial: usize) -> Result<String> {
    let text = fs::read_to_string(path)?;
    let prefix = format!("{trial},");
    let mut s = String::new();
    for line in text.lines().skip(1).filter(|l| l.starts_with(&prefix)) {
        s.push_str(line);
        s.push('\n');
    }
    Ok(s)
}

pub fn summary_csv(stats: &[(AlgorithmId, Vec<RegretStat>)]) -> String {
    let mut s = String::from("iteration,algo,mean,ci_low,ci_high\n");
    for (algo, rows) in stats {
        for r in rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.iteration,
                algo.as_str(),
                r.mean,
                r.ci_low,
                r.ci_high
            );
        }
    }
    s
}

fn colour(algo: AlgorithmId) -> &'static str {
    match algo {
        AlgorithmId::Eic => "#d62728",
        AlgorithmId::Ei => "#1f77b4",
        AlgorithmId::EiNguyen => "#2ca02c",
        AlgorithmId::GpUcb => "#9467bd",
        AlgorithmId::GpTs => "#ff7f0e",
    }
}

/// Mean cumulative-regret curves with shaded 95% bands.
pub fn regret_svg(function: &str, stats: &[(AlgorithmId, Vec<RegretStat>)]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const L: f64 = 80.0;
    const R: f64 = 160.0;
    const T: f64 = 40.0;
    const B: f64 = 60.0;
    let n_max = stats
        .iter()
        .map(|(_, s)| s.len())
        .max()
        .unwrap_or(1)
        .max(2) as f64;
    let mut y_lo = 0.0f64;
    let mut y_hi = 0.0f64;
    for (_, rows) in stats {
        for r in rows {
            y_lo = y_lo.min(r.ci_low);
            y_hi = y_hi.max(r.ci_high);
        }
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let px = |i: f64| L + (i - 1.0) / (n_max - 1.0) * (W - L - R);
    let py = |v: f64| H - B - (v - y_lo) / (y_hi - y_lo) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{function}: cumulative regret</text>"#,
        (W - R + L) / 2.0
    );
    let _ = writeln!(
        s,
        r#"<path d="M{L},{T} V{} H{}" fill="none" stroke="black"/>"#,
        H - B,
        W - R
    );
    for k in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * k as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{L}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            L - 5.0,
            L - 8.0,
            y + 4.0,
            format_tick(v)
        );
        let i = 1.0 + (n_max - 1.0) * k as f64 / 5.0;
        let x = px(i);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - B,
            H - B + 5.0,
            H - B + 20.0,
            i.round()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#,
        (W - R + L) / 2.0,
        H - 15.0
    );
    for (k, (algo, rows)) in stats.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let c = colour(*algo);
        let mut band = String::new();
        for r in rows {
            let _ = write!(band, "{:.2},{:.2} ", px(r.iteration as f64), py(r.ci_high));
        }
        for r in rows.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(r.iteration as f64), py(r.ci_low));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let mut line = String::new();
        for r in rows {
            let _ = write!(line, "{:.2},{:.2} ", px(r.iteration as f64), py(r.mean));
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            line.trim_end()
        );
        let ly = T + 20.0 * k as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            W - R + 15.0,
            W - R + 40.0,
            W - R + 48.0,
            ly + 4.0,
            algo.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.1}")
    }
}
