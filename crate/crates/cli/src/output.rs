//! CSV, JSON and SVG writers. Every file carries provenance: tool version, SHA-256 of
//! the effective spec (or command arguments), the seed, and the spec text itself.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::runner::ExperimentResult;
use crate::spec::ExperimentSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub spec_sha256: String,
    pub seed: Option<u64>,
    /// Canonical text the hash was computed from.
    pub spec: String,
}

impl Provenance {
    pub fn for_spec(spec: &ExperimentSpec) -> Self {
        let text = spec.canonical_toml();
        Self {
            tool: "spiketrans",
            version: VERSION,
            spec_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            seed: Some(spec.seed),
            spec: text,
        }
    }

    /// Provenance for a one-shot command, hashed over its canonical JSON arguments.
    pub fn for_command<T: Serialize>(command: &str, args: &T) -> Self {
        let text = serde_json::to_string(&serde_json::json!({ "command": command, "args": args }))
            .expect("command arguments serialize");
        Self {
            tool: "spiketrans",
            version: VERSION,
            spec_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            seed: None,
            spec: text,
        }
    }

    /// `#`-prefixed header lines for CSV files.
    pub fn csv_header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} {}", self.tool, self.version);
        let _ = writeln!(s, "# spec_sha256 {}", self.spec_sha256);
        match self.seed {
            Some(seed) => {
                let _ = writeln!(s, "# seed {seed}");
            }
            None => s.push_str("# seed none\n"),
        }
        for line in self.spec.lines() {
            let _ = writeln!(s, "# spec {line}");
        }
        s
    }
}

/// Attaches `provenance` to a serializable value as a top-level `provenance` key.
pub fn with_provenance<T: Serialize>(value: &T, provenance: &Provenance) -> serde_json::Value {
    let mut v = serde_json::to_value(value).expect("output serializes");
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("provenance".into(), serde_json::to_value(provenance).expect("provenance serializes"));
            v
        }
        None => serde_json::json!({ "provenance": provenance, "value": v }),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Quotes a CSV field when it contains a separator or quote.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summary_csv(result: &ExperimentResult, provenance: &Provenance) -> String {
    let mut s = provenance.csv_header();
    if let Some(sweep) = &result.sweep {
        s.push_str("c,tau_c,var_fc\n");
        for r in &sweep.rows {
            let _ = writeln!(s, "{},{},{}", r.c, r.tau_c, r.var_fc);
        }
        return s;
    }
    s.push_str("series,n,p,sigma,metric,mean,se,theory,reps\n");
    for r in &result.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            field(&r.series),
            r.n,
            r.p,
            r.sigma,
            r.metric,
            r.mean,
            fmt_opt(r.se),
            fmt_opt(r.theory),
            r.reps
        );
    }
    s
}

pub fn runs_csv(result: &ExperimentResult, provenance: &Provenance) -> String {
    let mut s = provenance.csv_header();
    s.push_str("series,n,p,sigma,rep,seed,metric,value\n");
    for r in &result.runs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            field(&r.series),
            r.n,
            r.p,
            r.sigma,
            r.rep,
            r.seed,
            r.metric,
            r.value
        );
    }
    s
}

pub fn summary_json(result: &ExperimentResult, provenance: &Provenance) -> String {
    serde_json::to_string_pretty(&with_provenance(result, provenance)).expect("summary serializes")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 50.0;

    fn px(&self, x: f64) -> f64 {
        Self::LEFT + (x - self.x0) / (self.x1 - self.x0) * (Self::W - Self::LEFT - Self::RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        Self::H - Self::BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (Self::H - Self::TOP - Self::BOTTOM)
    }
}

/// Theory curves as polylines and simulation means as points with ±1 SE bars.
pub fn summary_svg(result: &ExperimentResult) -> String {
    let metric = result.primary_metric.clone().unwrap_or_default();
    let labels: Vec<String> = {
        let mut v: Vec<String> = result.curves.iter().map(|c| c.series.clone()).collect();
        for r in result.rows.iter().filter(|r| r.metric == metric) {
            if !v.contains(&r.series) {
                v.push(r.series.clone());
            }
        }
        v
    };
    let points: Vec<(usize, f64, f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.metric == metric)
        .map(|r| (labels.iter().position(|l| *l == r.series).unwrap_or(0), r.sigma, r.mean, r.se.unwrap_or(0.0)))
        .collect();
    let xs = result
        .curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0))
        .chain(points.iter().map(|p| p.1));
    let ys = result
        .curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.1))
        .chain(points.iter().flat_map(|p| [p.2 - p.3, p.2 + p.3]));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, mut y1) = ys.fold((0.0_f64, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let f = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = Frame::W,
        h = Frame::H
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, Frame::W / 2.0, xml(&result.name));
    let (ax0, ax1, ay0, ay1) = (f.px(x0), f.px(x1), f.py(y0), f.py(y1));
    let _ = writeln!(s, r#"<path d="M{ax0:.1},{ay1:.1} L{ax0:.1},{ay0:.1} L{ax1:.1},{ay0:.1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, f.px(xv), ay0 + 18.0, xv);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, ax0 - 6.0, f.py(yv) + 4.0, yv);
    }
    let xlabel = if result.sweep.is_some() { "c" } else { "sigma" };
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#, (ax0 + ax1) / 2.0, Frame::H - 8.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0,
        xml(&metric)
    );
    for c in &result.curves {
        let color = PALETTE[labels.iter().position(|l| *l == c.series).unwrap_or(0) % PALETTE.len()];
        let path: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
    }
    for &(i, x, m, se) in &points {
        let color = PALETTE[i % PALETTE.len()];
        let (cx, cy) = (f.px(x), f.py(m));
        if se > 0.0 {
            let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{color}"/>"#, f.py(m - se), f.py(m + se));
        }
        let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{color}"/>"#);
    }
    for (i, label) in labels.iter().enumerate() {
        let y = Frame::TOP + 14.0 * i as f64 + 6.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, ax1 - 170.0, y - 9.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, ax1 - 155.0, xml(label));
    }
    s.push_str("</svg>\n");
    s
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path.display().to_string(), e))
}

/// Writes every output named by `spec` under `out_dir`; returns the written paths.
pub fn write_outputs(spec: &ExperimentSpec, result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let prov = Provenance::for_spec(spec);
    let mut written = Vec::new();
    let mut emit = |file: &str, contents: String| -> Result<(), CliError> {
        let path = spec.output_path(out_dir, file);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit(&spec.outputs.csv, summary_csv(result, &prov))?;
    emit(&spec.outputs.json, summary_json(result, &prov))?;
    if let Some(svg) = &spec.outputs.svg {
        let mut text = summary_svg(result);
        // provenance as an XML comment ahead of the closing tag
        let comment = format!("<!-- {} {} spec_sha256 {} seed {} -->\n", prov.tool, prov.version, prov.spec_sha256, spec.seed);
        text.insert_str(text.len() - "</svg>\n".len(), &comment);
        emit(svg, text)?;
    }
    if let Some(runs) = &spec.outputs.runs_csv {
        emit(runs, runs_csv(result, &prov))?;
    }
    Ok(written)
}
