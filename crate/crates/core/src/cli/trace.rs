//! Attention-trace files and their static SVG rendering.
//!
//! A trace file is CSV preceded by `# key: value` metadata lines:
//!
//! ```text
//! # video_id: vid0003
//! # predicted_score: 2
//! # per_class_probabilities: 0.05 0.15 0.8
//! frame_index,weight
//! 0,0.031
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quick_xml::escape::escape;
use thiserror::Error;

use crate::model::AttentionTrace;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("missing metadata `{0}`")]
    MissingMeta(&'static str),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("trace has no frames")]
    Empty,
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Serializes a trace. Floats use the shortest exact representation.
pub fn format_trace(trace: &AttentionTrace) -> String {
    let probs: Vec<String> = trace.per_class_probabilities.iter().map(|p| p.to_string()).collect();
    let mut s = format!(
        "# video_id: {}\n# predicted_score: {}\n# per_class_probabilities: {}\nframe_index,weight\n",
        trace.video_id,
        trace.predicted_score,
        probs.join(" ")
    );
    for (f, w) in trace.frame_indices.iter().zip(&trace.weights) {
        let _ = writeln!(s, "{f},{w}");
    }
    s
}

pub fn parse_trace(text: &str) -> Result<AttentionTrace, TraceError> {
    let mut video_id = None;
    let mut predicted_score = None;
    let mut probs = None;
    let mut frame_indices = Vec::new();
    let mut weights = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let bad = |reason: String| TraceError::Malformed { line, reason };
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(meta) = l.strip_prefix('#') {
            let Some((k, v)) = meta.split_once(':') else { continue };
            let v = v.trim();
            match k.trim() {
                "video_id" => video_id = Some(v.to_string()),
                "predicted_score" => {
                    predicted_score = Some(v.parse::<u8>().map_err(|e| bad(format!("predicted_score: {e}")))?)
                }
                "per_class_probabilities" => {
                    let ps = v
                        .split_whitespace()
                        .map(|x| x.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("per_class_probabilities: {e}")))?;
                    probs = Some(ps);
                }
                _ => {}
            }
            continue;
        }
        if !header_seen {
            if l != "frame_index,weight" {
                return Err(bad(format!("expected header `frame_index,weight`, found `{l}`")));
            }
            header_seen = true;
            continue;
        }
        let (f, w) = l.split_once(',').ok_or_else(|| bad("expected `frame_index,weight`".into()))?;
        let f: usize = f.trim().parse().map_err(|e| bad(format!("frame_index: {e}")))?;
        let w: f64 = w.trim().parse().map_err(|e| bad(format!("weight: {e}")))?;
        if !w.is_finite() || w < 0.0 {
            return Err(bad(format!("weight {w} is not a finite non-negative number")));
        }
        frame_indices.push(f);
        weights.push(w);
    }
    if weights.is_empty() {
        return Err(TraceError::Empty);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(TraceError::NotNormalized(total));
    }
    Ok(AttentionTrace {
        video_id: video_id.ok_or(TraceError::MissingMeta("video_id"))?,
        frame_indices,
        weights,
        predicted_score: predicted_score.ok_or(TraceError::MissingMeta("predicted_score"))?,
        per_class_probabilities: probs.ok_or(TraceError::MissingMeta("per_class_probabilities"))?,
    })
}

pub fn read_trace(path: &Path) -> Result<AttentionTrace, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text)
}

/// Plain `frame_index,weight` rows, no metadata.
pub fn weights_csv(trace: &AttentionTrace) -> String {
    let mut s = String::from("frame_index,weight\n");
    for (f, w) in trace.frame_indices.iter().zip(&trace.weights) {
        let _ = writeln!(s, "{f},{w}");
    }
    s
}

/// Monotone map from `t` in [0, 1] to a light-to-dark red ramp.
pub fn heat_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 127.0), lerp(247.0, 0.0), lerp(236.0, 0.0))
}

const STRIP_WIDTH: f64 = 800.0;
const MARGIN: f64 = 10.0;

/// A 1×N heat strip: one cell per weighted frame, colored by weight relative
/// to the largest, with a frame-index axis underneath.
pub fn render_heat_strip(trace: &AttentionTrace) -> String {
    let n = trace.weights.len().max(1);
    let max = trace.weights.iter().copied().fold(0.0f64, f64::max);
    let cell = STRIP_WIDTH / n as f64;
    let (top, height) = (28.0, 40.0);
    let axis_y = top + height + 2.0;
    let width = STRIP_WIDTH + 2.0 * MARGIN;
    let title = format!("{} (predicted score {})", trace.video_id, trace.predicted_score);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="100" viewBox="0 0 {width} 100">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title.as_str()));
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="18" font-family="sans-serif" font-size="12">{}</text>"#,
        escape(title.as_str())
    );
    s.push_str("<g class=\"cells\">\n");
    for (i, (&f, &w)) in trace.frame_indices.iter().zip(&trace.weights).enumerate() {
        let t = if max > 0.0 { w / max } else { 0.0 };
        let _ = writeln!(
            s,
            r#"<rect x="{:.3}" y="{top}" width="{:.3}" height="{height}" fill="{}"><title>frame {f}: {w}</title></rect>"#,
            MARGIN + i as f64 * cell,
            cell,
            heat_color(t)
        );
    }
    s.push_str("</g>\n<g class=\"axis\" font-family=\"sans-serif\" font-size=\"10\">\n");
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{axis_y}" x2="{:.3}" y2="{axis_y}" stroke="black"/>"#,
        MARGIN + STRIP_WIDTH
    );
    let step = n.div_ceil(10);
    for i in (0..trace.frame_indices.len()).step_by(step) {
        let x = MARGIN + (i as f64 + 0.5) * cell;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{axis_y}" x2="{x:.3}" y2="{:.1}" stroke="black"/><text x="{x:.3}" y="{:.1}" text-anchor="middle">{}</text>"#,
            axis_y + 4.0,
            axis_y + 16.0,
            trace.frame_indices[i]
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="96" text-anchor="middle">frame index</text>"#,
        MARGIN + STRIP_WIDTH / 2.0
    );
    s.push_str("</g>\n</svg>\n");
    s
}

/// Characters outside `[A-Za-z0-9._-]` become `_`.
pub fn file_stem(video_id: &str) -> String {
    let s: String = video_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "_".to_string()
    } else {
        s
    }
}

#[derive(Debug, Default)]
pub struct ExportSummary {
    /// `(csv, svg)` per exported trace, in input order.
    pub written: Vec<(PathBuf, PathBuf)>,
    /// `(input, reason)` for traces that could not be read.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Writes `<id>.csv` and `<id>.svg` under `out` for every readable trace;
/// unreadable ones are skipped with a warning.
pub fn export_traces(inputs: &[PathBuf], out: &Path) -> Result<ExportSummary, TraceError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| TraceError::Io { path, source }
    };
    std::fs::create_dir_all(out).map_err(io(out))?;
    let mut summary = ExportSummary::default();
    for input in inputs {
        let trace = match read_trace(input) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("skipping {}: {e}", input.display());
                summary.skipped.push((input.clone(), e.to_string()));
                continue;
            }
        };
        let stem = file_stem(&trace.video_id);
        let csv = out.join(format!("{stem}.csv"));
        let svg = out.join(format!("{stem}.svg"));
        std::fs::write(&csv, weights_csv(&trace)).map_err(io(&csv))?;
        std::fs::write(&svg, render_heat_strip(&trace)).map_err(io(&svg))?;
        summary.written.push((csv, svg));
    }
    Ok(summary)
}
