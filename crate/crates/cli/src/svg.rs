//! Quadrant scatter plots of compass points.

use std::fmt::Write as _;
use std::path::PathBuf;

use compass_core::scoring::CompassPoint;

use crate::error::{write, Result};

/// Both axes always span this range.
pub const AXIS_LIMIT: f64 = 10.0;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 70.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub label: String,
    pub point: CompassPoint,
    /// Per-axis half-widths drawn as whiskers.
    pub error: Option<CompassPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompassPlotSpec {
    pub title: String,
    pub points: Vec<PlotPoint>,
    /// Top-left, top-right, bottom-left, bottom-right.
    pub quadrant_labels: [String; 4],
    pub output: PathBuf,
}

impl CompassPlotSpec {
    pub fn new(title: impl Into<String>, points: Vec<PlotPoint>, output: PathBuf) -> Self {
        CompassPlotSpec {
            title: title.into(),
            points,
            quadrant_labels: [
                "Authoritarian Left".into(),
                "Authoritarian Right".into(),
                "Libertarian Left".into(),
                "Libertarian Right".into(),
            ],
            output,
        }
    }

    pub fn write(&self) -> Result<()> {
        write(&self.output, render(self))
    }
}

fn sx(v: f64) -> f64 {
    let side = SIZE - 2.0 * MARGIN;
    MARGIN + (v.clamp(-AXIS_LIMIT, AXIS_LIMIT) + AXIS_LIMIT) / (2.0 * AXIS_LIMIT) * side
}

/// Social scores grow upward.
fn sy(v: f64) -> f64 {
    SIZE - sx(v)
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render(spec: &CompassPlotSpec) -> String {
    let (lo, hi, mid) = (sx(-AXIS_LIMIT), sx(AXIS_LIMIT), sx(0.0));
    let half = mid - lo;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif">"#
    );
    s.push_str(concat!(
        "<style>",
        ".quadrant{stroke:none}.grid{stroke:#bbb;stroke-width:0.5}.axis{stroke:#000;stroke-width:1.5}",
        ".whisker{stroke:#333;stroke-width:1}.marker{fill:#c0392b;stroke:#000;stroke-width:0.8}",
        ".quadrant-label{font-size:13px;fill:#444}.point-label{font-size:11px}.tick{font-size:10px}",
        "</style>\n"
    ));
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(&spec.title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">{}</text>"#,
        SIZE / 2.0,
        MARGIN / 2.0,
        escape(&spec.title)
    );
    let fills = ["#f9baba", "#92d9f8", "#c8e4bc", "#f5f5a8"];
    let corners = [(lo, lo), (mid, lo), (lo, mid), (mid, mid)];
    for ((x, y), fill) in corners.iter().zip(fills) {
        let _ = writeln!(s, r#"<rect class="quadrant" x="{x}" y="{y}" width="{half}" height="{half}" fill="{fill}"/>"#);
    }
    for i in -5..=5 {
        let v = f64::from(i) * 2.0;
        let (gx, gy) = (sx(v), sy(v));
        let _ = writeln!(s, r#"<line class="grid" x1="{gx}" y1="{lo}" x2="{gx}" y2="{hi}"/>"#);
        let _ = writeln!(s, r#"<line class="grid" x1="{lo}" y1="{gy}" x2="{hi}" y2="{gy}"/>"#);
    }
    let _ = writeln!(s, r#"<line class="axis" x1="{lo}" y1="{mid}" x2="{hi}" y2="{mid}"/>"#);
    let _ = writeln!(s, r#"<line class="axis" x1="{mid}" y1="{lo}" x2="{mid}" y2="{hi}"/>"#);
    for v in [-10, -5, 0, 5, 10] {
        let f = f64::from(v);
        let _ = writeln!(s, r#"<text class="tick" x="{}" y="{}" text-anchor="middle">{v}</text>"#, sx(f), hi + 14.0);
        let _ = writeln!(s, r#"<text class="tick" x="{}" y="{}" text-anchor="end">{v}</text>"#, lo - 6.0, sy(f) + 3.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">Economic (left / right)</text>"#,
        mid,
        hi + 34.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 {} {})">Social (libertarian / authoritarian)</text>"#,
        lo - 34.0,
        mid,
        lo - 34.0,
        mid
    );
    let label_pos = [(lo + 8.0, lo + 18.0, "start"), (hi - 8.0, lo + 18.0, "end"), (lo + 8.0, hi - 8.0, "start"), (hi - 8.0, hi - 8.0, "end")];
    for ((x, y, anchor), text) in label_pos.iter().zip(&spec.quadrant_labels) {
        let _ = writeln!(
            s,
            r#"<text class="quadrant-label" x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#,
            escape(text)
        );
    }
    for p in &spec.points {
        let (cx, cy) = (sx(p.point.economic), sy(p.point.social));
        if let Some(e) = p.error {
            let (x0, x1) = (sx(p.point.economic - e.economic), sx(p.point.economic + e.economic));
            let (y0, y1) = (sy(p.point.social - e.social), sy(p.point.social + e.social));
            let _ = writeln!(s, r#"<line class="whisker" x1="{x0:.2}" y1="{cy:.2}" x2="{x1:.2}" y2="{cy:.2}"/>"#);
            let _ = writeln!(s, r#"<line class="whisker" x1="{cx:.2}" y1="{y0:.2}" x2="{cx:.2}" y2="{y1:.2}"/>"#);
        }
        let label = escape(&p.label);
        let _ = writeln!(
            s,
            r#"<circle class="marker" cx="{cx:.2}" cy="{cy:.2}" r="5"><title>{label} ({:.3}, {:.3})</title></circle>"#,
            p.point.economic,
            p.point.social
        );
        let _ = writeln!(s, r#"<text class="point-label" x="{:.2}" y="{:.2}">{label}</text>"#, cx + 7.0, cy - 7.0);
    }
    s.push_str("</svg>\n");
    s
}
