//! Standalone SVG diagnostics: PCA scatter and z-score heatmap.

use std::fmt::Write as _;

use thiserror::Error;

use crate::numkit::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VizError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("nothing to draw: no anomalous regions")]
    EmptySelection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
        fill: String,
        stroke: Option<String>,
        class: Option<&'static str>,
    },
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
        fill: String,
        stroke: Option<String>,
        class: Option<&'static str>,
    },
    Line {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        stroke: String,
        width: f64,
    },
    Text {
        x: f64,
        y: f64,
        content: String,
        size: f64,
        anchor: &'static str,
        fill: String,
        class: Option<&'static str>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgCanvas {
    pub width: f64,
    pub height: f64,
    pub elements: Vec<Element>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
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

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_owned()
    } else {
        s
    }
}

fn class_attr(class: Option<&str>) -> String {
    class.map_or(String::new(), |c| format!(" class=\"{c}\""))
}

fn stroke_attr(stroke: &Option<String>) -> String {
    stroke
        .as_ref()
        .map_or(String::new(), |s| format!(" stroke=\"{s}\""))
}

impl SvgCanvas {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            elements: Vec::new(),
        }
    }

    pub fn push(&mut self, e: Element) {
        self.elements.push(e);
    }

    pub fn count_class(&self, wanted: &str) -> usize {
        self.elements
            .iter()
            .filter(|e| match e {
                Element::Rect { class, .. }
                | Element::Circle { class, .. }
                | Element::Text { class, .. } => *class == Some(wanted),
                Element::Line { .. } => false,
            })
            .count()
    }

    pub fn to_svg(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
            w = num(self.width),
            h = num(self.height)
        );
        for e in &self.elements {
            match e {
                Element::Rect {
                    x,
                    y,
                    width,
                    height,
                    fill,
                    stroke,
                    class,
                } => {
                    let _ = writeln!(
                        out,
                        "  <rect{} x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"{}/>",
                        class_attr(*class),
                        num(*x),
                        num(*y),
                        num(*width),
                        num(*height),
                        stroke_attr(stroke)
                    );
                }
                Element::Circle {
                    cx,
                    cy,
                    r,
                    fill,
                    stroke,
                    class,
                } => {
                    let _ = writeln!(
                        out,
                        "  <circle{} cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\"{}/>",
                        class_attr(*class),
                        num(*cx),
                        num(*cy),
                        num(*r),
                        stroke_attr(stroke)
                    );
                }
                Element::Line {
                    x1,
                    y1,
                    x2,
                    y2,
                    stroke,
                    width,
                } => {
                    let _ = writeln!(
                        out,
                        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
                        num(*x1),
                        num(*y1),
                        num(*x2),
                        num(*y2),
                        num(*width)
                    );
                }
                Element::Text {
                    x,
                    y,
                    content,
                    size,
                    anchor,
                    fill,
                    class,
                } => {
                    let _ = writeln!(
                        out,
                        "  <text{} x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\" text-anchor=\"{anchor}\" fill=\"{fill}\">{}</text>",
                        class_attr(*class),
                        num(*x),
                        num(*y),
                        num(*size),
                        escape(content)
                    );
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Linear axis mapping with a 5% margin on each side of the data range.
struct Axis {
    lo: f64,
    hi: f64,
    pix_lo: f64,
    pix_hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, pix_lo: f64, pix_hi: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if !lo.is_finite() {
            lo = -1.0;
            hi = 1.0;
        } else if hi - lo == 0.0 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            pix_lo,
            pix_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.pix_lo + (v - self.lo) / (self.hi - self.lo) * (self.pix_hi - self.pix_lo)
    }

    fn ticks(&self, count: usize) -> Vec<f64> {
        (0..=count)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / count as f64)
            .collect()
    }
}

pub const NORMAL_FILL: &str = "#9e9e9e";
pub const ANOMALY_FILL: &str = "#d7301f";

/// Scatter of the first two principal components; flagged regions drawn in
/// [`ANOMALY_FILL`] and labelled with their code.
pub fn render_pca_scatter(
    scores: &Matrix,
    flags: &[bool],
    labels: &[String],
) -> Result<SvgCanvas, VizError> {
    if scores.cols() != 2 {
        return Err(VizError::DimensionMismatch(format!(
            "scores need 2 columns, got {}",
            scores.cols()
        )));
    }
    if flags.len() != scores.rows() || labels.len() != scores.rows() {
        return Err(VizError::DimensionMismatch(format!(
            "{} points, {} flags, {} labels",
            scores.rows(),
            flags.len(),
            labels.len()
        )));
    }
    let (width, height) = (720.0, 560.0);
    let (left, right, top, bottom) = (70.0, 690.0, 50.0, 500.0);
    let x_axis = Axis::new(scores.row_iter().map(|r| r[0]), left, right);
    let y_axis = Axis::new(scores.row_iter().map(|r| r[1]), bottom, top);

    let mut c = SvgCanvas::new(width, height);
    c.push(Element::Rect {
        x: 0.0,
        y: 0.0,
        width,
        height,
        fill: "#ffffff".into(),
        stroke: None,
        class: None,
    });
    c.push(Element::Text {
        x: width / 2.0,
        y: 28.0,
        content: "PCA projection of standardised indicators".into(),
        size: 16.0,
        anchor: "middle",
        fill: "#222222".into(),
        class: Some("title"),
    });
    axis_frame(&mut c, &x_axis, &y_axis, left, right, top, bottom);
    c.push(Element::Text {
        x: (left + right) / 2.0,
        y: bottom + 42.0,
        content: "PC1".into(),
        size: 13.0,
        anchor: "middle",
        fill: "#222222".into(),
        class: None,
    });
    c.push(Element::Text {
        x: 20.0,
        y: (top + bottom) / 2.0,
        content: "PC2".into(),
        size: 13.0,
        anchor: "middle",
        fill: "#222222".into(),
        class: None,
    });

    // Normal points first so anomalies are drawn on top.
    for pass_anomalies in [false, true] {
        for (r, row) in scores.row_iter().enumerate() {
            if flags[r] != pass_anomalies {
                continue;
            }
            let (cx, cy) = (x_axis.map(row[0]), y_axis.map(row[1]));
            if pass_anomalies {
                c.push(Element::Circle {
                    cx,
                    cy,
                    r: 5.0,
                    fill: ANOMALY_FILL.into(),
                    stroke: Some("#67000d".into()),
                    class: Some("anomaly"),
                });
                c.push(Element::Text {
                    x: cx + 7.0,
                    y: cy - 6.0,
                    content: labels[r].clone(),
                    size: 11.0,
                    anchor: "start",
                    fill: "#67000d".into(),
                    class: Some("anomaly-label"),
                });
            } else {
                c.push(Element::Circle {
                    cx,
                    cy,
                    r: 3.0,
                    fill: NORMAL_FILL.into(),
                    stroke: None,
                    class: Some("region"),
                });
            }
        }
    }
    Ok(c)
}

fn axis_frame(
    c: &mut SvgCanvas,
    x_axis: &Axis,
    y_axis: &Axis,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
) {
    let axis_color = "#444444";
    c.push(Element::Line {
        x1: left,
        y1: bottom,
        x2: right,
        y2: bottom,
        stroke: axis_color.into(),
        width: 1.0,
    });
    c.push(Element::Line {
        x1: left,
        y1: top,
        x2: left,
        y2: bottom,
        stroke: axis_color.into(),
        width: 1.0,
    });
    for v in x_axis.ticks(5) {
        let x = x_axis.map(v);
        c.push(Element::Line {
            x1: x,
            y1: bottom,
            x2: x,
            y2: bottom + 5.0,
            stroke: axis_color.into(),
            width: 1.0,
        });
        c.push(Element::Text {
            x,
            y: bottom + 20.0,
            content: num(v),
            size: 10.0,
            anchor: "middle",
            fill: axis_color.into(),
            class: None,
        });
    }
    for v in y_axis.ticks(5) {
        let y = y_axis.map(v);
        c.push(Element::Line {
            x1: left - 5.0,
            y1: y,
            x2: left,
            y2: y,
            stroke: axis_color.into(),
            width: 1.0,
        });
        c.push(Element::Text {
            x: left - 8.0,
            y: y + 3.5,
            content: num(v),
            size: 10.0,
            anchor: "end",
            fill: axis_color.into(),
            class: None,
        });
    }
}

pub const RAMP_NEGATIVE: (u8, u8, u8) = (33, 102, 172);
pub const RAMP_MIDPOINT: (u8, u8, u8) = (255, 255, 255);
pub const RAMP_POSITIVE: (u8, u8, u8) = (178, 24, 43);
pub const RAMP_CLAMP: f64 = 3.0;

/// Position of `z` on the ramp: 0 at -3 or below, 0.5 at zero, 1 at +3 or above.
pub fn ramp_position(z: f64) -> f64 {
    (z.clamp(-RAMP_CLAMP, RAMP_CLAMP) + RAMP_CLAMP) / (2.0 * RAMP_CLAMP)
}

/// Blue-white-red color for a z value.
pub fn diverging_color(z: f64) -> (u8, u8, u8) {
    let t = ramp_position(z);
    let (end, w) = if t < 0.5 {
        (RAMP_NEGATIVE, (0.5 - t) * 2.0)
    } else {
        (RAMP_POSITIVE, (t - 0.5) * 2.0)
    };
    let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * w).round() as u8;
    (
        mix(RAMP_MIDPOINT.0, end.0),
        mix(RAMP_MIDPOINT.1, end.1),
        mix(RAMP_MIDPOINT.2, end.2),
    )
}

fn hex_color((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Region × indicator grid of z values, rows ordered by votes (descending) then code.
pub fn render_heatmap(
    z_rows: &[Vec<f64>],
    region_labels: &[String],
    indicator_labels: &[String],
    votes: &[u32],
) -> Result<SvgCanvas, VizError> {
    if z_rows.is_empty() {
        return Err(VizError::EmptySelection);
    }
    if region_labels.len() != z_rows.len() || votes.len() != z_rows.len() {
        return Err(VizError::DimensionMismatch(format!(
            "{} rows, {} labels, {} vote counts",
            z_rows.len(),
            region_labels.len(),
            votes.len()
        )));
    }
    if let Some(row) = z_rows.iter().find(|r| r.len() != indicator_labels.len()) {
        return Err(VizError::DimensionMismatch(format!(
            "row of {} values for {} indicators",
            row.len(),
            indicator_labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..z_rows.len()).collect();
    order.sort_by(|&a, &b| {
        votes[b]
            .cmp(&votes[a])
            .then(region_labels[a].cmp(&region_labels[b]))
    });

    let (cell_w, cell_h) = (96.0, 30.0);
    let (left, top) = (110.0, 80.0);
    let cols = indicator_labels.len() as f64;
    let width = left + cell_w * cols + 30.0;
    let height = top + cell_h * z_rows.len() as f64 + 60.0;

    let mut c = SvgCanvas::new(width, height);
    c.push(Element::Rect {
        x: 0.0,
        y: 0.0,
        width,
        height,
        fill: "#ffffff".into(),
        stroke: None,
        class: None,
    });
    c.push(Element::Text {
        x: width / 2.0,
        y: 28.0,
        content: "Standardised indicators of structural anomalies".into(),
        size: 15.0,
        anchor: "middle",
        fill: "#222222".into(),
        class: Some("title"),
    });
    for (j, label) in indicator_labels.iter().enumerate() {
        c.push(Element::Text {
            x: left + cell_w * (j as f64 + 0.5),
            y: top - 10.0,
            content: label.clone(),
            size: 12.0,
            anchor: "middle",
            fill: "#222222".into(),
            class: Some("column-label"),
        });
    }
    for (i, &r) in order.iter().enumerate() {
        let y = top + cell_h * i as f64;
        c.push(Element::Text {
            x: left - 10.0,
            y: y + cell_h / 2.0 + 4.0,
            content: format!("{} ({})", region_labels[r], votes[r]),
            size: 12.0,
            anchor: "end",
            fill: "#222222".into(),
            class: Some("row-label"),
        });
        for (j, &z) in z_rows[r].iter().enumerate() {
            let x = left + cell_w * j as f64;
            c.push(Element::Rect {
                x,
                y,
                width: cell_w,
                height: cell_h,
                fill: hex_color(diverging_color(z)),
                stroke: Some("#ffffff".into()),
                class: Some("cell"),
            });
            c.push(Element::Text {
                x: x + cell_w / 2.0,
                y: y + cell_h / 2.0 + 4.0,
                content: num(z),
                size: 11.0,
                anchor: "middle",
                fill: if z.abs() >= 2.0 { "#ffffff" } else { "#222222" }.into(),
                class: Some("cell-value"),
            });
        }
    }
    let legend_y = top + cell_h * z_rows.len() as f64 + 30.0;
    c.push(Element::Text {
        x: left,
        y: legend_y,
        content: format!("colour scale clamped at |z| = {RAMP_CLAMP}"),
        size: 10.0,
        anchor: "start",
        fill: "#444444".into(),
        class: None,
    });
    Ok(c)
}
