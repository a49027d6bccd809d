//! Deterministic emitters: CSV tables, JSON documents, and SVG heatmaps.
//!
//! Every number is formatted through the same locale-free routines, line
//! endings are `\n`, and nothing time- or host-dependent is embedded, so
//! repeated runs produce byte-identical artifacts.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::{Map, Value};

/// Floating-point rendering with 9 significant digits; infinities render
/// as the literal tokens `inf` / `-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.8e}")
}

/// JSON value for a float, keeping infinities representable.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

/// Ordered JSON object from key/value pairs (serde_json sorts map keys, so
/// the bytes are already deterministic; this keeps call sites terse).
pub fn json_object(pairs: Vec<(&str, Value)>) -> Value {
    let mut map = Map::new();
    for (k, v) in pairs {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}

/// Matrix as nested JSON arrays.
pub fn json_matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json_num(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Writes a CSV file: header, rows, and an optional `#`-prefixed footer.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
    footer: Option<&str>,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    if let Some(footer) = footer {
        out.push_str("# ");
        out.push_str(footer);
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

/// Writes a JSON value pretty-printed with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)
}

/// Heatmap rendering options.
#[derive(Debug, Clone)]
pub struct HeatmapOptions {
    /// Diverging color scale symmetric about zero (otherwise min..max).
    pub symmetric_scale: bool,
    /// Cell size in pixels.
    pub cell_px: u32,
    /// Row and column index ticks.
    pub axis_labels: bool,
    /// Row count of one block; block boundaries get dashed separators and
    /// the first block a solid outline.
    pub row_block: Option<usize>,
    /// Entries are clipped to this magnitude, with an annotation when
    /// clipping fired.
    pub clip: f64,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            symmetric_scale: true,
            cell_px: 14,
            axis_labels: true,
            row_block: None,
            clip: desslab::sim::TOL_DIVERGE,
        }
    }
}

fn diverging_color(value: f64, lo: f64, hi: f64) -> (u8, u8, u8) {
    // blue (negative) - white (zero) - red (positive)
    let blue = (33.0, 102.0, 172.0);
    let red = (178.0, 24.0, 43.0);
    let white = (255.0, 255.0, 255.0);
    let unit = if value >= 0.0 {
        if hi <= 0.0 { 0.0 } else { (value / hi).clamp(0.0, 1.0) }
    } else if lo >= 0.0 {
        0.0
    } else {
        (value / lo).clamp(0.0, 1.0)
    };
    let target = if value >= 0.0 { red } else { blue };
    let mix = |w: (f64, f64, f64), t: (f64, f64, f64)| {
        (
            (w.0 + (t.0 - w.0) * unit).round() as u8,
            (w.1 + (t.1 - w.1) * unit).round() as u8,
            (w.2 + (t.2 - w.2) * unit).round() as u8,
        )
    };
    mix(white, target)
}

/// Renders a matrix as an SVG heatmap: one filled cell per entry, dashed
/// separators at row-block boundaries, and a solid outline around the first
/// row block.
pub fn heatmap_svg(matrix: &DMatrix<f64>, opts: &HeatmapOptions) -> String {
    let (rows, cols) = matrix.shape();
    let cell = opts.cell_px;
    let margin = if opts.axis_labels { 2 * cell } else { cell / 2 };
    let width = margin + cols as u32 * cell + cell / 2;
    let height = margin + rows as u32 * cell + cell / 2;

    let mut clipped = false;
    let clip = opts.clip;
    let value_at = |i: usize, j: usize| -> f64 {
        let v = matrix[(i, j)];
        if v.abs() > clip {
            v.signum() * clip
        } else {
            v
        }
    };
    for v in matrix.iter() {
        if v.abs() > clip {
            clipped = true;
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..rows {
        for j in 0..cols {
            lo = lo.min(value_at(i, j));
            hi = hi.max(value_at(i, j));
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    if opts.symmetric_scale {
        let bound = lo.abs().max(hi.abs());
        lo = -bound;
        hi = bound;
    }

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "<!-- scale: [{}, {}] -->\n",
        format_float(lo),
        format_float(hi)
    ));
    if clipped {
        svg.push_str(&format!(
            "<text x=\"{margin}\" y=\"{}\" font-size=\"{}\" fill=\"#444444\">clipped at +/-{}</text>\n",
            cell / 2 + 2,
            cell / 2 + 2,
            format_float(clip)
        ));
    }
    for i in 0..rows {
        for j in 0..cols {
            let (r, g, b) = diverging_color(value_at(i, j), lo, hi);
            let x = margin + j as u32 * cell;
            let y = margin + i as u32 * cell;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"#{r:02x}{g:02x}{b:02x}\"/>\n"
            ));
        }
    }
    if opts.axis_labels {
        let step = if rows > 12 || cols > 12 { 5 } else { 1 };
        for i in (0..rows).step_by(step) {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"{}\" fill=\"#222222\" \
                 text-anchor=\"end\">{}</text>\n",
                margin - cell / 4,
                margin + i as u32 * cell + 3 * cell / 4,
                cell / 2 + 2,
                i + 1
            ));
        }
        for j in (0..cols).step_by(step) {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"{}\" fill=\"#222222\" \
                 text-anchor=\"middle\">{}</text>\n",
                margin + j as u32 * cell + cell / 2,
                margin - cell / 4,
                cell / 2 + 2,
                j
            ));
        }
    }
    if let Some(block) = opts.row_block {
        if block > 0 && block < rows {
            let x0 = margin;
            let x1 = margin + cols as u32 * cell;
            // dashed separators at every block boundary
            for boundary in (block..rows).step_by(block) {
                let y = margin + boundary as u32 * cell;
                svg.push_str(&format!(
                    "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" \
                     stroke=\"#1a7a1a\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n"
                ));
            }
            // solid outline around the physical block
            svg.push_str(&format!(
                "<rect x=\"{x0}\" y=\"{margin}\" width=\"{}\" height=\"{}\" \
                 fill=\"none\" stroke=\"#1a7a1a\" stroke-width=\"2\"/>\n",
                cols as u32 * cell,
                block as u32 * cell
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_fixed_width_scientific() {
        assert_eq!(format_float(1.856), "1.85600000e0");
        assert_eq!(format_float(13.510578930438891), "1.35105789e1");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(0.0), "0.00000000e0");
    }

    #[test]
    fn json_numbers_keep_infinities() {
        assert_eq!(json_num(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(json_num(2.5), serde_json::json!(2.5));
    }

    #[test]
    fn zero_matrix_renders_uniform_midpoint() {
        let m = DMatrix::<f64>::zeros(3, 3);
        let svg = heatmap_svg(&m, &HeatmapOptions::default());
        // all cells white (the scale midpoint)
        assert_eq!(svg.matches("fill=\"#ffffff\"").count(), 9);
        assert!(!svg.contains("clipped"));
    }

    #[test]
    fn block_separators_and_outline() {
        let m = DMatrix::<f64>::from_fn(20, 21, |i, j| (i as f64 - j as f64) / 20.0);
        let opts = HeatmapOptions { row_block: Some(5), ..Default::default() };
        let svg = heatmap_svg(&m, &opts);
        assert_eq!(svg.matches("stroke-dasharray").count(), 3);
        assert_eq!(svg.matches("fill=\"none\"").count(), 1);
    }

    #[test]
    fn clipping_annotates() {
        let mut m = DMatrix::<f64>::zeros(2, 2);
        m[(0, 0)] = 5e7;
        let svg = heatmap_svg(&m, &HeatmapOptions::default());
        assert!(svg.contains("clipped at"));
    }

    #[test]
    fn symmetric_scale_balances_sign_colors() {
        let m = DMatrix::from_row_slice(1, 2, &[-2.0, 1.0]);
        let svg = heatmap_svg(&m, &HeatmapOptions::default());
        // the negative extreme saturates to full blue under the symmetric
        // scale; the positive entry sits halfway to red
        assert!(svg.contains("#2166ac"));
    }
}
