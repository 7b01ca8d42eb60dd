//! CSV and plot emission. All reals print with 17 significant digits so a
//! CSV re-read reproduces the exact doubles; output is byte-stable for a
//! fixed scenario and seed.

use std::io::Write;
use std::path::PathBuf;

use kfunc_core::{Field, FlowTrace};

use crate::scenario::{CliError, CliResult};

/// Lossless float rendering: one leading digit plus 16 fractional digits.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes CSV text to `out`, or to stdout when no path is set.
pub fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            CliError::Config(format!("cannot write {}: {e}", path.display()))
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Assembles a CSV document from a header and row tuples.
pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

const PLOT_W: f64 = 900.0;
const PLOT_H: f64 = 360.0;

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Panel {
    /// Maps data coordinates to SVG coordinates (y axis flipped).
    fn map(&self, fx: f64, fy: f64) -> (f64, f64) {
        (self.x0 + fx * self.w, self.y0 + (1.0 - fy) * self.h)
    }

    fn frame(&self, title: &str, svg: &mut String) {
        svg.push_str(&format!(
            "<rect x='{:.1}' y='{:.1}' width='{:.1}' height='{:.1}' fill='none' stroke='#444'/>\n",
            self.x0, self.y0, self.w, self.h
        ));
        svg.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='12'>{title}</text>\n",
            self.x0,
            self.y0 - 8.0
        ));
    }

    fn polyline(&self, points: &[(f64, f64)], color: &str, svg: &mut String) {
        if points.len() < 2 {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(fx, fy)| {
                let (x, y) = self.map(fx, fy);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points='{}' fill='none' stroke='{color}' stroke-width='1.2'/>\n",
            coords.join(" ")
        ));
    }

    fn label(&self, fx: f64, fy: f64, text: &str, color: &str, svg: &mut String) {
        let (x, y) = self.map(fx, fy);
        svg.push_str(&format!(
            "<text x='{x:.1}' y='{y:.1}' font-size='11' fill='{color}'>{text}</text>\n"
        ));
    }
}

fn normalized(values: &[f64]) -> (Vec<f64>, f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    (values.iter().map(|v| (v - lo) / span).collect(), lo, hi)
}

/// Self-contained SVG: energy and residual against iteration on the left,
/// the final field against x on the right. A convenience view, not a
/// load-bearing output.
pub fn flow_plot_svg(trace: &FlowTrace, field: &Field) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 {PLOT_W} {PLOT_H}' \
         font-family='monospace'>\n<rect width='{PLOT_W}' height='{PLOT_H}' fill='white'/>\n"
    ));

    let left = Panel {
        x0: 60.0,
        y0: 40.0,
        w: 360.0,
        h: 270.0,
    };
    left.frame("energy (blue) / log10 residual (red) vs iteration", &mut svg);
    let iters: Vec<f64> = trace.records.iter().map(|r| r.iter as f64).collect();
    let last_iter = iters.last().copied().unwrap_or(0.0).max(1.0);
    let energies: Vec<f64> = trace.records.iter().map(|r| r.energy).collect();
    let (e_norm, e_lo, e_hi) = normalized(&energies);
    let log_res: Vec<f64> = trace
        .records
        .iter()
        .map(|r| r.residual.max(1e-16).log10())
        .collect();
    let (r_norm, r_lo, r_hi) = normalized(&log_res);
    let e_pts: Vec<(f64, f64)> = iters
        .iter()
        .zip(&e_norm)
        .map(|(&i, &e)| (i / last_iter, e))
        .collect();
    let r_pts: Vec<(f64, f64)> = iters
        .iter()
        .zip(&r_norm)
        .map(|(&i, &r)| (i / last_iter, r))
        .collect();
    left.polyline(&e_pts, "#1f4e9c", &mut svg);
    left.polyline(&r_pts, "#b03030", &mut svg);
    left.label(0.02, 0.98, &format!("E: {e_lo:.3e}..{e_hi:.3e}"), "#1f4e9c", &mut svg);
    left.label(0.02, 0.90, &format!("log r: {r_lo:.1}..{r_hi:.1}"), "#b03030", &mut svg);
    left.label(0.02, -0.04, "0", "#444", &mut svg);
    left.label(0.92, -0.04, &format!("{}", last_iter as usize), "#444", &mut svg);

    let right = Panel {
        x0: 490.0,
        y0: 40.0,
        w: 360.0,
        h: 270.0,
    };
    right.frame("final field vs x", &mut svg);
    let values = field.values();
    let (f_norm, f_lo, f_hi) = normalized(values);
    let nodes = field.grid().nodes();
    let length = field.grid().length();
    let f_pts: Vec<(f64, f64)> = nodes
        .iter()
        .zip(&f_norm)
        .map(|(&x, &v)| (x / length, v))
        .collect();
    right.polyline(&f_pts, "#2a7a2a", &mut svg);
    right.label(0.02, 0.98, &format!("rho: {f_lo:.6e}..{f_hi:.6e}"), "#2a7a2a", &mut svg);
    right.label(0.02, -0.04, "0", "#444", &mut svg);
    right.label(0.92, -0.04, &format!("{length}"), "#444", &mut svg);

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_is_lossless() {
        for v in [0.1, -1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02e23] {
            let s = real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn csv_assembles_rows() {
        let text = csv(
            "a,b",
            vec![vec!["1".to_string(), "2".to_string()], vec!["3".to_string(), "4".to_string()]],
        );
        assert_eq!(text, "a,b\n1,2\n3,4\n");
    }
}
