//! Small deterministic SVG renderer for the run figures. Output is derived
//! from the CSV data and never parsed back, so the format stays simple: one
//! fixed viewBox, explicit ticks, and rounded coordinates.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;

const PALETTE: [&str; 4] = ["#2161ad", "#c03f31", "#3a8a3f", "#7b5aa6"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Half-height of an error bar per point, already scaled by the caller.
    pub bars: Option<Vec<f64>>,
    pub draw_line: bool,
}

impl Series {
    pub fn new(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            points,
            bars: None,
            draw_line: true,
        }
    }

    pub fn with_bars(mut self, bars: Vec<f64>) -> Self {
        self.bars = Some(bars);
        self
    }
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick positions covering [lo, hi] at a step of 1, 2 or 5 times a power
/// of ten, aiming for about five ticks.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 4.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        mag
    } else if norm < 3.5 {
        2.0 * mag
    } else if norm < 7.5 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let mut out = Vec::new();
    let mut k = (lo / step).ceil() as i64;
    while (k as f64) * step <= hi + 1e-9 * span {
        out.push(k as f64 * step);
        k += 1;
    }
    out
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{v:.0}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() || s == "-" {
            "0".to_string()
        } else {
            s
        }
    } else {
        format!("{v:.1e}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(spec: &PlotSpec) -> String {
    let map_x = |v: f64| if spec.log_x { v.log10() } else { v };
    let map_y = |v: f64| if spec.log_y { v.log10() } else { v };

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &spec.series {
        for (i, (x, y)) in s.points.iter().enumerate() {
            if spec.log_x && *x <= 0.0 {
                continue;
            }
            let bar = s.bars.as_ref().map(|b| b[i]).unwrap_or(0.0);
            let lo = y - bar;
            let hi = y + bar;
            if spec.log_y && hi <= 0.0 {
                continue;
            }
            xs.push(map_x(*x));
            ys.push(map_y(hi.max(1e-300)));
            if !spec.log_y || lo > 0.0 {
                ys.push(map_y(lo.max(1e-300)));
            }
        }
    }
    if xs.is_empty() {
        xs.push(0.0);
        xs.push(1.0);
    }
    if ys.is_empty() {
        ys.push(0.0);
        ys.push(1.0);
    }
    let (mut x_lo, mut x_hi) = min_max(&xs);
    let (mut y_lo, mut y_hi) = min_max(&ys);
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad_x = 0.05 * (x_hi - x_lo);
    let pad_y = 0.08 * (y_hi - y_lo);
    x_lo -= pad_x;
    x_hi += pad_x;
    y_lo -= pad_y;
    y_hi += pad_y;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let px = MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let py = MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h;
        (px, py)
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        coord(WIDTH / 2.0),
        xml_escape(&spec.title)
    );

    // Axis frame.
    let _ = write!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
        coord(MARGIN_L),
        coord(MARGIN_T),
        coord(plot_w),
        coord(plot_h)
    );

    for t in ticks(x_lo, x_hi) {
        let (px, _) = to_px(t, y_lo);
        let _ = write!(
            svg,
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"#cccccc\"/>\n",
            x = coord(px),
            y0 = coord(MARGIN_T),
            y1 = coord(MARGIN_T + plot_h)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            coord(px),
            coord(MARGIN_T + plot_h + 18.0),
            tick_label(t, spec.log_x)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let (_, py) = to_px(x_lo, t);
        let _ = write!(
            svg,
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#cccccc\"/>\n",
            x0 = coord(MARGIN_L),
            x1 = coord(MARGIN_L + plot_w),
            y = coord(py)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            coord(MARGIN_L - 6.0),
            coord(py + 4.0),
            tick_label(t, spec.log_y)
        );
    }

    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        coord(MARGIN_L + plot_w / 2.0),
        coord(HEIGHT - 14.0),
        xml_escape(&spec.x_label)
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        coord(MARGIN_T + plot_h / 2.0),
        coord(MARGIN_T + plot_h / 2.0),
        xml_escape(&spec.y_label)
    );

    for (si, s) in spec.series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<(f64, f64, f64)> = s
            .points
            .iter()
            .enumerate()
            .filter(|(_, (x, y))| (!spec.log_x || *x > 0.0) && (!spec.log_y || *y > 0.0))
            .map(|(i, (x, y))| {
                let bar = s.bars.as_ref().map(|b| b[i]).unwrap_or(0.0);
                (map_x(*x), map_y(*y), bar)
            })
            .collect();
        if s.draw_line && pts.len() > 1 {
            let mut d = String::new();
            for (i, (x, y, _)) in pts.iter().enumerate() {
                let (px, py) = to_px(*x, *y);
                let _ = write!(d, "{}{},{}", if i == 0 { "M" } else { " L" }, coord(px), coord(py));
            }
            let _ = write!(
                svg,
                "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
            );
        }
        for (x, y, bar) in &pts {
            let (px, py) = to_px(*x, *y);
            if *bar > 0.0 {
                let y_raw = if spec.log_y { 10f64.powf(*y) } else { *y };
                let hi = map_y(y_raw + bar);
                let lo_raw = y_raw - bar;
                let lo = if spec.log_y {
                    if lo_raw > 0.0 { map_y(lo_raw) } else { y_lo }
                } else {
                    lo_raw
                };
                let (_, py_hi) = to_px(*x, hi);
                let (_, py_lo) = to_px(*x, lo);
                let _ = write!(
                    svg,
                    "<line x1=\"{x}\" y1=\"{a}\" x2=\"{x}\" y2=\"{b}\" stroke=\"{color}\"/>\n",
                    x = coord(px),
                    a = coord(py_hi),
                    b = coord(py_lo),
                );
            }
            let _ = write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                coord(px),
                coord(py)
            );
        }
        let ly = MARGIN_T + 16.0 + 16.0 * si as f64;
        let _ = write!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            coord(MARGIN_L + plot_w - 150.0),
            coord(ly - 9.0)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            coord(MARGIN_L + plot_w - 136.0),
            coord(ly),
            xml_escape(&s.label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn min_max(vals: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vals {
        if v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_identical_bytes_for_identical_input() {
        let spec = PlotSpec {
            title: "ratio vs t".into(),
            x_label: "t".into(),
            y_label: "ratio".into(),
            log_x: false,
            log_y: false,
            series: vec![
                Series::new("measured", vec![(0.1, 1.0), (0.2, 1.1), (0.3, 1.15)])
                    .with_bars(vec![0.02, 0.01, 0.01]),
                Series::new("reference", vec![(0.1, 1.0), (0.3, 1.12)]),
            ],
        };
        let a = render_svg(&spec);
        let b = render_svg(&spec);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg "));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("measured"));
    }

    #[test]
    fn log_axes_drop_nonpositive_points() {
        let spec = PlotSpec {
            title: "kernel".into(),
            x_label: "d".into(),
            y_label: "I".into(),
            log_x: true,
            log_y: true,
            series: vec![Series::new("I", vec![(0.0, 1.0), (0.01, 40.0), (0.1, 12.0)])],
        };
        let svg = render_svg(&spec);
        // Two surviving points, so exactly two markers.
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("1e-2"));
    }

    #[test]
    fn tick_steps_are_round_numbers() {
        let t = ticks(0.0, 1.0);
        assert!(t.contains(&0.0) && t.contains(&1.0));
        assert!(t.len() >= 4 && t.len() <= 8);
        assert!(t.iter().all(|v| (v / 0.2 - (v / 0.2).round()).abs() < 1e-9));
        let t = ticks(-0.03, 0.47);
        assert!(t.iter().all(|v| (v / 0.1 - (v / 0.1).round()).abs() < 1e-9));
    }
}
