//! Minimal self-contained SVG line charts for the experiment reports: BER
//! waterfalls on a log y-axis and penalty trade-off curves on a linear one.
//! No external assets; the output is a single `<svg>` element.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 58.0;

/// Line colors, cycled in series order.
const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#2e8540", "#8e5bb2", "#e09f3e", "#3d3d3d"];

/// One named polyline.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Chart description. With `log_y` the y-axis is decade-scaled and points
/// with non-positive y are dropped (a zero-error BER point has no position
/// on a log axis).
#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round a positive span down to a "nice" tick step (1, 2 or 5 times a
/// power of ten).
fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm >= 5.0 {
        5.0
    } else if norm >= 2.0 {
        2.0
    } else {
        1.0
    };
    m * mag
}

/// Format an axis value without trailing noise.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Render the chart. Returns the complete SVG document text.
pub fn line_chart(spec: &ChartSpec) -> String {
    // Gather the plottable points per series (finite, and positive-y when
    // log-scaled), tracking the data ranges.
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let usable: Vec<Vec<(f64, f64)>> = spec
        .series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .copied()
                .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!spec.log_y || y > 0.0))
                .map(|(x, y)| {
                    let y = if spec.log_y { y.log10() } else { y };
                    xs.push(x);
                    ys.push(y);
                    (x, y)
                })
                .collect()
        })
        .collect();

    let (x0, x1) = match (xs.iter().cloned().reduce(f64::min), xs.iter().cloned().reduce(f64::max))
    {
        (Some(a), Some(b)) if a < b => (a, b),
        (Some(a), Some(_)) => (a - 0.5, a + 0.5),
        _ => (0.0, 1.0),
    };
    let (y0, y1) = match (ys.iter().cloned().reduce(f64::min), ys.iter().cloned().reduce(f64::max))
    {
        (Some(a), Some(b)) if a < b => (a, b),
        (Some(a), Some(_)) => (a - 0.5, a + 0.5),
        _ => (0.0, 1.0),
    };
    // Decade-align the log axis; pad the linear one slightly.
    let (y0, y1) = if spec.log_y {
        (y0.floor(), y1.ceil().max(y0.floor() + 1.0))
    } else {
        let pad = 0.05 * (y1 - y0);
        (y0 - pad, y1 + pad)
    };

    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::with_capacity(8192);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"17\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        esc(&spec.title)
    ));

    // Axes box.
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#444444\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));

    // X ticks.
    let step = nice_step(x1 - x0);
    let mut t = (x0 / step).ceil() * step;
    while t <= x1 + 1e-9 * step {
        let x = px(t);
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#bbbbbb\" \
             stroke-dasharray=\"3 4\"/>\n",
            MARGIN_T,
            HEIGHT - MARGIN_B
        ));
        out.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
            HEIGHT - MARGIN_B + 18.0,
            tick_label(t)
        ));
        t += step;
    }

    // Y ticks: one per decade when log-scaled, nice steps otherwise.
    let y_ticks: Vec<f64> = if spec.log_y {
        let mut v = Vec::new();
        let mut d = y0;
        while d <= y1 + 1e-9 {
            v.push(d);
            d += 1.0;
        }
        v
    } else {
        let step = nice_step(y1 - y0);
        let mut v = Vec::new();
        let mut t = (y0 / step).ceil() * step;
        while t <= y1 + 1e-9 * step {
            v.push(t);
            t += step;
        }
        v
    };
    for &ty in &y_ticks {
        let y = py(ty);
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#bbbbbb\" stroke-dasharray=\"3 4\"/>\n",
            WIDTH - MARGIN_R
        ));
        let label = if spec.log_y { format!("1e{}", ty as i64) } else { tick_label(ty) };
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"13\">{label}</text>\n",
            MARGIN_L - 8.0,
            y + 4.0
        ));
    }

    // Axis labels.
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 14.0,
        esc(&spec.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 20 {:.1})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        esc(&spec.y_label)
    ));

    // Series polylines and markers.
    for (si, pts) in usable.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if pts.len() > 1 {
            let coords: Vec<String> =
                pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                coords.join(" ")
            ));
        }
        for &(x, y) in pts {
            out.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x),
                py(y)
            ));
        }
    }

    // Legend, top-right inside the plot area.
    for (si, s) in spec.series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let y = MARGIN_T + 16.0 + 18.0 * si as f64;
        let x = WIDTH - MARGIN_R - 180.0;
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            x + 26.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\">{}</text>\n",
            x + 32.0,
            y + 4.0,
            esc(&s.label)
        ));
    }

    out.push_str("</svg>\n");
    out
}
