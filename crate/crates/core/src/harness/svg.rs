use std::fmt::Write;

use num_traits::ToPrimitive;

use super::CurvePoint;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Step plot of certified accuracy against radius, one line per series.
pub fn render_curves_svg(series: &[(String, Vec<CurvePoint>)]) -> String {
    let max_r = series
        .iter()
        .flat_map(|(_, c)| c.iter())
        .filter_map(|p| p.radius.to_f64())
        .fold(0.0f64, f64::max);
    let max_r = if max_r > 0.0 { max_r } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |r: f64| MARGIN + r / max_r * plot_w;
    let py = |a: f64| HEIGHT - MARGIN - a * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#,
        y0 = py(0.0),
        x1 = px(max_r)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y0}" x2="{MARGIN}" y2="{y1}" stroke="black"/>"#,
        y0 = py(0.0),
        y1 = py(1.0)
    );
    for i in 0..=4 {
        let a = i as f64 / 4.0;
        let r = max_r * a;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-size="11" text-anchor="end">{a:.2}</text>"#,
            x = MARGIN - 6.0,
            y = py(a) + 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-size="11" text-anchor="middle">{r:.3}</text>"#,
            x = px(r),
            y = py(0.0) + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">radius (l1)</text>"#,
        x = WIDTH / 2.0,
        y = HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {y})">certified accuracy</text>"#,
        y = HEIGHT / 2.0
    );

    for (k, (name, curve)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = String::new();
        for (i, p) in curve.iter().enumerate() {
            let x = px(p.radius.to_f64().unwrap_or(0.0));
            let y = py(p.certified_accuracy());
            if i > 0 {
                // horizontal run at the previous level, then drop
                let prev = py(curve[i - 1].certified_accuracy());
                let _ = write!(pts, "{x:.2},{prev:.2} ");
            }
            let _ = write!(pts, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{ly}" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
            escape(name),
            x = WIDTH - MARGIN
        );
    }
    s.push_str("</svg>\n");
    s
}
