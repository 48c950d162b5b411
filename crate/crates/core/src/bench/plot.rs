use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Line plot of coverage (y in [0, 1]) against step, one faint line per
/// curve and an optional bold mean.
pub fn coverage_svg(title: &str, curves: &[(String, Vec<f64>)], mean: Option<&[f64]>) -> String {
    let steps = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(1).max(2);
    let x = |i: usize| MARGIN + (W - 2.0 * MARGIN) * i as f64 / (steps - 1) as f64;
    let y = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * v.clamp(0.0, 1.0);
    let points = |c: &[f64]| {
        c.iter()
            .enumerate()
            .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<polyline points="{m},{t} {m},{b} {r},{b}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, MARGIN - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, W - MARGIN, H - MARGIN + 16.0, steps - 1);
    for (i, (label, c)) in curves.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-opacity="0.5"><title>{}</title></polyline>"#,
            points(c),
            PALETTE[i % PALETTE.len()],
            escape(label)
        );
    }
    if let Some(m) = mean {
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2.5"><title>mean</title></polyline>"#, points(m));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_curve_plus_axes_and_mean() {
        let curves = vec![("a".to_string(), vec![0.1, 0.5, 0.7]), ("b<".to_string(), vec![0.2, 0.4, 0.9])];
        let svg = coverage_svg("t & t", &curves, Some(&[0.15, 0.45, 0.8]));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("t &amp; t") && svg.contains("b&lt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
