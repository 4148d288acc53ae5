//! Minimal SVG plot of `|xi_n(t)|` against the envelope `sqrt(tr_d t)`.

use std::fmt::Write;

use mwlil::stats::norm;
use mwlil::PathFunction;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b"];

pub fn paths_svg(snapshots: &[(usize, &PathFunction)], tr_d: f64) -> String {
    let peak = snapshots
        .iter()
        .flat_map(|(_, f)| (0..f.knots()).map(move |i| norm(f.knot(i))))
        .fold(tr_d.sqrt(), f64::max);
    let y_max = if peak > 0.0 { peak * 1.05 } else { 1.0 };
    let x = |t: f64| MARGIN + t * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - v / y_max * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{:.2} {:.2} V{:.2} H{:.2}" stroke="black" fill="none"/>"#,
        x(0.0),
        y(y_max),
        y(0.0),
        x(1.0)
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12">t</text>"#, x(1.0) + 6.0, y(0.0) + 4.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12">{y_max:.3}</text>"#, 4.0, y(y_max) + 4.0);

    let envelope: Vec<String> = (0..=200)
        .map(|i| {
            let t = i as f64 / 200.0;
            format!("{:.2},{:.2}", x(t), y((tr_d * t).sqrt()))
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" stroke="gray" stroke-dasharray="6 4" fill="none"/>"#,
        envelope.join(" ")
    );

    for (idx, (n, f)) in snapshots.iter().enumerate() {
        let pts: Vec<String> = (0..f.knots())
            .map(|i| format!("{:.2},{:.2}", x(f.times()[i]), y(norm(f.knot(i)))))
            .collect();
        let color = COLORS[idx % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" stroke-width="1" fill="none"><title>n = {n}</title></polyline>"#,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_snapshot_plus_envelope() {
        let f = PathFunction::linear(&[0.5], 8);
        let svg = paths_svg(&[(10, &f), (20, &f)], 1.0);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.ends_with("</svg>\n"));
    }
}
