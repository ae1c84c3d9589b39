use std::fmt::Write as _;

use prefseq::trainer::SweepTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 44.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Static SVG line chart: one line per metric, score on the y axis
/// (fixed to [0, 1]) against grid row index on the x axis.
pub fn sweep_svg(table: &SweepTable) -> String {
    let n = table.rows.len();
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |i: usize| LEFT + if n > 1 { plot_w * i as f64 / (n - 1) as f64 } else { plot_w / 2.0 };
    let y = |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{x2:.2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{v:.2}</text>"##,
            yy = y(v),
            x2 = LEFT + plot_w,
            tx = LEFT - 6.0,
            ty = y(v) + 4.0,
        );
    }
    for i in 0..n {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{i}</text>"#,
            x(i),
            TOP + plot_h + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">preference grid index</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    for (m, objective) in table.objectives.iter().enumerate() {
        let color = COLORS[m % COLORS.len()];
        let points: Vec<String> = table
            .column(m)
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * m as f64;
        let lx = LEFT + plot_w + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{objective}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
