//! Minimal SVG line charts of loss curves: one series per strategy, with
//! standard-error bars.

use std::fmt::Write as _;

use crate::experiment::LossCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Fixed colour per strategy so figures stay comparable.
pub fn strategy_color(name: &str) -> &'static str {
    match name {
        "no_interaction" => "#7f7f7f",
        "random" => "#1f77b4",
        "largest_target" => "#2ca02c",
        "largest_product" => "#d62728",
        "largest_target_subset" => "#98df8a",
        "largest_product_subset" => "#ff7f0e",
        "random_subset" => "#aec7e8",
        _ => "#9467bd",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `curves` (normally all sharing one n_train / noise / knowledge
/// setting) as an SVG document.
pub fn render_svg(title: &str, curves: &[&LossCurve]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let max_budget = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.budget))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let y_max = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.mean_loss + p.sem))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let sx = |b: f64| MARGIN_LEFT + b / max_budget * plot_w;
    let sy = |v: f64| MARGIN_TOP + plot_h - (v.max(0.0) / y_max) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    // axes
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{MARGIN_TOP} L{x0},{y0} L{},{y0}" fill="none" stroke="black"/>"#,
        x0 + plot_w
    );
    for b in 0..=max_budget as usize {
        let x = sx(b as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{b}</text>"#,
            y0 + 4.0,
            y0 + 18.0
        );
    }
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">expert queries</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">mean squared prediction error</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (i, curve) in curves.iter().enumerate() {
        let color = strategy_color(&curve.key.strategy);
        let path: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.budget as f64), sy(p.mean_loss)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for p in &curve.points {
            let x = sx(p.budget as f64);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/><circle cx="{x:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                sy(p.mean_loss - p.sem),
                sy(p.mean_loss + p.sem),
                sy(p.mean_loss)
            );
        }
        let ly = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&curve.key.strategy)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
