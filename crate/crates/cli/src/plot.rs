//! A dependency-free SVG scatter plot of the swept points.
//!
//! Both axes are probabilities, so the viewport is fixed to the unit square;
//! plots from different runs line up when flipped between. Output is plain
//! deterministic text — same inputs, same bytes — so plots fall under the
//! same reproducibility guarantee as every other artifact.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 70.0;

fn x(utility: f64) -> f64 {
    LEFT + utility.clamp(0.0, 1.0) * (WIDTH - LEFT - RIGHT)
}

fn y(privacy: f64) -> f64 {
    (HEIGHT - BOTTOM) - privacy.clamp(0.0, 1.0) * (HEIGHT - TOP - BOTTOM)
}

/// An externally supplied point to draw against the frontier.
pub struct ExternalMark<'a> {
    pub label: &'a str,
    pub utility: f64,
    pub privacy: f64,
    pub on_front: bool,
}

/// Renders the sweep as an SVG document. `swept` holds every trained point
/// as `(utility, privacy)`; `front` is the frontier subset (any order).
pub fn frontier_svg(swept: &[(f64, f64)], front: &[(f64, f64)], external: &[ExternalMark]) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n");

    // Gridlines and tick labels every 0.25 on both axes.
    for i in 0..=4 {
        let v = f64::from(i) * 0.25;
        let gx = x(v);
        let gy = y(v);
        let _ = write!(
            svg,
            "<line x1=\"{gx:.2}\" y1=\"{:.2}\" x2=\"{gx:.2}\" y2=\"{:.2}\" stroke=\"#e3e3e3\"/>\n",
            y(0.0),
            y(1.0)
        );
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#e3e3e3\"/>\n",
            x(0.0),
            x(1.0)
        );
        let _ = write!(
            svg,
            "<text x=\"{gx:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#444\">{v}</text>\n",
            y(0.0) + 18.0
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{gy:.2}\" text-anchor=\"end\" dy=\"4\" fill=\"#444\">{v}</text>\n",
            x(0.0) - 8.0
        );
    }

    // Axis frame and titles.
    let _ = write!(
        svg,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333\"/>\n",
        x(0.0),
        y(1.0),
        x(1.0) - x(0.0),
        y(0.0) - y(1.0)
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#111\">utility — top-1 next-location accuracy</text>\n",
        (x(0.0) + x(1.0)) / 2.0,
        HEIGHT - 20.0
    );
    let _ = write!(
        svg,
        "<text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#111\" \
         transform=\"rotate(-90 20 {:.2})\">privacy — top-1 re-identification error</text>\n",
        (y(0.0) + y(1.0)) / 2.0,
        (y(0.0) + y(1.0)) / 2.0
    );

    // Every swept point, then the frontier drawn over it.
    for &(u, p) in swept {
        let _ = write!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#9aa5b1\" fill-opacity=\"0.7\"/>\n",
            x(u),
            y(p)
        );
    }
    let mut front_sorted: Vec<(f64, f64)> = front.to_vec();
    front_sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if front_sorted.len() > 1 {
        let path: Vec<String> =
            front_sorted.iter().map(|&(u, p)| format!("{:.2},{:.2}", x(u), y(p))).collect();
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#2a7f62\" stroke-width=\"2\"/>\n",
            path.join(" ")
        );
    }
    for &(u, p) in &front_sorted {
        let _ = write!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"#2a7f62\"/>\n",
            x(u),
            y(p)
        );
    }

    // External points as diamonds: blue if they reach the frontier, red if
    // some swept point dominates them.
    for mark in external {
        let (cx, cy) = (x(mark.utility), y(mark.privacy));
        let color = if mark.on_front { "#2456c4" } else { "#c0392b" };
        let _ = write!(
            svg,
            "<path d=\"M {cx:.2} {:.2} L {:.2} {cy:.2} L {cx:.2} {:.2} L {:.2} {cy:.2} Z\" fill=\"{color}\"/>\n",
            cy - 6.0,
            cx + 6.0,
            cy + 6.0,
            cx - 6.0
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>\n",
            cx + 8.0,
            cy - 8.0,
            escape(mark.label)
        );
    }

    // Legend.
    let lx = x(1.0) - 190.0;
    let _ = write!(svg, "<circle cx=\"{:.2}\" cy=\"46\" r=\"4\" fill=\"#9aa5b1\"/>\n", lx);
    let _ = write!(svg, "<text x=\"{:.2}\" y=\"50\" fill=\"#444\">swept</text>\n", lx + 10.0);
    let _ = write!(svg, "<circle cx=\"{:.2}\" cy=\"64\" r=\"5\" fill=\"#2a7f62\"/>\n", lx);
    let _ = write!(svg, "<text x=\"{:.2}\" y=\"68\" fill=\"#444\">frontier</text>\n", lx + 10.0);
    if !external.is_empty() {
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"86\" fill=\"#444\">◆ external (blue reaches the frontier)</text>\n",
            lx - 4.0
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
