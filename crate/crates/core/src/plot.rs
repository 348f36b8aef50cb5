//! Minimal SVG line chart of the scaled states over time.

use std::fmt::Write as _;

use crate::simulator::Trajectory;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Renders `g_i(t)` for every agent.
pub fn scaled_states_svg(traj: &Trajectory, title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    if traj.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let t0 = traj.times[0];
    let t1 = *traj.times.last().unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in &traj.scaled_states {
        for &v in g {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let sx = |t: f64| MARGIN + (t - t0) / (t1 - t0).max(1e-12) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        svg,
        r#"<polyline points="{m},{top} {m},{bot} {right},{bot}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        top = MARGIN,
        bot = HEIGHT - MARGIN,
        right = WIDTH - MARGIN
    );
    for (label, x, y, anchor) in [
        (format!("{t0:.2}"), MARGIN, HEIGHT - MARGIN + 16.0, "start"),
        (
            format!("{t1:.2} s"),
            WIDTH - MARGIN,
            HEIGHT - MARGIN + 16.0,
            "end",
        ),
        (format!("{hi:.3}"), MARGIN - 4.0, MARGIN + 4.0, "end"),
        (format!("{lo:.3}"), MARGIN - 4.0, HEIGHT - MARGIN, "end"),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{label}</text>"#
        );
    }

    // Thin to at most ~1000 points per series.
    let stride = (traj.len() / 1000).max(1);
    for agent in 0..traj.n_agents() {
        let mut points = String::new();
        for k in (0..traj.len()).step_by(stride) {
            let _ = write!(
                points,
                "{:.2},{:.2} ",
                sx(traj.times[k]),
                sy(traj.scaled_states[k][agent])
            );
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"><title>g_{}</title></polyline>"#,
            points.trim_end(),
            COLORS[agent % COLORS.len()],
            agent + 1
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_agent() {
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0],
            states: vec![vec![0.0, 1.0]; 3],
            scaled_states: vec![vec![0.0, 1.0], vec![0.5, 0.6], vec![0.55, 0.55]],
            lyapunov: vec![0.5, 0.005, 0.0],
            spread: vec![1.0, 0.1, 0.0],
            epsilon: 1e-3,
            settling_time: Some(2.0),
        };
        let svg = scaled_states_svg(&traj, "a <b>");
        assert_eq!(svg.matches("<title>g_").count(), 2);
        assert!(svg.contains("a &lt;b&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
