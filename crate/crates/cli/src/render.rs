//! SVG drawing of recorded paths over the scenario geometry.

use std::fmt::Write;

use cbfnav::types::WorldConfig;
use cbfnav::Vec2;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 0.5;

struct Frame {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(paths: &[Vec<Vec2>], config: Option<&WorldConfig>) -> Self {
        let (mut min, mut max) = match config {
            Some(c) => (c.workspace.min, c.workspace.max),
            None => (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        };
        for p in paths.iter().flatten() {
            min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
            max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
        }
        if !min.is_finite() || !max.is_finite() {
            min = Vec2::new(-1.0, -1.0);
            max = Vec2::new(1.0, 1.0);
        }
        min = min - Vec2::new(MARGIN, MARGIN);
        max = max + Vec2::new(MARGIN, MARGIN);
        let span = (max.x - min.x).max(max.y - min.y);
        let scale = SIZE / span;
        Self {
            min,
            scale,
            height: (max.y - min.y) * scale,
        }
    }

    fn x(&self, p: Vec2) -> f64 {
        (p.x - self.min.x) * self.scale
    }

    /// SVG's y axis points down.
    fn y(&self, p: Vec2) -> f64 {
        self.height - (p.y - self.min.y) * self.scale
    }
}

/// Color for a fraction of the episode, from blue (start) to red (end).
fn time_color(frac: f64) -> String {
    let f = frac.clamp(0.0, 1.0);
    let r = (255.0 * f).round() as u8;
    let b = (255.0 * (1.0 - f)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Obstacles in grey, starts in green, goals in blue, one polyline per agent
/// with time-colored markers along it.
pub fn svg(paths: &[Vec<Vec2>], config: Option<&WorldConfig>) -> String {
    let f = Frame::fit(paths, config);
    let width = (SIZE).round();
    let height = f.height.round();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(c) = config {
        for o in &c.obstacles {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#9e9e9e"/>"##,
                f.x(o.center),
                f.y(o.center),
                o.radius * f.scale
            );
        }
        for a in &c.agents {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#1565c0" stroke-width="2"/>"##,
                f.x(a.goal),
                f.y(a.goal),
                a.radius * f.scale
            );
        }
    }
    let longest = paths.iter().map(Vec::len).max().unwrap_or(1).max(2) - 1;
    for (i, path) in paths.iter().enumerate() {
        let radius = config.and_then(|c| c.agents.get(i)).map_or(0.15, |a| a.radius);
        if let Some(start) = path.first() {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#2e7d32" fill-opacity="0.6"/>"##,
                f.x(*start),
                f.y(*start),
                radius * f.scale
            );
        }
        let points: Vec<String> = path.iter().map(|p| format!("{:.2},{:.2}", f.x(*p), f.y(*p))).collect();
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#424242" stroke-width="1.5" points="{}"/>"##,
            points.join(" ")
        );
        let every = (longest / 20).max(1);
        for (t, p) in path.iter().enumerate().step_by(every) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                f.x(*p),
                f.y(*p),
                time_color(t as f64 / longest as f64)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
