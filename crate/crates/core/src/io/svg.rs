//! Minimal SVG line plots of closed curves.

use std::fmt::Write as _;

use crate::spline::{SplineCurve, Vec2};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone)]
struct Stroke {
    points: Vec<Vec2>,
    color: String,
    width: f64,
}

/// A square plot of closed polylines, scaled to fit with equal axes.
#[derive(Debug, Clone, Default)]
pub struct SvgPlot {
    strokes: Vec<Stroke>,
}

impl SvgPlot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn polygon(&mut self, points: Vec<Vec2>, color: &str, width: f64) -> &mut Self {
        self.strokes.push(Stroke {
            points,
            color: color.to_string(),
            width,
        });
        self
    }

    /// Adds a spline sampled at 200 parameters.
    pub fn curve(&mut self, c: &SplineCurve, color: &str, width: f64) -> &mut Self {
        self.polygon(c.sample(200), color, width)
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn render(&self) -> String {
        let all = self.strokes.iter().flat_map(|s| &s.points);
        let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
        for p in all {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let span = (hi - lo).max();
        let scale = if span.is_finite() && span > 0.0 {
            (SIZE - 2.0 * MARGIN) / span
        } else {
            1.0
        };
        let center = (lo + hi) / 2.0;
        let map = |p: &Vec2| {
            (
                SIZE / 2.0 + (p.x - center.x) * scale,
                SIZE / 2.0 - (p.y - center.y) * scale,
            )
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for s in &self.strokes {
            let mut d = String::new();
            for (k, p) in s.points.iter().enumerate() {
                let (x, y) = map(p);
                let _ = write!(d, "{}{x:.3} {y:.3} ", if k == 0 { "M" } else { "L" });
            }
            d.push('Z');
            let _ = writeln!(
                out,
                r#"<path d="{d}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                s.color, s.width
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Grey levels from light to dark for a sequence of `n` curves.
pub fn grey_ramp(n: usize) -> Vec<String> {
    (0..n)
        .map(|k| {
            let f = if n > 1 { k as f64 / (n - 1) as f64 } else { 1.0 };
            let v = (190.0 * (1.0 - f)).round() as u8;
            format!("#{v:02x}{v:02x}{v:02x}")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_path_per_curve() {
        let c = SplineCurve::circle(8, Vec2::new(1.0, 2.0), 3.0).unwrap();
        let mut plot = SvgPlot::new();
        plot.curve(&c, "black", 1.0).curve(&c.translated(Vec2::new(1.0, 0.0)), "#1f4fd8", 2.0);
        let svg = plot.render();
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn ramp_ends_black() {
        let r = grey_ramp(4);
        assert_eq!(r[3], "#000000");
        assert_eq!(r[0], "#bebebe");
    }
}
