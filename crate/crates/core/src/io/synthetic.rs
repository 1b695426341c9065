//! Synthetic labelled datasets.
//!
//! `classes` has three families: elongated ellipses, smooth five-pointed
//! stars and rounded rectangles (superellipses). `wings` is a single family
//! of elongated outlines varying in thickness and in the depth of a notch
//! at the tip.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::CurveFile;
use crate::spline::Vec2;

/// Polygon vertices per generated curve.
pub const SYNTHETIC_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Classes,
    Wings,
}

/// Small random similarity and smooth boundary noise.
struct Jitter {
    angle: f64,
    scale: f64,
    shift: Vec2,
    noise: [(f64, f64); 3],
}

impl Jitter {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            angle: rng.gen_range(-0.15..0.15),
            scale: rng.gen_range(0.92..1.08),
            shift: Vec2::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)),
            noise: std::array::from_fn(|_| (rng.gen_range(-0.02..0.02), rng.gen_range(0.0..TAU))),
        }
    }

    fn apply(&self, t: f64, p: Vec2) -> Vec2 {
        let bump: f64 = self
            .noise
            .iter()
            .enumerate()
            .map(|(m, (a, phase))| a * ((m + 2) as f64 * t + phase).cos())
            .sum();
        let p = p * (self.scale * (1.0 + bump));
        let (s, c) = self.angle.sin_cos();
        Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y) + self.shift
    }
}

fn polygon(f: impl Fn(f64) -> Vec2) -> Vec<Vec2> {
    (0..SYNTHETIC_POINTS)
        .map(|k| f(TAU * k as f64 / SYNTHETIC_POINTS as f64))
        .collect()
}

fn ellipse(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let (a, b) = (rng.gen_range(1.2..1.4), rng.gen_range(0.5..0.65));
    let j = Jitter::draw(rng);
    polygon(|t| j.apply(t, Vec2::new(a * t.cos(), b * t.sin())))
}

fn star(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let depth = rng.gen_range(0.22..0.3);
    let j = Jitter::draw(rng);
    polygon(|t| {
        let r = 1.0 + depth * (5.0 * t).cos();
        j.apply(t, Vec2::new(r * t.cos(), r * t.sin()))
    })
}

fn rounded_rectangle(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let (a, b) = (rng.gen_range(0.95..1.1), rng.gen_range(0.75..0.9));
    // Superellipse |x/a|⁴ + |y/b|⁴ = 1.
    let j = Jitter::draw(rng);
    polygon(|t| {
        let (s, c) = t.sin_cos();
        let x = a * c.signum() * c.abs().sqrt();
        let y = b * s.signum() * s.abs().sqrt();
        j.apply(t, Vec2::new(x, y))
    })
}

/// `per_class` shapes of each of the three classes, labelled by class.
pub fn three_classes(seed: u64, per_class: usize) -> Vec<CurveFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let makers: [(&str, fn(&mut ChaCha8Rng) -> Vec<Vec2>); 3] =
        [("ellipse", ellipse), ("star", star), ("rectangle", rounded_rectangle)];
    let mut out = Vec::with_capacity(3 * per_class);
    for (label, make) in makers {
        for k in 0..per_class {
            let points = make(&mut rng);
            out.push(CurveFile::new(format!("{label}_{k:02}"), &points).with_label(label));
        }
    }
    out
}

/// `count` wing-like outlines.
pub fn wings(seed: u64, count: usize) -> Vec<CurveFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let thickness = rng.gen_range(0.3..0.45);
            let notch = rng.gen_range(0.0..0.12);
            let j = Jitter {
                angle: 0.0,
                scale: rng.gen_range(0.95..1.05),
                shift: Vec2::zeros(),
                noise: std::array::from_fn(|_| (rng.gen_range(-0.01..0.01), rng.gen_range(0.0..TAU))),
            };
            let points = polygon(|t| {
                let x = 1.5 * t.cos();
                let y = thickness * t.sin() * (1.0 + 0.35 * t.cos());
                // Notch centred at the tip, t = 0.
                let d = ((t + PI).rem_euclid(TAU) - PI) / 0.35;
                let dent = notch * (-d * d).exp();
                j.apply(t, Vec2::new(x - dent, y))
            });
            CurveFile::new(format!("wing_{k:03}"), &points).with_label("wing")
        })
        .collect()
}

pub fn generate(kind: SyntheticKind, seed: u64, count: usize) -> Vec<CurveFile> {
    match kind {
        SyntheticKind::Classes => three_classes(seed, count),
        SyntheticKind::Wings => wings(seed, count),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let a = three_classes(7, 4);
        assert_eq!(a, three_classes(7, 4));
        assert_ne!(a, three_classes(8, 4));
        assert_eq!(a.len(), 12);
        assert_eq!(a.iter().filter(|c| c.label.as_deref() == Some("star")).count(), 4);
        for c in a.iter().chain(&wings(1, 5)) {
            c.validate().unwrap();
            c.fit(40).unwrap().curve.check_regular().unwrap();
        }
    }
}
