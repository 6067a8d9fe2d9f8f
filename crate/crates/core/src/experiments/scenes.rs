//! Deterministic synthetic test scenes.
//!
//! Smooth illumination gradients, Gaussian blobs and soft-edged discs and
//! bars give images with most energy at low spatial frequencies and a few
//! sharp-ish edges, which is enough to exercise compressive reconstruction
//! without shipping an image corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::SceneImage;

fn smoothstep(edge: f64, x: f64) -> f64 {
    let t = (0.5 - x / edge).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

#[derive(Debug, Clone)]
struct Shape {
    kind: u8,
    cx: f64,
    cy: f64,
    size: f64,
    angle: f64,
    amplitude: f64,
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            kind: rng.random_range(0..3),
            cx: rng.random_range(0.1..0.9),
            cy: rng.random_range(0.1..0.9),
            size: rng.random_range(0.06..0.25),
            angle: rng.random_range(0.0..std::f64::consts::PI),
            amplitude: rng.random_range(-0.35..0.6),
        }
    }

    fn value(&self, u: f64, v: f64, edge: f64) -> f64 {
        let (dx, dy) = (u - self.cx, v - self.cy);
        match self.kind {
            0 => {
                let r2 = (dx * dx + dy * dy) / (self.size * self.size);
                self.amplitude * (-0.5 * r2 * 4.0).exp()
            }
            1 => {
                let r = (dx * dx + dy * dy).sqrt();
                self.amplitude * smoothstep(edge, r - self.size)
            }
            _ => {
                let (s, c) = self.angle.sin_cos();
                let along = (dx * c + dy * s).abs() - self.size;
                let across = (-dx * s + dy * c).abs() - self.size * 0.3;
                self.amplitude * smoothstep(edge, along.max(across))
            }
        }
    }
}

/// Scene number `index` at the given resolution, values in `[0, 1]`.
pub fn synthetic_scene(index: u64, width: usize, height: usize) -> SceneImage {
    render(index, width, height, 0.0, 1.0)
}

fn render(index: u64, width: usize, height: usize, shift: f64, brightness: f64) -> SceneImage {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ce0_0000 ^ index);
    let base = rng.random_range(0.15..0.45);
    let gx = rng.random_range(-0.25..0.25);
    let gy = rng.random_range(-0.25..0.25);
    let shapes: Vec<Shape> = (0..rng.random_range(4..9))
        .map(|_| Shape::random(&mut rng))
        .collect();
    let edge = 1.5 / width.max(height) as f64;

    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let u = (x as f64 + 0.5) / width as f64;
            let v = (y as f64 + 0.5) / height as f64;
            let mut val = base + gx * (u - 0.5) + gy * (v - 0.5);
            for (i, s) in shapes.iter().enumerate() {
                let moved = if i == 0 { u - shift } else { u };
                val += s.value(moved, v, edge);
            }
            pixels.push((val * brightness).clamp(0.0, 1.0));
        }
    }
    SceneImage::new(width, height, pixels).expect("clamped pixels are valid")
}

/// A short sequence of one scene with a drifting object and changing
/// overall brightness.
pub fn dynamic_frames(index: u64, count: usize, width: usize, height: usize) -> Vec<SceneImage> {
    (0..count)
        .map(|f| {
            let t = f as f64 / count.max(1) as f64;
            let brightness = 0.75 + 0.25 * (2.0 * std::f64::consts::PI * t).cos();
            render(index, width, height, 0.3 * t, brightness)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_distinct() {
        let a = synthetic_scene(1, 32, 32);
        assert_eq!(a, synthetic_scene(1, 32, 32));
        assert_ne!(a, synthetic_scene(2, 32, 32));
        assert!(a.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(a.max() > 0.0);
    }

    #[test]
    fn frames_change() {
        let frames = dynamic_frames(3, 4, 16, 16);
        assert_eq!(frames.len(), 4);
        assert_ne!(frames[0], frames[1]);
    }
}
