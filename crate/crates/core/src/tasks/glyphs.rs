//! Procedural glyph dataset: each class is a random simple polygon, each
//! example a vertex-jittered rendering. Self-contained stand-in for
//! handwritten-character few-shot benchmarks.

use rand::Rng;

use super::idx::ImageDataset;
use crate::rng::{derived_rng, streams};
use crate::tensor::Tensor;

struct Polygon {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Polygon {
    fn contains(&self, px: f64, py: f64) -> bool {
        // Ray casting.
        let n = self.xs.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = (self.xs[i], self.ys[i]);
            let (xj, yj) = (self.xs[j], self.ys[j]);
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

fn base_shape(side: f64, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let k = rng.gen_range(3..=7usize);
    let center = side / 2.0;
    let mut angles = Vec::with_capacity(k);
    for i in 0..k {
        let jitter = rng.gen_range(-0.3..0.3);
        angles.push(2.0 * std::f64::consts::PI * (i as f64 + jitter) / k as f64);
    }
    let radii: Vec<f64> = (0..k).map(|_| rng.gen_range(0.22..0.46) * side).collect();
    let xs = angles.iter().zip(&radii).map(|(a, r)| center + r * a.cos()).collect();
    let ys = angles.iter().zip(&radii).map(|(a, r)| center + r * a.sin()).collect();
    (xs, ys)
}

fn render(poly: &Polygon, side: usize) -> Vec<f64> {
    // 2x2 supersampling per pixel for soft edges.
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let mut hits = 0;
            for (dy, dx) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
                if poly.contains(c as f64 + dx, r as f64 + dy) {
                    hits += 1;
                }
            }
            out[r * side + c] = hits as f64 / 4.0;
        }
    }
    out
}

/// Renders `n_classes * per_class` glyph images at `side x side`, grayscale
/// in `[0, 1]`, labels `0..n_classes`.
pub fn gen_glyph_dataset(n_classes: usize, per_class: usize, side: usize, seed: u64) -> ImageDataset {
    let mut images = Vec::with_capacity(n_classes * per_class * side * side);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for class in 0..n_classes {
        let mut class_rng = derived_rng(seed, streams::DATASET, class as u64);
        let (xs, ys) = base_shape(side as f64, &mut class_rng);
        for _ in 0..per_class {
            let jitter = 0.035 * side as f64;
            let poly = Polygon {
                xs: xs.iter().map(|&x| x + class_rng.gen_range(-jitter..jitter)).collect(),
                ys: ys.iter().map(|&y| y + class_rng.gen_range(-jitter..jitter)).collect(),
            };
            images.extend(render(&poly, side));
            labels.push(class);
        }
    }
    ImageDataset {
        images: Tensor::from_vec(&[n_classes * per_class, 1, side, side], images),
        labels,
        rows: side,
        cols: side,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_has_expected_shape_and_range() {
        let ds = gen_glyph_dataset(4, 3, 16, 1);
        assert_eq!(ds.len(), 12);
        assert_eq!(ds.n_classes(), 4);
        assert_eq!(ds.images.shape(), &[12, 1, 16, 16]);
        for &v in ds.images.data() {
            assert!((0.0..=1.0).contains(&v));
        }
        // Glyphs are non-empty.
        for i in 0..12 {
            let mass: f64 = ds.image(i).data().iter().sum();
            assert!(mass > 1.0, "glyph {i} nearly empty: mass {mass}");
        }
    }

    #[test]
    fn classes_differ_more_than_instances() {
        let ds = gen_glyph_dataset(2, 4, 16, 2);
        let dist = |a: &Tensor, b: &Tensor| -> f64 {
            a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        };
        let within = dist(&ds.image(0), &ds.image(1));
        let across = dist(&ds.image(0), &ds.image(4));
        assert!(across > within, "within {within} across {across}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_glyph_dataset(3, 2, 12, 7);
        let b = gen_glyph_dataset(3, 2, 12, 7);
        assert_eq!(a.images.data(), b.images.data());
    }
}
