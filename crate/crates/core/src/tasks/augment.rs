//! Query-set augmentation: each task's validation images are independently
//! transformed while its support data stays bit-identical, so a meta-learner
//! must generalize from clean support data to transformed query data.

use rand::Rng;

use super::{Task, TaskError, TaskSource, Targets};
use crate::rng::{derived_rng, streams};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct AugmentSpec {
    /// Area fraction range of the resized crop; aspect ratio is fixed at 1.
    pub crop_scale_range: (f64, f64),
    pub flip_prob_h: f64,
    pub flip_prob_v: f64,
    pub max_rotation_deg: f64,
    pub output_side: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            crop_scale_range: (0.8, 1.0),
            flip_prob_h: 0.5,
            flip_prob_v: 0.5,
            max_rotation_deg: 30.0,
            output_side: 28,
        }
    }
}

impl AugmentSpec {
    /// True when every draw is forced to the identity transform.
    pub fn is_identity(&self) -> bool {
        self.crop_scale_range == (1.0, 1.0)
            && self.flip_prob_h == 0.0
            && self.flip_prob_v == 0.0
            && self.max_rotation_deg == 0.0
    }
}

/// A concrete transform draw; applying it is fully deterministic.
#[derive(Clone, Debug)]
pub struct TransformParams {
    pub crop_top: usize,
    pub crop_left: usize,
    pub crop_side: usize,
    pub flip_v: bool,
    pub flip_h: bool,
    pub rotation_deg: f64,
}

/// Samples one transform for an `h x w` image.
pub fn draw_transform(spec: &AugmentSpec, h: usize, w: usize, rng: &mut impl Rng) -> TransformParams {
    let (lo, hi) = spec.crop_scale_range;
    let frac = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let max_side = h.min(w);
    let crop_side = ((frac.sqrt() * max_side as f64).round() as usize).clamp(1, max_side);
    let crop_top = if h > crop_side { rng.gen_range(0..=h - crop_side) } else { 0 };
    let crop_left = if w > crop_side { rng.gen_range(0..=w - crop_side) } else { 0 };
    let flip_v = rng.gen_bool(spec.flip_prob_v);
    let flip_h = rng.gen_bool(spec.flip_prob_h);
    let rotation_deg = if spec.max_rotation_deg > 0.0 {
        rng.gen_range(-spec.max_rotation_deg..spec.max_rotation_deg)
    } else {
        0.0
    };
    TransformParams { crop_top, crop_left, crop_side, flip_v, flip_h, rotation_deg }
}

/// Crop-resize, flips, then rotation with bilinear sampling and zero fill,
/// in that order. Exact multiples of 90 degrees rotate by pure pixel
/// permutation. Interpolation weights are convex, so outputs stay within the
/// input value range (zero fill can only pull toward 0).
pub fn image_transform(img: &Tensor, params: &TransformParams, output_side: usize) -> Tensor {
    assert_eq!(img.shape().len(), 3, "image must be (c, h, w), got {:?}", img.shape());
    let (c, h, w) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    assert!(params.crop_side > 0, "degenerate zero-area crop");
    assert!(
        params.crop_top + params.crop_side <= h && params.crop_left + params.crop_side <= w,
        "crop {params:?} out of bounds for {h}x{w}"
    );
    let side = output_side;
    let mut out = vec![0.0; c * side * side];

    // Crop + bilinear resize (border clamped within the crop).
    let scale = params.crop_side as f64 / side as f64;
    for ch in 0..c {
        for r in 0..side {
            for col in 0..side {
                let sr = ((r as f64 + 0.5) * scale - 0.5).clamp(0.0, params.crop_side as f64 - 1.0);
                let sc = ((col as f64 + 0.5) * scale - 0.5).clamp(0.0, params.crop_side as f64 - 1.0);
                let v = bilinear_clamped(img, ch, h, w, sr + params.crop_top as f64, sc + params.crop_left as f64);
                out[(ch * side + r) * side + col] = v;
            }
        }
    }

    if params.flip_v {
        for ch in 0..c {
            for r in 0..side / 2 {
                for col in 0..side {
                    out.swap((ch * side + r) * side + col, (ch * side + side - 1 - r) * side + col);
                }
            }
        }
    }
    if params.flip_h {
        for ch in 0..c {
            for r in 0..side {
                for col in 0..side / 2 {
                    out.swap((ch * side + r) * side + col, (ch * side + r) * side + side - 1 - col);
                }
            }
        }
    }

    if params.rotation_deg != 0.0 {
        out = rotate(&out, c, side, params.rotation_deg);
    }
    Tensor::from_vec(&[c, side, side], out)
}

fn bilinear_clamped(img: &Tensor, ch: usize, h: usize, w: usize, sr: f64, sc: f64) -> f64 {
    let r0 = sr.floor().clamp(0.0, h as f64 - 1.0);
    let c0 = sc.floor().clamp(0.0, w as f64 - 1.0);
    let r1 = (r0 + 1.0).min(h as f64 - 1.0);
    let c1 = (c0 + 1.0).min(w as f64 - 1.0);
    let (fr, fc) = (sr - r0, sc - c0);
    let at = |r: f64, c: f64| img.data()[(ch * h + r as usize) * w + c as usize];
    (1.0 - fr) * (1.0 - fc) * at(r0, c0)
        + (1.0 - fr) * fc * at(r0, c1)
        + fr * (1.0 - fc) * at(r1, c0)
        + fr * fc * at(r1, c1)
}

fn rotate(data: &[f64], c: usize, side: usize, deg: f64) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    let center = (side as f64 - 1.0) / 2.0;
    // Quarter-turn multiples are pure permutations; avoid round-off there.
    let quarters = (deg / 90.0).round();
    if (deg - quarters * 90.0).abs() < 1e-9 {
        let q = quarters.rem_euclid(4.0) as usize;
        for ch in 0..c {
            for r in 0..side {
                for col in 0..side {
                    let (mut sr, mut sc) = (r, col);
                    // Source position: rotate backwards q quarter turns.
                    for _ in 0..q {
                        let (nr, nc) = (sc, side - 1 - sr);
                        sr = nr;
                        sc = nc;
                    }
                    out[(ch * side + r) * side + col] = data[(ch * side + sr) * side + sc];
                }
            }
        }
        return out;
    }
    let theta = deg.to_radians();
    let (cos, sin) = (theta.cos(), theta.sin());
    for ch in 0..c {
        for r in 0..side {
            for col in 0..side {
                let (y, x) = (r as f64 - center, col as f64 - center);
                // Source point: rotate by -theta.
                let sx = x * cos + y * sin;
                let sy = -x * sin + y * cos;
                let (sr, sc) = (sy + center, sx + center);
                let (r0, c0) = (sr.floor(), sc.floor());
                let (fr, fc) = (sr - r0, sc - c0);
                let mut acc = 0.0;
                for (dr, dc, wt) in [
                    (0.0, 0.0, (1.0 - fr) * (1.0 - fc)),
                    (0.0, 1.0, (1.0 - fr) * fc),
                    (1.0, 0.0, fr * (1.0 - fc)),
                    (1.0, 1.0, fr * fc),
                ] {
                    let (rr, cc) = (r0 + dr, c0 + dc);
                    if rr >= 0.0 && cc >= 0.0 && rr < side as f64 && cc < side as f64 {
                        acc += wt * data[(ch * side + rr as usize) * side + cc as usize];
                    }
                }
                out[(ch * side + r) * side + col] = acc;
            }
        }
    }
    out
}

/// Task source whose query images are transformed; support data and all
/// labels pass through untouched.
pub struct AugmentedTasks<S: TaskSource> {
    inner: S,
    spec: AugmentSpec,
    seed: u64,
}

pub fn augment_wrap<S: TaskSource>(inner: S, spec: AugmentSpec, seed: u64) -> Result<AugmentedTasks<S>, TaskError> {
    if !inner.is_empty() {
        let probe = inner.task(0);
        if probe.query_x.shape().len() != 4 {
            return Err(TaskError::NonImageTasks { shape: probe.query_x.shape().to_vec() });
        }
    }
    Ok(AugmentedTasks { inner, spec, seed })
}

impl<S: TaskSource> AugmentedTasks<S> {
    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn spec(&self) -> &AugmentSpec {
        &self.spec
    }
}

impl<S: TaskSource> TaskSource for AugmentedTasks<S> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn task(&self, index: usize) -> Task {
        let task = self.inner.task(index);
        let shape = task.query_x.shape().to_vec();
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let mut rng = derived_rng(self.seed, streams::AUGMENT, task.id);
        let side = self.spec.output_side;
        let mut out = Vec::with_capacity(n * c * side * side);
        for i in 0..n {
            let img = Tensor::from_vec(&[c, h, w], task.query_x.data()[i * c * h * w..(i + 1) * c * h * w].to_vec());
            let params = draw_transform(&self.spec, h, w, &mut rng);
            out.extend_from_slice(image_transform(&img, &params, side).data());
        }
        Task {
            query_x: Tensor::from_vec(&[n, c, side, side], out),
            query_y: match &task.query_y {
                Targets::Labels(l) => Targets::Labels(l.clone()),
                Targets::Values(v) => Targets::Values(v.clone()),
            },
            ..task
        }
    }
}
