//! Sparse linear index maps ("spread plans").
//!
//! A `SpreadPlan` is a fixed list of `(src, dst)` flat-index pairs describing a
//! linear map `out[dst] += in[src]`. Applying the pairs in reverse order of
//! roles gives the transpose map, which is exactly the adjoint needed by the
//! autodiff engine. One primitive therefore covers permutations, tensor
//! unfold/fold, im2col patch extraction, band embedding, broadcasts and
//! row reductions, all with correct gradients of any order.

use std::sync::Arc;

#[derive(Debug)]
pub struct SpreadPlan {
    src_shape: Vec<usize>,
    dst_shape: Vec<usize>,
    pairs: Vec<(u32, u32)>,
}

impl SpreadPlan {
    pub fn new(src_shape: Vec<usize>, dst_shape: Vec<usize>, pairs: Vec<(u32, u32)>) -> Arc<Self> {
        let src_len: usize = src_shape.iter().product();
        let dst_len: usize = dst_shape.iter().product();
        for &(s, d) in &pairs {
            assert!(
                (s as usize) < src_len && (d as usize) < dst_len,
                "spread plan pair ({s}, {d}) out of bounds for src {src_shape:?} dst {dst_shape:?}"
            );
        }
        Arc::new(SpreadPlan { src_shape, dst_shape, pairs })
    }

    pub fn src_shape(&self) -> &[usize] {
        &self.src_shape
    }

    pub fn dst_shape(&self) -> &[usize] {
        &self.dst_shape
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// `out[dst] += in[src]` over all pairs.
    pub fn apply_forward(&self, src: &[f64]) -> Vec<f64> {
        debug_assert_eq!(src.len(), self.src_shape.iter().product::<usize>());
        let mut out = vec![0.0; self.dst_shape.iter().product()];
        for &(s, d) in &self.pairs {
            out[d as usize] += src[s as usize];
        }
        out
    }

    /// Transpose map: `out[src] += in[dst]`.
    pub fn apply_reverse(&self, dst: &[f64]) -> Vec<f64> {
        debug_assert_eq!(dst.len(), self.dst_shape.iter().product::<usize>());
        let mut out = vec![0.0; self.src_shape.iter().product()];
        for &(s, d) in &self.pairs {
            out[s as usize] += dst[d as usize];
        }
        out
    }
}

fn pair(s: usize, d: usize) -> (u32, u32) {
    (s as u32, d as u32)
}

/// Mode-`axis` unfolding of a rank-3 tensor into a `(shape[axis], rest)` matrix.
/// Row index is the mode coordinate; columns iterate the remaining axes in
/// row-major order.
pub fn plan_unfold3(shape: [usize; 3], axis: usize) -> Arc<SpreadPlan> {
    assert!(axis < 3, "unfold axis {axis} out of range for rank-3 tensor");
    let [a, b, c] = shape;
    let rest: usize = shape.iter().enumerate().filter(|(i, _)| *i != axis).map(|(_, &s)| s).product();
    let mut pairs = Vec::with_capacity(a * b * c);
    for i in 0..a {
        for j in 0..b {
            for k in 0..c {
                let src = (i * b + j) * c + k;
                let (row, col) = match axis {
                    0 => (i, j * c + k),
                    1 => (j, i * c + k),
                    _ => (k, i * b + j),
                };
                pairs.push(pair(src, row * rest + col));
            }
        }
    }
    SpreadPlan::new(vec![a, b, c], vec![shape[axis], rest], pairs)
}

/// Inverse of [`plan_unfold3`]: refold a `(shape[axis], rest)` matrix into the
/// rank-3 tensor with the given target shape.
pub fn plan_fold3(target: [usize; 3], axis: usize) -> Arc<SpreadPlan> {
    let unfold = plan_unfold3(target, axis);
    let mut pairs = Vec::with_capacity(unfold.pairs.len());
    for &(s, d) in &unfold.pairs {
        pairs.push((d, s));
    }
    SpreadPlan::new(unfold.dst_shape.clone(), unfold.src_shape.clone(), pairs)
}

/// `(rows, 1)` column vector broadcast across `cols` columns.
pub fn plan_broadcast_cols(rows: usize, cols: usize) -> Arc<SpreadPlan> {
    let mut pairs = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            pairs.push(pair(r, r * cols + c));
        }
    }
    SpreadPlan::new(vec![rows, 1], vec![rows, cols], pairs)
}

/// Row-wise sum: `(rows, cols)` down to `(rows, 1)`.
pub fn plan_row_sum(rows: usize, cols: usize) -> Arc<SpreadPlan> {
    let mut pairs = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            pairs.push(pair(r * cols + c, r));
        }
    }
    SpreadPlan::new(vec![rows, cols], vec![rows, 1], pairs)
}

/// Pick one column per row: `out[r, 0] = in[r, index[r]]`.
pub fn plan_select_per_row(rows: usize, cols: usize, indices: &[usize]) -> Arc<SpreadPlan> {
    assert_eq!(indices.len(), rows, "one column index per row required");
    let mut pairs = Vec::with_capacity(rows);
    for (r, &c) in indices.iter().enumerate() {
        assert!(c < cols, "row {r}: column index {c} out of range for {cols} columns");
        pairs.push(pair(r * cols + c, r));
    }
    SpreadPlan::new(vec![rows, cols], vec![rows, 1], pairs)
}

/// Copy a `(rows, cols)` block into the left part of a `(rows, cols + extra)`
/// matrix, leaving the new columns zero.
pub fn plan_widen_cols(rows: usize, cols: usize, extra: usize) -> Arc<SpreadPlan> {
    let mut pairs = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            pairs.push(pair(r * cols + c, r * (cols + extra) + c));
        }
    }
    SpreadPlan::new(vec![rows, cols], vec![rows, cols + extra], pairs)
}

/// Embed per-location filters `f[j, t]` into a banded `(out_len, in_len)`
/// matrix with `B[j, j + t] = f[j, t]` (valid-mode sliding window).
pub fn plan_band_embed(out_len: usize, width: usize, in_len: usize) -> Arc<SpreadPlan> {
    assert!(in_len + 1 >= out_len + width, "band does not fit: {out_len} rows of width {width} into {in_len} columns");
    let mut pairs = Vec::with_capacity(out_len * width);
    for j in 0..out_len {
        for t in 0..width {
            pairs.push(pair(j * width + t, j * in_len + j + t));
        }
    }
    SpreadPlan::new(vec![out_len, width], vec![out_len, in_len], pairs)
}

/// im2col patch gather for 2-D cross-correlation with zero padding.
///
/// Source is `(batch, c_in, h, w)`; destination is
/// `(batch * oh * ow, c_in * fh * fw)` with rows ordered `(b, oy, ox)`.
/// Out-of-frame taps are simply omitted, which realizes the zero fill.
#[allow(clippy::too_many_arguments)]
pub fn plan_im2col(
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    fh: usize,
    fw: usize,
    stride: usize,
    pad: usize,
) -> Arc<SpreadPlan> {
    assert!(stride >= 1, "stride must be at least 1");
    let oh = (h + 2 * pad - fh) / stride + 1;
    let ow = (w + 2 * pad - fw) / stride + 1;
    let patch = c_in * fh * fw;
    let mut pairs = Vec::with_capacity(batch * oh * ow * patch);
    for b in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (b * oh + oy) * ow + ox;
                for ci in 0..c_in {
                    for dy in 0..fh {
                        let y = (oy * stride + dy) as isize - pad as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for dx in 0..fw {
                            let x = (ox * stride + dx) as isize - pad as isize;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            let src = ((b * c_in + ci) * h + y as usize) * w + x as usize;
                            let dst = row * patch + (ci * fh + dy) * fw + dx;
                            pairs.push(pair(src, dst));
                        }
                    }
                }
            }
        }
    }
    SpreadPlan::new(vec![batch, c_in, h, w], vec![batch * oh * ow, patch], pairs)
}

/// Permute `(batch * h * w, c)` rows-of-positions layout into `(batch, c, h, w)`.
pub fn plan_positions_to_nchw(batch: usize, h: usize, w: usize, c: usize) -> Arc<SpreadPlan> {
    let mut pairs = Vec::with_capacity(batch * h * w * c);
    for b in 0..batch {
        for y in 0..h {
            for x in 0..w {
                let row = (b * h + y) * w + x;
                for ch in 0..c {
                    let src = row * c + ch;
                    let dst = ((b * c + ch) * h + y) * w + x;
                    pairs.push(pair(src, dst));
                }
            }
        }
    }
    SpreadPlan::new(vec![batch * h * w, c], vec![batch, c, h, w], pairs)
}

/// Broadcast a per-channel vector `(c,)` over `(batch, c, h, w)`.
pub fn plan_broadcast_channels(batch: usize, c: usize, h: usize, w: usize) -> Arc<SpreadPlan> {
    let mut pairs = Vec::with_capacity(batch * c * h * w);
    for b in 0..batch {
        for ch in 0..c {
            for p in 0..h * w {
                pairs.push(pair(ch, ((b * c + ch) * h * w) + p));
            }
        }
    }
    SpreadPlan::new(vec![c], vec![batch, c, h, w], pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfold_then_fold_is_identity() {
        let data: Vec<f64> = (0..24).map(|x| x as f64).collect();
        for axis in 0..3 {
            let unfold = plan_unfold3([2, 3, 4], axis);
            let fold = plan_fold3([2, 3, 4], axis);
            let round = fold.apply_forward(&unfold.apply_forward(&data));
            assert_eq!(round, data, "axis {axis}");
        }
    }

    #[test]
    fn unfold_axis0_is_plain_reshape() {
        let data: Vec<f64> = (0..12).map(|x| x as f64).collect();
        let unfold = plan_unfold3([2, 2, 3], 0);
        assert_eq!(unfold.apply_forward(&data), data);
    }

    #[test]
    fn reverse_is_transpose() {
        // <plan(x), y> == <x, plan^T(y)> for random-ish vectors.
        let plan = plan_im2col(1, 1, 3, 3, 2, 2, 1, 0);
        let x: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..16).map(|i| (i as f64).cos()).collect();
        let fwd = plan.apply_forward(&x);
        let rev = plan.apply_reverse(&y);
        let lhs: f64 = fwd.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&rev).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn band_embed_places_filters_on_diagonals() {
        let plan = plan_band_embed(2, 3, 4);
        let f = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let band = plan.apply_forward(&f);
        assert_eq!(band, vec![1.0, 2.0, 3.0, 0.0, 0.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn im2col_same_padding_covers_every_output() {
        let plan = plan_im2col(1, 1, 3, 3, 3, 3, 1, 1);
        assert_eq!(plan.dst_shape(), &[9, 9]);
        let ones = vec![1.0; 9];
        let cols = plan.apply_forward(&ones);
        // Center output sees all 9 taps, corner outputs only 4.
        assert_eq!(cols[4 * 9..5 * 9].iter().sum::<f64>(), 9.0);
        assert_eq!(cols[0..9].iter().sum::<f64>(), 4.0);
    }
}
