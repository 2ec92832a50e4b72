//! Constructive symmetry matrices and the brute-force equivariance oracle.

use std::sync::Arc;


use super::group::FiniteGroup;
use super::rep::{
    rotation_representation_2d, shift_representation, symmetric_natural_representation, Interpolation,
    Representation,
};
use crate::rng::{derived_rng, streams};
use crate::tensor::Tensor;

/// The stacked-representation symmetry matrix: block `i` of the `mn x n`
/// matrix is `pi(g_i)`, with block 0 the identity. A dense layer whose
/// weights are `reshape(matrix . v, m, n)` implements group
/// cross-correlation with filter `v`.
pub struct SymmetryMatrixBlueprint {
    group: Arc<FiniteGroup>,
    rep: Representation,
    matrix: Tensor,
}

impl SymmetryMatrixBlueprint {
    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn rep(&self) -> &Representation {
        &self.rep
    }

    /// The `mn x n` stacked matrix.
    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    /// Output dimension (group order) and input dimension.
    pub fn dims(&self) -> (usize, usize) {
        (self.group.order(), self.rep.dim())
    }
}

/// Stacks the representation matrices of every group element into the
/// `mn x n` symmetry matrix.
pub fn build_symmetry_matrix(rep: &Representation) -> SymmetryMatrixBlueprint {
    let n = rep.dim();
    let m = rep.group().order();
    let mut data = Vec::with_capacity(m * n * n);
    for g in 0..m {
        data.extend_from_slice(rep.matrix(g).data());
    }
    SymmetryMatrixBlueprint {
        group: rep.group().clone(),
        rep: rep.clone(),
        matrix: Tensor::from_vec(&[m * n, n], data),
    }
}

/// Brute-force group cross-correlation directly from the definition:
/// `out[j] = <signal, pi(g_j) filter>`, one output component per group
/// element. This is the oracle; it uses scalar loops and no sharing tricks.
pub fn group_correlation(rep: &Representation, signal: &Tensor, filter: &Tensor) -> Tensor {
    let n = rep.dim();
    assert_eq!(signal.numel(), n, "signal has {} elements, representation dimension is {n}", signal.numel());
    assert_eq!(filter.numel(), n, "filter has {} elements, representation dimension is {n}", filter.numel());
    let m = rep.group().order();
    let mut out = vec![0.0; m];
    for (j, slot) in out.iter_mut().enumerate() {
        let mat = rep.matrix(j);
        let mut acc = 0.0;
        for i in 0..n {
            let mut transformed = 0.0;
            for k in 0..n {
                transformed += mat.at(i, k) * filter.data()[k];
            }
            acc += signal.data()[i] * transformed;
        }
        *slot = acc;
    }
    Tensor::from_vec(&[m], out)
}

/// Mean relative equivariance defect of a layer over random probes:
/// `mean over trials, g of ||f(pi1(g) x) - pi2(g) f(x)|| / max(||f(x)||, 1e-12)`
/// with `x` standard normal.
pub fn equivariance_error(
    layer: &dyn Fn(&Tensor) -> Tensor,
    rep_in: &Representation,
    rep_out: &Representation,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut rng = derived_rng(seed, streams::EVAL, 0);
    let mut total = 0.0;
    let mut count = 0usize;
    for _ in 0..trials {
        let x = Tensor::randn(&[rep_in.dim()], 1.0, &mut rng);
        let fx = layer(&x);
        assert_eq!(
            fx.numel(),
            rep_out.dim(),
            "layer output has {} elements, output representation dimension is {}",
            fx.numel(),
            rep_out.dim()
        );
        let norm_fx = l2(fx.data()).max(1e-12);
        for g in 0..rep_in.group().order() {
            let lhs = layer(&rep_in.apply(g, &x));
            let rhs = rep_out.apply(g, &fx);
            let diff: f64 = lhs
                .data()
                .iter()
                .zip(rhs.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            total += diff / norm_fx;
            count += 1;
        }
    }
    total / count as f64
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A named (group, representation) pair from the standard registry.
pub struct RegisteredPair {
    pub name: String,
    pub rep: Representation,
    /// Permutation-exact pairs satisfy the oracle identities to float
    /// round-off; interpolated pairs are approximate and only reported.
    pub exact: bool,
}

/// The (group, representation) pairs exercised by the verification suites:
/// cyclic shifts, symmetric-group permutations, quarter-turn image actions
/// on two image sizes, and the approximate 45-degree actions.
pub fn standard_registry() -> Vec<RegisteredPair> {
    let mut pairs = Vec::new();
    for n in [2usize, 3, 4, 8] {
        let g = FiniteGroup::cyclic(n).expect("cyclic group");
        let rep = shift_representation(&g, n).expect("shift representation");
        pairs.push(RegisteredPair { name: format!("c{n}_shift"), rep, exact: true });
    }
    for n in [2usize, 3] {
        let g = FiniteGroup::symmetric(n).expect("symmetric group");
        let rep = symmetric_natural_representation(&g, n).expect("natural representation");
        pairs.push(RegisteredPair { name: format!("s{n}_natural"), rep, exact: true });
    }
    for side in [3usize, 9] {
        let c4 = FiniteGroup::cyclic(4).expect("c4");
        let rep = rotation_representation_2d(&c4, side, Interpolation::Exact90).expect("c4 image action");
        pairs.push(RegisteredPair { name: format!("c4_rot_{side}x{side}"), rep, exact: true });

        let d4 = FiniteGroup::dihedral(4).expect("d4");
        let rep = rotation_representation_2d(&d4, side, Interpolation::Exact90).expect("d4 image action");
        pairs.push(RegisteredPair { name: format!("d4_rotflip_{side}x{side}"), rep, exact: true });
    }
    let c8 = FiniteGroup::cyclic(8).expect("c8");
    let rep = rotation_representation_2d(&c8, 5, Interpolation::Bilinear).expect("c8 bilinear");
    pairs.push(RegisteredPair { name: "c8_rot_5x5_bilinear".into(), rep, exact: false });
    let d8 = FiniteGroup::dihedral(8).expect("d8");
    let rep = rotation_representation_2d(&d8, 5, Interpolation::Bilinear).expect("d8 bilinear");
    pairs.push(RegisteredPair { name: "d8_rotflip_5x5_bilinear".into(), rep, exact: false });
    pairs
}
