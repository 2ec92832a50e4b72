//! Finite groups as explicit multiplication tables.
//!
//! Element 0 is always the identity; enumeration order is fixed per
//! constructor so downstream block layouts are deterministic:
//!
//! - cyclic: element `a` is rotation by `a`;
//! - dihedral: element `a + n * f` is rotation `a` followed by `f` flips;
//! - symmetric: permutations in lexicographic one-line order.

use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("group order must be at least 1")]
    EmptyGroup,
    #[error("symmetric group order {n} outside supported range 1..=5")]
    SymmetricOrderOutOfRange { n: usize },
    #[error("table entry {value} at ({a}, {b}) is not a valid element of a group of order {order}")]
    NotClosed { a: usize, b: usize, value: usize, order: usize },
    #[error("element 0 does not act as the identity at element {g}")]
    BrokenIdentity { g: usize },
    #[error("element {g} has no inverse")]
    BrokenInverse { g: usize },
    #[error("associativity fails at ({a}, {b}, {c})")]
    BrokenAssociativity { a: usize, b: usize, c: usize },
    #[error("representation dimension {got} does not match required {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrices are not a homomorphism: max deviation {max_err:.3e} exceeds {tolerance:.3e}")]
    NotAHomomorphism { max_err: f64, tolerance: f64 },
    #[error("matrix for element {element} is not a permutation matrix")]
    NotPermutationMatrix { element: usize },
    #[error("matrix for the identity element is not the identity")]
    IdentityMatrixMismatch,
    #[error("{interpolation} interpolation does not support rotation order {rotation_order}")]
    UnsupportedRotation { rotation_order: usize, interpolation: &'static str },
    #[error("one matrix of dimension {expected} per group element required, got {got} matrices")]
    WrongMatrixCount { expected: usize, got: usize },
}

#[derive(Debug)]
pub struct FiniteGroup {
    name: String,
    order: usize,
    table: Vec<usize>,
    inverse: Vec<usize>,
    /// Rotation-subgroup order for dihedral/cyclic groups acting on images.
    rotation_order: usize,
    /// Whether elements `n..2n` carry a reflection (dihedral).
    has_flips: bool,
}

impl FiniteGroup {
    fn validated(
        name: String,
        order: usize,
        table: Vec<usize>,
        rotation_order: usize,
        has_flips: bool,
    ) -> Result<Arc<Self>, GroupError> {
        assert_eq!(table.len(), order * order, "table size must be order^2");
        for a in 0..order {
            for b in 0..order {
                let v = table[a * order + b];
                if v >= order {
                    return Err(GroupError::NotClosed { a, b, value: v, order });
                }
            }
        }
        for g in 0..order {
            if table[g] != g || table[g * order] != g {
                return Err(GroupError::BrokenIdentity { g });
            }
        }
        let mut inverse = vec![usize::MAX; order];
        for g in 0..order {
            match (0..order).find(|&h| table[g * order + h] == 0 && table[h * order + g] == 0) {
                Some(h) => inverse[g] = h,
                None => return Err(GroupError::BrokenInverse { g }),
            }
        }
        // Exhaustive associativity check stays affordable up to order 64.
        if order <= 64 {
            for a in 0..order {
                for b in 0..order {
                    let ab = table[a * order + b];
                    for c in 0..order {
                        let bc = table[b * order + c];
                        if table[ab * order + c] != table[a * order + bc] {
                            return Err(GroupError::BrokenAssociativity { a, b, c });
                        }
                    }
                }
            }
        }
        Ok(Arc::new(FiniteGroup { name, order, table, inverse, rotation_order, has_flips }))
    }

    /// Cyclic group of order `n`: `table[a][b] = (a + b) mod n`.
    pub fn cyclic(n: usize) -> Result<Arc<Self>, GroupError> {
        if n == 0 {
            return Err(GroupError::EmptyGroup);
        }
        let mut table = vec![0usize; n * n];
        for a in 0..n {
            for b in 0..n {
                table[a * n + b] = (a + b) % n;
            }
        }
        Self::validated(format!("c{n}"), n, table, n, false)
    }

    /// Dihedral group with `n` rotations and `n` reflections (order `2n`).
    /// Element `a + n * f` is the rotation `r^a` composed with `f` flips;
    /// the defining relations are `r^n = 1`, `f^2 = 1`, `f r f = r^-1`.
    pub fn dihedral(n: usize) -> Result<Arc<Self>, GroupError> {
        if n == 0 {
            return Err(GroupError::EmptyGroup);
        }
        let order = 2 * n;
        let mut table = vec![0usize; order * order];
        for a in 0..n {
            for e in 0..2usize {
                for b in 0..n {
                    for g in 0..2usize {
                        // (r^a f^e)(r^b f^g) = r^(a + (-1)^e b) f^(e xor g)
                        let rot = if e == 0 { (a + b) % n } else { (a + n - b % n) % n };
                        let flip = e ^ g;
                        table[(a + n * e) * order + (b + n * g)] = rot + n * flip;
                    }
                }
            }
        }
        Self::validated(format!("d{n}"), order, table, n, true)
    }

    /// Symmetric group on `n` points, permutations enumerated in
    /// lexicographic one-line order; composition is `(s . t)(i) = s(t(i))`.
    pub fn symmetric(n: usize) -> Result<Arc<Self>, GroupError> {
        if !(1..=5).contains(&n) {
            return Err(GroupError::SymmetricOrderOutOfRange { n });
        }
        let perms = lexicographic_permutations(n);
        let order = perms.len();
        let index_of = |p: &[usize]| perms.iter().position(|q| q == p).expect("closed under composition");
        let mut table = vec![0usize; order * order];
        for (a, pa) in perms.iter().enumerate() {
            for (b, pb) in perms.iter().enumerate() {
                let composed: Vec<usize> = (0..n).map(|i| pa[pb[i]]).collect();
                table[a * order + b] = index_of(&composed);
            }
        }
        Self::validated(format!("s{n}"), order, table, 1, false)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn rotation_order(&self) -> usize {
        self.rotation_order
    }

    pub fn has_flips(&self) -> bool {
        self.has_flips
    }

    /// Rotation amount and flip bit of an element under this crate's
    /// enumeration (cyclic and dihedral groups only).
    pub fn rotation_flip_of(&self, g: usize) -> (usize, bool) {
        if self.has_flips {
            (g % self.rotation_order, g >= self.rotation_order)
        } else {
            (g, false)
        }
    }

    /// One-line permutation for an element of a symmetric group.
    pub fn permutation_of(&self, g: usize, n: usize) -> Vec<usize> {
        let perms = lexicographic_permutations(n);
        assert_eq!(perms.len(), self.order, "permutation_of expects the symmetric group on {n} points");
        perms[g].clone()
    }
}

fn lexicographic_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    loop {
        out.push(current.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}
