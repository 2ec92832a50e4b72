//! Diagonal-variance statistic quantifying Toeplitz (convolutional) weight
//! structure.

use crate::tensor::Tensor;

/// Score in `[0, 1]`: `1 - sum_d var(diag d) * len(d) / (total_var * count)`.
/// Exactly Toeplitz matrices (constant along every diagonal) score 1;
/// unstructured matrices score near 0. Diagonals are weighted by length so
/// the trivially-constant corner diagonals do not dominate. A constant
/// matrix has zero total variance and scores 1 by definition.
pub fn sharing_score(w: &Tensor) -> f64 {
    assert_eq!(w.shape().len(), 2, "sharing_score needs a matrix, got {:?}", w.shape());
    let (m, n) = (w.shape()[0], w.shape()[1]);
    let count = (m * n) as f64;
    let mean = w.data().iter().sum::<f64>() / count;
    let total_var = w.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if total_var == 0.0 {
        return 1.0;
    }
    let mut weighted = 0.0;
    for d in -(m as isize - 1)..=(n as isize - 1) {
        let mut values = Vec::new();
        for i in 0..m {
            let j = i as isize + d;
            if j >= 0 && (j as usize) < n {
                values.push(w.at(i, j as usize));
            }
        }
        let len = values.len() as f64;
        let mu = values.iter().sum::<f64>() / len;
        let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / len;
        weighted += var * len;
    }
    1.0 - weighted / (total_var * count)
}
