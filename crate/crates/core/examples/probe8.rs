// Stability diagnosis on a bad seed: per-task spectral radius of the inner
// GD map vs observed divergence.
use metasym::layers::{BiasMode, Layer, ReparamDense};
use metasym::meta::*;
use metasym::rng::{derived_rng, streams};
use metasym::tasks::{gen_lc_tasks, LcTaskSpec, TaskSource};
use metasym::Tensor;

fn outer_sizes(model: &MetaModel) -> Vec<usize> {
    let infos = model.param_infos();
    let mut s: Vec<usize> = model.param_values().iter().zip(&infos).filter(|(_, i)| model.is_outer(i.role)).map(|(p, _)| p.numel()).collect();
    s.extend(std::iter::repeat(1).take(model.inner_lrs.len()));
    s
}

fn main() {
    let seed = 17u64;
    let spec = LcTaskSpec { rank: 1, input_dim: 16, train_tasks: 400, test_tasks: 100,
        examples_per_train_task: 20, train_support: 1, test_support: 1, test_query: 20,
        master_seed: seed, filter_width: 3 };
    let (train, test) = gen_lc_tasks(&spec).unwrap();
    let mut rng = derived_rng(seed, streams::PARAMS, 0);
    let l = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng);
    let mut msr = MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02);
    let mut adam = AdamState::new(5e-4, &outer_sizes(&msr));
    train_meta(&mut msr, &train,
        &TrainOptions { outer_steps: 1000, batch_size: 32, inner_steps_train: 3, master_seed: seed, parallel: true },
        &mut adam, |_| {}).unwrap();
    let lr = msr.inner_lrs[1];
    println!("lr_v = {lr:.4}");

    // Inner Hessian w.r.t. v for a 1-example task: H = (2/(m)) U^T (I (x) x x^T) U
    let u = msr.param_values()[0].clone();
    let m_out = 14usize;
    for steps in [3usize, 9] {
        let summary = meta_test(&msr, &test, steps, 0, true).unwrap();
        let mut rows: Vec<(usize, f64)> = summary.per_task.iter().cloned().enumerate().collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1));
        print!("adapt {steps}: mean {:.4} worst tasks:", summary.mean);
        for (i, v) in rows.iter().take(4) {
            // power-iterate H for this task
            let task = test.task(*i);
            let x = task.support_x.clone(); // (1, 16)
            let mut vvec = Tensor::ones(&[16, 1]);
            let mut lam = 0.0;
            for _ in 0..60 {
                // H v = 2/m * U^T vec( (W x^T ... ) ) with W = reshape(Uv)
                let w = u.matmul(&vvec).reshape(&[m_out, 16]);
                let wx = x.matmul(&w.transpose()); // (1, m)
                let gw = wx.transpose().matmul(&x).scale(2.0 / (m_out as f64 * 1.0)); // (m,16)
                let hv = u.transpose().matmul(&gw.reshape(&[m_out * 16, 1]));
                let norm = hv.data().iter().map(|a| a * a).sum::<f64>().sqrt();
                lam = norm / vvec.data().iter().map(|a| a * a).sum::<f64>().sqrt();
                vvec = hv.scale(1.0 / norm.max(1e-300));
            }
            print!("  task{} mse {:.2} lr*lam {:.2}", i, v, lr * lam);
        }
        println!();
    }
}
