// Paper-scale sanity run: input dim 70, otherwise the same protocol.
use metasym::layers::{BiasMode, Layer, ReparamDense};
use metasym::meta::*;
use metasym::rng::{derived_rng, streams};
use metasym::tasks::{gen_lc_tasks, LcTaskSpec};

fn outer_sizes(model: &MetaModel) -> Vec<usize> {
    let infos = model.param_infos();
    let mut s: Vec<usize> = model.param_values().iter().zip(&infos).filter(|(_, i)| model.is_outer(i.role)).map(|(p, _)| p.numel()).collect();
    s.extend(std::iter::repeat(1).take(model.inner_lrs.len()));
    s
}

fn main() {
    let dim: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(70);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(21);
    let spec = LcTaskSpec { rank: 1, input_dim: dim, train_tasks: 400, test_tasks: 100,
        examples_per_train_task: 20, train_support: 1, test_support: 1, test_query: 20,
        master_seed: seed, filter_width: 3 };
    let (train, test) = gen_lc_tasks(&spec).unwrap();
    let mut rng = derived_rng(seed ^ 0xabcd, streams::PARAMS, 0);
    let l = ReparamDense::new(dim, dim - 2, BiasMode::None, None, &mut rng);
    let mut model = MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02);
    let mut adam = AdamState::new(5e-4, &outer_sizes(&model));
    train_meta(&mut model, &train,
        &TrainOptions { outer_steps: 1000, batch_size: 32, inner_steps_train: 3, master_seed: seed, parallel: true },
        &mut adam,
        |m| { if m.step % 250 == 0 { println!("step {:4} loss {:.5}", m.step, m.query_loss); } }).unwrap();
    println!("lr_v {:.3}", model.inner_lrs[1]);
    let s = meta_test(&model, &test, 9, 0, true).unwrap();
    let mut v = s.per_task.clone();
    v.sort_by(f64::total_cmp);
    println!("dim {dim} seed {seed}: mean {:.5} median {:.6} p90 {:.5} max {:.4}", s.mean, v[50], v[90], v[99]);
}
