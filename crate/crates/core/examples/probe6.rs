// v-init scale sweep at fixed U init.
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

fn run(seed: u64, v_scale: f64) -> (f64, f64, f64, f64) {
    let spec = LcTaskSpec { rank: 1, input_dim: 16, train_tasks: 400, test_tasks: 100,
        examples_per_train_task: 20, train_support: 1, test_support: 1, test_query: 20,
        master_seed: seed, filter_width: 3 };
    let (train, test) = gen_lc_tasks(&spec).unwrap();
    let mut rng = derived_rng(seed ^ 0xabcd, streams::PARAMS, 0);
    let l = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng);
    let mut model = MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02);
    let mut params = model.param_values();
    params[1] = params[1].scale(v_scale);
    model.set_param_values(&params);
    let mut adam = AdamState::new(5e-4, &outer_sizes(&model));
    let mut last = 0.0;
    train_meta(&mut model, &train,
        &TrainOptions { outer_steps: 1000, batch_size: 32, inner_steps_train: 3, master_seed: seed, parallel: true },
        &mut adam, |m| last = m.query_loss).unwrap();
    let s = meta_test(&model, &test, 9, 0, true).unwrap();
    let mut v = s.per_task.clone();
    v.sort_by(f64::total_cmp);
    (s.mean, v[99], model.inner_lrs[1], last)
}

fn main() {
    for v_scale in [1.0, 0.2, 0.0] {
        for seed in [11u64, 21, 31] {
            let (mse, mx, lr, last) = run(seed, v_scale);
            println!("v_scale {v_scale:.2} seed {seed}: MSE {mse:.4} max {mx:.3} lr_v {lr:.3} train {last:.4}");
        }
    }
}
