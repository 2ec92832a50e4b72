// Distribution diagnostics for the learned-rate stability question.
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
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let spec = LcTaskSpec { rank: 1, input_dim: 16, train_tasks: 400, test_tasks: 100,
        examples_per_train_task: 20, test_support: 1, test_query: 20, master_seed: 11, filter_width: 3, train_support: 1 };
    let (train, test) = gen_lc_tasks(&spec).unwrap();
    let mut rng = derived_rng(7, streams::PARAMS, 0);
    let l = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng);
    let mut model = MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02);
    let mut adam = AdamState::new(5e-4, &outer_sizes(&model));
    train_meta(&mut model, &train,
        &TrainOptions { outer_steps: steps, batch_size: 32, inner_steps_train: 3, master_seed: 11, parallel: true },
        &mut adam,
        |m| { if m.step % 200 == 0 { println!("step {:4} loss {:.5}", m.step, m.query_loss); } }).unwrap();
    println!("inner lrs {:?}", model.inner_lrs);
    for adapt_steps in [3, 6, 9] {
        let s = meta_test(&model, &test, adapt_steps, 0, true).unwrap();
        let mut v = s.per_task.clone();
        v.sort_by(f64::total_cmp);
        let med = v[v.len() / 2];
        let p90 = v[v.len() * 9 / 10];
        let mx = v[v.len() - 1];
        let diverged = v.iter().filter(|&&x| x > 1.0).count();
        println!("adapt {adapt_steps}: mean {:.4} median {med:.6} p90 {p90:.5} max {mx:.3} diverged(>1) {diverged}", s.mean);
    }
}
