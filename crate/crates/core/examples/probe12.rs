// k=2 seed scan (MSR only).
use metasym::layers::*;
use metasym::meta::*;
use metasym::rng::{derived_rng, streams};
use metasym::tasks::*;

fn outer_sizes(model: &MetaModel) -> Vec<usize> {
    let infos = model.param_infos();
    let mut s: Vec<usize> = model.param_values().iter().zip(&infos).filter(|(_, i)| model.is_outer(i.role)).map(|(p, _)| p.numel()).collect();
    s.extend(std::iter::repeat(1).take(model.inner_lrs.len()));
    s
}

fn main() {
    let seeds: Vec<u64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    for seed in seeds {
        let spec = LcTaskSpec { rank: 2, input_dim: 16, train_tasks: 800, test_tasks: 200,
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
        let s = meta_test(&msr, &test, 9, 0, true).unwrap();
        let mut v = s.per_task.clone();
        v.sort_by(f64::total_cmp);
        println!("k2 seed {seed:3}: MSR {:.4} med {:.4} max {:.3} lr_v {:.3}", s.mean, v[100], v[199], msr.inner_lrs[1]);
    }
}
