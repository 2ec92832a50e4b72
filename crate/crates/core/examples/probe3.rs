// Seed sensitivity + baseline gap for the k=1 protocol.
use metasym::layers::{BiasMode, Layer, PlainDense, ReparamDense};
use metasym::meta::*;
use metasym::rng::{derived_rng, streams};
use metasym::tasks::{gen_lc_tasks, LcTaskSpec};

fn outer_sizes(model: &MetaModel) -> Vec<usize> {
    let infos = model.param_infos();
    let mut s: Vec<usize> = model.param_values().iter().zip(&infos).filter(|(_, i)| model.is_outer(i.role)).map(|(p, _)| p.numel()).collect();
    s.extend(std::iter::repeat(1).take(model.inner_lrs.len()));
    s
}

fn run(which: &str, seed: u64) -> (f64, f64) {
    let spec = LcTaskSpec { rank: 1, input_dim: 16, train_tasks: 400, test_tasks: 100,
        examples_per_train_task: 20, train_support: 1, test_support: 1, test_query: 20,
        master_seed: seed, filter_width: 3 };
    let (train, test) = gen_lc_tasks(&spec).unwrap();
    let mut rng = derived_rng(seed ^ 0xabcd, streams::PARAMS, 0);
    let mut model = match which {
        "msr" => {
            let l = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng);
            MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02)
        }
        _ => {
            let l = PlainDense::new(16, 14, BiasMode::None, &mut rng);
            MetaModel::new(vec![ModelLayer { layer: Layer::DensePlain(l), relu: false }], TrainMode::Maml, true, 0.02)
        }
    };
    let mut adam = AdamState::new(5e-4, &outer_sizes(&model));
    train_meta(&mut model, &train,
        &TrainOptions { outer_steps: 1000, batch_size: 32, inner_steps_train: 3, master_seed: seed, parallel: true },
        &mut adam, |_| {}).unwrap();
    let s = meta_test(&model, &test, 9, 0, true).unwrap();
    (s.mean, s.ci95)
}

fn main() {
    for seed in [11u64, 21, 31] {
        let (msr, msr_ci) = run("msr", seed);
        let (maml, maml_ci) = run("maml", seed);
        println!("seed {seed}: MSR {msr:.4}+-{msr_ci:.4}  MAML {maml:.4}+-{maml_ci:.4}  ratio {:.1}", maml / msr);
    }
}
