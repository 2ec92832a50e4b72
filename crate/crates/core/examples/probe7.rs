// Full criterion-4/6 bundle scan across seeds.
use metasym::layers::{sharing_score, BiasMode, Layer, PlainDense, ReparamDense};
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
    for seed in [5u64, 7, 11, 13, 17, 23] {
        let spec = LcTaskSpec { rank: 1, input_dim: 16, train_tasks: 400, test_tasks: 100,
            examples_per_train_task: 20, train_support: 1, test_support: 1, test_query: 20,
            master_seed: seed, filter_width: 3 };
        let (train, test) = gen_lc_tasks(&spec).unwrap();
        // MSR
        let mut rng = derived_rng(seed, streams::PARAMS, 0);
        let l = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng);
        let mut msr = MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02);
        let w0 = msr.layers[0].layer.materialize_weight(&msr.param_values());
        let init_score = sharing_score(&w0.detach());
        let mut adam = AdamState::new(5e-4, &outer_sizes(&msr));
        train_meta(&mut msr, &train,
            &TrainOptions { outer_steps: 1000, batch_size: 32, inner_steps_train: 3, master_seed: seed, parallel: true },
            &mut adam, |_| {}).unwrap();
        let s_msr = meta_test(&msr, &test, 9, 0, true).unwrap();
        // sharing over 10 adapted test tasks
        let mut scores = vec![];
        for i in 0..10 {
            let task = test.task(i);
            let graph = metasym::Graph::new();
            let params: Vec<Tensor> = msr.param_values().iter().map(|p| p.leaf(&graph)).collect();
            let lrs: Vec<Tensor> = msr.inner_lrs.iter().map(|&v| Tensor::scalar(v)).collect();
            let adapted = adapt_params(&msr, params, &lrs, task.kind, &task.support_x, &task.support_y, 9, false, task.id).unwrap();
            let w = msr.layers[0].layer.materialize_weight(&adapted);
            scores.push(sharing_score(&w.detach()));
        }
        let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
        // MAML
        let mut rng = derived_rng(seed, streams::PARAMS, 100);
        let l = PlainDense::new(16, 14, BiasMode::None, &mut rng);
        let mut maml = MetaModel::new(vec![ModelLayer { layer: Layer::DensePlain(l), relu: false }], TrainMode::Maml, true, 0.02);
        let mut adam = AdamState::new(5e-4, &outer_sizes(&maml));
        train_meta(&mut maml, &train,
            &TrainOptions { outer_steps: 1000, batch_size: 32, inner_steps_train: 3, master_seed: seed, parallel: true },
            &mut adam, |_| {}).unwrap();
        let s_maml = meta_test(&maml, &test, 9, 0, true).unwrap();
        println!("seed {seed:2}: MSR {:.4}  MAML {:.4}  ratio {:5.1}  init_score {init_score:.3}  adapted_score {mean_score:.3}",
            s_msr.mean, s_maml.mean, s_maml.mean / s_msr.mean);
    }
}
