// Criterion-4 protocol probe: dim 16, 400 train tasks, 20 ex/task, 1000 outer
// steps, batch 32, 3/9 inner steps, Adam 5e-4, inner lr init 0.02.
use metasym::layers::{sharing_score, BiasMode, Layer, PlainDense, ReparamDense};
use metasym::meta::*;
use metasym::rng::{derived_rng, streams};
use metasym::tasks::{gen_lc_tasks, LcTaskSpec, TaskSource};
use std::time::Instant;

fn outer_sizes(model: &MetaModel) -> Vec<usize> {
    let infos = model.param_infos();
    let mut s: Vec<usize> = model.param_values().iter().zip(&infos).filter(|(_, i)| model.is_outer(i.role)).map(|(p, _)| p.numel()).collect();
    s.extend(std::iter::repeat(1).take(model.inner_lrs.len()));
    s
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "msr".into());
    let steps: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let spec = LcTaskSpec { rank: 1, input_dim: 16, train_tasks: 400, test_tasks: 100,
        examples_per_train_task: 20, test_support: 1, test_query: 20, master_seed: 11, filter_width: 3, train_support: 1 };
    let (train, test) = gen_lc_tasks(&spec).unwrap();
    let mut rng = derived_rng(7, streams::PARAMS, 0);
    let mut model = match which.as_str() {
        "msr" => {
            let l = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng);
            MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02)
        }
        "maml" => {
            let l = PlainDense::new(16, 14, BiasMode::None, &mut rng);
            MetaModel::new(vec![ModelLayer { layer: Layer::DensePlain(l), relu: false }], TrainMode::Maml, true, 0.02)
        }
        _ => panic!("msr|maml"),
    };
    let t0 = Instant::now();
    let mut adam = AdamState::new(5e-4, &outer_sizes(&model));
    train_meta(&mut model, &train,
        &TrainOptions { outer_steps: steps, batch_size: 32, inner_steps_train: 3, master_seed: 11, parallel: true },
        &mut adam,
        |m| { if m.step % 100 == 0 { println!("step {:4}  batch query loss {:.5}  [{:.1}s]", m.step, m.query_loss, t0.elapsed().as_secs_f64()); } }).unwrap();
    println!("train time: {:.1}s  inner lrs {:?}", t0.elapsed().as_secs_f64(), model.inner_lrs);
    let summary = meta_test(&model, &test, 9, 0, true).unwrap();
    println!("{which} meta-test MSE: {:.5} +- {:.5}", summary.mean, summary.ci95);
    // Sharing structure of adapted weights over 10 test tasks.
    if which == "msr" {
        let mut scores = vec![];
        for i in 0..10 {
            let task = test.task(i);
            let graph = metasym::Graph::new();
            let params: Vec<metasym::Tensor> = model.param_values().iter().map(|p| p.leaf(&graph)).collect();
            let lrs: Vec<metasym::Tensor> = model.inner_lrs.iter().map(|&v| metasym::Tensor::scalar(v)).collect();
            let adapted = adapt_params(&model, params, &lrs, task.kind, &task.support_x, &task.support_y, 9, false, task.id).unwrap();
            if let Layer::DenseFull(_) = &model.layers[0].layer {
                let w = model.layers[0].layer.materialize_weight(&adapted[..model.layers[0].layer.param_specs().len()]);
                scores.push(sharing_score(&w.detach()));
            }
        }
        println!("sharing scores after adaptation: {:?}", scores.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>());
        // Initial score for comparison.
        let mut rng2 = derived_rng(7, streams::PARAMS, 0);
        let l0 = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng2);
        let w0 = Layer::DenseFull(l0.clone()).materialize_weight(&l0.params());
        println!("sharing score at init: {:.3}", sharing_score(&w0));
    }
}
