// Criterion 5 (k=2) and criterion 7 (C4 rot) feasibility probes.
use metasym::layers::*;
use metasym::meta::*;
use metasym::rng::{derived_rng, streams};
use metasym::tasks::*;
use std::time::Instant;

fn outer_sizes(model: &MetaModel) -> Vec<usize> {
    let infos = model.param_infos();
    let mut s: Vec<usize> = model.param_values().iter().zip(&infos).filter(|(_, i)| model.is_outer(i.role)).map(|(p, _)| p.numel()).collect();
    s.extend(std::iter::repeat(1).take(model.inner_lrs.len()));
    s
}

fn train_eval(mut model: MetaModel, train: &dyn TaskSource, test: &dyn TaskSource,
              steps: usize, inner_tr: usize, inner_te: usize, seed: u64, limit: usize) -> (f64, f64) {
    let mut adam = AdamState::new(5e-4, &outer_sizes(&model));
    train_meta(&mut model, train,
        &TrainOptions { outer_steps: steps, batch_size: 32, inner_steps_train: inner_tr, master_seed: seed, parallel: true },
        &mut adam, |_| {}).unwrap();
    let s = meta_test(&model, test, inner_te, limit, true).unwrap();
    let mut v = s.per_task.clone();
    v.sort_by(f64::total_cmp);
    (s.mean, v[v.len() - 1])
}

fn main() {
    let what = std::env::args().nth(1).unwrap_or_else(|| "k2".into());
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(11);
    match what.as_str() {
        "k2" => {
            let spec = LcTaskSpec { rank: 2, input_dim: 16, train_tasks: 800, test_tasks: 200,
                examples_per_train_task: 20, train_support: 1, test_support: 1, test_query: 20,
                master_seed: seed, filter_width: 3 };
            let (train, test) = gen_lc_tasks(&spec).unwrap();
            let t0 = Instant::now();
            let mut rng = derived_rng(seed, streams::PARAMS, 0);
            let l = ReparamDense::new(16, 14, BiasMode::None, None, &mut rng);
            let msr = MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.02);
            let (m_msr, mx) = train_eval(msr, &train, &test, 1000, 3, 9, seed, 0);
            println!("MSR-FC k2: {m_msr:.4} (max {mx:.2}) [{:.0}s]", t0.elapsed().as_secs_f64());
            let mut rng = derived_rng(seed, streams::PARAMS, 100);
            let l = PlainDense::new(16, 14, BiasMode::None, &mut rng);
            let maml = MetaModel::new(vec![ModelLayer { layer: Layer::DensePlain(l), relu: false }], TrainMode::Maml, true, 0.02);
            let (m_maml, _) = train_eval(maml, &train, &test, 1000, 3, 9, seed, 0);
            let mut rng = derived_rng(seed, streams::PARAMS, 200);
            let l = PlainConv1d::new(16, 3, &mut rng).unwrap();
            let mamlc = MetaModel::new(vec![ModelLayer { layer: Layer::Conv1dPlain(l), relu: false }], TrainMode::Maml, true, 0.02);
            let (m_mamlc, _) = train_eval(mamlc, &train, &test, 1000, 3, 9, seed, 0);
            println!("k2: MSR {m_msr:.4}  MAML-FC {m_maml:.4}  MAML-Conv {m_mamlc:.4}");
        }
        "rot" => {
            let spec = GroupTaskSpec { group: TaskGroup2d::C4, side: 9, filter_side: 3,
                train_tasks: 8000, test_tasks: 2000, examples_per_train_task: 20,
                train_support: 1, test_support: 1, test_query: 20, master_seed: seed };
            let (train, test) = gen_group_equivariant_tasks(&spec).unwrap();
            let t0 = Instant::now();
            let cfg = Conv2dConfig { in_channels: 1, out_channels: 4, filter_side: 3, stride: 1, padding: Padding::Same, bias: false };
            let mut rng = derived_rng(seed, streams::PARAMS, 0);
            let l = ReparamConv2d::new(cfg.clone(), &mut rng).unwrap();
            let msr = MetaModel::new(vec![ModelLayer { layer: Layer::Conv(l), relu: false }], TrainMode::Msr, true, 0.1);
            let (m_msr, mx) = train_eval(msr, &train, &test, 1000, 1, 1, seed, 500);
            println!("MSR-Conv rot: {m_msr:.5} (max {mx:.3}) [{:.0}s]", t0.elapsed().as_secs_f64());
            let mut rng = derived_rng(seed, streams::PARAMS, 100);
            let l = PlainConv2d::new(cfg, &mut rng).unwrap();
            let maml = MetaModel::new(vec![ModelLayer { layer: Layer::ConvPlain(l), relu: false }], TrainMode::Maml, true, 0.1);
            let (m_maml, _) = train_eval(maml, &train, &test, 1000, 1, 1, seed, 500);
            println!("rot: MSR-Conv {m_msr:.5}  MAML-Conv {m_maml:.5}  ratio {:.1} [{:.0}s]", m_maml / m_msr, t0.elapsed().as_secs_f64());
        }
        _ => panic!("k2|rot"),
    }
}
