//! Diagnose the distributed-model gap: per-branch RU accuracy by branch SNR,
//! mean-vote baseline, and voting-head training variants.

use cfamc_core::dataset::{generate_in_memory, DatasetConfig, Split};
use cfamc_core::model::{prepare_input, Classifier, ModelSpec, N_CLASSES};
use cfamc_core::signal::linear_to_db;
use cfamc_core::training::{
    concat_examples_distributed, train_distributed_pipeline, train_supervised, DataSplits,
    DonorCache, DonorData, Hyperparams,
};

fn main() {
    let cfg = DatasetConfig::desk();
    let records = generate_in_memory(&cfg).unwrap();
    let train: Vec<_> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    let val: Vec<_> = records.iter().filter(|r| r.split == Split::Val).cloned().collect();
    let test: Vec<_> = records.iter().filter(|r| r.split == Split::Test).cloned().collect();
    let data = DataSplits { train: &train, val: &val, test: &test };
    let hp = Hyperparams { epochs: 10, batch_size: 128, learning_rate: 1e-3, seed: 1 };
    let mut donors = DonorCache::new();

    let spec = ModelSpec::distributed(128, 4, 3);
    let (model, phases) = train_distributed_pipeline(&spec, &data, &hp, DonorData::PerBranch, &mut donors).unwrap();
    for (name, r) in &phases {
        println!("{name}: best epoch {} val acc {:.4}", r.best_epoch, r.best_val_accuracy);
    }

    // Per-branch RU accuracy bucketed by branch SNR (dB).
    let mut ws = model.ru_net.make_workspace();
    let mut buckets: Vec<(i64, usize, usize)> = Vec::new(); // (snr_db rounded, n, correct)
    for r in &test {
        for (i, f) in r.ru_frames.iter().enumerate() {
            let x = prepare_input::<f32>(f, 128).unwrap();
            let probs = model.ru_net.forward(&x, &mut ws);
            let mut best = 0;
            for k in 1..probs.len() {
                if probs[k] > probs[best] {
                    best = k;
                }
            }
            let snr = linear_to_db(r.plan.per_ru_snr_linear[i]).round() as i64;
            let slot = buckets.iter_mut().find(|b| b.0 == snr);
            let correct = (best == r.label.index()) as usize;
            match slot {
                Some(b) => {
                    b.1 += 1;
                    b.2 += correct;
                }
                None => buckets.push((snr, 1, correct)),
            }
        }
    }
    buckets.sort();
    println!("per-branch RU accuracy by branch SNR:");
    for (snr, n, c) in &buckets {
        println!("  {snr:>3} dB: {:.3} ({n})", *c as f64 / *n as f64);
    }

    // Mean-vote baseline: argmax of the mean soft decision.
    let mut correct = 0usize;
    let mut per_snr = [(0usize, 0usize); 3];
    for r in &test {
        let mut mean = vec![0.0f32; N_CLASSES];
        for f in &r.ru_frames {
            let x = prepare_input::<f32>(f, 128).unwrap();
            let probs = model.ru_net.forward(&x, &mut ws);
            for (m, p) in mean.iter_mut().zip(probs) {
                *m += p;
            }
        }
        let mut best = 0;
        for k in 1..N_CLASSES {
            if mean[k] > mean[best] {
                best = k;
            }
        }
        let idx = cfg.snr_grid_db.iter().position(|&s| s == r.egc_snr_db).unwrap();
        per_snr[idx].0 += 1;
        let ok = best == r.label.index();
        per_snr[idx].1 += ok as usize;
        correct += ok as usize;
    }
    println!("mean-vote baseline: {:.4}", correct as f64 / test.len() as f64);
    for (i, (n, c)) in per_snr.iter().enumerate() {
        println!("  snr {} dB: {:.4}", cfg.snr_grid_db[i], *c as f64 / *n as f64);
    }

    // Trained voting head (as shipped).
    let tx = concat_examples_distributed(&model, &test).unwrap();
    let mut head_correct = 0;
    let mut hws = model.voting.make_workspace();
    for (x, label) in &tx {
        let probs = model.voting.forward(x, &mut hws);
        let mut best = 0;
        for k in 1..probs.len() {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        head_correct += (best == *label) as usize;
    }
    println!("trained voting head: {:.4}", head_correct as f64 / tx.len() as f64);

    // Variants: batch/lr changes and an averaging warm start.
    let vtrain = concat_examples_distributed(&model, &train).unwrap();
    let vval = concat_examples_distributed(&model, &val).unwrap();
    let eval_head = |head: &cfamc_core::model::DecisionHead<f32>| -> (f64, [f64; 3]) {
        let mut hws = head.make_workspace();
        let mut c = 0;
        let mut per = [(0usize, 0usize); 3];
        for ((x, label), r) in tx.iter().zip(&test) {
            let probs = head.forward(x, &mut hws);
            let mut best = 0;
            for k in 1..probs.len() {
                if probs[k] > probs[best] {
                    best = k;
                }
            }
            let idx = cfg.snr_grid_db.iter().position(|&s| s == r.egc_snr_db).unwrap();
            per[idx].0 += 1;
            let ok = best == *label;
            per[idx].1 += ok as usize;
            c += ok as usize;
        }
        let accs = [
            per[0].1 as f64 / per[0].0 as f64,
            per[1].1 as f64 / per[1].0 as f64,
            per[2].1 as f64 / per[2].0 as f64,
        ];
        (c as f64 / tx.len() as f64, accs)
    };

    let warm_start = |seed: u64| -> cfamc_core::model::DecisionHead<f32> {
        let mut rng = cfamc_core::rng::DetRng::new(seed);
        let mut head = cfamc_core::model::DecisionHead::<f32>::new(21, N_CLASSES, &mut rng, seed);
        let damp = 0.02f32;
        for w in &mut head.fc1.weight.value.data {
            *w *= damp;
        }
        for w in &mut head.fc2.weight.value.data {
            *w *= damp;
        }
        for w in &mut head.fc3.weight.value.data {
            *w *= damp;
        }
        for c in 0..N_CLASSES {
            for r in 0..3 {
                head.fc1.weight.value.data[c * 21 + r * 7 + c] = 1.0 / 3.0;
            }
            head.fc2.weight.value.data[c * 128 + c] = 1.0;
            head.fc3.weight.value.data[c * 128 + c] = 1.0;
        }
        head
    };

    for (bs, lr, warm) in [
        (128usize, 1e-3f64, false),
        (32, 1e-3, false),
        (128, 1e-3, true),
        (32, 1e-3, true),
        (32, 3e-3, true),
    ] {
        let hp2 = Hyperparams { epochs: 10, batch_size: bs, learning_rate: lr, seed: 2 };
        let mut head = if warm {
            warm_start(99)
        } else {
            let mut rng = cfamc_core::rng::DetRng::new(99);
            cfamc_core::model::DecisionHead::new(21, N_CLASSES, &mut rng, 99)
        };
        if warm {
            let (a, per) = eval_head(&head);
            println!("warm-start before training: {a:.4} (per-snr {per:?})");
        }
        train_supervised(&mut head, &vtrain, &vval, &hp2).unwrap();
        let (a, per) = eval_head(&head);
        println!("voting bs={bs} lr={lr} warm={warm}: {a:.4} (per-snr {per:?})");
    }
}
