//! Sweep donor-training hyperparameters and measure the resulting RU
//! low-SNR accuracy and distributed-model accuracy.

use cfamc_core::dataset::{generate_in_memory, DatasetConfig, Split};
use cfamc_core::model::{prepare_input, Classifier, DistributedModel, ModelSpec, N_CLASSES};
use cfamc_core::signal::linear_to_db;
use cfamc_core::training::{
    concat_examples_distributed, per_branch_examples, train_supervised, Hyperparams,
};

fn main() {
    let cfg = DatasetConfig::desk();
    let records = generate_in_memory(&cfg).unwrap();
    let train: Vec<_> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    let val: Vec<_> = records.iter().filter(|r| r.split == Split::Val).cloned().collect();
    let test: Vec<_> = records.iter().filter(|r| r.split == Split::Test).cloned().collect();

    let btrain = per_branch_examples::<f32>(&train, 128).unwrap();
    let bval = per_branch_examples::<f32>(&val, 128).unwrap();

    for (bs, lr, seed) in [
        (128usize, 1e-3f64, 1u64),
        (32, 1e-3, 1),
        (32, 3e-4, 1),
        (64, 1e-3, 2),
    ] {
        let hp = Hyperparams { epochs: 10, batch_size: bs, learning_rate: lr, seed };
        let mut donor = Classifier::<f32>::new(128, 4, N_CLASSES, seed * 7919).unwrap();
        let r = train_supervised(&mut donor, &btrain, &bval, &hp).unwrap();

        // RU accuracy in the 3..=7 dB branch band.
        let mut ws = donor.make_workspace();
        let (mut n_low, mut c_low) = (0usize, 0usize);
        for rec in &test {
            for (i, f) in rec.ru_frames.iter().enumerate() {
                let snr = linear_to_db(rec.plan.per_ru_snr_linear[i]);
                if !(3.0..=7.0).contains(&snr) {
                    continue;
                }
                let x = prepare_input::<f32>(f, 128).unwrap();
                let probs = donor.forward(&x, &mut ws);
                let mut best = 0;
                for k in 1..probs.len() {
                    if probs[k] > probs[best] {
                        best = k;
                    }
                }
                n_low += 1;
                c_low += (best == rec.label.index()) as usize;
            }
        }

        // Distributed accuracy with this donor.
        let mut ru = donor.clone();
        cfamc_core::nn::ParamVisitor::set_frozen(&mut ru, true);
        let mut model = DistributedModel::assemble(ru, 3, 17).unwrap();
        let vtrain = concat_examples_distributed(&model, &train).unwrap();
        let vval = concat_examples_distributed(&model, &val).unwrap();
        let vhp = Hyperparams { epochs: 10, batch_size: 32, learning_rate: 1e-3, seed: 3 };
        train_supervised(&mut model.voting, &vtrain, &vval, &vhp).unwrap();
        let vtest = concat_examples_distributed(&model, &test).unwrap();
        let mut hws = model.voting.make_workspace();
        let mut c = 0;
        for (x, label) in &vtest {
            let probs = model.voting.forward(x, &mut hws);
            let mut best = 0;
            for k in 1..probs.len() {
                if probs[k] > probs[best] {
                    best = k;
                }
            }
            c += (best == *label) as usize;
        }
        println!(
            "donor bs={bs} lr={lr} seed={seed}: val {:.4} (epoch {}), RU@3-7dB {:.3}, distributed {:.4}",
            r.best_val_accuracy,
            r.best_epoch,
            c_low as f64 / n_low as f64,
            c as f64 / vtest.len() as f64
        );
        let _ = ModelSpec::central(128, 4, 3);
    }
}
