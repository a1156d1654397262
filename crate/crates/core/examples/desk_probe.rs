//! Quick probe of desk-scale training: central pipeline on the desk preset,
//! reporting per-SNR accuracy and wall time.

use std::time::Instant;

use cfamc_core::dataset::{generate_in_memory, DatasetConfig, Split};
use cfamc_core::eval::evaluate;
use cfamc_core::model::ModelSpec;
use cfamc_core::training::{
    train_central_pipeline, train_distributed_pipeline, train_hybrid_pipeline, DataSplits,
    DonorCache, DonorData, Hyperparams,
};

fn main() {
    let t0 = Instant::now();
    let cfg = DatasetConfig::desk();
    let records = generate_in_memory(&cfg).unwrap();
    println!("dataset: {} records in {:.1}s", records.len(), t0.elapsed().as_secs_f64());

    let train: Vec<_> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
    let val: Vec<_> = records.iter().filter(|r| r.split == Split::Val).cloned().collect();
    let test: Vec<_> = records.iter().filter(|r| r.split == Split::Test).cloned().collect();
    println!("splits: {} / {} / {}", train.len(), val.len(), test.len());
    let data = DataSplits { train: &train, val: &val, test: &test };

    let hp = Hyperparams { epochs: 10, batch_size: 128, learning_rate: 1e-3, seed: 1 };
    let mut donors = DonorCache::new();

    let t1 = Instant::now();
    let spec = ModelSpec::central(128, 4, 3);
    let (model, phases) = train_central_pipeline(&spec, &data, &hp, &mut donors).unwrap();
    println!("central train: {:.1}s", t1.elapsed().as_secs_f64());
    for m in &phases[0].1.metrics {
        println!(
            "  epoch {}: loss {:.4} val_acc {:.4} ({:.1}s)",
            m.epoch, m.train_loss, m.val_accuracy, m.wall_time_s
        );
    }
    let report = evaluate(&model, &test).unwrap();
    println!("central overall: {:.4}", report.overall_accuracy);
    for p in &report.per_snr {
        println!("  snr {:>5.1} dB: {:.4}", p.egc_snr_db, p.accuracy());
    }

    let t2 = Instant::now();
    let dspec = ModelSpec::distributed(128, 4, 3);
    let (dmodel, _) = train_distributed_pipeline(&dspec, &data, &hp, DonorData::PerBranch, &mut donors).unwrap();
    println!("distributed train (donor cached): {:.1}s", t2.elapsed().as_secs_f64());
    let dreport = evaluate(&dmodel, &test).unwrap();
    println!("distributed overall: {:.4}", dreport.overall_accuracy);
    for p in &dreport.per_snr {
        println!("  snr {:>5.1} dB: {:.4}", p.egc_snr_db, p.accuracy());
    }

    let t3 = Instant::now();
    let hspec = ModelSpec::hybrid(128, 4, 128, 4, 3);
    let (hmodel, _) = train_hybrid_pipeline(&hspec, &data, &hp, DonorData::PerBranch, &mut donors).unwrap();
    println!("hybrid train (donors cached): {:.1}s", t3.elapsed().as_secs_f64());
    let hreport = evaluate(&hmodel, &test).unwrap();
    println!("hybrid overall: {:.4}", hreport.overall_accuracy);
    for p in &hreport.per_snr {
        println!("  snr {:>5.1} dB: {:.4}", p.egc_snr_db, p.accuracy());
    }

    println!("total: {:.1}s", t0.elapsed().as_secs_f64());
}
