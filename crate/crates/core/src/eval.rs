//! Accuracy measurement per SNR, confusion matrices, Monte-Carlo averaging
//! and the shipped reference accuracy curves.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use libm::{log10, sqrt};

use crate::dataset::FrameRecord;
use crate::error::{Error, Result};
use crate::model::{SoftDecision, N_CLASSES};
use crate::rng::fnv1a64;
use crate::training::{mc_run_hp, run_pipeline, DataSplits, DonorCache, PipelineConfig};

/// Anything that can classify a dataset record.
pub trait RecordClassifier: Sync {
    fn classify_record(&self, record: &FrameRecord) -> Result<SoftDecision>;
}

impl<F: crate::nn::Scalar> RecordClassifier for crate::model::CentralModel<F> {
    fn classify_record(&self, record: &FrameRecord) -> Result<SoftDecision> {
        self.classify(record)
    }
}

impl<F: crate::nn::Scalar> RecordClassifier for crate::model::DistributedModel<F> {
    fn classify_record(&self, record: &FrameRecord) -> Result<SoftDecision> {
        self.classify(record)
    }
}

impl<F: crate::nn::Scalar> RecordClassifier for crate::model::HybridModel<F> {
    fn classify_record(&self, record: &FrameRecord) -> Result<SoftDecision> {
        self.classify(record)
    }
}

impl<F: crate::nn::Scalar> RecordClassifier for crate::training::AnyModel<F> {
    fn classify_record(&self, record: &FrameRecord) -> Result<SoftDecision> {
        match self {
            crate::training::AnyModel::Central(m) => m.classify(record),
            crate::training::AnyModel::Distributed(m) => m.classify(record),
            crate::training::AnyModel::Hybrid(m) => m.classify(record),
        }
    }
}

/// Test-harness model that reads the ground-truth label.
pub struct OracleClassifier;

impl RecordClassifier for OracleClassifier {
    fn classify_record(&self, record: &FrameRecord) -> Result<SoftDecision> {
        let mut probs = vec![0.0f32; N_CLASSES];
        probs[record.label.index()] = 1.0;
        Ok(SoftDecision { probs })
    }
}

/// Test-harness model that always answers one class.
pub struct ConstantClassifier(pub usize);

impl RecordClassifier for ConstantClassifier {
    fn classify_record(&self, _record: &FrameRecord) -> Result<SoftDecision> {
        let mut probs = vec![0.0f32; N_CLASSES];
        probs[self.0] = 1.0;
        Ok(SoftDecision { probs })
    }
}

/// Accuracy at one EGC SNR grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrPoint {
    pub egc_snr_db: f64,
    /// `EGC SNR - 10 log10(n_ru)` (linear-mean convention).
    pub mean_ru_snr_db: f64,
    pub n_records: usize,
    pub n_correct: usize,
}

impl SnrPoint {
    pub fn accuracy(&self) -> f64 {
        self.n_correct as f64 / self.n_records as f64
    }
}

/// Monte-Carlo aggregate statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct McStats {
    pub n_runs: usize,
    pub per_run_accuracy: Vec<f64>,
    pub mean: f64,
    pub sample_std: f64,
}

/// Evaluation outcome: overall and per-SNR accuracy plus a 7x7 confusion
/// matrix (rows true, columns predicted).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub per_snr: Vec<SnrPoint>,
    pub confusion: Vec<Vec<u64>>,
    pub n_records: usize,
    pub mc: Option<McStats>,
}

impl EvalReport {
    /// Confusion-matrix conservation: entries sum to `n_records` and the
    /// trace recomposes the overall accuracy.
    pub fn check_conservation(&self) -> Result<()> {
        let total: u64 = self.confusion.iter().flatten().sum();
        if total != self.n_records as u64 {
            return Err(Error::ContractViolation(alloc::format!(
                "confusion sums to {total}, expected {}",
                self.n_records
            )));
        }
        let trace: u64 = (0..N_CLASSES).map(|i| self.confusion[i][i]).sum();
        let acc = trace as f64 / self.n_records as f64;
        if (acc - self.overall_accuracy).abs() > 1e-12 {
            return Err(Error::ContractViolation("trace/total mismatch".to_string()));
        }
        Ok(())
    }
}

/// Single deterministic pass: argmax prediction per record.
pub fn evaluate<M: RecordClassifier>(model: &M, records: &[FrameRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("evaluate needs a non-empty split".to_string()));
    }
    let classify_chunk = |chunk: &[FrameRecord]| -> Result<Vec<usize>> {
        chunk
            .iter()
            .map(|r| {
                let d = model.classify_record(r)?;
                if d.probs.len() != N_CLASSES {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "model emits {} classes, labels have {N_CLASSES}",
                        d.probs.len()
                    )));
                }
                Ok(d.argmax())
            })
            .collect()
    };
    let chunked: Vec<Result<Vec<usize>>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            records.par_chunks(16).map(classify_chunk).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            records.chunks(16).map(classify_chunk).collect()
        }
    };
    let mut predictions = Vec::with_capacity(records.len());
    for c in chunked {
        predictions.extend(c?);
    }

    let mut confusion = vec![vec![0u64; N_CLASSES]; N_CLASSES];
    let mut snr_points: Vec<SnrPoint> = Vec::new();
    for (record, &pred) in records.iter().zip(&predictions) {
        let truth = record.label.index();
        confusion[truth][pred] += 1;
        let correct = (pred == truth) as usize;
        match snr_points.iter_mut().find(|p| p.egc_snr_db == record.egc_snr_db) {
            Some(p) => {
                p.n_records += 1;
                p.n_correct += correct;
            }
            None => snr_points.push(SnrPoint {
                egc_snr_db: record.egc_snr_db,
                mean_ru_snr_db: record.egc_snr_db - 10.0 * log10(record.plan.n_ru as f64),
                n_records: 1,
                n_correct: correct,
            }),
        }
    }
    snr_points.sort_by(|a, b| a.egc_snr_db.partial_cmp(&b.egc_snr_db).unwrap());

    let n_correct: u64 = (0..N_CLASSES).map(|i| confusion[i][i]).sum();
    Ok(EvalReport {
        overall_accuracy: n_correct as f64 / records.len() as f64,
        per_snr: snr_points,
        confusion,
        n_records: records.len(),
        mc: None,
    })
}

/// Repeat the full train+evaluate pipeline with run-indexed seeds (fresh
/// trainable-weight init and shuffling per run; the dataset is fixed) and
/// aggregate. A failed run reports the completed per-run accuracies.
pub fn monte_carlo_evaluate(
    pc: &PipelineConfig,
    data: &DataSplits<'_>,
    n_runs: usize,
) -> Result<EvalReport> {
    if n_runs < 1 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".to_string()));
    }
    let mut per_run = Vec::with_capacity(n_runs);
    let mut reports = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        let hp = mc_run_hp(&pc.hp, run);
        let run_pc = PipelineConfig { hp, ..pc.clone() };
        let mut donors = DonorCache::new();
        let outcome = run_pipeline(&run_pc, data, &mut donors)
            .and_then(|(model, _)| evaluate(&model, data.test));
        match outcome {
            Ok(report) => {
                per_run.push(report.overall_accuracy);
                reports.push(report);
            }
            Err(e) => {
                return Err(Error::PartialResults {
                    completed: per_run,
                    failed_run: run,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(merge_reports(reports, per_run))
}

/// Sum confusion matrices and per-SNR counts across equal-shaped runs.
pub fn merge_reports(reports: Vec<EvalReport>, per_run: Vec<f64>) -> EvalReport {
    let n_runs = reports.len();
    let mut confusion = vec![vec![0u64; N_CLASSES]; N_CLASSES];
    let mut per_snr: Vec<SnrPoint> = Vec::new();
    let mut n_records = 0usize;
    for r in &reports {
        n_records += r.n_records;
        for (acc_row, row) in confusion.iter_mut().zip(&r.confusion) {
            for (a, &v) in acc_row.iter_mut().zip(row) {
                *a += v;
            }
        }
        for p in &r.per_snr {
            match per_snr.iter_mut().find(|q| q.egc_snr_db == p.egc_snr_db) {
                Some(q) => {
                    q.n_records += p.n_records;
                    q.n_correct += p.n_correct;
                }
                None => per_snr.push(p.clone()),
            }
        }
    }
    per_snr.sort_by(|a, b| a.egc_snr_db.partial_cmp(&b.egc_snr_db).unwrap());
    let mean = per_run.iter().sum::<f64>() / n_runs as f64;
    let sample_std = if n_runs > 1 {
        sqrt(per_run.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n_runs - 1) as f64)
    } else {
        0.0
    };
    let trace: u64 = (0..N_CLASSES).map(|i| confusion[i][i]).sum();
    EvalReport {
        overall_accuracy: trace as f64 / n_records as f64,
        per_snr,
        confusion,
        n_records,
        mc: Some(McStats { n_runs, per_run_accuracy: per_run, mean, sample_std }),
    }
}

// ---------------------------------------------------------------------------
// Reference curves
// ---------------------------------------------------------------------------

/// The transcribed accuracy-vs-mean-SNR curves shipped with the crate.
pub const REFERENCE_CURVES_CSV: &str = include_str!("../data/reference_curves.csv");

/// Checksum of the shipped curve data recorded at transcription time.
pub const REFERENCE_CURVES_CHECKSUM: u64 = 0x0BDC_9392_CF7E_26B5;

/// Identifies one shipped reference curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveTag {
    CentralEgc,
    Distributed3Ru,
    Distributed6Ru,
    Hybrid,
}

impl CurveTag {
    pub const ALL: [CurveTag; 4] =
        [CurveTag::CentralEgc, CurveTag::Distributed3Ru, CurveTag::Distributed6Ru, CurveTag::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            CurveTag::CentralEgc => "central_egc",
            CurveTag::Distributed3Ru => "distributed_3ru",
            CurveTag::Distributed6Ru => "distributed_6ru",
            CurveTag::Hybrid => "hybrid",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// `(mean_snr_db, accuracy_pct)` points of one reference model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCurve {
    pub tag: CurveTag,
    pub points: Vec<(f64, f64)>,
}

/// Digest of the raw shipped data file.
pub fn reference_data_checksum() -> u64 {
    fnv1a64(REFERENCE_CURVES_CSV.as_bytes())
}

/// Parse the shipped reference curves. The data is embedded at compile time
/// and integrity-checked against [`REFERENCE_CURVES_CHECKSUM`].
pub fn reference_curves() -> Vec<ReferenceCurve> {
    let mut curves: Vec<ReferenceCurve> = CurveTag::ALL
        .into_iter()
        .map(|tag| ReferenceCurve { tag, points: Vec::new() })
        .collect();
    for line in REFERENCE_CURVES_CSV.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let tag = CurveTag::from_name(fields.next().expect("model field"))
            .expect("unknown curve tag in shipped data");
        let x: f64 = fields.next().expect("snr field").parse().expect("snr value");
        let y: f64 = fields.next().expect("accuracy field").parse().expect("accuracy value");
        curves.iter_mut().find(|c| c.tag == tag).unwrap().points.push((x, y));
    }
    curves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_in_memory, DatasetConfig, SplitCounts};

    fn tiny_records() -> Vec<FrameRecord> {
        let mut cfg = DatasetConfig::default_paper();
        cfg.snr_grid_db = vec![0.0, 10.0];
        cfg.frames_per_pair = 8;
        cfg.frame_len = 16;
        cfg.split = SplitCounts { train: 4, val: 2, test: 2 };
        generate_in_memory(&cfg).unwrap()
    }

    #[test]
    fn constant_model_on_balanced_split() {
        let records = tiny_records();
        let report = evaluate(&ConstantClassifier(0), &records).unwrap();
        report.check_conservation().unwrap();
        assert!((report.overall_accuracy - 1.0 / 7.0).abs() < 1e-12);
        // One nonzero column.
        for (i, row) in report.confusion.iter().enumerate() {
            assert_eq!(row[0], (records.len() / 7) as u64, "row {i}");
            assert!(row[1..].iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn oracle_model_is_diagonal() {
        let records = tiny_records();
        let report = evaluate(&OracleClassifier, &records).unwrap();
        assert_eq!(report.overall_accuracy, 1.0);
        for (i, row) in report.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v > 0, i == j && v > 0);
                if i != j {
                    assert_eq!(v, 0);
                }
            }
        }
    }

    #[test]
    fn per_snr_recomposes_overall() {
        let records = tiny_records();
        // A deliberately weak model: correct only on class index 2.
        let report = evaluate(&ConstantClassifier(2), &records).unwrap();
        let total: usize = report.per_snr.iter().map(|p| p.n_records).sum();
        let correct: usize = report.per_snr.iter().map(|p| p.n_correct).sum();
        assert_eq!(total, report.n_records);
        assert!((correct as f64 / total as f64 - report.overall_accuracy).abs() < 1e-12);
        // Brute-force recomputation from raw predictions.
        let mut brute = 0usize;
        for r in &records {
            let pred = ConstantClassifier(2).classify_record(r).unwrap().argmax();
            brute += (pred == r.label.index()) as usize;
        }
        assert_eq!(brute, correct);
    }

    #[test]
    fn mean_ru_snr_axis() {
        let records = tiny_records();
        let report = evaluate(&OracleClassifier, &records).unwrap();
        for p in &report.per_snr {
            let expected = p.egc_snr_db - 10.0 * log10(3.0);
            assert!((p.mean_ru_snr_db - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_curves_shape_and_endpoints() {
        let curves = reference_curves();
        assert_eq!(curves.len(), 4);
        for c in &curves {
            assert_eq!(c.points.len(), 21, "{:?}", c.tag);
            for w in c.points.windows(2) {
                assert!(w[0].0 < w[1].0, "{:?} not strictly increasing", c.tag);
            }
        }
        let central = &curves[0];
        assert_eq!(central.tag, CurveTag::CentralEgc);
        assert!((central.points[0].0 - -14.77).abs() < 0.01);
        assert!((central.points[0].1 - 28.32).abs() < 0.01);
        assert!((central.points[20].0 - 25.23).abs() < 0.01);
        assert!((central.points[20].1 - 91.699).abs() < 0.001);
        let d3 = &curves[1];
        assert!((d3.points[20].1 - 96.20).abs() < 0.01);
    }

    #[test]
    fn reference_data_integrity() {
        assert_eq!(reference_data_checksum(), REFERENCE_CURVES_CHECKSUM);
    }

    #[test]
    fn merge_reports_stats() {
        let records = tiny_records();
        let a = evaluate(&OracleClassifier, &records).unwrap();
        let b = evaluate(&OracleClassifier, &records).unwrap();
        let merged = merge_reports(vec![a, b], vec![1.0, 1.0]);
        let mc = merged.mc.unwrap();
        assert_eq!(mc.n_runs, 2);
        assert_eq!(mc.mean, 1.0);
        assert_eq!(mc.sample_std, 0.0);
        assert_eq!(merged.n_records, 2 * records.len());
    }
}
