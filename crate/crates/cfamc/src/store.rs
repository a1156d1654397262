//! Dataset materialization and loading.
//!
//! Generation is parallel across (scheme, SNR) pairs with derived seeds;
//! records are then written per split in ascending record-id order, so the
//! produced bytes are independent of the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cfamc_core::dataset::{records_of_pair, DatasetConfig, FrameRecord, Split};
use cfamc_core::rng::{hash64, DetRng};

use crate::format::{
    split_file_name, write_split_file, CellCounts, ConfigDoc, CountsDoc, DatasetManifest,
    FORMAT_VERSION, MANIFEST_NAME,
};
use crate::{IoError, IoResult};

/// Generate the full dataset under `out_dir` (one file per split plus
/// `manifest.toml`). Fully deterministic given the config.
pub fn generate_dataset(config: &DatasetConfig, out_dir: &Path) -> IoResult<DatasetManifest> {
    config.validate().map_err(IoError::Core)?;
    std::fs::create_dir_all(out_dir).map_err(IoError::persistence(out_dir))?;

    let pairs: Vec<(usize, usize)> = (0..config.schemes.len())
        .flat_map(|s| (0..config.snr_grid_db.len()).map(move |k| (s, k)))
        .collect();
    let per_pair: Vec<Vec<FrameRecord>> = pairs
        .par_iter()
        .map(|&(s, k)| records_of_pair(config, s, k))
        .collect::<Result<_, _>>()
        .map_err(IoError::Core)?;

    let mut by_split: BTreeMap<Split, Vec<&FrameRecord>> = BTreeMap::new();
    let mut cells = Vec::with_capacity(pairs.len());
    for (&(s, k), records) in pairs.iter().zip(&per_pair) {
        let mut cell = CellCounts {
            scheme: config.schemes[s].name().to_string(),
            snr_db: config.snr_grid_db[k],
            train: 0,
            val: 0,
            test: 0,
        };
        for r in records {
            match r.split {
                Split::Train => cell.train += 1,
                Split::Val => cell.val += 1,
                Split::Test => cell.test += 1,
            }
            by_split.entry(r.split).or_default().push(r);
        }
        cells.push(cell);
    }

    let mut files = BTreeMap::new();
    let mut checksums = BTreeMap::new();
    let mut split_totals = BTreeMap::new();
    for split in Split::ALL {
        let mut records = by_split.remove(&split).unwrap_or_default();
        records.sort_by_key(|r| r.record_id);
        let name = split_file_name(split);
        let checksum = write_split_file(&out_dir.join(&name), config, &records)?;
        files.insert(split.name().to_string(), name);
        checksums.insert(split.name().to_string(), format!("{checksum:#018x}"));
        split_totals.insert(split, records.len());
    }

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        config: ConfigDoc::from_config(config),
        files,
        checksums,
        counts: CountsDoc {
            total: config.total_records(),
            train: split_totals[&Split::Train],
            val: split_totals[&Split::Val],
            test: split_totals[&Split::Test],
            cells,
        },
    };
    manifest.save(&out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

/// A dataset on disk: manifest plus its directory.
#[derive(Debug, Clone)]
pub struct DatasetStore {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub config: DatasetConfig,
}

impl DatasetStore {
    pub fn open(dir: &Path) -> IoResult<Self> {
        let manifest = DatasetManifest::load(&dir.join(MANIFEST_NAME))?;
        let config = manifest.config.to_config()?;
        Ok(DatasetStore { dir: dir.to_path_buf(), manifest, config })
    }

    /// Load a whole split into memory, verifying its checksum.
    pub fn load_split(&self, split: Split) -> IoResult<Vec<FrameRecord>> {
        let path = self.manifest.file_of(&self.dir, split)?;
        let expected = self.manifest.checksum_of(split)?;
        crate::format::read_split_file(&path, &self.config, Some(expected))
    }

    /// Load train/val/test.
    pub fn load_all(&self) -> IoResult<(Vec<FrameRecord>, Vec<FrameRecord>, Vec<FrameRecord>)> {
        Ok((
            self.load_split(Split::Train)?,
            self.load_split(Split::Val)?,
            self.load_split(Split::Test)?,
        ))
    }
}

/// Epoch iterator over an in-memory split: training order reshuffles per
/// epoch from a derived seed, eval order is fixed.
pub struct BatchIter<'a> {
    records: &'a [FrameRecord],
    batch_size: usize,
    shuffle_seed: Option<u64>,
    epoch: usize,
}

impl<'a> BatchIter<'a> {
    /// `shuffle_seed = None` keeps the stored order (val/test); `Some(seed)`
    /// reshuffles per epoch as `hash64(seed, epoch)`.
    pub fn new(records: &'a [FrameRecord], batch_size: usize, shuffle_seed: Option<u64>) -> Self {
        BatchIter { records, batch_size, shuffle_seed, epoch: 0 }
    }

    /// The record order of the next epoch.
    pub fn next_epoch(&mut self) -> Vec<&'a FrameRecord> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..self.records.len()).collect();
        if let Some(seed) = self.shuffle_seed {
            DetRng::new(hash64(&[seed, self.epoch as u64])).shuffle(&mut order);
        }
        order.into_iter().map(|i| &self.records[i]).collect()
    }

    /// Batched view of one epoch.
    pub fn epoch_batches(&mut self) -> Vec<Vec<&'a FrameRecord>> {
        let order = self.next_epoch();
        order.chunks(self.batch_size).map(|c| c.to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfamc_core::dataset::SplitCounts;
    use cfamc_core::signal::ModulationScheme;

    fn tiny_config() -> DatasetConfig {
        let mut cfg = DatasetConfig::desk();
        cfg.schemes = vec![ModulationScheme::Bpsk, ModulationScheme::Qam64];
        cfg.snr_grid_db = vec![0.0, 10.0];
        cfg.frames_per_pair = 8;
        cfg.frame_len = 16;
        cfg.split = SplitCounts { train: 4, val: 2, test: 2 };
        cfg
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_dataset(&cfg, dir.path()).unwrap();
        assert_eq!(manifest.counts.total, 32);
        assert_eq!(manifest.counts.train, 16);

        let store = DatasetStore::open(dir.path()).unwrap();
        let all_mem = cfamc_core::dataset::generate_in_memory(&cfg).unwrap();
        for split in Split::ALL {
            let loaded = store.load_split(split).unwrap();
            for rec in &loaded {
                let mem = all_mem.iter().find(|r| r.record_id == rec.record_id).unwrap();
                assert_eq!(rec.label, mem.label);
                assert_eq!(rec.split, mem.split);
                for (a, b) in rec.ru_frames.iter().zip(&mem.ru_frames) {
                    for (x, y) in a.samples.iter().zip(&b.samples) {
                        // Loaded values are exactly the f32 rounding of the
                        // generated f64 samples.
                        assert_eq!(x.re, y.re as f32 as f64);
                        assert_eq!(x.im, y.im as f32 as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let cfg = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let ma = generate_dataset(&cfg, dir_a.path()).unwrap();
        let mb = generate_dataset(&cfg, dir_b.path()).unwrap();
        assert_eq!(ma.checksums, mb.checksums);
        for split in Split::ALL {
            let fa = std::fs::read(dir_a.path().join(split_file_name(split))).unwrap();
            let fb = std::fs::read(dir_b.path().join(split_file_name(split))).unwrap();
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn checksum_mismatch_names_file() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&cfg, dir.path()).unwrap();
        // Corrupt one byte of the val file.
        let path = dir.path().join(split_file_name(Split::Val));
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xFF;
        std::fs::write(&path, bytes).unwrap();

        let store = DatasetStore::open(dir.path()).unwrap();
        match store.load_split(Split::Val) {
            Err(IoError::CorruptData { path: p, .. }) => {
                assert!(p.to_string_lossy().contains("val.cfamc"));
            }
            other => panic!("expected CorruptData, got {other:?}"),
        }
        // Other splits still load.
        store.load_split(Split::Test).unwrap();
    }

    #[test]
    fn batch_iter_orders() {
        let cfg = tiny_config();
        let records = cfamc_core::dataset::generate_in_memory(&cfg).unwrap();

        // Fixed order without a shuffle seed.
        let mut eval_iter = BatchIter::new(&records, 5, None);
        let e1: Vec<u64> = eval_iter.next_epoch().iter().map(|r| r.record_id).collect();
        let e2: Vec<u64> = eval_iter.next_epoch().iter().map(|r| r.record_id).collect();
        assert_eq!(e1, e2);

        // Reshuffled per epoch with a seed: different order, same multiset.
        let mut train_iter = BatchIter::new(&records, 5, Some(42));
        let t1: Vec<u64> = train_iter.next_epoch().iter().map(|r| r.record_id).collect();
        let t2: Vec<u64> = train_iter.next_epoch().iter().map(|r| r.record_id).collect();
        assert_ne!(t1, t2);
        let mut s1 = t1.clone();
        let mut s2 = t2.clone();
        s1.sort_unstable();
        s2.sort_unstable();
        assert_eq!(s1, s2);

        // Batch sizes conserve the record count.
        let total: usize = BatchIter::new(&records, 5, None)
            .epoch_batches()
            .iter()
            .map(|b| b.len())
            .sum();
        assert_eq!(total, records.len());
    }
}
