//! Synthetic dataset generation over the (modulation × SNR × frame × RU) grid.
//!
//! Every record is a pure function of `(config, master_seed)`. Child seeds
//! are derived with [`hash64`] as
//! `hash64(master_seed, scheme_index, snr_index, frame_index, role_tag)`,
//! so generation can be partitioned across workers without seed collisions.
//! Split assignment draws one seeded permutation of the frame indices per
//! (scheme, SNR) pair and cuts it at the configured train/val/test counts.
//!
//! Persistence (the frame-file format and the manifest) lives in the
//! companion crate; this module is purely in-memory.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{hash64, DetRng};
use crate::signal::{
    apply_channel, make_snr_plan, modulate, IqFrame, ModulationScheme, PlanMode, SnrPlan,
};

/// Role tags for child-seed derivation (part of the reproducibility contract).
pub mod seed_role {
    /// Clean symbol stream of a frame.
    pub const MODULATE: u64 = 1;
    /// Per-frame SNR plan draw.
    pub const PLAN: u64 = 2;
    /// Split permutation of a (scheme, SNR) pair; uses frame_index = 0.
    pub const SPLIT: u64 = 3;
    /// Channel noise of RU `i` uses `CHANNEL_BASE + i`.
    pub const CHANNEL_BASE: u64 = 16;
}

/// Per-(scheme, SNR) split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Which split a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Full description of a dataset; generation is deterministic given this.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetConfig {
    pub schemes: Vec<ModulationScheme>,
    pub snr_grid_db: Vec<f64>,
    pub frames_per_pair: usize,
    pub frame_len: usize,
    pub n_ru: usize,
    pub plan_mode: PlanMode,
    pub master_seed: u64,
    pub split: SplitCounts,
}

impl DatasetConfig {
    /// The full-scale configuration: 7 schemes × 21 SNRs × 1024 frames.
    pub fn default_paper() -> Self {
        DatasetConfig {
            schemes: ModulationScheme::ALL.to_vec(),
            snr_grid_db: (0..21).map(|i| -10.0 + 2.0 * i as f64).collect(),
            frames_per_pair: 1024,
            frame_len: 1024,
            n_ru: 3,
            plan_mode: PlanMode::Diverse,
            master_seed: 0x5EED_0001,
            split: SplitCounts { train: 768, val: 128, test: 128 },
        }
    }

    /// Desk-scale configuration: 3 schemes × 3 SNRs × 256 frames of 128
    /// samples (the acceptance-suite preset; splits scale to 192/32/32).
    pub fn desk() -> Self {
        DatasetConfig {
            schemes: alloc::vec![
                ModulationScheme::Bpsk,
                ModulationScheme::Qpsk,
                ModulationScheme::Qam16,
            ],
            snr_grid_db: alloc::vec![10.0, 20.0, 30.0],
            frames_per_pair: 256,
            frame_len: 128,
            n_ru: 3,
            plan_mode: PlanMode::Diverse,
            master_seed: 0x5EED_0001,
            split: SplitCounts { train: 192, val: 32, test: 32 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidArgument("config needs at least one scheme".to_string()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[i + 1..].contains(s) {
                return Err(Error::InvalidArgument(format!("duplicate scheme {}", s.name())));
            }
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidArgument("config needs at least one SNR".to_string()));
        }
        if !self.snr_grid_db.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("snr_grid_db must be strictly increasing".to_string()));
        }
        if self.split.total() != self.frames_per_pair {
            return Err(Error::InvalidArgument(format!(
                "split counts sum to {}, expected frames_per_pair {}",
                self.split.total(),
                self.frames_per_pair
            )));
        }
        if self.frames_per_pair == 0 || self.frame_len == 0 {
            return Err(Error::InvalidArgument("frame counts must be positive".to_string()));
        }
        if self.n_ru < 1 {
            return Err(Error::InvalidArgument("n_ru must be at least 1".to_string()));
        }
        Ok(())
    }

    pub fn n_pairs(&self) -> usize {
        self.schemes.len() * self.snr_grid_db.len()
    }

    pub fn total_records(&self) -> usize {
        self.n_pairs() * self.frames_per_pair
    }

    /// Record ids are assigned pair-major:
    /// `(scheme_index * n_snr + snr_index) * frames_per_pair + frame_index`.
    pub fn record_id(&self, scheme_idx: usize, snr_idx: usize, frame_idx: usize) -> u64 {
        ((scheme_idx * self.snr_grid_db.len() + snr_idx) * self.frames_per_pair + frame_idx)
            as u64
    }

    fn scheme_index(&self, scheme: ModulationScheme) -> Option<usize> {
        self.schemes.iter().position(|&s| s == scheme)
    }

    fn snr_index(&self, snr_db: f64) -> Option<usize> {
        self.snr_grid_db.iter().position(|&s| s == snr_db)
    }
}

/// One dataset entry: the post-channel branch frames plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub ru_frames: Vec<IqFrame>,
    pub label: ModulationScheme,
    pub egc_snr_db: f64,
    pub plan: SnrPlan,
    pub split: Split,
    pub record_id: u64,
}

/// Frame-index membership of one (scheme, SNR) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMembership {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMembership {
    pub fn of(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Seeded split permutation for a pair addressed by grid indices.
pub fn split_membership_by_index(
    config: &DatasetConfig,
    scheme_idx: usize,
    snr_idx: usize,
) -> SplitMembership {
    let mut order: Vec<usize> = (0..config.frames_per_pair).collect();
    let seed = hash64(&[
        config.master_seed,
        scheme_idx as u64,
        snr_idx as u64,
        0,
        seed_role::SPLIT,
    ]);
    DetRng::new(seed).shuffle(&mut order);
    let mut train = order[..config.split.train].to_vec();
    let mut val = order[config.split.train..config.split.train + config.split.val].to_vec();
    let mut test = order[config.split.train + config.split.val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    SplitMembership { train, val, test }
}

/// Seeded split permutation for a (scheme, SNR) pair.
pub fn split_membership(
    config: &DatasetConfig,
    scheme: ModulationScheme,
    snr_db: f64,
) -> Result<SplitMembership> {
    let scheme_idx = config
        .scheme_index(scheme)
        .ok_or_else(|| Error::NotFound(format!("scheme {} not in config", scheme.name())))?;
    let snr_idx = config
        .snr_index(snr_db)
        .ok_or_else(|| Error::NotFound(format!("snr {snr_db} dB not in config")))?;
    Ok(split_membership_by_index(config, scheme_idx, snr_idx))
}

/// Synthesize one record. All RU frames share the clean symbol stream; the
/// SNR plan is drawn fresh per frame.
pub fn synthesize_record(
    config: &DatasetConfig,
    scheme_idx: usize,
    snr_idx: usize,
    frame_idx: usize,
    split: Split,
) -> Result<FrameRecord> {
    let scheme = config.schemes[scheme_idx];
    let snr_db = config.snr_grid_db[snr_idx];
    let base = [
        config.master_seed,
        scheme_idx as u64,
        snr_idx as u64,
        frame_idx as u64,
    ];

    let clean = modulate(scheme, config.frame_len, hash64(&[base[0], base[1], base[2], base[3], seed_role::MODULATE]))?;
    let plan = make_snr_plan(
        snr_db,
        config.n_ru,
        config.plan_mode,
        hash64(&[base[0], base[1], base[2], base[3], seed_role::PLAN]),
    )?;

    let mut ru_frames = Vec::with_capacity(config.n_ru);
    for ru in 0..config.n_ru {
        let seed = hash64(&[base[0], base[1], base[2], base[3], seed_role::CHANNEL_BASE + ru as u64]);
        let mut frame = apply_channel(&clean, plan.amplitudes[ru], plan.noise_vars[ru], seed)?;
        frame.meta.ru_index = Some(ru);
        frame.meta.egc_snr_db = Some(snr_db);
        ru_frames.push(frame);
    }

    Ok(FrameRecord {
        ru_frames,
        label: scheme,
        egc_snr_db: snr_db,
        plan,
        split,
        record_id: config.record_id(scheme_idx, snr_idx, frame_idx),
    })
}

/// All records of one (scheme, SNR) pair in frame order.
pub fn records_of_pair(
    config: &DatasetConfig,
    scheme_idx: usize,
    snr_idx: usize,
) -> Result<Vec<FrameRecord>> {
    let membership = split_membership_by_index(config, scheme_idx, snr_idx);
    let mut split_of = alloc::vec![Split::Train; config.frames_per_pair];
    for &f in &membership.val {
        split_of[f] = Split::Val;
    }
    for &f in &membership.test {
        split_of[f] = Split::Test;
    }
    (0..config.frames_per_pair)
        .map(|f| synthesize_record(config, scheme_idx, snr_idx, f, split_of[f]))
        .collect()
}

/// Generate the whole dataset in memory, pair-major, frame order within pairs.
pub fn generate_in_memory(config: &DatasetConfig) -> Result<Vec<FrameRecord>> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.total_records());
    for scheme_idx in 0..config.schemes.len() {
        for snr_idx in 0..config.snr_grid_db.len() {
            records.extend(records_of_pair(config, scheme_idx, snr_idx)?);
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_config_counts() {
        let cfg = DatasetConfig::default_paper();
        cfg.validate().unwrap();
        assert_eq!(cfg.snr_grid_db.len(), 21);
        assert_eq!(cfg.total_records(), 150_528);
        assert_eq!(cfg.split.total(), 1024);
    }

    #[test]
    fn desk_config_counts() {
        let cfg = DatasetConfig::desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.total_records(), 2_304);
        assert_eq!(cfg.split, SplitCounts { train: 192, val: 32, test: 32 });
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = DatasetConfig::desk();
        cfg.split.train += 1;
        assert!(cfg.validate().is_err());

        let mut cfg = DatasetConfig::desk();
        cfg.snr_grid_db = alloc::vec![10.0, 10.0];
        assert!(cfg.validate().is_err());

        let mut cfg = DatasetConfig::desk();
        cfg.schemes.push(ModulationScheme::Bpsk);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn membership_partitions_pair() {
        let cfg = DatasetConfig::default_paper();
        let m = split_membership(&cfg, ModulationScheme::Qam64, -10.0).unwrap();
        assert_eq!(m.train.len(), 768);
        assert_eq!(m.val.len(), 128);
        assert_eq!(m.test.len(), 128);
        let mut all: Vec<usize> =
            m.train.iter().chain(&m.val).chain(&m.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1024).collect::<Vec<_>>());
    }

    #[test]
    fn membership_unknown_pair_not_found() {
        let cfg = DatasetConfig::desk();
        assert!(matches!(
            split_membership(&cfg, ModulationScheme::Qam256, 10.0),
            Err(Error::NotFound(_))
        ));
        assert!(matches!(
            split_membership(&cfg, ModulationScheme::Bpsk, 11.0),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn membership_tiny_exhaustive() {
        let mut cfg = DatasetConfig::desk();
        cfg.frames_per_pair = 4;
        cfg.split = SplitCounts { train: 2, val: 1, test: 1 };
        let m = split_membership_by_index(&cfg, 0, 0);
        let mut all: Vec<usize> = m.train.iter().chain(&m.val).chain(&m.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, alloc::vec![0, 1, 2, 3]);
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (2, 1, 1));
    }

    #[test]
    fn membership_stable_across_recomputation() {
        let cfg = DatasetConfig::desk();
        let a = split_membership_by_index(&cfg, 1, 2);
        let b = split_membership_by_index(&cfg, 1, 2);
        assert_eq!(a, b);
        // Different pairs get different permutations.
        let c = split_membership_by_index(&cfg, 1, 1);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn record_fields_and_determinism() {
        let cfg = DatasetConfig::desk();
        let r1 = synthesize_record(&cfg, 2, 1, 17, Split::Val).unwrap();
        let r2 = synthesize_record(&cfg, 2, 1, 17, Split::Val).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.label, ModulationScheme::Qam16);
        assert_eq!(r1.egc_snr_db, 20.0);
        assert_eq!(r1.ru_frames.len(), 3);
        for (i, f) in r1.ru_frames.iter().enumerate() {
            assert_eq!(f.len(), cfg.frame_len);
            assert_eq!(f.meta.ru_index, Some(i));
        }
        assert_eq!(r1.record_id, cfg.record_id(2, 1, 17));
    }

    #[test]
    fn pair_records_cover_splits_exactly() {
        let mut cfg = DatasetConfig::desk();
        cfg.frames_per_pair = 16;
        cfg.frame_len = 8;
        cfg.split = SplitCounts { train: 12, val: 2, test: 2 };
        let records = records_of_pair(&cfg, 0, 0).unwrap();
        assert_eq!(records.len(), 16);
        let count = |s: Split| records.iter().filter(|r| r.split == s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (12, 2, 2));
    }
}
