//! The dataset frame-file format and its TOML manifest.
//!
//! Frame files are little-endian and laid out as
//!
//! ```text
//! header:  magic "CFAMC1" (6 bytes), format_version u32, frame_len u32,
//!          n_ru u32, record_count u64
//! record:  record_id u64, label u8, split u8, egc_snr_db f32,
//!          snr_linear f32[n_ru],
//!          samples f32[n_ru * frame_len * 2] interleaved I,Q, RU-major
//! ```
//!
//! Records are written in ascending `record_id` order, one file per split.
//! The manifest is a TOML document with stable key names; 64-bit seeds and
//! checksums are hex strings (TOML integers are signed).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use cfamc_core::dataset::{DatasetConfig, FrameRecord, Split, SplitCounts};
use cfamc_core::rng::Fnv64;
use cfamc_core::signal::{
    make_snr_plan, Complex64, FrameMeta, IqFrame, ModulationScheme, PlanMode, SnrPlan,
};

use crate::{IoError, IoResult};

pub const MAGIC: &[u8; 6] = b"CFAMC1";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.toml";

pub fn split_file_name(split: Split) -> String {
    format!("{}.cfamc", split.name())
}

/// Serialize one record into `out` (which tracks the running checksum).
fn write_record<W: Write>(out: &mut W, record: &FrameRecord) -> std::io::Result<()> {
    out.write_u64::<LittleEndian>(record.record_id)?;
    out.write_u8(record.label.index() as u8)?;
    out.write_u8(record.split.code())?;
    out.write_f32::<LittleEndian>(record.egc_snr_db as f32)?;
    for &s in &record.plan.per_ru_snr_linear {
        out.write_f32::<LittleEndian>(s as f32)?;
    }
    for frame in &record.ru_frames {
        for sample in &frame.samples {
            out.write_f32::<LittleEndian>(sample.re as f32)?;
            out.write_f32::<LittleEndian>(sample.im as f32)?;
        }
    }
    Ok(())
}

/// Writer that digests everything it writes.
struct ChecksumWriter<W: Write> {
    inner: W,
    digest: Fnv64,
}

impl<W: Write> Write for ChecksumWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.digest.update(&buf[..n]);
        Ok(n)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Write one split file; returns its FNV-1a 64 checksum.
pub fn write_split_file(
    path: &Path,
    config: &DatasetConfig,
    records: &[&FrameRecord],
) -> IoResult<u64> {
    let file = std::fs::File::create(path).map_err(IoError::persistence(path))?;
    let mut out = ChecksumWriter {
        inner: std::io::BufWriter::new(file),
        digest: Fnv64::new(),
    };
    (|| -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        out.write_u32::<LittleEndian>(config.frame_len as u32)?;
        out.write_u32::<LittleEndian>(config.n_ru as u32)?;
        out.write_u64::<LittleEndian>(records.len() as u64)?;
        for r in records {
            write_record(&mut out, r)?;
        }
        out.flush()
    })()
    .map_err(IoError::persistence(path))?;
    Ok(out.digest.finish())
}

/// Read a split file back into records. `expected_checksum`, when given, is
/// verified over the raw bytes before decoding.
pub fn read_split_file(
    path: &Path,
    config: &DatasetConfig,
    expected_checksum: Option<u64>,
) -> IoResult<Vec<FrameRecord>> {
    let bytes = std::fs::read(path).map_err(IoError::persistence(path))?;
    if let Some(expected) = expected_checksum {
        let mut digest = Fnv64::new();
        digest.update(&bytes);
        let got = digest.finish();
        if got != expected {
            return Err(IoError::CorruptData {
                path: path.to_path_buf(),
                reason: format!("checksum {got:#018x}, manifest says {expected:#018x}"),
            });
        }
    }
    decode_split_bytes(&bytes, config, path)
}

fn decode_split_bytes(
    bytes: &[u8],
    config: &DatasetConfig,
    path: &Path,
) -> IoResult<Vec<FrameRecord>> {
    let corrupt = |reason: String| IoError::CorruptData { path: path.to_path_buf(), reason };
    let mut r = std::io::Cursor::new(bytes);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(|e| corrupt(e.to_string()))?;
    if &magic != MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let frame_len = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize;
    let n_ru = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize;
    if frame_len != config.frame_len || n_ru != config.n_ru {
        return Err(corrupt(format!(
            "geometry {frame_len}x{n_ru} does not match config {}x{}",
            config.frame_len, config.n_ru
        )));
    }
    let record_count = r.read_u64::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as usize;

    let mut records = Vec::with_capacity(record_count);
    for _ in 0..record_count {
        let record_id = r.read_u64::<LittleEndian>().map_err(|e| corrupt(e.to_string()))?;
        let label_code = r.read_u8().map_err(|e| corrupt(e.to_string()))?;
        let label = ModulationScheme::from_index(label_code as usize)
            .ok_or_else(|| corrupt(format!("unknown label {label_code}")))?;
        let split_code = r.read_u8().map_err(|e| corrupt(e.to_string()))?;
        let split = Split::from_code(split_code)
            .ok_or_else(|| corrupt(format!("unknown split {split_code}")))?;
        let egc_snr_db =
            r.read_f32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as f64;
        let mut snr_linear = Vec::with_capacity(n_ru);
        for _ in 0..n_ru {
            snr_linear
                .push(r.read_f32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))? as f64);
        }
        // Reconstruct the plan from the stored shares (gain = variance = share).
        let plan = SnrPlan {
            target_egc_snr_db: egc_snr_db,
            n_ru,
            mode: config.plan_mode,
            amplitudes: snr_linear.clone(),
            noise_vars: snr_linear.clone(),
            per_ru_snr_linear: snr_linear,
        };
        let mut ru_frames = Vec::with_capacity(n_ru);
        for ru in 0..n_ru {
            let mut samples = Vec::with_capacity(frame_len);
            for _ in 0..frame_len {
                let re = r.read_f32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))?;
                let im = r.read_f32::<LittleEndian>().map_err(|e| corrupt(e.to_string()))?;
                samples.push(Complex64::new(re as f64, im as f64));
            }
            ru_frames.push(IqFrame {
                samples,
                meta: FrameMeta {
                    scheme: label,
                    egc_snr_db: Some(egc_snr_db),
                    ru_index: Some(ru),
                    seed: 0,
                },
            });
        }
        records.push(FrameRecord { ru_frames, label, egc_snr_db, plan, split, record_id });
    }
    if r.position() != bytes.len() as u64 {
        return Err(corrupt(format!(
            "{} trailing bytes after {record_count} records",
            bytes.len() as u64 - r.position()
        )));
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Hex-string (de)serialization for u64 values in TOML.
pub mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#018x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        let trimmed = s.trim_start_matches("0x");
        u64::from_str_radix(trimmed, 16).map_err(serde::de::Error::custom)
    }
}

/// Serializable mirror of [`DatasetConfig`] with TOML-safe seeds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigDoc {
    pub schemes: Vec<String>,
    pub snr_grid_db: Vec<f64>,
    pub frames_per_pair: usize,
    pub frame_len: usize,
    pub n_ru: usize,
    pub plan_mode: String,
    #[serde(with = "hex_u64")]
    pub master_seed: u64,
    pub split: SplitCountsDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SplitCountsDoc {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl ConfigDoc {
    pub fn from_config(cfg: &DatasetConfig) -> Self {
        ConfigDoc {
            schemes: cfg.schemes.iter().map(|s| s.name().to_string()).collect(),
            snr_grid_db: cfg.snr_grid_db.clone(),
            frames_per_pair: cfg.frames_per_pair,
            frame_len: cfg.frame_len,
            n_ru: cfg.n_ru,
            plan_mode: match cfg.plan_mode {
                PlanMode::Equal => "equal".to_string(),
                PlanMode::Diverse => "diverse".to_string(),
            },
            master_seed: cfg.master_seed,
            split: SplitCountsDoc {
                train: cfg.split.train,
                val: cfg.split.val,
                test: cfg.split.test,
            },
        }
    }

    pub fn to_config(&self) -> IoResult<DatasetConfig> {
        let schemes = self
            .schemes
            .iter()
            .map(|name| {
                ModulationScheme::ALL
                    .into_iter()
                    .find(|s| s.name() == name)
                    .ok_or_else(|| IoError::Config(format!("unknown scheme {name}")))
            })
            .collect::<IoResult<Vec<_>>>()?;
        let plan_mode = match self.plan_mode.as_str() {
            "equal" => PlanMode::Equal,
            "diverse" => PlanMode::Diverse,
            other => return Err(IoError::Config(format!("unknown plan mode {other}"))),
        };
        let cfg = DatasetConfig {
            schemes,
            snr_grid_db: self.snr_grid_db.clone(),
            frames_per_pair: self.frames_per_pair,
            frame_len: self.frame_len,
            n_ru: self.n_ru,
            plan_mode,
            master_seed: self.master_seed,
            split: SplitCounts {
                train: self.split.train,
                val: self.split.val,
                test: self.split.test,
            },
        };
        cfg.validate().map_err(IoError::Core)?;
        Ok(cfg)
    }
}

/// Per-(scheme, SNR) record counts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellCounts {
    pub scheme: String,
    pub snr_db: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CountsDoc {
    pub total: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub cells: Vec<CellCounts>,
}

/// The dataset manifest: config, file names, checksums and counts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: ConfigDoc,
    /// Split name -> file name (relative to the manifest directory).
    pub files: BTreeMap<String, String>,
    /// Split name -> FNV-1a 64 checksum of the file bytes (hex).
    pub checksums: BTreeMap<String, String>,
    pub counts: CountsDoc,
}

impl DatasetManifest {
    pub fn checksum_of(&self, split: Split) -> IoResult<u64> {
        let hex = self
            .checksums
            .get(split.name())
            .ok_or_else(|| IoError::Config(format!("manifest lacks checksum for {}", split.name())))?;
        u64::from_str_radix(hex.trim_start_matches("0x"), 16)
            .map_err(|e| IoError::Config(format!("bad checksum string {hex}: {e}")))
    }

    pub fn file_of(&self, dir: &Path, split: Split) -> IoResult<PathBuf> {
        let name = self
            .files
            .get(split.name())
            .ok_or_else(|| IoError::Config(format!("manifest lacks file for {}", split.name())))?;
        Ok(dir.join(name))
    }

    pub fn save(&self, path: &Path) -> IoResult<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| IoError::Config(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text).map_err(IoError::persistence(path))
    }

    pub fn load(path: &Path) -> IoResult<Self> {
        let text = std::fs::read_to_string(path).map_err(IoError::persistence(path))?;
        toml::from_str(&text)
            .map_err(|e| IoError::CorruptData { path: path.to_path_buf(), reason: e.to_string() })
    }
}

/// Rebuild the SNR plan of a record exactly as generation drew it (the file
/// stores f32-rounded shares; this recovers the f64 originals).
pub fn regenerate_plan(config: &DatasetConfig, record: &FrameRecord) -> IoResult<SnrPlan> {
    let n_snr = config.snr_grid_db.len() as u64;
    let per_pair = config.frames_per_pair as u64;
    let pair = record.record_id / per_pair;
    let frame_idx = record.record_id % per_pair;
    let scheme_idx = pair / n_snr;
    let snr_idx = pair % n_snr;
    let seed = cfamc_core::rng::hash64(&[
        config.master_seed,
        scheme_idx,
        snr_idx,
        frame_idx,
        cfamc_core::dataset::seed_role::PLAN,
    ]);
    make_snr_plan(record.egc_snr_db, config.n_ru, config.plan_mode, seed).map_err(IoError::Core)
}
