//! Baseband signal generation and combining.
//!
//! Frames are sequences of constellation symbols (the RU's FFT/CP chain is
//! treated as transparent: one sample per symbol). Channels apply a real
//! positive gain plus circularly-symmetric complex Gaussian noise, with the
//! gain/noise split across RUs planned so the equal-gain-combined (EGC)
//! signal hits an exact target SNR.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use libm::{exp, log10, pow, sqrt};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::rng::DetRng;

pub type Complex64 = Complex<f64>;

/// The seven modulation schemes under classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ModulationScheme {
    Bpsk,
    Qpsk,
    Qam16,
    Qam32,
    Qam64,
    Qam128,
    Qam256,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 7] = [
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Qam16,
        ModulationScheme::Qam32,
        ModulationScheme::Qam64,
        ModulationScheme::Qam128,
        ModulationScheme::Qam256,
    ];

    pub const COUNT: usize = 7;

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            ModulationScheme::Bpsk => 1,
            ModulationScheme::Qpsk => 2,
            ModulationScheme::Qam16 => 4,
            ModulationScheme::Qam32 => 5,
            ModulationScheme::Qam64 => 6,
            ModulationScheme::Qam128 => 7,
            ModulationScheme::Qam256 => 8,
        }
    }

    pub fn constellation_size(self) -> usize {
        1usize << self.bits_per_symbol()
    }

    /// Stable class index (also the dataset label byte).
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap()
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::Bpsk => "bpsk",
            ModulationScheme::Qpsk => "qpsk",
            ModulationScheme::Qam16 => "qam16",
            ModulationScheme::Qam32 => "qam32",
            ModulationScheme::Qam64 => "qam64",
            ModulationScheme::Qam128 => "qam128",
            ModulationScheme::Qam256 => "qam256",
        }
    }
}

/// Frame metadata carried alongside the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeta {
    pub scheme: ModulationScheme,
    /// Target EGC SNR in dB, once a channel plan is attached.
    pub egc_snr_db: Option<f64>,
    /// Which RU branch produced this frame, if any.
    pub ru_index: Option<usize>,
    pub seed: u64,
}

/// A fixed-length sequence of complex baseband samples plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub samples: Vec<Complex64>,
    pub meta: FrameMeta,
}

impl IqFrame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean per-sample energy.
    pub fn mean_energy(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|s| s.norm_sqr()).sum();
        sum / self.samples.len() as f64
    }
}

fn gray_decode(mut code: u64) -> u64 {
    let mut shift = 1;
    while shift < 64 {
        code ^= code >> shift;
        shift <<= 1;
    }
    code
}

/// Unit-mean-energy constellation points of `scheme`, indexed by symbol value.
///
/// Bit labeling is Gray per axis for the square grids (BPSK/QPSK/QAM16/64/256).
/// The cross constellations (QAM32/QAM128) use the standard cross layout built
/// by folding the outer columns of a Gray-labeled rectangle into wings, which
/// keeps the labeling Gray on the interior grid (quasi-Gray overall).
pub fn constellation(scheme: ModulationScheme) -> Vec<Complex64> {
    let bits = scheme.bits_per_symbol();
    if bits == 1 {
        return vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)];
    }
    let i_bits = (bits + 1) / 2;
    let q_bits = bits / 2;
    let li = 1i64 << i_bits;
    let lq = 1i64 << q_bits;
    let cross = bits % 2 == 1 && bits >= 5;
    // Widest in-phase column kept in the cross body.
    let body_max = 3 * lq / 2 - 1;

    let n = scheme.constellation_size();
    let mut points = Vec::with_capacity(n);
    for sym in 0..n as u64 {
        let i_idx = gray_decode(sym >> q_bits) as i64;
        let q_idx = gray_decode(sym & (lq as u64 - 1)) as i64;
        let mut i_amp = 2 * i_idx - li + 1;
        let mut q_amp = 2 * q_idx - lq + 1;
        if cross && i_amp.abs() > body_max {
            // Wing fold: column rank r beyond the body selects the wing row.
            let r = (i_amp.abs() - body_max + 1) / 2;
            let (si, sq) = (i_amp.signum(), q_amp.signum());
            i_amp = si * (lq - q_amp.abs());
            q_amp = sq * (lq - 1 + 2 * r);
        }
        points.push(Complex::new(i_amp as f64, q_amp as f64));
    }

    let mean_energy: f64 =
        points.iter().map(|p| p.norm_sqr()).sum::<f64>() / n as f64;
    let scale = 1.0 / sqrt(mean_energy);
    for p in &mut points {
        *p *= scale;
    }
    points
}

/// Draw `n_symbols` i.i.d. uniform constellation symbols of `scheme`.
pub fn modulate(scheme: ModulationScheme, n_symbols: usize, seed: u64) -> Result<IqFrame> {
    if n_symbols == 0 {
        return Err(Error::InvalidArgument("n_symbols must be positive".to_string()));
    }
    let points = constellation(scheme);
    let mut rng = DetRng::new(seed);
    let samples = (0..n_symbols)
        .map(|_| points[rng.next_index(points.len())])
        .collect();
    Ok(IqFrame {
        samples,
        meta: FrameMeta { scheme, egc_snr_db: None, ru_index: None, seed },
    })
}

/// How per-RU SNR shares are allocated by [`make_snr_plan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PlanMode {
    /// All RUs receive the same share.
    Equal,
    /// Shares drawn from a log-normal spread, then rescaled.
    Diverse,
}

/// Per-RU amplitudes and noise variances realizing an exact EGC SNR target.
///
/// With shares `s_i` summing to the linear target `10^(S/10)`, setting the
/// branch gain `a_i = s_i` and noise variance `sigma_i^2 = s_i` gives
/// `(sum a_i)^2 / sum sigma_i^2 = sum s_i` exactly, per-RU SNR
/// `a_i^2 / sigma_i^2 = s_i`, and mean per-RU SNR `sum s_i / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrPlan {
    pub target_egc_snr_db: f64,
    pub n_ru: usize,
    pub mode: PlanMode,
    /// Per-RU linear SNR shares `s_i`.
    pub per_ru_snr_linear: Vec<f64>,
    /// Branch gains `a_i`.
    pub amplitudes: Vec<f64>,
    /// Branch total complex noise variances `sigma_i^2`.
    pub noise_vars: Vec<f64>,
}

impl SnrPlan {
    /// Closed-form EGC SNR `(sum a_i)^2 / sum sigma_i^2`, linear.
    pub fn analytic_egc_snr_linear(&self) -> f64 {
        let a: f64 = self.amplitudes.iter().sum();
        let v: f64 = self.noise_vars.iter().sum();
        a * a / v
    }

    /// Arithmetic mean of the per-RU linear SNRs.
    pub fn mean_ru_snr_linear(&self) -> f64 {
        self.per_ru_snr_linear.iter().sum::<f64>() / self.n_ru as f64
    }

    pub fn target_linear(&self) -> f64 {
        db_to_linear(self.target_egc_snr_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    pow(10.0, db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * log10(linear)
}

/// Spread (std of the underlying normal) of diverse-mode log-normal shares.
const DIVERSE_LOG_STD: f64 = 0.5;

/// Construct an [`SnrPlan`] hitting `target_egc_snr_db` exactly.
pub fn make_snr_plan(
    target_egc_snr_db: f64,
    n_ru: usize,
    mode: PlanMode,
    seed: u64,
) -> Result<SnrPlan> {
    if n_ru < 1 {
        return Err(Error::InvalidArgument("n_ru must be at least 1".to_string()));
    }
    if !target_egc_snr_db.is_finite() {
        return Err(Error::InvalidArgument("target SNR must be finite".to_string()));
    }
    let total = db_to_linear(target_egc_snr_db);
    let shares: Vec<f64> = match mode {
        PlanMode::Equal => vec![total / n_ru as f64; n_ru],
        PlanMode::Diverse => {
            let mut rng = DetRng::new(seed);
            let raw: Vec<f64> = (0..n_ru).map(|_| exp(DIVERSE_LOG_STD * rng.normal())).collect();
            let raw_sum: f64 = raw.iter().sum();
            raw.iter().map(|r| r * total / raw_sum).collect()
        }
    };
    Ok(SnrPlan {
        target_egc_snr_db,
        n_ru,
        mode,
        amplitudes: shares.clone(),
        noise_vars: shares.clone(),
        per_ru_snr_linear: shares,
    })
}

/// Flat-fading branch: `out[k] = amplitude * in[k] + n[k]` with `n[k]`
/// circularly-symmetric complex Gaussian of total variance `noise_var`.
pub fn apply_channel(
    frame: &IqFrame,
    amplitude: f64,
    noise_var: f64,
    seed: u64,
) -> Result<IqFrame> {
    if noise_var < 0.0 {
        return Err(Error::InvalidArgument("noise_var must be non-negative".to_string()));
    }
    let per_dim = sqrt(noise_var / 2.0);
    let mut rng = DetRng::new(seed);
    let samples = frame
        .samples
        .iter()
        .map(|&s| {
            let (nr, ni) = rng.normal_pair();
            s * amplitude + Complex::new(nr * per_dim, ni * per_dim)
        })
        .collect();
    Ok(IqFrame { samples, meta: FrameMeta { seed, ..frame.meta.clone() } })
}

/// Equal-gain combining: elementwise complex sum over branch frames.
pub fn egc_combine(frames: &[IqFrame]) -> Result<IqFrame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("egc_combine needs at least one frame".to_string()))?;
    let len = first.len();
    if frames.iter().any(|f| f.len() != len) {
        return Err(Error::InvalidArgument("egc_combine frames must share one length".to_string()));
    }
    let mut samples = vec![Complex::new(0.0, 0.0); len];
    for frame in frames {
        for (acc, s) in samples.iter_mut().zip(&frame.samples) {
            *acc += s;
        }
    }
    let egc_snr_db = frames.iter().find_map(|f| f.meta.egc_snr_db);
    Ok(IqFrame {
        samples,
        meta: FrameMeta {
            scheme: first.meta.scheme,
            egc_snr_db,
            ru_index: None,
            seed: first.meta.seed,
        },
    })
}

/// Empirical SNR of `noisy_scaled` against `amplitude * clean`, in dB.
///
/// Returns `f64::INFINITY` when the residual is exactly zero.
pub fn measure_snr(clean: &IqFrame, noisy_scaled: &IqFrame, amplitude: f64) -> Result<f64> {
    if clean.len() != noisy_scaled.len() {
        return Err(Error::InvalidArgument("measure_snr frames must share one length".to_string()));
    }
    let mut signal_energy = 0.0f64;
    let mut residual_energy = 0.0f64;
    for (c, n) in clean.samples.iter().zip(&noisy_scaled.samples) {
        signal_energy += c.norm_sqr();
        residual_energy += (n - c * amplitude).norm_sqr();
    }
    if signal_energy == 0.0 {
        return Err(Error::InvalidArgument("clean frame has zero energy".to_string()));
    }
    if residual_energy == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(linear_to_db(amplitude * amplitude * signal_energy / residual_energy))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENERGY_TOL: f64 = 1e-12;

    #[test]
    fn seven_schemes_with_expected_orders() {
        assert_eq!(ModulationScheme::ALL.len(), 7);
        let bits: Vec<u32> =
            ModulationScheme::ALL.iter().map(|s| s.bits_per_symbol()).collect();
        assert_eq!(bits, vec![1, 2, 4, 5, 6, 7, 8]);
        for s in ModulationScheme::ALL {
            assert_eq!(s.constellation_size(), 1 << s.bits_per_symbol());
            assert_eq!(ModulationScheme::from_index(s.index()), Some(s));
        }
    }

    #[test]
    fn bpsk_is_antipodal_unit_pair() {
        let pts = constellation(ModulationScheme::Bpsk);
        assert_eq!(pts, vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]);
    }

    #[test]
    fn qpsk_is_scaled_corners() {
        let pts = constellation(ModulationScheme::Qpsk);
        let inv = 1.0 / sqrt(2.0);
        for p in &pts {
            assert!((p.re.abs() - inv).abs() < 1e-15);
            assert!((p.im.abs() - inv).abs() < 1e-15);
        }
        let mean: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / 4.0;
        assert!((mean - 1.0).abs() < ENERGY_TOL);
    }

    #[test]
    fn qam16_grid_scale_from_enumeration() {
        // Independent oracle: mean of i^2+q^2 over the {±1,±3}^2 grid.
        let mut grid_energy = 0.0;
        for i in [-3i32, -1, 1, 3] {
            for q in [-3i32, -1, 1, 3] {
                grid_energy += (i * i + q * q) as f64;
            }
        }
        let expected_scale = 1.0 / sqrt(grid_energy / 16.0);
        assert!((grid_energy / 16.0 - 10.0).abs() < 1e-12);

        let pts = constellation(ModulationScheme::Qam16);
        assert_eq!(pts.len(), 16);
        for p in &pts {
            let i = p.re / expected_scale;
            let q = p.im / expected_scale;
            assert!((i.round() - i).abs() < 1e-9 && [1.0, 3.0].contains(&i.abs().round()));
            assert!((q.round() - q).abs() < 1e-9 && [1.0, 3.0].contains(&q.abs().round()));
        }
    }

    #[test]
    fn all_constellations_unit_energy_and_distinct() {
        for s in ModulationScheme::ALL {
            let pts = constellation(s);
            assert_eq!(pts.len(), s.constellation_size(), "{s:?}");
            let mean: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((mean - 1.0).abs() < ENERGY_TOL, "{s:?} energy {mean}");
            for (i, a) in pts.iter().enumerate() {
                for b in pts.iter().skip(i + 1) {
                    assert!((a - b).norm() > 1e-9, "{s:?} duplicate point");
                }
            }
        }
    }

    #[test]
    fn cross_constellations_have_standard_shape() {
        // QAM32: 6x6 grid minus the four corners, unscaled energy 20.
        let pts = constellation(ModulationScheme::Qam32);
        let scale = 1.0 / sqrt(20.0);
        for p in &pts {
            let i = (p.re / scale).round() as i64;
            let q = (p.im / scale).round() as i64;
            assert!(i.abs() <= 5 && q.abs() <= 5);
            assert!(!(i.abs() == 5 && q.abs() == 5), "corner ({i},{q}) must be absent");
        }
        // QAM128: 12x12 grid minus the four 2x2 corners, unscaled energy 82.
        let pts = constellation(ModulationScheme::Qam128);
        let scale = 1.0 / sqrt(82.0);
        for p in &pts {
            let i = (p.re / scale).round() as i64;
            let q = (p.im / scale).round() as i64;
            assert!(i.abs() <= 11 && q.abs() <= 11);
            assert!(!(i.abs() >= 9 && q.abs() >= 9), "corner ({i},{q}) must be absent");
        }
    }

    fn min_distance(pts: &[Complex64]) -> f64 {
        let mut min = f64::INFINITY;
        for (i, a) in pts.iter().enumerate() {
            for b in pts.iter().skip(i + 1) {
                min = min.min((a - b).norm());
            }
        }
        min
    }

    #[test]
    fn gray_labels_on_square_grids() {
        for s in [
            ModulationScheme::Bpsk,
            ModulationScheme::Qpsk,
            ModulationScheme::Qam16,
            ModulationScheme::Qam64,
            ModulationScheme::Qam256,
        ] {
            let pts = constellation(s);
            let d = min_distance(&pts);
            for (i, a) in pts.iter().enumerate() {
                for (j, b) in pts.iter().enumerate().skip(i + 1) {
                    if ((a - b).norm() - d).abs() < 1e-9 * d {
                        let hamming = (i ^ j).count_ones();
                        assert_eq!(hamming, 1, "{s:?}: symbols {i} and {j} at min distance");
                    }
                }
            }
        }
    }

    #[test]
    fn gray_labels_on_cross_interiors() {
        // Interior grid of a cross constellation: the full-width rectangular
        // core. The wing seams are the known non-Gray region of quasi-Gray
        // cross labelings.
        for s in [ModulationScheme::Qam32, ModulationScheme::Qam128] {
            let pts = constellation(s);
            let d = min_distance(&pts);
            let row_width = |q: f64| pts.iter().filter(|p| (p.im - q).abs() < 1e-9).count();
            let max_width = pts.iter().map(|p| row_width(p.im)).max().unwrap();
            let in_core = |p: Complex64| row_width(p.im) == max_width;
            let mut checked = 0;
            for (i, a) in pts.iter().enumerate() {
                for (j, b) in pts.iter().enumerate().skip(i + 1) {
                    if ((a - b).norm() - d).abs() < 1e-9 * d && in_core(*a) && in_core(*b) {
                        assert_eq!((i ^ j).count_ones(), 1, "{s:?}: interior pair {i},{j}");
                        checked += 1;
                    }
                }
            }
            assert!(checked > 30, "{s:?}: interior-neighbor check must not be vacuous");
        }
    }

    #[test]
    fn modulate_is_deterministic_and_in_codomain() {
        let a = modulate(ModulationScheme::Bpsk, 4, 99).unwrap();
        let b = modulate(ModulationScheme::Bpsk, 4, 99).unwrap();
        assert_eq!(a, b);
        for s in &a.samples {
            assert!(s.im == 0.0 && (s.re == 1.0 || s.re == -1.0));
        }
        assert_eq!(a.meta.scheme, ModulationScheme::Bpsk);
        assert!(modulate(ModulationScheme::Qpsk, 0, 1).is_err());
    }

    #[test]
    fn modulate_qam256_frame_energy_near_unit() {
        let f = modulate(ModulationScheme::Qam256, 1024, 7).unwrap();
        assert!((f.mean_energy() - 1.0).abs() < 0.1, "energy {}", f.mean_energy());
    }

    #[test]
    fn snr_plan_equal_three_ru_at_10db() {
        let plan = make_snr_plan(10.0, 3, PlanMode::Equal, 0).unwrap();
        for &s in &plan.per_ru_snr_linear {
            assert!((s - 10.0 / 3.0).abs() < 1e-12);
            // 10*log10(10/3) ≈ 5.229 dB per RU.
            assert!((linear_to_db(s) - 5.2288).abs() < 1e-3);
        }
        assert!((plan.analytic_egc_snr_linear() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn snr_plan_closed_form_identity_for_fixed_shares() {
        // Shares (2,3,5): EGC SNR = (2+3+5)^2 / (2+3+5) = 10 exactly.
        let plan = SnrPlan {
            target_egc_snr_db: 10.0,
            n_ru: 3,
            mode: PlanMode::Diverse,
            per_ru_snr_linear: vec![2.0, 3.0, 5.0],
            amplitudes: vec![2.0, 3.0, 5.0],
            noise_vars: vec![2.0, 3.0, 5.0],
        };
        assert_eq!(plan.analytic_egc_snr_linear(), 10.0);
        assert!((plan.mean_ru_snr_linear() - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn snr_plan_single_ru_degenerates() {
        let plan = make_snr_plan(17.0, 1, PlanMode::Equal, 0).unwrap();
        assert!((plan.per_ru_snr_linear[0] - db_to_linear(17.0)).abs() < 1e-9);
        assert!((plan.analytic_egc_snr_linear() - db_to_linear(17.0)).abs() < 1e-6);
    }

    #[test]
    fn snr_plan_rejects_bad_arguments() {
        assert!(make_snr_plan(10.0, 0, PlanMode::Equal, 0).is_err());
        assert!(make_snr_plan(f64::NAN, 3, PlanMode::Equal, 0).is_err());
    }

    #[test]
    fn diverse_mode_spreads_noise_vars() {
        let plan = make_snr_plan(6.0, 3, PlanMode::Diverse, 11).unwrap();
        let v = &plan.noise_vars;
        assert!(v[0] != v[1] || v[1] != v[2], "diverse shares should differ");
        for (s, (a, nv)) in plan.per_ru_snr_linear.iter().zip(v.iter().zip(&plan.amplitudes)) {
            // s_i = a_i^2 / sigma_i^2 with a_i = sigma_i^2 = s_i.
            assert!((s - a * a / nv).abs() / s < 1e-12);
        }
    }

    #[test]
    fn channel_noiseless_scaling() {
        let frame = IqFrame {
            samples: vec![Complex::new(1.0, 1.0)],
            meta: FrameMeta {
                scheme: ModulationScheme::Bpsk,
                egc_snr_db: None,
                ru_index: None,
                seed: 0,
            },
        };
        let out = apply_channel(&frame, 2.0, 0.0, 5).unwrap();
        assert_eq!(out.samples[0], Complex::new(2.0, 2.0));
        assert!(apply_channel(&frame, 1.0, -0.1, 5).is_err());
    }

    #[test]
    fn channel_zero_gain_leaves_pure_noise() {
        let frame = modulate(ModulationScheme::Qpsk, 50_000, 3).unwrap();
        let out = apply_channel(&frame, 0.0, 1.0, 8).unwrap();
        assert!((out.mean_energy() - 1.0).abs() < 0.02, "energy {}", out.mean_energy());
    }

    #[test]
    fn channel_empirical_snr_10db() {
        let frame = modulate(ModulationScheme::Qpsk, 100_000, 21).unwrap();
        let noisy = apply_channel(&frame, 1.0, 0.1, 22).unwrap();
        let snr = measure_snr(&frame, &noisy, 1.0).unwrap();
        assert!((snr - 10.0).abs() < 0.15, "snr {snr}");
    }

    #[test]
    fn egc_identity_and_sum() {
        let f = modulate(ModulationScheme::Qam16, 16, 1).unwrap();
        let combined = egc_combine(core::slice::from_ref(&f)).unwrap();
        assert_eq!(combined.samples, f.samples);

        let a = IqFrame {
            samples: vec![Complex::new(1.0, 2.0), Complex::new(0.0, 0.0)],
            meta: f.meta.clone(),
        };
        let b = IqFrame {
            samples: vec![Complex::new(3.0, -1.0), Complex::new(0.0, 1.0)],
            meta: f.meta.clone(),
        };
        let sum = egc_combine(&[a, b]).unwrap();
        assert_eq!(sum.samples, vec![Complex::new(4.0, 1.0), Complex::new(0.0, 1.0)]);

        assert!(egc_combine(&[]).is_err());
        let short = IqFrame { samples: vec![Complex::new(0.0, 0.0)], meta: f.meta.clone() };
        assert!(egc_combine(&[f, short]).is_err());
    }

    #[test]
    fn egc_of_planned_branches_hits_target_snr() {
        let n = 100_000;
        let clean = modulate(ModulationScheme::Qpsk, n, 31).unwrap();
        let plan = make_snr_plan(12.0, 3, PlanMode::Diverse, 32).unwrap();
        let branches: Vec<IqFrame> = (0..3)
            .map(|i| {
                apply_channel(&clean, plan.amplitudes[i], plan.noise_vars[i], 100 + i as u64)
                    .unwrap()
            })
            .collect();
        let combined = egc_combine(&branches).unwrap();
        let total_gain: f64 = plan.amplitudes.iter().sum();
        let snr = measure_snr(&clean, &combined, total_gain).unwrap();
        assert!((snr - 12.0).abs() < 0.15, "snr {snr}");
    }

    #[test]
    fn measure_snr_sentinels() {
        let clean = modulate(ModulationScheme::Bpsk, 8, 1).unwrap();
        let mut scaled = clean.clone();
        for s in &mut scaled.samples {
            *s *= 3.0;
        }
        assert_eq!(measure_snr(&clean, &scaled, 3.0).unwrap(), f64::INFINITY);

        let zero = IqFrame {
            samples: vec![Complex::new(0.0, 0.0); 8],
            meta: clean.meta.clone(),
        };
        assert!(measure_snr(&zero, &clean, 1.0).is_err());
    }

    #[test]
    fn per_branch_measured_snr_matches_share() {
        // Plan (S=20 dB, N=3, equal): per-branch SNR = 10^2/3 linear.
        let n = 100_000;
        let clean = modulate(ModulationScheme::Qam64, n, 41).unwrap();
        let plan = make_snr_plan(20.0, 3, PlanMode::Equal, 0).unwrap();
        let expected_db = linear_to_db(100.0 / 3.0);
        for i in 0..3 {
            let branch =
                apply_channel(&clean, plan.amplitudes[i], plan.noise_vars[i], 200 + i as u64)
                    .unwrap();
            let snr = measure_snr(&clean, &branch, plan.amplitudes[i]).unwrap();
            assert!((snr - expected_db).abs() < 0.15, "branch {i}: {snr} vs {expected_db}");
        }
    }
}
