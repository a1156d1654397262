//! Analytic floating-point-operation accounting per layer, per model and per
//! placement (RU vs DU).
//!
//! Conventions (stated in every emitted report):
//!
//! * One multiply-accumulate counts as 2 FLOPs in [`flops_dense`] and
//!   [`flops_conv`].
//! * Pooling, activations, softmax, concatenation and the EGC sum carry zero
//!   cost; the MAC-bearing layers dominate by orders of magnitude.
//! * The model walk prices the backbone in its 1-D form with I/Q folded into
//!   two input channels, which is the convention complexity figures for this
//!   network family are quoted in. [`FlopReport::table_mflops`] (the
//!   MAC-convention megaflop count, i.e. FLOPs / 2) is the headline number
//!   comparable against such figures.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec, HEAD_HIDDEN, STACK_FILTERS};

/// Where a layer executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Ru,
    Du,
}

impl Placement {
    pub fn name(self) -> &'static str {
        match self {
            Placement::Ru => "RU",
            Placement::Du => "DU",
        }
    }
}

/// One layer's cost entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopRow {
    pub name: String,
    pub layer_type: &'static str,
    /// `(time, width, channels)` of the layer output in the cost model.
    pub output_shape: (usize, usize, usize),
    pub flops: u64,
    pub placement: Placement,
}

/// Per-layer FLOPs with placement totals.
/// `grand_total_flops = n_ru * per_ru_flops + du_flops`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub spec: ModelSpec,
    pub rows: Vec<FlopRow>,
    /// Multiplier applied to RU-placed rows in the grand total.
    pub n_ru: usize,
    pub per_ru_flops: u64,
    pub du_flops: u64,
    pub grand_total_flops: u64,
}

impl FlopReport {
    pub fn grand_total_macs(&self) -> u64 {
        self.grand_total_flops / 2
    }

    /// MAC-convention megaflops (FLOPs / 2 / 1e6); comparable against
    /// reference complexity tables for this model family.
    pub fn table_mflops(&self) -> f64 {
        self.grand_total_macs() as f64 / 1e6
    }

    pub fn per_ru_macs(&self) -> u64 {
        self.per_ru_flops / 2
    }

    /// Cost of the voting head alone.
    pub fn voting_flops(&self) -> u64 {
        self.rows.iter().filter(|r| r.name.starts_with("voting")).map(|r| r.flops).sum()
    }
}

/// `2 * n_in * n_out` (bias adds counted within the MAC convention).
pub fn flops_dense(n_in: usize, n_out: usize) -> Result<u64> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::InvalidArgument("dense dims must be positive".to_string()));
    }
    Ok(2 * n_in as u64 * n_out as u64)
}

/// `2 * h_out * w_out * c_out * k_h * k_w * c_in`.
pub fn flops_conv(
    h_out: usize,
    w_out: usize,
    c_in: usize,
    c_out: usize,
    k_h: usize,
    k_w: usize,
) -> Result<u64> {
    if h_out == 0 || w_out == 0 || c_in == 0 || c_out == 0 || k_h == 0 || k_w == 0 {
        return Err(Error::InvalidArgument("conv dims must be positive".to_string()));
    }
    Ok(2 * h_out as u64
        * w_out as u64
        * c_out as u64
        * k_h as u64
        * k_w as u64
        * c_in as u64)
}

/// Feature-extractor rows in the cost model; returns the flattened feature
/// length (`32 * t_final` with I/Q folded into channels).
fn fx_rows(
    input_size: usize,
    n_stacks: usize,
    placement: Placement,
    prefix: &str,
    rows: &mut Vec<FlopRow>,
) -> Result<usize> {
    let mut t = input_size;
    for i in 0..n_stacks {
        let c_in = if i == 0 { 2 } else { STACK_FILTERS };
        rows.push(FlopRow {
            name: format!("{prefix}s{i}.entry"),
            layer_type: "conv(1,1)",
            output_shape: (t, 1, STACK_FILTERS),
            flops: flops_conv(t, 1, c_in, STACK_FILTERS, 1, 1)?,
            placement,
        });
        for unit in ["u1a", "u1b", "u2a", "u2b"] {
            rows.push(FlopRow {
                name: format!("{prefix}s{i}.{unit}"),
                layer_type: "conv(3,1)",
                output_shape: (t, 1, STACK_FILTERS),
                flops: flops_conv(t, 1, STACK_FILTERS, STACK_FILTERS, 3, 1)?,
                placement,
            });
        }
        t /= 2;
        rows.push(FlopRow {
            name: format!("{prefix}s{i}.maxpool"),
            layer_type: "maxpool(2,1)",
            output_shape: (t, 1, STACK_FILTERS),
            flops: 0,
            placement,
        });
    }
    Ok(STACK_FILTERS * t)
}

fn head_rows(
    n_in: usize,
    n_classes: usize,
    placement: Placement,
    prefix: &str,
    rows: &mut Vec<FlopRow>,
) -> Result<()> {
    rows.push(FlopRow {
        name: format!("{prefix}fc1"),
        layer_type: "dense",
        output_shape: (HEAD_HIDDEN, 1, 1),
        flops: flops_dense(n_in, HEAD_HIDDEN)?,
        placement,
    });
    rows.push(FlopRow {
        name: format!("{prefix}fc2"),
        layer_type: "dense",
        output_shape: (HEAD_HIDDEN, 1, 1),
        flops: flops_dense(HEAD_HIDDEN, HEAD_HIDDEN)?,
        placement,
    });
    rows.push(FlopRow {
        name: format!("{prefix}fc3"),
        layer_type: "dense",
        output_shape: (n_classes, 1, 1),
        flops: flops_dense(HEAD_HIDDEN, n_classes)?,
        placement,
    });
    rows.push(FlopRow {
        name: format!("{prefix}softmax"),
        layer_type: "softmax",
        output_shape: (n_classes, 1, 1),
        flops: 0,
        placement,
    });
    Ok(())
}

/// Walk the layer graph of `spec` and price every MAC-bearing layer.
pub fn estimate_model_flops(spec: &ModelSpec) -> Result<FlopReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    let n_classes = spec.n_classes;
    let n_ru_multiplier;

    match spec.kind {
        ModelKind::Central => {
            // All computation executes at the DU; EGC itself is zero-cost.
            rows.push(FlopRow {
                name: "egc".to_string(),
                layer_type: "egc-sum",
                output_shape: (spec.input_size, 1, 2),
                flops: 0,
                placement: Placement::Du,
            });
            let feat = fx_rows(spec.input_size, spec.n_stacks, Placement::Du, "", &mut rows)?;
            head_rows(feat, n_classes, Placement::Du, "", &mut rows)?;
            n_ru_multiplier = spec.n_ru;
        }
        ModelKind::Ru => {
            let feat = fx_rows(spec.input_size, spec.n_stacks, Placement::Ru, "", &mut rows)?;
            head_rows(feat, n_classes, Placement::Ru, "", &mut rows)?;
            n_ru_multiplier = 1;
        }
        ModelKind::DuFeature => {
            fx_rows(spec.input_size, spec.n_stacks, Placement::Du, "", &mut rows)?;
            n_ru_multiplier = spec.n_ru;
        }
        ModelKind::DistributedEnsemble => {
            let feat =
                fx_rows(spec.input_size, spec.n_stacks, Placement::Ru, "ru.", &mut rows)?;
            head_rows(feat, n_classes, Placement::Ru, "ru.", &mut rows)?;
            head_rows(n_classes * spec.n_ru, n_classes, Placement::Du, "voting.", &mut rows)?;
            n_ru_multiplier = spec.n_ru;
        }
        ModelKind::HybridEnsemble => {
            let feat =
                fx_rows(spec.input_size, spec.n_stacks, Placement::Ru, "ru.", &mut rows)?;
            head_rows(feat, n_classes, Placement::Ru, "ru.", &mut rows)?;
            let du_feat = fx_rows(
                spec.du_input_size.expect("validated"),
                spec.du_n_stacks.expect("validated"),
                Placement::Du,
                "du.",
                &mut rows,
            )?;
            head_rows(
                n_classes * spec.n_ru + du_feat,
                n_classes,
                Placement::Du,
                "voting.",
                &mut rows,
            )?;
            n_ru_multiplier = spec.n_ru;
        }
        ModelKind::Voting => {
            return Err(Error::InvalidArgument(
                "voting head size depends on the ensemble; estimate the ensemble spec".to_string(),
            ));
        }
    }

    let per_ru_flops =
        rows.iter().filter(|r| r.placement == Placement::Ru).map(|r| r.flops).sum::<u64>();
    let du_flops =
        rows.iter().filter(|r| r.placement == Placement::Du).map(|r| r.flops).sum::<u64>();
    let n_ru = if per_ru_flops > 0 { n_ru_multiplier } else { spec.n_ru };
    Ok(FlopReport {
        spec: spec.clone(),
        rows,
        n_ru,
        per_ru_flops,
        du_flops,
        grand_total_flops: n_ru as u64 * per_ru_flops + du_flops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Instrumented naive dense layer: counts one multiply and one
    /// accumulate-add per (input, output) pair.
    fn dense_counter(n_in: usize, n_out: usize) -> u64 {
        let mut flops = 0u64;
        for _o in 0..n_out {
            for _i in 0..n_in {
                flops += 1; // multiply
                flops += 1; // accumulate
            }
        }
        flops
    }

    /// Instrumented naive convolution with explicit zero padding: every
    /// kernel tap executes a multiply and an accumulate.
    fn conv_counter(
        h_out: usize,
        w_out: usize,
        c_in: usize,
        c_out: usize,
        k_h: usize,
        k_w: usize,
    ) -> u64 {
        let mut flops = 0u64;
        for _co in 0..c_out {
            for _y in 0..h_out {
                for _x in 0..w_out {
                    for _ci in 0..c_in {
                        for _ky in 0..k_h {
                            for _kx in 0..k_w {
                                flops += 2;
                            }
                        }
                    }
                }
            }
        }
        flops
    }

    #[test]
    fn dense_formula_and_counter() {
        assert_eq!(flops_dense(128, 128).unwrap(), 32_768);
        assert_eq!(flops_dense(1, 1).unwrap(), 2);
        assert_eq!(flops_dense(3, 5).unwrap(), 30);
        assert_eq!(flops_dense(3, 5).unwrap(), dense_counter(3, 5));
        assert_eq!(flops_dense(17, 9).unwrap(), dense_counter(17, 9));
        assert!(flops_dense(0, 5).is_err());
    }

    #[test]
    fn conv_formula_and_counter() {
        assert_eq!(flops_conv(8, 2, 1, 4, 3, 1).unwrap(), 384);
        assert_eq!(flops_conv(4, 2, 1, 2, 3, 1).unwrap(), conv_counter(4, 2, 1, 2, 3, 1));
        assert_eq!(flops_conv(7, 3, 5, 2, 3, 2).unwrap(), conv_counter(7, 3, 5, 2, 3, 2));
        assert!(flops_conv(4, 2, 0, 2, 3, 1).is_err());
    }

    #[test]
    fn one_by_one_conv_equals_per_position_dense() {
        for (h, w, ci, co) in [(8, 2, 4, 16), (128, 1, 2, 32), (3, 3, 7, 7)] {
            assert_eq!(
                flops_conv(h, w, ci, co, 1, 1).unwrap(),
                (h * w) as u64 * flops_dense(ci, co).unwrap()
            );
        }
    }

    fn central(input: usize, stacks: usize) -> FlopReport {
        estimate_model_flops(&ModelSpec::central(input, stacks, 3)).unwrap()
    }

    #[test]
    fn central_totals_within_reference_bands() {
        // Reference operating points (MAC-convention MFLOPs), ±25%.
        for (input, stacks, reference) in
            [(128, 5, 3.23), (256, 7, 6.56), (512, 4, 12.53), (1024, 5, 25.77)]
        {
            let got = central(input, stacks).table_mflops();
            assert!(
                (got - reference).abs() <= 0.25 * reference,
                "central({input},{stacks}): {got:.3} vs {reference} ±25%"
            );
        }
    }

    #[test]
    fn input_size_ratio_band() {
        let ratio = central(1024, 5).table_mflops() / central(128, 5).table_mflops();
        assert!((7.0..=9.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn distributed_over_central_ratio_band() {
        for (input, stacks) in [(128, 5), (256, 7), (512, 4), (1024, 5)] {
            let d = estimate_model_flops(&ModelSpec::distributed(input, stacks, 3)).unwrap();
            let c = central(input, stacks);
            let ratio = d.grand_total_flops as f64 / c.grand_total_flops as f64;
            assert!(
                (2.9..=3.2).contains(&ratio),
                "distributed/central at ({input},{stacks}): {ratio}"
            );
        }
    }

    #[test]
    fn additivity_exact() {
        for spec in [
            ModelSpec::distributed(128, 5, 3),
            ModelSpec::distributed(512, 7, 6),
            ModelSpec::hybrid(128, 5, 256, 7, 3),
        ] {
            let r = estimate_model_flops(&spec).unwrap();
            let ru: u64 =
                r.rows.iter().filter(|x| x.placement == Placement::Ru).map(|x| x.flops).sum();
            let du: u64 =
                r.rows.iter().filter(|x| x.placement == Placement::Du).map(|x| x.flops).sum();
            assert_eq!(r.per_ru_flops, ru);
            assert_eq!(r.du_flops, du);
            assert_eq!(r.grand_total_flops, r.n_ru as u64 * ru + du);
        }
    }

    #[test]
    fn voting_head_negligible() {
        for input in [128usize, 256, 512, 1024] {
            for stacks in [4usize, 5, 6, 7] {
                let r = estimate_model_flops(&ModelSpec::distributed(input, stacks, 3)).unwrap();
                let frac = r.voting_flops() as f64 / r.grand_total_flops as f64;
                assert!(frac < 0.02, "voting fraction {frac} at ({input},{stacks})");
            }
        }
    }

    #[test]
    fn input_size_dominates_linearly() {
        for stacks in [4usize, 5, 6, 7] {
            for (small, large) in [(128usize, 256usize), (256, 512), (512, 1024)] {
                let ratio = central(large, stacks).grand_total_flops as f64
                    / central(small, stacks).grand_total_flops as f64;
                assert!(
                    (ratio / 2.0 - 1.0).abs() <= 0.15,
                    "doubling {small}->{large} at {stacks} stacks: ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn stack_count_is_secondary() {
        for input in [128usize, 256, 512, 1024] {
            let lo = central(input, 4).grand_total_flops as f64;
            let hi = central(input, 7).grand_total_flops as f64;
            assert!(hi / lo < 1.5, "stacks 4->7 at {input}:500% rule violated ({})", hi / lo);
        }
    }

    #[test]
    fn hybrid_walk_includes_du_branch() {
        let r = estimate_model_flops(&ModelSpec::hybrid(128, 5, 256, 7, 3)).unwrap();
        assert!(r.rows.iter().any(|x| x.name.starts_with("du.")));
        assert!(r.du_flops > 0 && r.per_ru_flops > 0);
        // Voting input: 21 soft-decision lanes plus the DU feature vector.
        let fc1 = r.rows.iter().find(|x| x.name == "voting.fc1").unwrap();
        assert_eq!(fc1.flops, flops_dense(21 + 64, 128).unwrap());
    }
}
