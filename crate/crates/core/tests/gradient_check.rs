//! Analytic gradients vs central finite differences on a tiny model
//! (input 8, one stack, two classes), in f64, over every trainable
//! parameter.

use cfamc_core::model::Classifier;
use cfamc_core::nn::{cross_entropy, GradBuf, ParamVisitor, Scalar};
use cfamc_core::rng::DetRng;
use rayon::prelude::*;

fn mean_loss<F: Scalar>(
    net: &Classifier<F>,
    examples: &[(Vec<F>, usize)],
    ws: &mut cfamc_core::model::ClassifierWorkspace<F>,
) -> f64 {
    let mut total = 0.0;
    for (x, label) in examples {
        let probs = net.forward(x, ws);
        total += cross_entropy(probs, *label).as_f64();
    }
    total / examples.len() as f64
}

/// Apply `f` to element `idx` of parameter slot `slot` (visit order).
fn with_param<F: Scalar>(
    net: &mut Classifier<F>,
    slot: usize,
    idx: usize,
    f: impl FnOnce(&mut F),
) {
    let mut i = 0;
    let mut f = Some(f);
    net.visit_mut(&mut |_, p| {
        if i == slot {
            if let Some(f) = f.take() {
                f(&mut p.value.data[idx]);
            }
        }
        i += 1;
    });
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let net = Classifier::<f64>::new(8, 1, 2, 20240131).unwrap();
    let mut rng = DetRng::new(7);
    let examples: Vec<(Vec<f64>, usize)> = (0..2)
        .map(|i| {
            let x: Vec<f64> = (0..16).map(|_| rng.normal()).collect();
            (x, i % 2)
        })
        .collect();

    // Analytic gradient of the mean loss.
    let mut grads = GradBuf::zeros_like(&net);
    let mut ws = net.make_workspace();
    for (x, label) in &examples {
        net.example_grad(x, *label, &mut ws, &mut grads);
    }
    let scale = 1.0 / examples.len() as f64;

    let mut slot_sizes = Vec::new();
    net.visit(&mut |_, p| slot_sizes.push(p.value.len()));
    let work: Vec<(usize, usize)> = slot_sizes
        .iter()
        .enumerate()
        .flat_map(|(slot, &size)| (0..size).map(move |idx| (slot, idx)))
        .collect();

    // Step-size ladder: the primary step balances truncation against
    // roundoff for O(1e-2) gradients; refinements cover ReLU/pool kinks
    // inside the primary window (smaller h) and near-zero gradients at the
    // roundoff floor (larger h). A wrong analytic gradient fails at every h.
    let steps = [6e-6, 1.5e-6, 2.4e-5, 9.6e-5];

    let failures: Vec<String> = work
        .par_chunks(2048)
        .flat_map(|chunk| {
            let mut net = net.clone();
            let mut ws = net.make_workspace();
            let mut bad = Vec::new();
            for &(slot, idx) in chunk {
                let mut w0 = 0.0;
                with_param(&mut net, slot, idx, |w| w0 = *w);
                let analytic = grads.slots[slot][idx] * scale;

                let mut best_rel = f64::INFINITY;
                let mut last_fd = 0.0;
                for &step in &steps {
                    let h = step * w0.abs().max(1.0);
                    with_param(&mut net, slot, idx, |w| *w = w0 + h);
                    let up = mean_loss(&net, &examples, &mut ws);
                    with_param(&mut net, slot, idx, |w| *w = w0 - h);
                    let down = mean_loss(&net, &examples, &mut ws);
                    with_param(&mut net, slot, idx, |w| *w = w0);

                    let fd = (up - down) / (2.0 * h);
                    let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-8);
                    last_fd = fd;
                    best_rel = best_rel.min(rel);
                    if best_rel <= 1e-3 {
                        break;
                    }
                }
                if best_rel > 1e-3 {
                    bad.push(format!(
                        "slot {slot} idx {idx}: analytic {analytic:.9e} vs fd {last_fd:.9e} \
                         (best rel {best_rel:.3e})"
                    ));
                }
            }
            bad
        })
        .collect();

    assert!(failures.is_empty(), "{} gradient mismatches:\n{}", failures.len(), failures.join("\n"));
    println!("gradient check: {} parameters verified", work.len());
}
