//! Independent oracles shared by the test suites and the `verify` command.
//!
//! Everything in this module deliberately avoids the implementation paths it
//! is used to check: gradients come from central finite differences, fronts
//! from brute-force pairwise dominance, and so on.

use crate::numcore::Tensor;

/// Central finite-difference gradients of `f` with respect to each tensor in
/// `params`, using step `h` per coordinate.
pub fn finite_difference_gradients<F>(f: &F, params: &[Tensor], h: f64) -> Vec<Tensor>
where
    F: Fn(&[Tensor]) -> f64,
{
    let mut grads = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut g = Tensor::zeros(params[pi].shape().to_vec());
        for i in 0..params[pi].numel() {
            let mut plus = params.to_vec();
            plus[pi].data_mut()[i] += h;
            let fp = f(&plus);
            let mut minus = params.to_vec();
            minus[pi].data_mut()[i] -= h;
            let fm = f(&minus);
            g.data_mut()[i] = (fp - fm) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

/// Largest relative error between analytic and finite-difference gradients,
/// with an absolute floor of 1e-6 on the denominator. Non-finite
/// finite-difference entries (coordinates skipped by the kink guard) are
/// ignored.
pub fn max_relative_error(analytic: &[Tensor], numeric: &[Tensor]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (&av, &nv) in a.data().iter().zip(n.data()) {
            if !nv.is_finite() {
                continue;
            }
            let denom = av.abs().max(nv.abs()).max(1e-6);
            worst = worst.max((av - nv).abs() / denom);
        }
    }
    worst
}

/// Central finite differences with a kink guard: each evaluation reports the
/// side of every non-smooth gate it landed on, and coordinates whose two
/// evaluations straddle a kink are skipped (marked NaN) because the
/// difference quotient does not estimate a derivative there.
pub fn guarded_finite_differences<F>(f: &F, params: &[Tensor], h: f64) -> Vec<Tensor>
where
    F: Fn(&[Tensor]) -> (f64, Vec<bool>),
{
    let mut grads = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut g = Tensor::zeros(params[pi].shape().to_vec());
        for i in 0..params[pi].numel() {
            let mut plus = params.to_vec();
            plus[pi].data_mut()[i] += h;
            let (fp, sig_p) = f(&plus);
            let mut minus = params.to_vec();
            minus[pi].data_mut()[i] -= h;
            let (fm, sig_m) = f(&minus);
            g.data_mut()[i] = if sig_p == sig_m {
                (fp - fm) / (2.0 * h)
            } else {
                f64::NAN
            };
        }
        grads.push(g);
    }
    grads
}

/// Brute-force non-dominated stratification by repeated pairwise dominance
/// scans; quadratic and independent of the fast sorting implementation.
pub fn brute_force_fronts(objectives: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut assigned = vec![false; n];
    let mut fronts = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let mut front = Vec::new();
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let dominated = (0..n).any(|j| {
                j != i && !assigned[j] && dominates_slice(&objectives[j], &objectives[i])
            });
            if !dominated {
                front.push(i);
            }
        }
        for &i in &front {
            assigned[i] = true;
        }
        remaining -= front.len();
        fronts.push(front);
    }
    fronts
}

fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

use crate::error::Result;
use crate::ganstack::losses::{critic_loss_graph, generator_loss_graph};
use crate::ganstack::{BundleSpec, GanMode, LossWeights, ModelBundle};
use crate::rng::rng_from_seed;
use rand::Rng as _;

fn random_batch(seed: u64, rows: usize, pixels: usize, attrs: usize) -> (Tensor, Tensor, Tensor) {
    let mut rng = rng_from_seed(seed);
    let images = Tensor::new(
        vec![rows, pixels],
        (0..rows * pixels).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .expect("batch shape");
    let a = Tensor::new(
        vec![rows, attrs],
        (0..rows * attrs).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .expect("attr shape");
    let b = Tensor::new(
        vec![rows, attrs],
        (0..rows * attrs).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .expect("attr shape");
    (images, a, b)
}

fn generator_side_error(
    bundle: &ModelBundle,
    images: &Tensor,
    attrs: &Tensor,
    sampled: &Tensor,
    weights: &LossWeights,
) -> Result<f64> {
    let mut graph = generator_loss_graph(bundle, images, attrs, sampled, weights)?;
    graph.tape.backward(graph.loss)?;
    let analytic: Vec<Tensor> = graph
        .params
        .iter()
        .map(|&id| graph.tape.grad(id).clone())
        .collect();
    let current: Vec<Tensor> = bundle
        .enc
        .param_tensors()
        .into_iter()
        .chain(bundle.dec.param_tensors())
        .cloned()
        .collect();
    let f = |p: &[Tensor]| {
        let mut b = bundle.clone();
        for (dst, src) in b
            .enc
            .param_tensors_mut()
            .into_iter()
            .chain(b.dec.param_tensors_mut())
            .zip(p)
        {
            *dst = src.clone();
        }
        let g = generator_loss_graph(&b, images, attrs, sampled, weights).expect("loss eval");
        (g.tape.value(g.loss).item(), g.tape.kink_signature())
    };
    let fd = guarded_finite_differences(&f, &current, 1e-3);
    Ok(max_relative_error(&analytic, &fd))
}

fn critic_side_error(
    bundle: &ModelBundle,
    images: &Tensor,
    attrs: &Tensor,
    generated: &Tensor,
    weights: &LossWeights,
) -> Result<f64> {
    let mut graph = critic_loss_graph(bundle, images, attrs, generated, weights, false)?;
    graph.tape.backward(graph.loss)?;
    // The plausibility head is excluded, so its two leaves carry zero grads;
    // compare only trunk, score and attribute parameters.
    let compared = graph.params.len() - 2;
    let analytic: Vec<Tensor> = graph.params[..compared]
        .iter()
        .map(|&id| graph.tape.grad(id).clone())
        .collect();
    let current: Vec<Tensor> = {
        let c = &bundle.critic;
        c.trunk
            .iter()
            .flat_map(|l| [&l.w, &l.b])
            .chain([&c.score.w, &c.score.b, &c.attrs.w, &c.attrs.b])
            .cloned()
            .collect()
    };
    let f = |p: &[Tensor]| {
        let mut b = bundle.clone();
        {
            let c = &mut b.critic;
            let mut dst: Vec<&mut Tensor> = Vec::new();
            for layer in &mut c.trunk {
                dst.push(&mut layer.w);
                dst.push(&mut layer.b);
            }
            dst.push(&mut c.score.w);
            dst.push(&mut c.score.b);
            dst.push(&mut c.attrs.w);
            dst.push(&mut c.attrs.b);
            for (d, s) in dst.into_iter().zip(p) {
                *d = s.clone();
            }
        }
        let g = critic_loss_graph(&b, images, attrs, generated, weights, false)
            .expect("loss eval");
        (g.tape.value(g.loss).item(), g.tape.kink_signature())
    };
    let fd = guarded_finite_differences(&f, &current, 1e-3);
    Ok(max_relative_error(&analytic, &fd))
}

/// Worst relative gradient error across every training loss (composite and
/// component weightings, both modes) on one randomly initialized small
/// network stack.
pub fn gan_gradient_max_error(seed: u64) -> Result<f64> {
    let spec = BundleSpec {
        mode: GanMode::Conditional,
        image_shape: vec![2, 2, 1],
        latent_width: 3,
        attr_count: 2,
        hidden: vec![5],
    };
    let bundle = ModelBundle::init(spec.clone(), seed)?;
    let (images, attrs, sampled) = random_batch(seed ^ 0x5eed, 3, 4, 2);

    let mut worst: f64 = 0.0;
    // Conditional generator loss under weightings that isolate the
    // reconstruction, attribute and adversarial terms, plus the composite.
    for (l1, l2) in [(1.5, 0.8), (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)] {
        let w = LossWeights {
            lambda_rec: l1,
            lambda_att: l2,
            lambda_cls: 1.0,
        };
        worst = worst.max(generator_side_error(&bundle, &images, &attrs, &sampled, &w)?);
    }
    // Critic/classifier loss with and without the attribute term.
    let z = bundle.encode(&images)?;
    let generated = bundle.decode(&z, &sampled)?;
    for l3 in [1.2, 0.0] {
        let w = LossWeights {
            lambda_rec: 1.0,
            lambda_att: 1.0,
            lambda_cls: l3,
        };
        worst = worst.max(critic_side_error(&bundle, &images, &attrs, &generated, &w)?);
    }
    // Non-conditional composition.
    let nc = ModelBundle::init(
        BundleSpec {
            mode: GanMode::NonConditional,
            ..spec
        },
        seed.wrapping_add(1),
    )?;
    for l1 in [2.0, 0.0] {
        let w = LossWeights {
            lambda_rec: l1,
            lambda_att: 0.0,
            lambda_cls: 0.0,
        };
        worst = worst.max(generator_side_error(&nc, &images, &attrs, &sampled, &w)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_differences_recover_quadratic_gradient() {
        let f = |p: &[Tensor]| p[0].data().iter().map(|v| v * v).sum::<f64>();
        let params = vec![Tensor::vector(vec![1.0, -3.0, 0.5])];
        let g = finite_difference_gradients(&f, &params, 1e-4);
        for (gv, xv) in g[0].data().iter().zip(params[0].data()) {
            assert!((gv - 2.0 * xv).abs() < 1e-6);
        }
    }

    #[test]
    fn brute_force_fronts_stratify_chain() {
        let objs = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let fronts = brute_force_fronts(&objs);
        assert_eq!(fronts, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn gan_gradients_match_finite_differences_on_one_stack() {
        let err = gan_gradient_max_error(7).unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }
}
