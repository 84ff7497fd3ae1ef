//! Self-check runner behind the `verify` command: every module's core
//! invariants, checked against independent oracles, with one line per check.

use crate::checks::{brute_force_fronts, gan_gradient_max_error};
use crate::moea;
use crate::numcore::tensor::{self, Tensor};
use crate::objectives::ObjectiveTriple;
use crate::rng::rng_from_seed;
use rand::Rng as _;

type CheckResult = std::result::Result<(), String>;

pub struct Check {
    pub name: &'static str,
    pub run: Box<dyn Fn() -> CheckResult>,
}

impl Check {
    pub fn new(name: &'static str, run: impl Fn() -> CheckResult + 'static) -> Self {
        Check {
            name,
            run: Box::new(run),
        }
    }
}

pub struct VerifySummary {
    pub results: Vec<(String, CheckResult)>,
}

impl VerifySummary {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|(_, r)| r.is_ok())
    }

    pub fn failures(&self) -> Vec<String> {
        self.results
            .iter()
            .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
            .collect()
    }
}

pub fn run_checks(checks: &[Check]) -> VerifySummary {
    let results = checks
        .iter()
        .map(|c| (c.name.to_string(), (c.run)()))
        .collect();
    VerifySummary { results }
}

pub fn default_checks() -> Vec<Check> {
    vec![
        Check::new("gradient_correctness", check_gradients),
        Check::new("dominance_oracle_equivalence", check_dominance_oracle),
        Check::new("sbx_mean_preservation", check_sbx_mean),
        Check::new("mutation_firing_rate", check_mutation_rate),
        Check::new("luminance_identities", check_luminance),
        Check::new("ssim_identities", check_ssim),
        Check::new("diff_heatmap_identity", check_diff_heatmap),
        Check::new("softmax_cross_entropy_identities", check_softmax_ce),
    ]
}

fn check_gradients() -> CheckResult {
    for seed in 0..10u64 {
        let err = gan_gradient_max_error(seed).map_err(|e| e.to_string())?;
        if err >= 1e-3 {
            return Err(format!("seed {seed}: max relative error {err:.3e} >= 1e-3"));
        }
    }
    Ok(())
}

fn check_dominance_oracle() -> CheckResult {
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(seed);
        let mut pop: Vec<moea::Individual> = (0..200)
            .map(|_| moea::Individual {
                delta: vec![0.0],
                objectives: ObjectiveTriple {
                    f_gan: rng.gen_range(0.0..1.0),
                    f_adv: rng.gen_range(0.0..1.0),
                    f_att: rng.gen_range(0.0..1.0),
                },
                rank: 0,
                crowding: 0.0,
            })
            .collect();
        let fast = moea::fast_non_dominated_sort(&mut pop).map_err(|e| e.to_string())?;
        let raw: Vec<Vec<f64>> = pop
            .iter()
            .map(|i| i.objectives.as_array().to_vec())
            .collect();
        if fast != brute_force_fronts(&raw) {
            return Err(format!("seed {seed}: fast sort disagrees with brute force"));
        }
    }
    Ok(())
}

fn check_sbx_mean() -> CheckResult {
    let mut rng = rng_from_seed(77);
    let p1 = [-0.1, 0.05, 0.0];
    let p2 = [0.15, -0.02, 0.08];
    let trials = 10_000;
    let mut mean = [0.0f64; 3];
    for _ in 0..trials {
        let (c1, c2) = moea::sbx_crossover(&p1, &p2, 20.0, &mut rng).map_err(|e| e.to_string())?;
        for k in 0..3 {
            mean[k] += (c1[k] + c2[k]) / 2.0;
        }
    }
    for k in 0..3 {
        let m = mean[k] / trials as f64;
        let expected = (p1[k] + p2[k]) / 2.0;
        if (m - expected).abs() >= 0.01 {
            return Err(format!(
                "component {k}: child mean {m:.4} drifts from parent mean {expected:.4}"
            ));
        }
    }
    Ok(())
}

fn check_mutation_rate() -> CheckResult {
    let mut rng = rng_from_seed(78);
    let n = 5usize;
    let p = 1.0 / n as f64;
    let trials = 10_000;
    let mut fired = vec![0usize; n];
    for _ in 0..trials {
        let mut d = vec![0.1; n];
        moea::polynomial_mutation(&mut d, p, 20.0, &mut rng);
        for (k, &v) in d.iter().enumerate() {
            if v != 0.1 {
                fired[k] += 1;
            }
        }
    }
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    for (k, &f) in fired.iter().enumerate() {
        let rate = f as f64 / trials as f64;
        if (rate - p).abs() >= 3.0 * se {
            return Err(format!(
                "component {k} fires at {rate:.4}, outside {p:.4} +- {:.4}",
                3.0 * se
            ));
        }
    }
    Ok(())
}

fn check_luminance() -> CheckResult {
    let cases = [
        ((0.0, 0.0, 0.0), 0.0),
        ((255.0, 255.0, 255.0), 1.0),
        ((255.0, 0.0, 0.0), 0.2126),
        ((0.0, 255.0, 0.0), 0.7152),
        ((0.0, 0.0, 255.0), 0.0722),
    ];
    for ((r, g, b), expected) in cases {
        let got = crate::analysis::luminance(r, g, b).map_err(|e| e.to_string())?;
        if (got - expected).abs() > 1e-12 {
            return Err(format!("luminance({r},{g},{b}) = {got}, expected {expected}"));
        }
    }
    Ok(())
}

fn check_ssim() -> CheckResult {
    let mut rng = rng_from_seed(80);
    let a = Tensor::new(
        vec![8, 8],
        (0..64).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let b = Tensor::new(
        vec![8, 8],
        (0..64).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let identity = crate::analysis::ssim(&a, &a).map_err(|e| e.to_string())?;
    if (identity - 1.0).abs() > 1e-9 {
        return Err(format!("ssim(x, x) = {identity}, expected 1"));
    }
    let ab = crate::analysis::ssim(&a, &b).map_err(|e| e.to_string())?;
    let ba = crate::analysis::ssim(&b, &a).map_err(|e| e.to_string())?;
    if (ab - ba).abs() > 1e-9 {
        return Err(format!("ssim asymmetry: {ab} vs {ba}"));
    }
    Ok(())
}

fn check_diff_heatmap() -> CheckResult {
    let mut rng = rng_from_seed(81);
    let a = Tensor::new(
        vec![4, 4, 3],
        (0..48).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let zero = crate::analysis::diff_heatmap(&a, &a).map_err(|e| e.to_string())?;
    if zero.data().iter().any(|&v| v != 0.0) {
        return Err("diff_heatmap(x, x) is not exactly zero".into());
    }
    Ok(())
}

fn check_softmax_ce() -> CheckResult {
    let s = tensor::softmax(&Tensor::vector(vec![0.3, -1.0, 2.5])).map_err(|e| e.to_string())?;
    let sum: f64 = s.data().iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(format!("softmax sums to {sum}"));
    }
    let shifted =
        tensor::softmax(&Tensor::vector(vec![100.3, 99.0, 102.5])).map_err(|e| e.to_string())?;
    for (a, b) in s.data().iter().zip(shifted.data()) {
        if (a - b).abs() > 1e-6 {
            return Err("softmax is not shift invariant".into());
        }
    }
    let p = Tensor::vector(vec![0.3, 0.7]);
    let h = tensor::cross_entropy(&p, &p).map_err(|e| e.to_string())?;
    let entropy = -(0.3f64.ln() * 0.3 + 0.7f64.ln() * 0.7);
    if (h - entropy).abs() > 1e-9 {
        return Err(format!("H(p, p) = {h}, entropy is {entropy}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_checks_pass() {
        let summary = run_checks(&default_checks());
        assert!(
            summary.all_passed(),
            "failures: {:?}",
            summary.failures()
        );
    }

    #[test]
    fn injected_broken_check_is_reported_by_name() {
        let mut checks = default_checks();
        checks.push(Check::new("broken_gradient_fixture", || {
            Err("injected failure".into())
        }));
        let summary = run_checks(&checks);
        assert!(!summary.all_passed());
        let failures = summary.failures();
        assert!(failures.iter().any(|f| f.contains("broken_gradient_fixture")));
    }
}
