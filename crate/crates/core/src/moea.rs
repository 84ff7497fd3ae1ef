//! NSGA-II search over perturbation vectors: non-dominated sorting,
//! crowding-distance truncation, simulated binary crossover, polynomial
//! mutation, and an exact 3-D hypervolume for convergence tracking.

use crate::error::{Error, Result};
use crate::objectives::{ObjectiveTriple, SEARCH_BOX};
use crate::rng::{rng_from_seed, Rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub delta: Vec<f64>,
    pub objectives: ObjectiveTriple,
    pub rank: usize,
    pub crowding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NsgaConfig {
    pub population: usize,
    pub offspring: usize,
    /// Per-component mutation probability; `None` means `1 / n_vars`.
    pub mutation_prob: Option<f64>,
    pub mutation_index: f64,
    pub crossover_prob: f64,
    pub crossover_index: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        NsgaConfig {
            population: 100,
            offspring: 100,
            mutation_prob: None,
            mutation_index: 20.0,
            crossover_prob: 0.9,
            crossover_index: 20.0,
            generations: 50,
            seed: 0,
        }
    }
}

impl NsgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || self.offspring == 0 {
            return Err(Error::contract("population and offspring must be positive"));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob.unwrap_or(0.0)),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::contract(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.mutation_index <= 0.0 || self.crossover_index <= 0.0 {
            return Err(Error::contract("distribution indices must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: NsgaConfig,
    pub generations_run: usize,
    pub evaluations: usize,
}

/// The non-dominated output set of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<Individual>,
    pub provenance: Provenance,
}

/// Per-generation objective snapshots of the retained population, for
/// convergence instrumentation.
#[derive(Debug, Clone, Default)]
pub struct EvolveTrace {
    pub generations: Vec<Vec<ObjectiveTriple>>,
}

/// Strict Pareto dominance, all objectives minimized: no worse everywhere
/// and strictly better somewhere.
pub fn dominates(a: &ObjectiveTriple, b: &ObjectiveTriple) -> bool {
    let (a, b) = (a.as_array(), b.as_array());
    let mut strictly = false;
    for (x, y) in a.iter().zip(&b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Deb's fast non-dominated sort. Returns the fronts as index lists and
/// records each individual's rank.
pub fn fast_non_dominated_sort(population: &mut [Individual]) -> Result<Vec<Vec<usize>>> {
    let n = population.len();
    for ind in population.iter() {
        if !ind.objectives.as_array().iter().all(|v| v.is_finite()) {
            return Err(Error::contract(format!(
                "individual has non-finite objectives: {:?}",
                ind.objectives
            )));
        }
    }
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&population[i].objectives, &population[j].objectives) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&population[j].objectives, &population[i].objectives) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }

    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        for &i in &current {
            population[i].rank = rank;
        }
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::take(&mut current));
        current = next;
        rank += 1;
    }
    Ok(fronts)
}

/// Crowding distance within one front: boundary individuals per objective
/// get infinity, interior ones accumulate normalized neighbor gaps, and an
/// all-equal objective contributes nothing.
pub fn crowding_distance(population: &mut [Individual], front: &[usize]) {
    for &i in front {
        population[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            population[i].crowding = f64::INFINITY;
        }
        return;
    }
    for obj in 0..3 {
        let mut order = front.to_vec();
        order.sort_by(|&a, &b| {
            population[a].objectives.as_array()[obj]
                .total_cmp(&population[b].objectives.as_array()[obj])
        });
        let lo = population[order[0]].objectives.as_array()[obj];
        let hi = population[*order.last().unwrap()].objectives.as_array()[obj];
        let range = hi - lo;
        if range == 0.0 {
            continue;
        }
        population[order[0]].crowding = f64::INFINITY;
        population[*order.last().unwrap()].crowding = f64::INFINITY;
        for w in 1..order.len() - 1 {
            let prev = population[order[w - 1]].objectives.as_array()[obj];
            let next = population[order[w + 1]].objectives.as_array()[obj];
            population[order[w]].crowding += (next - prev) / range;
        }
    }
}

/// Simulated binary crossover of two parents, componentwise, clamped to the
/// search box.
pub fn sbx_crossover(
    p1: &[f64],
    p2: &[f64],
    eta_c: f64,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if p1.len() != p2.len() {
        return Err(Error::Dimension {
            op: "sbx_crossover",
            lhs: vec![p1.len()],
            rhs: vec![p2.len()],
        });
    }
    let (lo, hi) = SEARCH_BOX;
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p2.len());
    for (&a, &b) in p1.iter().zip(p2) {
        let u: f64 = rng.gen_range(0.0..1.0);
        let beta = if u <= 0.5 {
            (2.0 * u).powf(1.0 / (eta_c + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta_c + 1.0))
        };
        let x1 = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b);
        let x2 = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b);
        c1.push(x1.clamp(lo, hi));
        c2.push(x2.clamp(lo, hi));
    }
    Ok((c1, c2))
}

/// Bounded polynomial mutation: each component fires independently with
/// probability `p_m` and is perturbed inside the search box.
pub fn polynomial_mutation(delta: &mut [f64], p_m: f64, eta_m: f64, rng: &mut Rng) {
    let (lo, hi) = SEARCH_BOX;
    let span = hi - lo;
    for v in delta.iter_mut() {
        if rng.gen_range(0.0..1.0) >= p_m {
            continue;
        }
        let u: f64 = rng.gen_range(0.0..1.0);
        let d = if u < 0.5 {
            (2.0 * u).powf(1.0 / (eta_m + 1.0)) - 1.0
        } else {
            1.0 - (2.0 * (1.0 - u)).powf(1.0 / (eta_m + 1.0))
        };
        *v = (*v + d * span).clamp(lo, hi);
    }
}

/// Binary tournament on (rank, crowding): lower rank wins, ties go to the
/// larger crowding distance, then to the first contender.
fn tournament(population: &[Individual], rng: &mut Rng) -> usize {
    let i = rng.gen_range(0..population.len());
    let j = rng.gen_range(0..population.len());
    let a = &population[i];
    let b = &population[j];
    if (a.rank, std::cmp::Reverse(ordered(a.crowding))) <= (b.rank, std::cmp::Reverse(ordered(b.crowding))) {
        i
    } else {
        j
    }
}

fn ordered(v: f64) -> u64 {
    // Total order over nonnegative floats including infinity.
    v.to_bits()
}

/// Run NSGA-II on an arbitrary objective function over `n_vars` decision
/// variables in the search box. Returns the deduplicated rank-0 front and a
/// per-generation trace of the retained population.
pub fn evolve_with<F>(
    n_vars: usize,
    mut eval: F,
    config: &NsgaConfig,
) -> Result<(ParetoFront, EvolveTrace)>
where
    F: FnMut(&[f64]) -> Result<ObjectiveTriple>,
{
    config.validate()?;
    if n_vars == 0 {
        return Err(Error::contract("need at least one decision variable"));
    }
    let p_m = config.mutation_prob.unwrap_or(1.0 / n_vars as f64);
    let (lo, hi) = SEARCH_BOX;
    let mut rng = rng_from_seed(config.seed);
    let mut evaluations = 0usize;

    let mut evaluate = |delta: &[f64], evaluations: &mut usize| -> Result<ObjectiveTriple> {
        *evaluations += 1;
        eval(delta)
    };

    let mut population: Vec<Individual> = Vec::with_capacity(config.population);
    for _ in 0..config.population {
        let delta: Vec<f64> = (0..n_vars).map(|_| rng.gen_range(lo..hi)).collect();
        let objectives = evaluate(&delta, &mut evaluations)
            .map_err(|e| Error::contract(format!("evaluation failed at initialization: {e}")))?;
        population.push(Individual {
            delta,
            objectives,
            rank: 0,
            crowding: 0.0,
        });
    }
    let fronts = fast_non_dominated_sort(&mut population)?;
    for front in &fronts {
        crowding_distance(&mut population, front);
    }

    let mut trace = EvolveTrace::default();
    for generation in 0..config.generations {
        let mut offspring: Vec<Vec<f64>> = Vec::with_capacity(config.offspring);
        while offspring.len() < config.offspring {
            let a = tournament(&population, &mut rng);
            let b = tournament(&population, &mut rng);
            let (mut c1, mut c2) = if rng.gen_range(0.0..1.0) < config.crossover_prob {
                sbx_crossover(
                    &population[a].delta,
                    &population[b].delta,
                    config.crossover_index,
                    &mut rng,
                )?
            } else {
                (population[a].delta.clone(), population[b].delta.clone())
            };
            polynomial_mutation(&mut c1, p_m, config.mutation_index, &mut rng);
            polynomial_mutation(&mut c2, p_m, config.mutation_index, &mut rng);
            offspring.push(c1);
            if offspring.len() < config.offspring {
                offspring.push(c2);
            }
        }

        for delta in offspring {
            let objectives = evaluate(&delta, &mut evaluations).map_err(|e| {
                Error::contract(format!("evaluation failed at generation {generation}: {e}"))
            })?;
            population.push(Individual {
                delta,
                objectives,
                rank: 0,
                crowding: 0.0,
            });
        }

        // Merge-and-truncate: fill whole fronts, then cut the split front by
        // crowding distance with index order breaking ties.
        let fronts = fast_non_dominated_sort(&mut population)?;
        let mut next: Vec<Individual> = Vec::with_capacity(config.population);
        for front in &fronts {
            crowding_distance(&mut population, front);
            if next.len() + front.len() <= config.population {
                for &i in front {
                    next.push(population[i].clone());
                }
            } else {
                let mut order = front.clone();
                order.sort_by(|&x, &y| {
                    population[y]
                        .crowding
                        .total_cmp(&population[x].crowding)
                        .then(x.cmp(&y))
                });
                for &i in order.iter().take(config.population - next.len()) {
                    next.push(population[i].clone());
                }
                break;
            }
        }
        population = next;
        trace
            .generations
            .push(population.iter().map(|m| m.objectives).collect());
    }

    // Final rank assignment on the retained population, then deduplicate the
    // rank-0 members on bitwise-equal deltas.
    let fronts = fast_non_dominated_sort(&mut population)?;
    for front in &fronts {
        crowding_distance(&mut population, front);
    }
    let mut members: Vec<Individual> = fronts[0].iter().map(|&i| population[i].clone()).collect();
    let mut seen: Vec<Vec<u64>> = Vec::new();
    members.retain(|m| {
        let bits: Vec<u64> = m.delta.iter().map(|v| v.to_bits()).collect();
        if seen.contains(&bits) {
            false
        } else {
            seen.push(bits);
            true
        }
    });

    Ok((
        ParetoFront {
            members,
            provenance: Provenance {
                config: config.clone(),
                generations_run: config.generations,
                evaluations,
            },
        },
        trace,
    ))
}

/// Exact hypervolume dominated by a set of 3-objective points relative to a
/// reference point, by plane sweep over the third objective. Every point
/// must dominate the reference point.
pub fn hypervolume(points: &[ObjectiveTriple], reference: [f64; 3]) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    for p in points {
        let a = p.as_array();
        if a.iter().zip(&reference).any(|(v, r)| v >= r) {
            return Err(Error::contract(format!(
                "point {a:?} does not dominate the reference {reference:?}"
            )));
        }
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].f_att.total_cmp(&points[b].f_att));

    // Sweep slabs between consecutive z-levels; in each slab the dominated
    // area is the union of anchored rectangles of the points seen so far.
    let mut total = 0.0;
    let mut active: Vec<(f64, f64)> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let z = points[order[k]].f_att;
        while k < order.len() && points[order[k]].f_att == z {
            let p = &points[order[k]];
            active.push((p.f_gan, p.f_adv));
            k += 1;
        }
        let z_next = if k < order.len() {
            points[order[k]].f_att
        } else {
            reference[2]
        };
        total += rectangle_union_area(&active, reference[0], reference[1]) * (z_next - z);
    }
    Ok(total)
}

/// Area of the union of rectangles `[x_i, rx] x [y_i, ry]`: sweep distinct
/// x levels left to right, tracking the lowest y seen so far.
fn rectangle_union_area(points: &[(f64, f64)], rx: f64, ry: f64) -> f64 {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    let mut area = 0.0;
    let mut min_y = ry;
    let mut i = 0;
    while i < order.len() {
        let x = points[order[i]].0;
        while i < order.len() && points[order[i]].0 == x {
            min_y = min_y.min(points[order[i]].1);
            i += 1;
        }
        let x_next = if i < order.len() {
            points[order[i]].0
        } else {
            rx
        };
        area += (x_next - x) * (ry - min_y);
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::brute_force_fronts;

    fn t(a: f64, b: f64, c: f64) -> ObjectiveTriple {
        ObjectiveTriple {
            f_gan: a,
            f_adv: b,
            f_att: c,
        }
    }

    fn ind(objs: ObjectiveTriple) -> Individual {
        Individual {
            delta: vec![0.0],
            objectives: objs,
            rank: 0,
            crowding: 0.0,
        }
    }

    #[test]
    fn dominance_basics() {
        assert!(dominates(&t(1.0, 1.0, 1.0), &t(2.0, 2.0, 2.0)));
        assert!(!dominates(&t(1.0, 2.0, 3.0), &t(1.0, 2.0, 3.0)));
        assert!(!dominates(&t(1.0, 4.0, 0.0), &t(2.0, 2.0, 0.0)));
        assert!(!dominates(&t(2.0, 2.0, 0.0), &t(1.0, 4.0, 0.0)));
    }

    #[test]
    fn dominance_is_irreflexive_and_antisymmetric() {
        let pts = [t(0.1, 0.9, 0.5), t(0.3, 0.3, 0.3), t(0.9, 0.1, 0.2)];
        for a in &pts {
            assert!(!dominates(a, a));
            for b in &pts {
                if dominates(a, b) {
                    assert!(!dominates(b, a));
                }
            }
        }
    }

    #[test]
    fn sort_matches_worked_example() {
        // Third objective constant: two-objective stratification.
        let mut pop: Vec<Individual> = [
            (1.0, 4.0),
            (2.0, 2.0),
            (3.0, 1.0),
            (3.0, 3.0),
            (4.0, 4.0),
        ]
        .iter()
        .map(|&(a, b)| ind(t(a, b, 0.0)))
        .collect();
        let fronts = fast_non_dominated_sort(&mut pop).unwrap();
        assert_eq!(fronts, vec![vec![0, 1, 2], vec![3], vec![4]]);
        assert_eq!(pop[3].rank, 1);
        assert_eq!(pop[4].rank, 2);
    }

    #[test]
    fn identical_objectives_share_one_front() {
        let mut pop: Vec<Individual> = (0..5).map(|_| ind(t(1.0, 2.0, 3.0))).collect();
        let fronts = fast_non_dominated_sort(&mut pop).unwrap();
        assert_eq!(fronts.len(), 1);
        assert_eq!(fronts[0].len(), 5);
    }

    #[test]
    fn chain_gives_singleton_fronts() {
        let mut pop: Vec<Individual> = (1..=3)
            .map(|k| ind(t(k as f64, k as f64, k as f64)))
            .collect();
        let fronts = fast_non_dominated_sort(&mut pop).unwrap();
        assert_eq!(fronts, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn sort_equals_brute_force_oracle_on_random_points() {
        let mut rng = rng_from_seed(3);
        use rand::Rng as _;
        let mut pop: Vec<Individual> = (0..200)
            .map(|_| {
                ind(t(
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                ))
            })
            .collect();
        let fast = fast_non_dominated_sort(&mut pop).unwrap();
        let raw: Vec<Vec<f64>> = pop.iter().map(|i| i.objectives.as_array().to_vec()).collect();
        let brute = brute_force_fronts(&raw);
        assert_eq!(fast, brute);
    }

    #[test]
    fn crowding_small_front_is_infinite() {
        let mut pop = vec![ind(t(1.0, 2.0, 0.0)), ind(t(2.0, 1.0, 0.0))];
        crowding_distance(&mut pop, &[0, 1]);
        assert!(pop[0].crowding.is_infinite());
        assert!(pop[1].crowding.is_infinite());
    }

    #[test]
    fn crowding_matches_hand_computation() {
        // Front {(1,3), (2,2), (3,1)} with a constant third objective: the
        // middle point gets (3-1)/(3-1) + (3-1)/(3-1) = 2.
        let mut pop = vec![
            ind(t(1.0, 3.0, 0.0)),
            ind(t(2.0, 2.0, 0.0)),
            ind(t(3.0, 1.0, 0.0)),
        ];
        crowding_distance(&mut pop, &[0, 1, 2]);
        assert!(pop[0].crowding.is_infinite());
        assert!(pop[2].crowding.is_infinite());
        assert!((pop[1].crowding - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_objective_contributes_zero() {
        let mut pop = vec![
            ind(t(1.0, 5.0, 7.0)),
            ind(t(2.0, 4.0, 7.0)),
            ind(t(3.0, 3.0, 7.0)),
            ind(t(4.0, 2.0, 7.0)),
        ];
        crowding_distance(&mut pop, &[0, 1, 2, 3]);
        // Interior members: two objectives contribute, the constant one none.
        assert!((pop[1].crowding - (2.0 / 3.0 + 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn sbx_identical_parents_give_identical_children() {
        let mut rng = rng_from_seed(1);
        let p = vec![0.25, -0.5, 0.75];
        let (c1, c2) = sbx_crossover(&p, &p, 20.0, &mut rng).unwrap();
        assert_eq!(c1, p);
        assert_eq!(c2, p);
    }

    #[test]
    fn sbx_preserves_parent_mean() {
        let mut rng = rng_from_seed(2);
        let p1 = vec![-0.1, 0.05];
        let p2 = vec![0.15, -0.02];
        let mut mean = [0.0f64; 2];
        let trials = 10_000;
        for _ in 0..trials {
            let (c1, c2) = sbx_crossover(&p1, &p2, 20.0, &mut rng).unwrap();
            for k in 0..2 {
                // Parents are interior enough that clamping never fires.
                assert!(c1[k].abs() < 1.0 && c2[k].abs() < 1.0);
                mean[k] += (c1[k] + c2[k]) / 2.0;
            }
        }
        for k in 0..2 {
            let m = mean[k] / trials as f64;
            let expected = (p1[k] + p2[k]) / 2.0;
            assert!((m - expected).abs() < 0.01, "component {k}: {m} vs {expected}");
        }
    }

    #[test]
    fn mutation_probability_zero_is_identity() {
        let mut rng = rng_from_seed(3);
        let mut d = vec![0.3, -0.3, 0.1];
        let before = d.clone();
        polynomial_mutation(&mut d, 0.0, 20.0, &mut rng);
        assert_eq!(d, before);
    }

    #[test]
    fn mutation_firing_rate_matches_probability() {
        let mut rng = rng_from_seed(4);
        let n = 5usize;
        let p = 1.0 / n as f64;
        let trials = 10_000;
        let mut fired = vec![0usize; n];
        for _ in 0..trials {
            let mut d = vec![0.1; n];
            polynomial_mutation(&mut d, p, 20.0, &mut rng);
            for (k, &v) in d.iter().enumerate() {
                if v != 0.1 {
                    fired[k] += 1;
                }
            }
        }
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for (k, &f) in fired.iter().enumerate() {
            let rate = f as f64 / trials as f64;
            assert!(
                (rate - p).abs() < 3.0 * se,
                "component {k} fires at {rate}, expected {p} +- {}",
                3.0 * se
            );
        }
    }

    #[test]
    fn mutation_stays_in_the_box() {
        let mut rng = rng_from_seed(5);
        for _ in 0..2000 {
            let mut d = vec![0.95, -0.95];
            polynomial_mutation(&mut d, 1.0, 20.0, &mut rng);
            assert!(d.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn hypervolume_reference_cases() {
        let hv = hypervolume(&[t(0.0, 0.0, 0.0)], [1.0, 1.0, 1.0]).unwrap();
        assert!((hv - 1.0).abs() < 1e-12);

        let hv = hypervolume(&[t(0.0, 0.5, 0.0), t(0.5, 0.0, 0.0)], [1.0, 1.0, 1.0]).unwrap();
        assert!((hv - 0.75).abs() < 1e-12, "got {hv}");

        // A dominated point adds nothing.
        let hv2 = hypervolume(
            &[t(0.0, 0.5, 0.0), t(0.5, 0.0, 0.0), t(0.6, 0.6, 0.5)],
            [1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!((hv2 - 0.75).abs() < 1e-12, "got {hv2}");

        let err = hypervolume(&[t(2.0, 0.0, 0.0)], [1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn hypervolume_matches_monte_carlo_on_random_points() {
        let mut rng = rng_from_seed(8);
        use rand::Rng as _;
        let pts: Vec<ObjectiveTriple> = (0..12)
            .map(|_| {
                t(
                    rng.gen_range(0.0..0.9),
                    rng.gen_range(0.0..0.9),
                    rng.gen_range(0.0..0.9),
                )
            })
            .collect();
        let reference = [1.0, 1.0, 1.0];
        let exact = hypervolume(&pts, reference).unwrap();
        let samples = 200_000;
        let mut hits = 0usize;
        for _ in 0..samples {
            let q = [
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            ];
            if pts
                .iter()
                .any(|p| p.f_gan <= q[0] && p.f_adv <= q[1] && p.f_att <= q[2])
            {
                hits += 1;
            }
        }
        let mc = hits as f64 / samples as f64;
        assert!((exact - mc).abs() < 0.01, "exact {exact} vs mc {mc}");
    }

    use crate::rng::rng_from_seed;

    #[test]
    fn zero_generations_returns_initial_non_dominated_subset() {
        let config = NsgaConfig {
            population: 40,
            offspring: 40,
            generations: 0,
            seed: 7,
            ..NsgaConfig::default()
        };
        let (front, trace) = evolve_with(
            3,
            |d| {
                Ok(t(
                    d[0] * d[0],
                    (d[0] - 1.0) * (d[0] - 1.0),
                    0.0,
                ))
            },
            &config,
        )
        .unwrap();
        assert!(trace.generations.is_empty());
        assert_eq!(front.provenance.evaluations, 40);
        assert!(!front.members.is_empty());
        for a in &front.members {
            for b in &front.members {
                assert!(!dominates(&a.objectives, &b.objectives) || a == b);
            }
        }
    }

    #[test]
    fn fixed_seed_reproduces_the_front() {
        let config = NsgaConfig {
            population: 30,
            offspring: 30,
            generations: 5,
            seed: 11,
            ..NsgaConfig::default()
        };
        let run = || {
            evolve_with(
                2,
                |d| Ok(t(d[0] * d[0], (d[0] - 1.0) * (d[0] - 1.0), d[1].abs())),
                &config,
            )
            .unwrap()
            .0
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn front_members_stay_in_the_box_and_do_not_dominate_each_other() {
        let config = NsgaConfig {
            population: 40,
            offspring: 40,
            generations: 10,
            seed: 13,
            ..NsgaConfig::default()
        };
        let (front, trace) = evolve_with(
            3,
            |d| Ok(t(d[0] * d[0], (d[0] - 1.0) * (d[0] - 1.0), d[1].abs() + d[2].abs())),
            &config,
        )
        .unwrap();
        for snapshot in &trace.generations {
            assert_eq!(snapshot.len(), 40);
        }
        for m in &front.members {
            assert!(m.delta.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert_eq!(m.rank, 0);
        }
        for a in &front.members {
            for b in &front.members {
                if a.delta != b.delta {
                    assert!(!dominates(&a.objectives, &b.objectives));
                }
            }
        }
    }

    #[test]
    fn evaluation_count_is_population_plus_generations_times_offspring() {
        let config = NsgaConfig {
            population: 20,
            offspring: 30,
            generations: 4,
            seed: 17,
            ..NsgaConfig::default()
        };
        let mut count = 0usize;
        let (front, _) = evolve_with(
            2,
            |d| {
                count += 1;
                Ok(t(d[0], d[1], 0.0))
            },
            &config,
        )
        .unwrap();
        assert_eq!(count, 20 + 4 * 30);
        assert_eq!(front.provenance.evaluations, count);
    }
}
