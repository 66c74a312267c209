//! NSGA-II building blocks: non-dominated sorting, crowding distance,
//! binary tournament, simulated binary crossover and polynomial mutation.

use std::cmp::Ordering;

use rand::Rng;

use crate::backends::{Bounds, Genome};
use crate::error::{Error, Result};
use crate::fitness::FitnessPair;

/// `a` dominates `b` when it is no worse in both objectives and better in one.
pub fn dominates(a: &FitnessPair, b: &FitnessPair) -> bool {
    a.f_accuracy <= b.f_accuracy
        && a.f_similarity <= b.f_similarity
        && (a.f_accuracy < b.f_accuracy || a.f_similarity < b.f_similarity)
}

/// Fronts of indices, best first; each front lists its members in ascending index order.
pub fn fast_non_dominated_sort(fitness: &[FitnessPair]) -> Vec<Vec<usize>> {
    let n = fitness.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for p in 0..n {
        for q in p + 1..n {
            if dominates(&fitness[p], &fitness[q]) {
                dominated_by_me[p].push(q);
                domination_count[q] += 1;
            } else if dominates(&fitness[q], &fitness[p]) {
                dominated_by_me[q].push(p);
                domination_count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front, in the order given.
pub fn crowding_distance(front: &[FitnessPair]) -> Vec<f64> {
    let n = front.len();
    let mut distance = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let objectives: [fn(&FitnessPair) -> f64; 2] = [|f| f.f_accuracy, |f| f.f_similarity];
    for objective in objectives {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| objective(&front[a]).total_cmp(&objective(&front[b])).then(a.cmp(&b)));
        let lo = objective(&front[order[0]]);
        let hi = objective(&front[order[n - 1]]);
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for k in 1..n - 1 {
            let gap = objective(&front[order[k + 1]]) - objective(&front[order[k - 1]]);
            distance[order[k]] += gap / range;
        }
    }
    distance
}

/// Front index and crowding distance for every member of a population.
pub fn rank_and_crowd(fitness: &[FitnessPair]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; fitness.len()];
    let mut crowding = vec![0.0; fitness.len()];
    for (r, front) in fast_non_dominated_sort(fitness).iter().enumerate() {
        let values: Vec<FitnessPair> = front.iter().map(|&i| fitness[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&values)) {
            rank[i] = r;
            crowding[i] = d;
        }
    }
    (rank, crowding)
}

/// Crowded-comparison order: lower rank, then larger crowding, then lower index.
pub fn crowded_order(rank: &[usize], crowding: &[f64], a: usize, b: usize) -> Ordering {
    rank[a]
        .cmp(&rank[b])
        .then(crowding[b].total_cmp(&crowding[a]))
        .then(a.cmp(&b))
}

/// Draws two distinct indices uniformly and returns the one `better` orders first.
pub fn binary_tournament<R, F>(n: usize, rng: &mut R, mut better: F) -> Result<usize>
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize) -> Ordering,
{
    if n < 2 {
        return Err(Error::InsufficientData(format!("tournament needs 2 contestants, population has {n}")));
    }
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    Ok(if better(a, b) == Ordering::Greater { b } else { a })
}

/// Genetic operator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    pub eta_c: f64,
    pub eta_m: f64,
}

/// Bounded simulated binary crossover. Each dimension is recombined with
/// probability 0.5 once the pair is selected for crossover.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &Genome,
    p2: &Genome,
    bounds: &Bounds,
    params: &OperatorParams,
    rng: &mut R,
) -> (Genome, Genome) {
    let mut c1 = p1.clone();
    let mut c2 = p2.clone();
    if rng.gen::<f64>() >= params.crossover_probability {
        return (c1, c2);
    }
    let eta = params.eta_c;
    for (k, b) in bounds.dims().iter().enumerate() {
        if rng.gen::<f64>() > 0.5 {
            continue;
        }
        let (x1, x2) = (p1.values()[k], p2.values()[k]);
        if (x1 - x2).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        let u: f64 = rng.gen();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let betaq = spread(1.0 + 2.0 * (y1 - b.lo) / (y2 - y1));
        let low = b.clamp(0.5 * ((y1 + y2) - betaq * (y2 - y1)));
        let betaq = spread(1.0 + 2.0 * (b.hi - y2) / (y2 - y1));
        let high = b.clamp(0.5 * ((y1 + y2) + betaq * (y2 - y1)));
        let (a, z) = if rng.gen::<f64>() < 0.5 { (high, low) } else { (low, high) };
        c1.values_mut()[k] = a;
        c2.values_mut()[k] = z;
    }
    (c1, c2)
}

/// Bounded polynomial mutation, applied to each dimension with probability `P_m`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    g: &Genome,
    bounds: &Bounds,
    params: &OperatorParams,
    rng: &mut R,
) -> Genome {
    let mut out = g.clone();
    let eta = params.eta_m;
    let power = 1.0 / (eta + 1.0);
    for (k, b) in bounds.dims().iter().enumerate() {
        if rng.gen::<f64>() >= params.mutation_probability {
            continue;
        }
        let x = out.values()[k];
        let width = b.width();
        let (d1, d2) = ((x - b.lo) / width, (b.hi - x) / width);
        let u: f64 = rng.gen();
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(power) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(power)
        };
        out.values_mut()[k] = b.clamp(x + dq * width);
    }
    out
}
