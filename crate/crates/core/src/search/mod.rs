//! Archive-augmented NSGA-II over simulator parameters, its single-objective
//! and ablated variants, and the random baseline.
//!
//! Every run writes a newline-delimited JSON manifest: one line per
//! evaluation, per archive update attempt and per generation, framed by a
//! `start` and an `end` line.

mod archive;
mod operators;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use archive::{Archive, ArchiveEvent, ArchiveMember, ArchivePolicy, FeaturePoint};
pub use operators::{
    binary_tournament, crowded_order, crowding_distance, dominates, fast_non_dominated_sort,
    polynomial_mutation, rank_and_crowd, sbx_crossover, OperatorParams,
};

use crate::backends::{Genome, PortCallCounts, Ports, SceneData};
use crate::error::{Error, Result};
use crate::features::{euclidean_distance, DistanceMetric, FeatureVector};
use crate::fitness::{assess, similarity_from_distance, Assessment, EvaluationBundle, FitnessPair, GateConfig, Thresholds};
use crate::metrics::pixel_distance;
use crate::raster::{ClassMask, RgbImage};

/// Evaluations are dispatched to the worker pool in chunks of this size by the random baseline.
const RANDOM_BATCH: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_probability: f64,
    pub crossover_probability: f64,
    /// Number of random populations drawn to pick the initial one.
    pub initial_populations: usize,
    pub eta_c: f64,
    pub eta_m: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            population_size: 12,
            generations: 100,
            mutation_probability: 0.3,
            crossover_probability: 0.7,
            initial_populations: 5,
            eta_c: 15.0,
            eta_m: 20.0,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.population_size;
        if n < 2 || n % 2 != 0 {
            return Err(Error::Config(format!("population size must be even and at least 2, got {n}")));
        }
        for (name, p) in [
            ("mutation_probability", self.mutation_probability),
            ("crossover_probability", self.crossover_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.initial_populations < 1 {
            return Err(Error::Config("at least one initial population is required".into()));
        }
        if !(self.eta_c >= 0.0 && self.eta_m >= 0.0) {
            return Err(Error::Config("distribution indices must be non-negative".into()));
        }
        Ok(())
    }

    pub fn operators(&self) -> OperatorParams {
        OperatorParams {
            crossover_probability: self.crossover_probability,
            mutation_probability: self.mutation_probability,
            eta_c: self.eta_c,
            eta_m: self.eta_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Two objectives, feature distance.
    Multi,
    /// Accuracy only; every relevant individual is archived.
    Single,
    /// Two objectives, pixel distance between realistic images.
    Pix,
    /// Two objectives on simulated images, no realizer.
    Nogan,
    /// Uniform sampling with no search.
    Random,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Multi, Variant::Single, Variant::Pix, Variant::Nogan, Variant::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Multi => "multi",
            Variant::Single => "single",
            Variant::Pix => "pix",
            Variant::Nogan => "nogan",
            Variant::Random => "random",
        }
    }

    /// Distance the variant's diversity threshold must be calibrated for.
    pub fn metric(self) -> DistanceMetric {
        match self {
            Variant::Pix => DistanceMetric::Pixel,
            _ => DistanceMetric::Feature,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected multi, single, pix, nogan or random)")))
    }
}

/// One evaluated point of the search space.
#[derive(Debug, Clone)]
pub struct Individual {
    /// Position in the run's evaluation order.
    pub id: u64,
    /// Generation that produced it; 0 for the initial populations.
    pub generation: usize,
    pub genome: Genome,
    pub scene: Arc<SceneData>,
    pub realistic: Arc<RgbImage>,
    pub prediction: Arc<ClassMask>,
    pub prediction_simulated: Option<Arc<ClassMask>>,
    pub feature: Arc<FeatureVector>,
    pub assessment: Assessment,
    pub fitness: FitnessPair,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn is_relevant(&self) -> bool {
        self.fitness.is_relevant()
    }
}

impl ArchiveMember for Individual {
    fn id(&self) -> u64 {
        self.id
    }

    fn f_accuracy(&self) -> f64 {
        self.fitness.f_accuracy
    }

    fn distance(&self, other: &Self, metric: DistanceMetric) -> Result<f64> {
        match metric {
            DistanceMetric::Feature => euclidean_distance(&self.feature, &other.feature),
            DistanceMetric::Pixel => pixel_distance(self.realistic.as_ref(), other.realistic.as_ref()),
        }
    }
}

/// Everything a run depends on besides the variant.
#[derive(Debug, Clone)]
pub struct SearchSetup<'a> {
    pub ports: &'a Ports,
    pub gates: GateConfig,
    pub thresholds: Thresholds,
    pub params: SearchParams,
    pub seed: u64,
}

/// The outcome of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub variant: Variant,
    pub seed: u64,
    /// Archive members in slot order, or the relevant images of the random baseline.
    pub members: Vec<Individual>,
    pub evaluations: u64,
    pub calls: PortCallCounts,
}

struct Evaluator {
    ports: Ports,
    gates: GateConfig,
    thresholds: Thresholds,
    identity: bool,
}

impl Evaluator {
    fn evaluate(&self, id: u64, generation: usize, genome: Genome) -> Result<Individual> {
        let scene = self.ports.generate_scene(&genome)?;
        let realistic = self.ports.realize_or_identity(&scene, self.identity)?;
        let prediction = self.ports.predict(&realistic)?;
        let prediction_simulated = if self.gates.use_delta_gate {
            Some(self.ports.predict(&scene.simulated)?)
        } else {
            None
        };
        let feature = self.ports.extract_features(&realistic)?;
        let assessment = assess(
            &EvaluationBundle {
                scene: &scene,
                realistic: &realistic,
                prediction: &prediction,
                prediction_simulated: prediction_simulated.as_ref(),
            },
            &self.gates,
            &self.thresholds,
        )?;
        Ok(Individual {
            id,
            generation,
            genome,
            scene: Arc::new(scene),
            realistic: Arc::new(realistic),
            prediction: Arc::new(prediction),
            prediction_simulated: prediction_simulated.map(Arc::new),
            feature: Arc::new(feature),
            fitness: FitnessPair {
                f_accuracy: assessment.f_accuracy,
                f_similarity: 0.0,
            },
            assessment,
            rank: 0,
            crowding: 0.0,
        })
    }

    /// Evaluates concurrently; results keep the order of `genomes`.
    fn evaluate_all(&self, first_id: u64, generation: usize, genomes: Vec<Genome>) -> Result<Vec<Individual>> {
        genomes
            .into_par_iter()
            .enumerate()
            .map(|(k, g)| self.evaluate(first_id + k as u64, generation, g))
            .collect()
    }
}

/// Line-oriented JSON event log.
struct Manifest<W: Write> {
    out: W,
}

impl<W: Write> Manifest<W> {
    fn emit(&mut self, event: Value) -> Result<()> {
        serde_json::to_writer(&mut self.out, &event)?;
        self.out
            .write_all(b"\n")
            .map_err(|e| Error::io("<manifest>", e))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io("<manifest>", e))
    }

    fn evaluation(&mut self, i: &Individual) -> Result<()> {
        let a = &i.assessment;
        self.emit(json!({
            "event": "evaluation",
            "id": i.id,
            "generation": i.generation,
            "genome": i.genome.values(),
            "on_road": i.scene.on_road,
            "f_accuracy": a.f_accuracy,
            "perf_realistic": a.perf_realistic,
            "perf_simulated": a.perf_simulated,
            "delta": a.delta,
            "proportion": a.proportion,
            "gate": a.gate,
        }))
    }

    fn archive(&mut self, generation: usize, id: u64, event: &ArchiveEvent) -> Result<()> {
        let mut v = serde_json::to_value(event)?;
        if let Value::Object(m) = &mut v {
            m.insert("event".into(), json!("archive"));
            m.insert("generation".into(), json!(generation));
            m.insert("id".into(), json!(id));
        }
        self.emit(v)
    }

    fn generation(&mut self, generation: usize, population: &[Individual], archive: &Archive<Individual>) -> Result<()> {
        let pop: Vec<Value> = population
            .iter()
            .map(|i| {
                json!({
                    "id": i.id,
                    "f_accuracy": i.fitness.f_accuracy,
                    "f_similarity": i.fitness.f_similarity,
                    "rank": i.rank,
                    "crowding": i.crowding,
                })
            })
            .collect();
        let members: Vec<u64> = archive.members().iter().map(|m| m.id).collect();
        self.emit(json!({
            "event": "generation",
            "generation": generation,
            "population": pop,
            "archive": members,
            "archive_min_accuracy": archive.min_accuracy(),
        }))
    }
}

fn check_thresholds(variant: Variant, setup: &SearchSetup<'_>) -> Result<()> {
    let th = &setup.thresholds;
    if th.profile != setup.ports.profile {
        return Err(Error::Config(format!(
            "thresholds were calibrated for {} but the ports serve {}",
            th.profile, setup.ports.profile
        )));
    }
    let needs = match variant {
        Variant::Multi | Variant::Nogan | Variant::Pix => Some(variant.metric()),
        Variant::Single | Variant::Random => None,
    };
    if let Some(m) = needs {
        if th.metric != m {
            return Err(Error::Config(format!(
                "variant {variant} needs a t_diversity calibrated for {m} distance, thresholds hold {}",
                th.metric
            )));
        }
    }
    Ok(())
}

/// Runs one variant, streaming its manifest into `manifest`. On failure the
/// events emitted so far are flushed before the error is returned.
pub fn run_variant<W: Write>(setup: &SearchSetup<'_>, variant: Variant, manifest: W) -> Result<RunOutput> {
    setup.params.validate()?;
    setup.gates.validate(setup.ports.profile)?;
    check_thresholds(variant, setup)?;
    let mut gates = setup.gates;
    if variant == Variant::Nogan {
        gates.use_delta_gate = false;
    }
    let eval = Evaluator {
        ports: setup.ports.fresh_counters(),
        gates,
        thresholds: setup.thresholds,
        identity: variant == Variant::Nogan,
    };
    let mut manifest = Manifest { out: manifest };
    let result = run_inner(setup, variant, &eval, &mut manifest);
    let flushed = manifest.flush();
    let output = result?;
    flushed?;
    Ok(output)
}

/// The multi-objective search.
pub fn run_search<W: Write>(setup: &SearchSetup<'_>, manifest: W) -> Result<RunOutput> {
    run_variant(setup, Variant::Multi, manifest)
}

fn run_inner<W: Write>(
    setup: &SearchSetup<'_>,
    variant: Variant,
    eval: &Evaluator,
    manifest: &mut Manifest<W>,
) -> Result<RunOutput> {
    manifest.emit(json!({
        "event": "start",
        "variant": variant,
        "seed": setup.seed,
        "profile": setup.ports.profile,
        "params": setup.params,
        "gates": eval.gates,
        "thresholds": setup.thresholds,
        "bounds": setup.ports.bounds,
    }))?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let (members, evaluations) = match variant {
        Variant::Random => random_baseline(setup, eval, manifest, &mut rng)?,
        _ => evolve(setup, variant, eval, manifest, &mut rng)?,
    };
    let calls = eval.ports.calls();
    manifest.emit(json!({
        "event": "end",
        "evaluations": evaluations,
        "members": members.len(),
        "calls": calls,
    }))?;
    Ok(RunOutput {
        variant,
        seed: setup.seed,
        members,
        evaluations,
        calls,
    })
}

fn random_baseline<W: Write>(
    setup: &SearchSetup<'_>,
    eval: &Evaluator,
    manifest: &mut Manifest<W>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Individual>, u64)> {
    let total = setup.params.population_size * setup.params.generations;
    let genomes: Vec<Genome> = (0..total).map(|_| setup.ports.bounds.sample(rng)).collect();
    let mut kept = Vec::new();
    let mut next_id = 0u64;
    for chunk in genomes.chunks(RANDOM_BATCH) {
        let batch = eval.evaluate_all(next_id, 0, chunk.to_vec())?;
        next_id += batch.len() as u64;
        for i in batch {
            manifest.evaluation(&i)?;
            if i.is_relevant() {
                kept.push(i);
            }
        }
    }
    Ok((kept, next_id))
}

fn refresh_similarity(archive: &Archive<Individual>, population: &mut [Individual]) -> Result<()> {
    let t = archive.t_diversity();
    population.par_iter_mut().try_for_each(|i| {
        let d = archive.distance_from_closest(i)?;
        i.fitness.f_similarity = similarity_from_distance(d, t);
        Ok(())
    })
}

fn assign_rank(population: &mut [Individual]) {
    let fitness: Vec<FitnessPair> = population.iter().map(|i| i.fitness).collect();
    let (rank, crowding) = rank_and_crowd(&fitness);
    for (i, (r, c)) in population.iter_mut().zip(rank.into_iter().zip(crowding)) {
        i.rank = r;
        i.crowding = c;
    }
}

/// Lower accuracy first, then lower index.
fn accuracy_order(population: &[Individual], a: usize, b: usize) -> std::cmp::Ordering {
    population[a]
        .fitness
        .f_accuracy
        .total_cmp(&population[b].fitness.f_accuracy)
        .then(a.cmp(&b))
}

fn evolve<W: Write>(
    setup: &SearchSetup<'_>,
    variant: Variant,
    eval: &Evaluator,
    manifest: &mut Manifest<W>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Individual>, u64)> {
    let p = &setup.params;
    let n = p.population_size;
    let bounds = &setup.ports.bounds;
    let ops = p.operators();
    let single = variant == Variant::Single;
    let policy = if single { ArchivePolicy::KeepAll } else { ArchivePolicy::Diverse };
    let mut archive = Archive::new(setup.thresholds.metric, setup.thresholds.t_diversity, policy);

    // r random populations; the one holding the lowest accuracy seeds the search
    let genomes: Vec<Genome> = (0..p.initial_populations * n).map(|_| bounds.sample(rng)).collect();
    let mut initial = eval.evaluate_all(0, 0, genomes)?;
    let mut next_id = initial.len() as u64;
    refresh_similarity(&archive, &mut initial)?;
    for i in &initial {
        manifest.evaluation(i)?;
    }
    let best = initial
        .iter()
        .enumerate()
        .min_by(|(a, x), (b, y)| x.fitness.f_accuracy.total_cmp(&y.fitness.f_accuracy).then(a.cmp(b)))
        .map(|(k, _)| k / n)
        .expect("at least one initial population");
    manifest.emit(json!({"event": "initial_population", "selected": best}))?;
    let mut population: Vec<Individual> = initial.drain(best * n..(best + 1) * n).collect();
    drop(initial);
    for i in &population {
        let event = archive.update(i.clone())?;
        manifest.archive(0, i.id, &event)?;
    }
    assign_rank(&mut population);
    manifest.generation(0, &population, &archive)?;

    for g in 1..=p.generations {
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let pick = |rng: &mut ChaCha8Rng| {
                if single {
                    binary_tournament(n, rng, |a, b| accuracy_order(&population, a, b))
                } else {
                    binary_tournament(n, rng, |a, b| crowded_order_of(&population, a, b))
                }
            };
            let a = pick(rng)?;
            let b = pick(rng)?;
            let (c1, c2) = sbx_crossover(&population[a].genome, &population[b].genome, bounds, &ops, rng);
            offspring.push(polynomial_mutation(&c1, bounds, &ops, rng));
            offspring.push(polynomial_mutation(&c2, bounds, &ops, rng));
        }
        let children = eval.evaluate_all(next_id, g, offspring)?;
        next_id += children.len() as u64;
        for i in &children {
            manifest.evaluation(i)?;
        }

        let mut combined = population;
        combined.extend(children);
        refresh_similarity(&archive, &mut combined)?;
        for i in &combined {
            let event = archive.update(i.clone())?;
            manifest.archive(g, i.id, &event)?;
        }
        refresh_similarity(&archive, &mut combined)?;
        assign_rank(&mut combined);

        let mut order: Vec<usize> = (0..combined.len()).collect();
        if single {
            order.sort_by(|&a, &b| accuracy_order(&combined, a, b));
        } else {
            order.sort_by(|&a, &b| crowded_order_of(&combined, a, b));
        }
        order.truncate(n);
        let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
        population = order.iter().map(|&k| slots[k].take().expect("distinct survivors")).collect();
        manifest.generation(g, &population, &archive)?;
    }
    Ok((archive.into_members(), next_id))
}

fn crowded_order_of(population: &[Individual], a: usize, b: usize) -> std::cmp::Ordering {
    population[a]
        .rank
        .cmp(&population[b].rank)
        .then(population[b].crowding.total_cmp(&population[a].crowding))
        .then(a.cmp(&b))
}
