//! NSGA-II over mixed binary/real genomes.
//!
//! The driver owns the population and the RNG; only fitness evaluation runs in
//! parallel, and evaluation is pure, so results do not depend on the thread
//! count. Every evaluated individual is offered to an unbounded archive of
//! nondominated solutions. The archive is the returned front, and its
//! hypervolume (tracked incrementally) forms the per-generation trace.

mod hypervolume;
mod operators;
mod sorting;

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use hypervolume::{exclusive_contribution, hypervolume};
pub use operators::{crossover, hux, mutate, polynomial_mutation, sbx_pair};
pub use sorting::{crowding_distance, dominates, nondominated_sort};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::lstm::{evaluate_all, Genome, LstmShape, ObjectiveVector};

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub n_objectives: usize,
    pub seed: u64,
    pub sbx_eta: f64,
    pub pm_eta: f64,
    pub real_bounds: (f64, f64),
    /// Generations between progress log lines; 0 disables logging.
    pub log_interval: usize,
}

impl Default for MoeaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 100,
            crossover_prob: 1.0,
            mutation_prob: 1.0,
            n_objectives: 5,
            seed: 42,
            sbx_eta: 15.0,
            pm_eta: 20.0,
            real_bounds: (-5.0, 5.0),
            log_interval: 100,
        }
    }
}

impl MoeaConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.population_size;
        if p < 2 || !p.is_multiple_of(2) {
            return Err(Error::usage(format!("population size must be even and > 1, got {p}")));
        }
        if self.generations == 0 {
            return Err(Error::usage("need at least one generation"));
        }
        for (name, v) in [("crossover", self.crossover_prob), ("mutation", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::usage(format!("{name} probability must be in [0, 1], got {v}")));
            }
        }
        if self.n_objectives < 2 {
            return Err(Error::usage(format!(
                "need at least two objectives, got {}",
                self.n_objectives
            )));
        }
        if !(self.sbx_eta > 0.0 && self.pm_eta > 0.0) {
            return Err(Error::usage("distribution indices must be positive"));
        }
        let (lo, hi) = self.real_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::usage(format!("invalid weight bounds [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Mutually nondominated genomes and their objective vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<(Genome, ObjectiveVector)>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn genomes(&self) -> impl Iterator<Item = &Genome> {
        self.members.iter().map(|(g, _)| g)
    }

    pub fn objectives(&self) -> Vec<&ObjectiveVector> {
        self.members.iter().map(|(_, o)| o).collect()
    }
}

/// Something NSGA-II can minimise.
pub trait Problem: Sync {
    fn shape(&self) -> LstmShape;
    fn n_objectives(&self) -> usize;
    fn evaluate(&self, genome: &Genome) -> Result<ObjectiveVector>;
}

/// RMSE of a masked LSTM on each training partition.
pub struct ForecastProblem<'a> {
    partitions: &'a [WindowedDataset],
    shape: LstmShape,
}

impl<'a> ForecastProblem<'a> {
    pub fn new(partitions: &'a [WindowedDataset], hidden: usize) -> Result<Self> {
        let first = partitions
            .first()
            .ok_or_else(|| Error::usage("no training partitions"))?;
        if partitions.iter().any(WindowedDataset::is_empty) {
            return Err(Error::usage("training partitions must be nonempty"));
        }
        let q = first.feature_count();
        if partitions.iter().any(|p| p.feature_count() != q) {
            return Err(Error::usage("training partitions disagree on feature count"));
        }
        Ok(Self {
            partitions,
            shape: LstmShape::new(q, hidden)?,
        })
    }
}

impl Problem for ForecastProblem<'_> {
    fn shape(&self) -> LstmShape {
        self.shape
    }

    fn n_objectives(&self) -> usize {
        self.partitions.len()
    }

    fn evaluate(&self, genome: &Genome) -> Result<ObjectiveVector> {
        evaluate_all(genome, self.partitions)
    }
}

/// Per-generation snapshot handed to observers.
#[derive(Debug)]
pub struct GenerationReport<'a> {
    /// 1-based generation number.
    pub generation: usize,
    pub population: &'a [ObjectiveVector],
    pub hypervolume: f64,
    pub archive_size: usize,
}

pub struct MoeaOutcome {
    pub front: ParetoFront,
    /// Archive hypervolume after each generation.
    pub hypervolume_trace: Vec<f64>,
    /// Reference point the trace is measured against.
    pub reference: Vec<f64>,
}

struct Archive {
    members: Vec<(Genome, ObjectiveVector)>,
    reference: Vec<f64>,
    volume: f64,
}

impl Archive {
    fn new(reference: Vec<f64>) -> Self {
        Self {
            members: Vec::new(),
            reference,
            volume: 0.0,
        }
    }

    fn offer(&mut self, genome: &Genome, obj: &ObjectiveVector) {
        let dominated_or_equal = self
            .members
            .iter()
            .any(|(_, m)| m.0 == obj.0 || dominates(&m.0, &obj.0));
        if dominated_or_equal {
            return;
        }
        let others: Vec<&[f64]> = self.members.iter().map(|(_, m)| m.as_slice()).collect();
        self.volume += exclusive_contribution(&obj.0, &others, &self.reference);
        self.members.retain(|(_, m)| !dominates(&obj.0, &m.0));
        self.members.push((genome.clone(), obj.clone()));
    }
}

struct Ranked {
    rank: Vec<usize>,
    crowding: Vec<f64>,
}

fn rank_population(objs: &[ObjectiveVector]) -> Result<Ranked> {
    let fronts = nondominated_sort(objs)?;
    let mut rank = vec![0; objs.len()];
    let mut crowding = vec![0.0; objs.len()];
    for (r, front) in fronts.iter().enumerate() {
        let members: Vec<&ObjectiveVector> = front.iter().map(|&i| &objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            rank[i] = r;
            crowding[i] = d;
        }
    }
    Ok(Ranked { rank, crowding })
}

/// Binary tournament on (rank ascending, crowding descending); ties go to the
/// first contestant.
fn tournament<R: Rng>(ranked: &Ranked, rng: &mut R) -> usize {
    let n = ranked.rank.len();
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    match ranked.rank[a].cmp(&ranked.rank[b]) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal if ranked.crowding[b] > ranked.crowding[a] => b,
        Ordering::Equal => a,
    }
}

/// Elitist survival: whole fronts first, the last partial front truncated by
/// descending crowding distance.
fn survivors(objs: &[ObjectiveVector], keep: usize) -> Result<Vec<usize>> {
    let mut chosen = Vec::with_capacity(keep);
    for front in nondominated_sort(objs)? {
        if chosen.len() + front.len() <= keep {
            chosen.extend(front);
            continue;
        }
        let members: Vec<&ObjectiveVector> = front.iter().map(|&i| &objs[i]).collect();
        let dist = crowding_distance(&members);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        chosen.extend(order.into_iter().take(keep - chosen.len()).map(|k| front[k]));
        break;
    }
    Ok(chosen)
}

fn random_genome<R: Rng>(shape: LstmShape, bounds: (f64, f64), rng: &mut R) -> Genome {
    let mask = (0..shape.inputs).map(|_| rng.random_bool(0.5)).collect();
    let weights = (0..shape.weight_count())
        .map(|_| rng.random_range(bounds.0..bounds.1))
        .collect();
    Genome::new(shape, mask, weights).expect("shape-consistent genome")
}

fn evaluate_batch<P: Problem>(problem: &P, genomes: &[Genome]) -> Result<Vec<ObjectiveVector>> {
    genomes.par_iter().map(|g| problem.evaluate(g)).collect()
}

/// Runs NSGA-II with the default unit reference point for the trace.
pub fn run_moea<P: Problem>(problem: &P, config: &MoeaConfig) -> Result<MoeaOutcome> {
    run_moea_observed(problem, config, |_| {})
}

/// Runs NSGA-II and calls `observe` after every generation.
pub fn run_moea_observed<P, F>(problem: &P, config: &MoeaConfig, mut observe: F) -> Result<MoeaOutcome>
where
    P: Problem,
    F: FnMut(&GenerationReport<'_>),
{
    config.validate()?;
    if problem.n_objectives() != config.n_objectives {
        return Err(Error::usage(format!(
            "configured for {} objectives but the problem has {}",
            config.n_objectives,
            problem.n_objectives()
        )));
    }
    let shape = problem.shape();
    let reference = vec![1.0; config.n_objectives];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut archive = Archive::new(reference.clone());

    let mut population: Vec<Genome> = (0..config.population_size)
        .map(|_| random_genome(shape, config.real_bounds, &mut rng))
        .collect();
    let mut objectives = evaluate_batch(problem, &population)?;
    for (g, o) in population.iter().zip(&objectives) {
        archive.offer(g, o);
    }

    let mut trace = Vec::with_capacity(config.generations);
    for generation in 1..=config.generations {
        let ranked = rank_population(&objectives)?;
        let mut offspring = Vec::with_capacity(config.population_size);
        while offspring.len() < config.population_size {
            let a = tournament(&ranked, &mut rng);
            let b = tournament(&ranked, &mut rng);
            let (ca, cb) = crossover(&population[a], &population[b], config, &mut rng);
            offspring.push(mutate(&ca, config, &mut rng));
            offspring.push(mutate(&cb, config, &mut rng));
        }
        let offspring_obj = evaluate_batch(problem, &offspring)?;
        for (g, o) in offspring.iter().zip(&offspring_obj) {
            archive.offer(g, o);
        }

        population.extend(offspring);
        objectives.extend(offspring_obj);
        let keep = survivors(&objectives, config.population_size)?;
        population = keep.iter().map(|&i| population[i].clone()).collect();
        objectives = keep.iter().map(|&i| objectives[i].clone()).collect();

        trace.push(archive.volume);
        let report = GenerationReport {
            generation,
            population: &objectives,
            hypervolume: archive.volume,
            archive_size: archive.members.len(),
        };
        if config.log_interval > 0 && generation % config.log_interval == 0 {
            log_progress(&report);
        }
        observe(&report);
    }

    Ok(MoeaOutcome {
        front: ParetoFront {
            members: archive.members,
        },
        hypervolume_trace: trace,
        reference,
    })
}

fn log_progress(report: &GenerationReport<'_>) {
    let dims = report.population.first().map_or(0, ObjectiveVector::len);
    let best: Vec<String> = (0..dims)
        .map(|k| {
            let b = report
                .population
                .iter()
                .map(|o| o.0[k])
                .fold(f64::INFINITY, f64::min);
            format!("{b:.5}")
        })
        .collect();
    log::info!(
        "generation {}: hypervolume {:.6}, archive {}, best [{}]",
        report.generation,
        report.hypervolume,
        report.archive_size,
        best.join(", ")
    );
}
