//! NSGA-II over 198-slot assignment sequences, and the permutation study.
//!
//! Objectives are minimized. They are generic over the float type; the
//! optimizer proper works on three objectives (area, PDP, accuracy loss),
//! while the sorting and crowding helpers accept any dimension.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Debug;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::booth::MultiplierConfig;
use crate::error::{Error, Result};
use crate::sequence::{AssignmentSequence, SLOT_COUNT};

/// `(area, pdp, accuracy_loss)`.
pub type Objectives<F> = [F; 3];

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates<F: Float>(a: &[F], b: &[F]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (&x, &y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strictly |= x < y;
    }
    strictly
}

/// Fronts of non-dominated points, each listed in increasing index order.
pub fn fast_nondominated_sort<F: Float, P: AsRef<[F]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates(a, b) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates(b, a) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of `front` (indices into `points`).
///
/// Per objective, members holding the minimum or maximum value are
/// boundaries and get infinity; an interior member adds the gap between the
/// nearest distinct values below and above it, over the objective's range.
/// Objectives constant across the front contribute nothing. Ties are handled
/// by value, so the result does not depend on the order of `front`.
pub fn crowding_distance<F: Float, P: AsRef<[F]>>(points: &[P], front: &[usize]) -> Vec<F> {
    let mut dist = vec![F::zero(); front.len()];
    if front.len() <= 2 {
        return vec![F::infinity(); front.len()];
    }
    let dims = points[front[0]].as_ref().len();
    for m in 0..dims {
        let value = |i: usize| points[front[i]].as_ref()[m];
        let mut distinct: Vec<F> = (0..front.len()).map(value).collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        distinct.dedup();
        if distinct.len() < 2 {
            continue;
        }
        let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
        let range = hi - lo;
        for (i, d) in dist.iter_mut().enumerate() {
            let v = value(i);
            if v == lo || v == hi {
                *d = F::infinity();
                continue;
            }
            let pos = distinct.partition_point(|&x| x < v);
            *d = *d + (distinct[pos + 1] - distinct[pos - 1]) / range;
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    /// Allowed multiplier types, normally the top K of the accuracy ranking.
    pub allowed: Vec<MultiplierConfig>,
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Probability that each slot of a child is redrawn.
    pub mutation_rate: f64,
    pub seed: u64,
    /// Images scored per fitness evaluation during the search.
    pub eval_subset: usize,
    /// Cache fitness per concrete ordering instead of per multiset.
    pub order_sensitive: bool,
}

impl OptimizerParams {
    /// The `k` most accurate types of the fixed ranking, `k` in 2..=8.
    pub fn top_k(k: usize) -> Result<Self> {
        if !(2..=MultiplierConfig::ACCURACY_RANKING.len()).contains(&k) {
            return Err(Error::InvalidArgument(format!("K must be in 2..=8, got {k}")));
        }
        Ok(Self::with_allowed(MultiplierConfig::ACCURACY_RANKING[..k].to_vec()))
    }

    /// Any non-empty allowed set, including a single forced type.
    pub fn with_allowed(allowed: Vec<MultiplierConfig>) -> Self {
        OptimizerParams {
            allowed,
            population: 50,
            generations: 40,
            crossover_rate: 0.9,
            mutation_rate: 2.0 / SLOT_COUNT as f64,
            seed: 1,
            eval_subset: 500,
            order_sensitive: false,
        }
    }

    pub fn k(&self) -> usize {
        self.allowed.len()
    }

    fn validate(&self) -> Result<()> {
        let mut sorted = self.allowed.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.is_empty() || sorted.len() != self.allowed.len() {
            return Err(Error::InvalidArgument("allowed types must be non-empty and distinct".into()));
        }
        if self.population < 2 {
            return Err(Error::InvalidArgument("population must be at least 2".into()));
        }
        for (name, p) in [("crossover rate", self.crossover_rate), ("mutation rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self::top_k(3).expect("3 is a valid K")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual<F> {
    pub genome: AssignmentSequence,
    pub objectives: Objectives<F>,
    pub rank: usize,
    pub crowding: F,
}

impl<F: Float> Individual<F> {
    pub fn area(&self) -> F {
        self.objectives[0]
    }

    pub fn pdp(&self) -> F {
        self.objectives[1]
    }

    pub fn accuracy_loss(&self) -> F {
        self.objectives[2]
    }
}

/// The front file record: `{slots, area, pdp, accuracy_loss}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRecord {
    pub slots: Vec<MultiplierConfig>,
    pub area: f64,
    pub pdp: f64,
    pub accuracy_loss: f64,
}

impl<F: Float> From<&Individual<F>> for FrontRecord {
    fn from(ind: &Individual<F>) -> Self {
        let f = |x: F| x.to_f64().expect("finite objective");
        FrontRecord {
            slots: ind.genome.slots().to_vec(),
            area: f(ind.area()),
            pdp: f(ind.pdp()),
            accuracy_loss: f(ind.accuracy_loss()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParetoFront<F> {
    pub members: Vec<Individual<F>>,
}

impl<F: Float> ParetoFront<F> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// No member dominates another.
    pub fn is_sound(&self) -> bool {
        self.members.iter().all(|a| self.members.iter().all(|b| !dominates(&a.objectives, &b.objectives)))
    }

    pub fn records(&self) -> Vec<FrontRecord> {
        self.members.iter().map(FrontRecord::from).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome<F> {
    pub front: ParetoFront<F>,
    /// Per generation (initial population first), the best value of each
    /// objective in the population.
    pub best_per_generation: Vec<Objectives<F>>,
    /// Fitness calls actually made (cache misses).
    pub evaluations: usize,
}

struct FitnessCache<'f, F, E> {
    fitness: &'f E,
    order_sensitive: bool,
    by_multiset: HashMap<[u16; MultiplierConfig::COUNT], Objectives<F>>,
    by_sequence: HashMap<Vec<MultiplierConfig>, Objectives<F>>,
    evaluations: usize,
}

impl<'f, F, E> FitnessCache<'f, F, E>
where
    F: Float + Send + Sync + Debug,
    E: Fn(&AssignmentSequence) -> Objectives<F> + Sync,
{
    fn lookup(&self, g: &AssignmentSequence) -> Option<Objectives<F>> {
        if self.order_sensitive {
            self.by_sequence.get(g.slots()).copied()
        } else {
            self.by_multiset.get(&g.composition()).copied()
        }
    }

    /// Evaluates the genomes missing from the cache (in parallel), then
    /// returns everyone's objectives in input order.
    fn evaluate(&mut self, genomes: &[AssignmentSequence]) -> Result<Vec<Objectives<F>>> {
        let mut pending: Vec<AssignmentSequence> = Vec::new();
        for g in genomes {
            let rep = if self.order_sensitive { g.clone() } else { g.canonical() };
            if self.lookup(g).is_none() && !pending.contains(&rep) {
                pending.push(rep);
            }
        }
        let fitness = self.fitness;
        let results: Vec<Objectives<F>> = pending.par_iter().map(fitness).collect();
        for (g, obj) in pending.iter().zip(&results) {
            if obj.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "fitness returned {obj:?} for genome with composition {:?}",
                    g.multiset()
                )));
            }
            if self.order_sensitive {
                self.by_sequence.insert(g.slots().to_vec(), *obj);
            } else {
                self.by_multiset.insert(g.composition(), *obj);
            }
        }
        self.evaluations += pending.len();
        Ok(genomes.iter().map(|g| self.lookup(g).expect("just evaluated")).collect())
    }
}

/// Rank and crowding for every point; returns `(rank, crowding)` per index.
fn rank_and_crowd<F: Float>(objectives: &[Objectives<F>]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<F>) {
    let fronts = fast_nondominated_sort(objectives);
    let mut rank = vec![0; objectives.len()];
    let mut crowd = vec![F::zero(); objectives.len()];
    for (r, front) in fronts.iter().enumerate() {
        for (&i, d) in front.iter().zip(crowding_distance(objectives, front)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (fronts, rank, crowd)
}

fn random_genome(rng: &mut ChaCha8Rng, allowed: &[MultiplierConfig]) -> AssignmentSequence {
    AssignmentSequence::new((0..SLOT_COUNT).map(|_| *allowed.choose(rng).expect("non-empty")).collect())
        .expect("198 slots")
}

fn mutate(rng: &mut ChaCha8Rng, g: &mut AssignmentSequence, allowed: &[MultiplierConfig], rate: f64) {
    if allowed.len() < 2 {
        return;
    }
    for slot in 0..SLOT_COUNT {
        if rng.gen_bool(rate) {
            let current = g.slots()[slot];
            // a random allowed type other than the current one
            let mut pick = allowed[rng.gen_range(0..allowed.len() - 1)];
            if pick == current {
                pick = allowed[allowed.len() - 1];
            }
            g.set(slot, pick);
        }
    }
}

/// Runs NSGA-II and returns the final non-dominated front.
///
/// The initial population holds one uniform sequence per allowed type and
/// random sequences for the rest. Each generation breeds a full population
/// of children by binary tournament on (rank, crowding), uniform crossover
/// and per-slot mutation, then keeps the best half of parents plus children.
pub fn evolve<F, E>(params: &OptimizerParams, fitness: E) -> Result<EvolveOutcome<F>>
where
    F: Float + Send + Sync + Debug,
    E: Fn(&AssignmentSequence) -> Objectives<F> + Sync,
{
    params.validate()?;
    let allowed = &params.allowed;
    let n = params.population;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache = FitnessCache {
        fitness: &fitness,
        order_sensitive: params.order_sensitive,
        by_multiset: HashMap::new(),
        by_sequence: HashMap::new(),
        evaluations: 0,
    };

    let mut population: Vec<AssignmentSequence> =
        allowed.iter().take(n).map(|&c| AssignmentSequence::uniform(c)).collect();
    while population.len() < n {
        population.push(random_genome(&mut rng, allowed));
    }
    let mut objectives = cache.evaluate(&population)?;
    let (_, mut rank, mut crowd) = rank_and_crowd(&objectives);
    let best = |objs: &[Objectives<F>]| -> Objectives<F> {
        std::array::from_fn(|m| objs.iter().map(|o| o[m]).fold(F::infinity(), F::min))
    };
    let mut history = vec![best(&objectives)];

    for _ in 0..params.generations {
        let better = |i: usize, j: usize| rank[i] < rank[j] || (rank[i] == rank[j] && crowd[i] > crowd[j]);
        let tournament = |rng: &mut ChaCha8Rng| {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if better(j, i) {
                j
            } else {
                i
            }
        };
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let (p1, p2) = (tournament(&mut rng), tournament(&mut rng));
            let (mut c1, mut c2) = (population[p1].clone(), population[p2].clone());
            if rng.gen_bool(params.crossover_rate) {
                for slot in 0..SLOT_COUNT {
                    if rng.gen_bool(0.5) {
                        c1.set(slot, population[p2].slots()[slot]);
                        c2.set(slot, population[p1].slots()[slot]);
                    }
                }
            }
            mutate(&mut rng, &mut c1, allowed, params.mutation_rate);
            mutate(&mut rng, &mut c2, allowed, params.mutation_rate);
            children.push(c1);
            if children.len() < n {
                children.push(c2);
            }
        }
        let child_objectives = cache.evaluate(&children)?;

        let mut merged = population;
        merged.extend(children);
        let mut merged_obj = objectives;
        merged_obj.extend(child_objectives);
        let (fronts, _, merged_crowd) = rank_and_crowd(&merged_obj);
        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for front in fronts {
            if keep.len() + front.len() <= n {
                keep.extend(front);
            } else {
                let mut last = front;
                last.sort_by(|&a, &b| {
                    merged_crowd[b].partial_cmp(&merged_crowd[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
                });
                keep.extend(last.into_iter().take(n - keep.len()));
            }
            if keep.len() == n {
                break;
            }
        }
        population = keep.iter().map(|&i| merged[i].clone()).collect();
        objectives = keep.iter().map(|&i| merged_obj[i]).collect();
        (_, rank, crowd) = rank_and_crowd(&objectives);
        history.push(best(&objectives));
    }

    let (fronts, _, _) = rank_and_crowd(&objectives);
    let front0 = &fronts[0];
    let crowding = crowding_distance(&objectives, front0);
    let mut members: Vec<Individual<F>> = Vec::new();
    for (&i, &c) in front0.iter().zip(&crowding) {
        if members.iter().any(|m| m.genome == population[i]) {
            continue;
        }
        members.push(Individual { genome: population[i].clone(), objectives: objectives[i], rank: 0, crowding: c });
    }
    Ok(EvolveOutcome { front: ParetoFront { members }, best_per_generation: history, evaluations: cache.evaluations })
}

/// Default selection from a front: among members cheaper in PDP than the
/// all-Exact baseline, the lowest accuracy loss, then lower PDP, then lower
/// area. If no member beats the baseline, the same order over all members.
pub fn pick_candidate<F: Float>(front: &ParetoFront<F>, baseline_pdp: F) -> Result<&Individual<F>> {
    let order = |a: &&Individual<F>, b: &&Individual<F>| {
        let cmp = |x: F, y: F| x.partial_cmp(&y).unwrap_or(Ordering::Equal);
        cmp(a.accuracy_loss(), b.accuracy_loss()).then(cmp(a.pdp(), b.pdp())).then(cmp(a.area(), b.area()))
    };
    let cheaper = front.members.iter().filter(|m| m.pdp() < baseline_pdp).min_by(order);
    cheaper
        .or_else(|| front.members.iter().min_by(order))
        .ok_or_else(|| Error::InvalidArgument("cannot pick from an empty front".into()))
}

#[derive(Debug, Clone)]
pub struct PermutationStudy<F> {
    pub variants: Vec<(AssignmentSequence, F)>,
}

impl<F: Float> PermutationStudy<F> {
    /// Highest score among the variants.
    pub fn max(&self) -> Option<F> {
        self.variants.iter().map(|(_, a)| *a).reduce(F::max)
    }
}

/// `n_variants` seeded uniform shuffles of `seq`, each scored by `evaluator`.
pub fn permute_study<F, E>(seq: &AssignmentSequence, n_variants: usize, seed: u64, evaluator: E) -> PermutationStudy<F>
where
    F: Float,
    E: Fn(&AssignmentSequence) -> F,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variants = (0..n_variants)
        .map(|_| {
            let mut slots = seq.slots().to_vec();
            slots.shuffle(&mut rng);
            let v = AssignmentSequence::new(slots).expect("same length");
            let score = evaluator(&v);
            (v, score)
        })
        .collect();
    PermutationStudy { variants }
}
