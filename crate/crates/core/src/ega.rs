//! Elite genetic algorithm over SSB replacement beams.
//!
//! Each designated cell swaps one baseline slot for a codeword and power chosen
//! by the search. The objective is the minimum coverage SINR over the highway
//! points, valid only when every point associates with the cell its segment was
//! assigned to.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{
    coverage_sinr, rsrp_row, select_serving_from_row, AssociationResult, BeamPlan, BeamSlot,
};
use crate::channel::ChannelSet;
use crate::codebook::Codebook;
use crate::config::{EgaConfig, MutationScope, PowerSampling};
use crate::rng::{self, TAG_EGA};
use crate::units::{dbm_to_mw, linear_to_db, mw_to_dbm};
use crate::{Error, Result};

/// Lower end of the dB power range when powers are sampled in dB.
pub const DB_SAMPLING_SPAN_DB: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgaParams {
    pub n_pop: usize,
    pub n_parents: usize,
    pub n_elites: usize,
    pub p_cross: f64,
    pub p_mut: f64,
    pub max_iters: usize,
    pub stop_iters: usize,
    pub power_sampling: PowerSampling,
    pub mutation_scope: MutationScope,
    pub seed: u64,
}

impl EgaParams {
    pub fn from_config(cfg: &EgaConfig, seed: u64) -> Self {
        Self {
            n_pop: cfg.n_pop,
            n_parents: cfg.n_parents,
            n_elites: cfg.n_elites,
            p_cross: cfg.p_cross,
            p_mut: cfg.p_mut,
            max_iters: cfg.max_iters,
            stop_iters: cfg.stop_iters,
            power_sampling: cfg.power_sampling,
            mutation_scope: cfg.mutation_scope,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pop == 0 {
            return Err(Error::Config("ega.n_pop must be at least 1".into()));
        }
        if self.n_parents == 0 || self.n_parents > self.n_pop {
            return Err(Error::Config("ega.n_parents must lie in 1..=n_pop".into()));
        }
        if self.n_elites > self.n_parents {
            return Err(Error::Config("ega.n_elites must not exceed n_parents".into()));
        }
        for (key, p) in [("ega.p_cross", self.p_cross), ("ega.p_mut", self.p_mut)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{key} must lie in [0, 1]")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("ega.max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// `[codeword per designated cell | power in mW per designated cell]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub codewords: Vec<usize>,
    pub powers_mw: Vec<f64>,
}

impl Genome {
    pub fn len(&self) -> usize {
        self.codewords.len() + self.powers_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    fn key(&self) -> Vec<u64> {
        self.codewords
            .iter()
            .map(|&c| c as u64)
            .chain(self.powers_mw.iter().map(|p| p.to_bits()))
            .collect()
    }

    fn swap_gene(&mut self, other: &mut Genome, k: usize) {
        let n = self.codewords.len();
        if k < n {
            std::mem::swap(&mut self.codewords[k], &mut other.codewords[k]);
        } else {
            std::mem::swap(&mut self.powers_mw[k - n], &mut other.powers_mw[k - n]);
        }
    }
}

/// Objective value with the bookkeeping used to rank infeasible genomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    /// Minimum SINR in dB, or `-inf` when the association constraint is violated.
    pub value: f64,
    /// Highway points not served by their assigned cell.
    pub violations: usize,
    /// Minimum SINR over all points regardless of feasibility.
    pub min_sinr_db: f64,
}

impl Fitness {
    pub fn is_feasible(&self) -> bool {
        self.violations == 0
    }

    /// Total order: feasible by value; infeasible by fewer violations then higher SINR.
    pub fn rank_cmp(&self, other: &Fitness) -> Ordering {
        match (self.is_feasible(), other.is_feasible()) {
            (true, true) => self.value.total_cmp(&other.value),
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => other
                .violations
                .cmp(&self.violations)
                .then(self.min_sinr_db.total_cmp(&other.min_sinr_db)),
        }
    }

    fn from_parts(min_sinr_db: f64, violations: usize) -> Self {
        Self {
            value: if violations == 0 {
                min_sinr_db
            } else {
                f64::NEG_INFINITY
            },
            violations,
            min_sinr_db,
        }
    }
}

/// Search space and objective.
pub trait Objective: Sync {
    fn n_designated(&self) -> usize;
    fn n_codewords(&self) -> usize;
    fn p_max_mw(&self) -> f64;
    fn evaluate(&self, genome: &Genome) -> Fitness;
}

/// Copies `baseline` and writes each designated cell's replacement beam into
/// its replaced slot, keeping that slot's sweep index.
pub fn apply_individual(
    genome: &Genome,
    baseline: &BeamPlan,
    designated: &[usize],
    replaced_slots: &[usize],
) -> BeamPlan {
    let mut plan = baseline.clone();
    for (d, &b) in designated.iter().enumerate() {
        let slot = plan.slot_mut(b, replaced_slots[d]);
        *slot = BeamSlot {
            active: true,
            codeword: genome.codewords[d],
            power_dbm: mw_to_dbm(genome.powers_mw[d]),
            sweep_index: slot.sweep_index,
        };
    }
    plan
}

/// Slot with the fewest associated ground users per designated cell; ties to
/// the lowest slot id. Inactive slots are skipped.
pub fn choose_replaced_slots(baseline: &BeamPlan, designated: &[usize], ground: &AssociationResult) -> Vec<usize> {
    designated
        .iter()
        .map(|&b| {
            let mut counts = vec![0usize; baseline.n_slots];
            for a in &ground.ues {
                if a.serving_sector == b {
                    counts[a.serving_slot] += 1;
                }
            }
            (0..baseline.n_slots)
                .filter(|&s| baseline.slot(b, s).active)
                .min_by_key(|&s| (counts[s], s))
                .unwrap_or(0)
        })
        .collect()
}

/// Beam-selection problem on the highway points.
pub struct PlanningProblem<'a> {
    pub baseline: &'a BeamPlan,
    pub codebook: &'a Codebook,
    /// Fading-averaged links of the highway points.
    pub channels: &'a ChannelSet,
    /// Required serving sector of each highway point.
    pub required: Vec<usize>,
    pub designated: Vec<usize>,
    pub replaced_slots: Vec<usize>,
    pub noise_mw: f64,
    pub p_max_mw: f64,
    fast: FastFitness,
}

/// Precomputed per-point quantities that do not depend on the genome.
struct FastFitness {
    n_slots: usize,
    /// Per point: best fixed entry `(flat index, rsrp)` over active non-replaced slots.
    fixed_best: Vec<Option<(usize, f64)>>,
    /// Per point, sector-major: fixed RSRP summed per sweep index (`n_sectors * n_sweep`).
    fixed_by_sweep: Vec<Vec<f64>>,
    /// Per point, per designated cell: `beta (|hᵀw|² + diffuse)` for every codeword.
    gains: Vec<Vec<Vec<f64>>>,
    n_sweep: usize,
    sweep_of_replaced: Vec<usize>,
}

impl<'a> PlanningProblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        baseline: &'a BeamPlan,
        codebook: &'a Codebook,
        channels: &'a ChannelSet,
        required: Vec<usize>,
        designated: Vec<usize>,
        replaced_slots: Vec<usize>,
        noise_mw: f64,
        p_max_mw: f64,
    ) -> Self {
        assert_eq!(required.len(), channels.n_rx);
        assert_eq!(designated.len(), replaced_slots.len());
        let n_slots = baseline.n_slots;
        let n_sweep = baseline.slots.iter().map(|s| s.sweep_index + 1).max().unwrap_or(1);
        let replaced: Vec<usize> = designated
            .iter()
            .zip(&replaced_slots)
            .map(|(&b, &s)| b * n_slots + s)
            .collect();
        let sweep_of_replaced = replaced.iter().map(|&i| baseline.slots[i].sweep_index).collect();
        let per_point: Vec<_> = (0..channels.n_rx)
            .into_par_iter()
            .map(|r| {
                let links = channels.rx_links(r);
                let row = rsrp_row(links, baseline, codebook);
                let mut best: Option<(usize, f64)> = None;
                let mut by_sweep = vec![0.0; baseline.n_sectors * n_sweep];
                for (i, slot) in baseline.slots.iter().enumerate() {
                    if !slot.active || replaced.contains(&i) {
                        continue;
                    }
                    if best.is_none_or(|(_, v)| row[i] > v) {
                        best = Some((i, row[i]));
                    }
                    by_sweep[(i / n_slots) * n_sweep + slot.sweep_index] += row[i];
                }
                let gains: Vec<Vec<f64>> = designated
                    .iter()
                    .map(|&b| {
                        codebook
                            .codewords
                            .iter()
                            .map(|c| links[b].beam_gain(&c.weights))
                            .collect()
                    })
                    .collect();
                (best, by_sweep, gains)
            })
            .collect();
        let mut fast = FastFitness {
            n_slots,
            fixed_best: Vec::new(),
            fixed_by_sweep: Vec::new(),
            gains: Vec::new(),
            n_sweep,
            sweep_of_replaced,
        };
        for (best, by_sweep, gains) in per_point {
            fast.fixed_best.push(best);
            fast.fixed_by_sweep.push(by_sweep);
            fast.gains.push(gains);
        }
        Self {
            baseline,
            codebook,
            channels,
            required,
            designated,
            replaced_slots,
            noise_mw,
            p_max_mw,
            fast,
        }
    }

    pub fn plan_for(&self, genome: &Genome) -> BeamPlan {
        apply_individual(genome, self.baseline, &self.designated, &self.replaced_slots)
    }

    /// Fitness through the full plan, association and SINR path.
    pub fn reference_fitness(&self, genome: &Genome) -> Fitness {
        let plan = self.plan_for(genome);
        let mut min_sinr = f64::INFINITY;
        let mut violations = 0;
        for r in 0..self.channels.n_rx {
            let row = rsrp_row(self.channels.rx_links(r), &plan, self.codebook);
            let serving = select_serving_from_row(&row, &plan).expect("baseline has active beams");
            if serving.0 != self.required[r] {
                violations += 1;
            }
            min_sinr = min_sinr.min(coverage_sinr(&row, &plan, serving, self.noise_mw));
        }
        Fitness::from_parts(min_sinr, violations)
    }

    fn fast_fitness(&self, genome: &Genome) -> Fitness {
        let f = &self.fast;
        let n_d = self.designated.len();
        // same dBm round trip as the plan representation
        let p: Vec<f64> = genome.powers_mw.iter().map(|&x| dbm_to_mw(mw_to_dbm(x))).collect();
        let idx: Vec<usize> = (0..n_d)
            .map(|d| self.designated[d] * f.n_slots + self.replaced_slots[d])
            .collect();
        let mut min_sinr = f64::INFINITY;
        let mut violations = 0;
        let mut vals = vec![0.0; n_d];
        for r in 0..self.channels.n_rx {
            for d in 0..n_d {
                vals[d] = f.gains[r][d][genome.codewords[d]] * p[d];
            }
            let mut best = f.fixed_best[r];
            for d in 0..n_d {
                best = match best {
                    Some((i, v)) if v > vals[d] || (v == vals[d] && i < idx[d]) => Some((i, v)),
                    _ => Some((idx[d], vals[d])),
                };
            }
            let (bi, signal) = best.expect("at least one active beam");
            let sector = bi / f.n_slots;
            if sector != self.required[r] {
                violations += 1;
            }
            let sweep = match (0..n_d).find(|&d| idx[d] == bi) {
                Some(d) => f.sweep_of_replaced[d],
                None => self.baseline.slots[bi].sweep_index,
            };
            let mut interference = 0.0;
            for b in 0..self.baseline.n_sectors {
                if b == sector {
                    continue;
                }
                interference += f.fixed_by_sweep[r][b * f.n_sweep + sweep];
                for d in 0..n_d {
                    if self.designated[d] == b && f.sweep_of_replaced[d] == sweep {
                        interference += vals[d];
                    }
                }
            }
            min_sinr = min_sinr.min(linear_to_db(signal / (interference + self.noise_mw)));
        }
        Fitness::from_parts(min_sinr, violations)
    }
}

impl Objective for PlanningProblem<'_> {
    fn n_designated(&self) -> usize {
        self.designated.len()
    }

    fn n_codewords(&self) -> usize {
        self.codebook.len()
    }

    fn p_max_mw(&self) -> f64 {
        self.p_max_mw
    }

    fn evaluate(&self, genome: &Genome) -> Fitness {
        self.fast_fitness(genome)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_fitness_db: f64,
    pub violations: usize,
    pub min_sinr_db: f64,
    pub evals: usize,
}

impl TraceRow {
    pub fn fitness(&self) -> Fitness {
        Fitness {
            value: self.best_fitness_db,
            violations: self.violations,
            min_sinr_db: self.min_sinr_db,
        }
    }
}

/// Best-ever fitness per iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitnessTrace {
    pub rows: Vec<TraceRow>,
}

impl FitnessTrace {
    /// Writes `iteration, best_fitness_db, violations, min_sinr_db, evals`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "best_fitness_db", "violations", "min_sinr_db", "evals"])?;
        for r in &self.rows {
            w.write_record([
                r.iteration.to_string(),
                format_db(r.best_fitness_db),
                r.violations.to_string(),
                format_db(r.min_sinr_db),
                r.evals.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn format_db(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.6}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgaResult {
    pub best: Genome,
    pub best_fitness: Fitness,
    pub trace: FitnessTrace,
    pub iterations: usize,
}

fn sample_power(rng: &mut ChaCha8Rng, p_max_mw: f64, sampling: PowerSampling) -> f64 {
    match sampling {
        PowerSampling::Linear => p_max_mw * (1.0 - rng.random::<f64>()),
        PowerSampling::Db => dbm_to_mw(mw_to_dbm(p_max_mw) - DB_SAMPLING_SPAN_DB * rng.random::<f64>()),
    }
}

fn random_genome<O: Objective + ?Sized>(obj: &O, params: &EgaParams, rng: &mut ChaCha8Rng) -> Genome {
    let n = obj.n_designated();
    let codewords = (0..n).map(|_| rng.random_range(0..obj.n_codewords())).collect();
    let powers_mw = (0..n)
        .map(|_| sample_power(rng, obj.p_max_mw(), params.power_sampling))
        .collect();
    Genome { codewords, powers_mw }
}

fn resample_gene<O: Objective + ?Sized>(g: &mut Genome, k: usize, obj: &O, params: &EgaParams, rng: &mut ChaCha8Rng) {
    let n = g.codewords.len();
    if k < n {
        g.codewords[k] = rng.random_range(0..obj.n_codewords());
    } else {
        g.powers_mw[k - n] = sample_power(rng, obj.p_max_mw(), params.power_sampling);
    }
}

fn mutate<O: Objective + ?Sized>(g: &mut Genome, obj: &O, params: &EgaParams, rng: &mut ChaCha8Rng) {
    let n_genes = 2 * g.codewords.len();
    match params.mutation_scope {
        MutationScope::Gene => {
            for k in 0..n_genes {
                if rng.random::<f64>() <= params.p_mut {
                    resample_gene(g, k, obj, params, rng);
                }
            }
        }
        MutationScope::Individual => {
            if n_genes > 0 && rng.random::<f64>() <= params.p_mut {
                let k = rng.random_range(0..n_genes);
                resample_gene(g, k, obj, params, rng);
            }
        }
    }
}

struct Evaluator<'o, O: Objective + ?Sized> {
    obj: &'o O,
    cache: HashMap<Vec<u64>, Fitness>,
    evals: usize,
}

impl<O: Objective + ?Sized> Evaluator<'_, O> {
    fn evaluate_all(&mut self, pop: &[Genome]) -> Vec<Fitness> {
        let keys: Vec<Vec<u64>> = pop.iter().map(Genome::key).collect();
        let mut missing: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, k) in keys.iter().enumerate() {
            if !self.cache.contains_key(k) && seen.insert(k.clone()) {
                missing.push(i);
            }
        }
        let obj = self.obj;
        let fresh: Vec<Fitness> = missing.par_iter().map(|&i| obj.evaluate(&pop[i])).collect();
        self.evals += fresh.len();
        for (&i, f) in missing.iter().zip(fresh) {
            self.cache.insert(keys[i].clone(), f);
        }
        keys.iter().map(|k| self.cache[k]).collect()
    }
}

/// Runs the elite genetic algorithm and returns the best genome ever seen.
pub fn run<O: Objective + ?Sized>(params: &EgaParams, obj: &O) -> Result<EgaResult> {
    params.validate()?;
    let n_genes = 2 * obj.n_designated();
    let mut init_rng = rng::stream(params.seed, &[TAG_EGA, u64::MAX]);
    let mut pop: Vec<Genome> = (0..params.n_pop)
        .map(|_| random_genome(obj, params, &mut init_rng))
        .collect();
    let mut ev = Evaluator {
        obj,
        cache: HashMap::new(),
        evals: 0,
    };
    let mut best: Option<(Genome, Fitness)> = None;
    let mut last_improvement = 0;
    let mut trace = FitnessTrace::default();
    let mut iterations = 0;

    for it in 0..params.max_iters {
        iterations = it + 1;
        let fit = ev.evaluate_all(&pop);
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[b].rank_cmp(&fit[a]));
        let top = order[0];
        let improved = match &best {
            None => true,
            Some((_, f)) => fit[top].rank_cmp(f) == Ordering::Greater,
        };
        if improved {
            best = Some((pop[top].clone(), fit[top]));
            last_improvement = it;
        }
        let best_fit = best.as_ref().expect("set on first iteration").1;
        trace.rows.push(TraceRow {
            iteration: it,
            best_fitness_db: best_fit.value,
            violations: best_fit.violations,
            min_sinr_db: best_fit.min_sinr_db,
            evals: ev.evals,
        });
        if it - last_improvement >= params.stop_iters {
            break;
        }
        if it + 1 == params.max_iters {
            break;
        }

        let elites: Vec<Genome> = order[..params.n_elites].iter().map(|&i| pop[i].clone()).collect();
        let parents: Vec<&Genome> = order[..params.n_parents].iter().map(|&i| &pop[i]).collect();
        let mut rng = rng::stream(params.seed, &[TAG_EGA, it as u64]);
        let mut next: Vec<Genome> = Vec::with_capacity(params.n_pop);
        while next.len() < params.n_pop {
            let mut a = parents[rng.random_range(0..parents.len())].clone();
            let mut b = parents[rng.random_range(0..parents.len())].clone();
            for k in 0..n_genes {
                if rng.random::<f64>() <= params.p_cross {
                    a.swap_gene(&mut b, k);
                }
            }
            next.push(a);
            if next.len() < params.n_pop {
                next.push(b);
            }
        }
        for g in next.iter_mut() {
            mutate(g, obj, params, &mut rng);
        }
        let start = params.n_pop - params.n_elites;
        for (slot, e) in next[start..].iter_mut().zip(elites) {
            *slot = e;
        }
        pop = next;
    }
    let (best, best_fitness) = best.expect("at least one iteration");
    Ok(EgaResult {
        best,
        best_fitness,
        trace,
        iterations,
    })
}
