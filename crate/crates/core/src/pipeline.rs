//! End-to-end experiment: highway assignment, baseline and optimized plans,
//! and evaluation over snapshots.

use serde::{Deserialize, Serialize};

use crate::association::{associate, baseline_plan, AssociationResult, BeamPlan};
use crate::channel::{ChannelModel, ChannelSet};
use crate::codebook::{build_dl_codebook, build_ssb_codebook, Codebook};
use crate::ega::{self, choose_replaced_slots, EgaParams, EgaResult, PlanningProblem};
use crate::evaluation::{evaluate_plan, ground_snapshot, snapshot_uavs, PlanStats, UeRecord};
use crate::mama::{assign_segments, SegmentAssignment};
use crate::scenario::{Scenario, User};
use crate::units::dbm_to_mw;
use crate::Result;

/// Ground-user drop and channel snapshot reserved for planning.
pub const PLANNING_DRAW: u64 = u64::MAX;

pub const PLAN_NAMES: [&str; 2] = ["baseline", "optimized"];

/// Codebooks of a scenario.
#[derive(Debug, Clone)]
pub struct Codebooks {
    pub ssb: Codebook,
    pub dl: Codebook,
}

impl Codebooks {
    pub fn build(scenario: &Scenario) -> Self {
        let panel = &scenario.sectors[0].panel;
        let cb = &scenario.config.codebook;
        Self {
            ssb: build_ssb_codebook(panel, (cb.ssb_oversampling[0], cb.ssb_oversampling[1])),
            dl: build_dl_codebook(panel, (cb.dl_oversampling[0], cb.dl_oversampling[1])),
        }
    }
}

/// Everything produced while planning the optimized SSB configuration.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub assignment: SegmentAssignment,
    /// Required serving sector per highway point.
    pub required: Vec<usize>,
    pub replaced_slots: Vec<usize>,
    pub baseline: BeamPlan,
    pub optimized: BeamPlan,
    pub ega: EgaResult,
}

impl PlanOutcome {
    pub fn plans(&self) -> [&BeamPlan; 2] {
        [&self.baseline, &self.optimized]
    }
}

/// Everything the genetic search needs, computed before it starts.
#[derive(Debug, Clone)]
pub struct PlanningInputs {
    pub assignment: SegmentAssignment,
    /// Required serving sector per highway point.
    pub required: Vec<usize>,
    pub baseline: BeamPlan,
    pub replaced_slots: Vec<usize>,
    /// Fading-averaged links of the highway points.
    pub highway_channels: ChannelSet,
}

impl PlanningInputs {
    /// Segment assignment, baseline plan and replaced-slot choice.
    pub fn build(scenario: &Scenario, books: &Codebooks) -> Result<Self> {
        let model = ChannelModel::new(scenario);
        let radio = &scenario.radio;
        let stacks: Vec<_> = (0..scenario.n_sectors())
            .map(|b| model.stack_highway_channels(b))
            .collect();
        let assignment = assign_segments(&stacks, &scenario.highway.segments, radio.prb_noise_mw());
        let required = (0..scenario.highway.n_points())
            .map(|r| assignment.serving[scenario.highway.segment_of(r)])
            .collect();
        let baseline = baseline_plan(scenario, &books.ssb);
        let planning_users = scenario.ground_users(PLANNING_DRAW);
        let planning_channels = model.realize(&planning_users, PLANNING_DRAW);
        let ground = associate(&planning_channels, &baseline, &books.ssb, radio.ssb_noise_mw())?;
        let replaced_slots = choose_replaced_slots(&baseline, &assignment.designated, &ground);
        let highway_channels = model.averaged(&scenario.highway_receivers());
        Ok(Self {
            assignment,
            required,
            baseline,
            replaced_slots,
            highway_channels,
        })
    }

    pub fn problem<'a>(&'a self, scenario: &Scenario, books: &'a Codebooks) -> PlanningProblem<'a> {
        PlanningProblem::new(
            &self.baseline,
            &books.ssb,
            &self.highway_channels,
            self.required.clone(),
            self.assignment.designated.clone(),
            self.replaced_slots.clone(),
            scenario.radio.ssb_noise_mw(),
            dbm_to_mw(scenario.radio.max_ssb_power_dbm),
        )
    }
}

/// Segment assignment, replaced-slot choice and the genetic search.
pub fn plan(scenario: &Scenario, books: &Codebooks, params: &EgaParams) -> Result<PlanOutcome> {
    let inputs = PlanningInputs::build(scenario, books)?;
    let problem = inputs.problem(scenario, books);
    let result = ega::run(params, &problem)?;
    let optimized = problem.plan_for(&result.best);
    let PlanningInputs {
        assignment,
        required,
        baseline,
        replaced_slots,
        ..
    } = inputs;
    Ok(PlanOutcome {
        assignment,
        required,
        replaced_slots,
        baseline,
        optimized,
        ega: result,
    })
}

/// Evaluation of both plans on shared snapshots.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Per plan, all receivers of all snapshots.
    pub records: [Vec<UeRecord>; 2],
    pub stats: [PlanStats; 2],
    /// Receivers and association of snapshot 0, per plan.
    pub snapshot0_users: Vec<User>,
    pub snapshot0_association: [AssociationResult; 2],
}

/// Runs `snapshots` snapshots: ground users redrawn each time and the UAV
/// train advanced by `d_iud / snapshots`.
pub fn evaluate(scenario: &Scenario, books: &Codebooks, plans: [&BeamPlan; 2], snapshots: usize) -> Result<ExperimentResult> {
    let model = ChannelModel::new(scenario);
    let h = &scenario.config.highway;
    let length = scenario.highway.total_length_m;
    let n_uav = ((length / h.uav_spacing_m) * (1.0 + 1e-12)).floor().max(1.0) as usize;
    let mut records: [Vec<UeRecord>; 2] = [Vec::new(), Vec::new()];
    let mut snapshot0 = None;
    for s in 0..snapshots {
        let g = ground_snapshot(&model, s);
        let uavs = snapshot_uavs(scenario, n_uav, h.uav_spacing_m, s, snapshots, g.users.len());
        let channels = g.channels.concat(model.realize(&uavs, s as u64));
        let users: Vec<User> = g.users.into_iter().chain(uavs).collect();
        let mut assoc0 = Vec::new();
        for (p, plan) in plans.iter().enumerate() {
            let (assoc, recs) = evaluate_plan(&channels, &users, plan, &books.ssb, &books.dl, &scenario.radio, s)?;
            records[p].extend(recs);
            if s == 0 {
                assoc0.push(assoc);
            }
        }
        if s == 0 {
            let b = assoc0.pop().expect("two plans");
            let a = assoc0.pop().expect("two plans");
            snapshot0 = Some((users, [a, b]));
        }
    }
    let (snapshot0_users, snapshot0_association) = snapshot0.expect("at least one snapshot");
    let stats = [PlanStats::from_records(&records[0])?, PlanStats::from_records(&records[1])?];
    Ok(ExperimentResult {
        records,
        stats,
        snapshot0_users,
        snapshot0_association,
    })
}

/// Headline numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub designated_cells: Vec<usize>,
    pub replaced_slots: Vec<usize>,
    pub segment_serving: Vec<usize>,
    pub ega_best_fitness_db: f64,
    pub ega_feasible: bool,
    pub ega_violations: usize,
    pub ega_iterations: usize,
    pub ega_evaluations: usize,
    pub snapshots: usize,
    pub baseline: PlanStats,
    pub optimized: PlanStats,
}

impl RunSummary {
    pub fn new(outcome: &PlanOutcome, result: &ExperimentResult, snapshots: usize) -> Self {
        Self {
            designated_cells: outcome.assignment.designated.clone(),
            replaced_slots: outcome.replaced_slots.clone(),
            segment_serving: outcome.assignment.serving.clone(),
            ega_best_fitness_db: outcome.ega.best_fitness.value,
            ega_feasible: outcome.ega.best_fitness.is_feasible(),
            ega_violations: outcome.ega.best_fitness.violations,
            ega_iterations: outcome.ega.iterations,
            ega_evaluations: outcome.ega.trace.rows.last().map_or(0, |r| r.evals),
            snapshots,
            baseline: result.stats[0].clone(),
            optimized: result.stats[1].clone(),
        }
    }
}
