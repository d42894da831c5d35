//! Greedy job-to-machine dispatch for unrelated machines.
//!
//! Each machine keeps its own virtual schedule. An arriving job is charged,
//! per machine, the exact increase of sum w*(M + pbar/2) that inserting its
//! counterpart there would cause, and goes to the cheapest machine. Because
//! jobs are dispatched in release order, the charged costs telescope: their
//! sum equals the surrogate objective of the final virtual schedules.

use std::collections::BTreeMap;

use crate::model::{Job, UnrelatedInstance};
use crate::util::neumaier_sum;
use crate::wspt::{priority_precedes, VirtualSchedule};
use crate::Result;

/// One machine's dispatch state: its virtual schedule plus the costs that
/// have been charged to it.
#[derive(Debug, Clone, Default)]
pub struct MachineState {
    vs: VirtualSchedule,
    charged: Vec<f64>,
}

impl MachineState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn virtual_schedule(&self) -> &VirtualSchedule {
        &self.vs
    }

    /// Increase of sum w*(M + pbar/2) if `job` were inserted here with
    /// expected time `pbar`. The job's own term is its release plus the
    /// remaining higher-priority work at release plus its full expected
    /// time; on top of that, every lower-priority counterpart has its
    /// remaining fraction pushed back by `pbar`.
    pub fn assignment_cost(&self, job: &Job, pbar: f64) -> f64 {
        let mut higher_remaining = 0.0;
        let mut lower_weight = 0.0;
        for (id, w, p) in self.vs.jobs() {
            let iota = self.vs.remaining_fraction(id, job.release);
            if iota <= 0.0 {
                continue;
            }
            if priority_precedes((w, p, id), (job.weight, pbar, job.id)) {
                higher_remaining += iota * p;
            } else {
                lower_weight += w * iota;
            }
        }
        job.weight * (job.release + pbar + higher_remaining) + lower_weight * pbar
    }

    /// Insert the job here and record the charged cost.
    pub fn assign(&mut self, job: &Job, pbar: f64) -> Result<f64> {
        let cost = self.assignment_cost(job, pbar);
        self.vs.insert_job(job, pbar)?;
        self.charged.push(cost);
        debug_assert!({
            let direct = self.surrogate_direct();
            (direct - self.surrogate()).abs() <= 1e-9 * direct.abs().max(1.0)
        });
        Ok(cost)
    }

    /// Sum of charged costs, which telescopes to the surrogate objective of
    /// the current virtual schedule.
    pub fn surrogate(&self) -> f64 {
        neumaier_sum(&self.charged)
    }

    /// The surrogate objective sum w*(M + pbar/2) recomputed from scratch.
    pub fn surrogate_direct(&self) -> f64 {
        let terms: Vec<f64> = self
            .vs
            .jobs()
            .map(|(id, w, p)| w * (self.vs.mean_busy_time(id).expect("inserted job") + 0.5 * p))
            .collect();
        neumaier_sum(&terms)
    }
}

/// Costs quoted to one job across all machines, and where it went.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTrace {
    pub job: u32,
    pub costs: Vec<f64>,
    pub chosen: usize,
}

/// Result of dispatching a whole instance: final machine states, the
/// job-to-machine map, the per-job cost quotes and the total surrogate.
#[derive(Debug, Clone)]
pub struct GaRun {
    pub machines: Vec<MachineState>,
    pub assignment: BTreeMap<u32, usize>,
    pub trace: Vec<AssignmentTrace>,
    pub surrogate: f64,
}

impl GaRun {
    pub fn machine_of(&self, job: u32) -> Option<usize> {
        self.assignment.get(&job).copied()
    }

    pub fn virtual_schedule(&self, machine: usize) -> &VirtualSchedule {
        self.machines[machine].virtual_schedule()
    }
}

/// Dispatch every job of the instance greedily, in order of release date
/// (ties by id). Cost ties go to the lowest machine index.
pub fn run_ga(inst: &UnrelatedInstance) -> Result<GaRun> {
    let mut order: Vec<usize> = (0..inst.n()).collect();
    order.sort_by(|&a, &b| {
        let ja = &inst.jobs[a];
        let jb = &inst.jobs[b];
        ja.release
            .total_cmp(&jb.release)
            .then(ja.id.cmp(&jb.id))
    });

    let mut machines: Vec<MachineState> = (0..inst.m()).map(|_| MachineState::new()).collect();
    let mut assignment = BTreeMap::new();
    let mut trace = Vec::with_capacity(inst.n());

    for idx in order {
        let job = &inst.jobs[idx];
        let costs: Vec<f64> = (0..inst.m())
            .map(|i| machines[i].assignment_cost(job, inst.pbar(i, idx)))
            .collect();
        let chosen = costs
            .iter()
            .enumerate()
            .min_by(|(ia, ca), (ib, cb)| ca.total_cmp(cb).then(ia.cmp(ib)))
            .map(|(i, _)| i)
            .expect("at least one machine");
        machines[chosen].assign(job, inst.pbar(chosen, idx))?;
        assignment.insert(job.id, chosen);
        trace.push(AssignmentTrace {
            job: job.id,
            costs,
            chosen,
        });
    }

    let per_machine: Vec<f64> = machines.iter().map(|m| m.surrogate()).collect();
    let surrogate = neumaier_sum(&per_machine);
    Ok(GaRun {
        machines,
        assignment,
        trace,
        surrogate,
    })
}
