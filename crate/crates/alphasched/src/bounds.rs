//! Lower bounds and certificates: the single-machine mean-busy-time bound,
//! the slot-indexed time relaxation and its dual, dual-fitting certificates
//! built from greedy-dispatch runs, and small brute-force oracles.

use std::collections::BTreeMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::assign::{run_ga, GaRun};
use crate::model::{Distribution, Job, UnrelatedInstance};
use crate::util::{checked_lcm, gcd_u64, neumaier_sum, rationalize};
use crate::wspt::{schedule_of, VirtualSchedule};
use crate::{Error, Result};

/// Sum of w*(M + pbar/2) over a virtual schedule.
pub fn surrogate_total(vs: &VirtualSchedule) -> f64 {
    let terms: Vec<f64> = vs
        .jobs()
        .map(|(id, w, p)| w * (vs.mean_busy_time(id).expect("inserted job") + 0.5 * p))
        .collect();
    neumaier_sum(&terms)
}

/// Sum of w*M over a virtual schedule.
pub fn mean_busy_total(vs: &VirtualSchedule) -> f64 {
    let terms: Vec<f64> = vs
        .jobs()
        .map(|(id, w, _)| w * vs.mean_busy_time(id).expect("inserted job"))
        .collect();
    neumaier_sum(&terms)
}

/// Single-machine lower bound on the expected weighted completion time of
/// any policy: sum of w*(M + pbar/2) in the preemptive schedule of the
/// deterministic counterparts.
pub fn single_machine_lower_bound(jobs: &[(Job, f64)]) -> Result<f64> {
    Ok(surrogate_total(&schedule_of(jobs)?))
}

/// Result of exhaustively checking the subset inequalities
/// sum_{j in S} pbar_j M_j >= (sum pbar) * (r_min(S) + sum pbar / 2).
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetCheck {
    pub feasible: bool,
    /// Job ids of the subset with the smallest slack.
    pub worst_subset: Vec<u32>,
    pub slack: f64,
}

/// Check a mean-busy-time vector against every nonempty subset inequality.
pub fn subset_feasibility_check(
    m_vector: &BTreeMap<u32, f64>,
    jobs: &[(Job, f64)],
) -> Result<SubsetCheck> {
    const LIMIT: usize = 15;
    let n = jobs.len();
    if n > LIMIT {
        return Err(Error::SubsetTooLarge {
            got: n,
            limit: LIMIT,
        });
    }
    for (job, _) in jobs {
        if !m_vector.contains_key(&job.id) {
            return Err(Error::JobNotFound(job.id));
        }
    }
    let mut worst_slack = f64::INFINITY;
    let mut worst_mask = 0usize;
    for mask in 1usize..(1 << n) {
        let mut load = 0.0;
        let mut lhs = 0.0;
        let mut r_min = f64::INFINITY;
        for (k, (job, pbar)) in jobs.iter().enumerate() {
            if mask & (1 << k) != 0 {
                load += pbar;
                lhs += pbar * m_vector[&job.id];
                r_min = r_min.min(job.release);
            }
        }
        let slack = lhs - load * (r_min + 0.5 * load);
        if slack < worst_slack {
            worst_slack = slack;
            worst_mask = mask;
        }
    }
    let worst_subset = jobs
        .iter()
        .enumerate()
        .filter(|(k, _)| worst_mask & (1 << k) != 0)
        .map(|(_, (job, _))| job.id)
        .collect();
    Ok(SubsetCheck {
        feasible: worst_slack >= -1e-9,
        worst_subset,
        slack: worst_slack,
    })
}

/// The slot-indexed relaxation after scaling every release date and
/// expected time to even integers. Variables y_{ijt} live on integer slots
/// t in {r_j, ..., T-1}; the objective is stated in scaled time units and
/// converted back through `sigma`.
#[derive(Debug, Clone)]
pub struct LprModel {
    pub machines: usize,
    pub job_ids: Vec<u32>,
    pub weights: Vec<f64>,
    /// Scaled (even-integer) release dates, one per job.
    pub releases: Vec<u64>,
    /// Scaled (even-integer) expected times, `pbars[i][j]`.
    pub pbars: Vec<Vec<u64>>,
    /// Scaled slot horizon T = max_i (max_j r_j + sum_j pbar_ij).
    pub horizon: u64,
    /// Scaled time = original time * sigma.0 / sigma.1, exactly.
    pub sigma: (u64, u64),
}

fn rational_of(x: f64, what: &str) -> Result<(u64, u64)> {
    rationalize(x, 1e-9, 1_000_000_000).ok_or_else(|| {
        Error::ScalingFailed(format!("{what} = {x} has no small rational form"))
    })
}

/// Build the relaxation for an instance. Times are rationalized at 1e-9
/// precision, then scaled by sigma = 2*lcm(denominators)/gcd(numerators) so
/// that every release and expected time becomes an even integer.
pub fn build_lpr(inst: &UnrelatedInstance, cap: u64) -> Result<LprModel> {
    inst.validate()?;
    let n = inst.n();
    let m = inst.m();
    // values: releases first, then expected times machine-major.
    let mut fracs: Vec<(u64, u64)> = Vec::with_capacity(n + m * n);
    for job in &inst.jobs {
        fracs.push(rational_of(job.release, "release")?);
    }
    for i in 0..m {
        for j in 0..n {
            fracs.push(rational_of(inst.pbar(i, j), "expected time")?);
        }
    }
    let mut lcm = 1u64;
    for &(_, den) in &fracs {
        lcm = checked_lcm(lcm, den).ok_or_else(|| {
            Error::ScalingFailed("denominator lcm overflows".into())
        })?;
    }
    let mut ints = Vec::with_capacity(fracs.len());
    let mut gcd = 0u64;
    for &(num, den) in &fracs {
        let v = (num as u128) * ((lcm / den) as u128);
        if v > u64::MAX as u128 {
            return Err(Error::ScalingFailed("scaled value overflows".into()));
        }
        ints.push(v as u64);
        gcd = gcd_u64(gcd, v as u64);
    }
    if gcd == 0 {
        return Err(Error::ScalingFailed("all times are zero".into()));
    }
    // Scaled value = 2 * v / gcd, always an even integer.
    let scale = |v: u64| v / gcd * 2;
    let releases: Vec<u64> = ints[..n].iter().map(|&v| scale(v)).collect();
    let mut pbars = Vec::with_capacity(m);
    for i in 0..m {
        let row: Vec<u64> = ints[n + i * n..n + (i + 1) * n]
            .iter()
            .map(|&v| scale(v))
            .collect();
        if row.iter().any(|&p| p == 0) {
            return Err(Error::ScalingFailed(
                "an expected time rationalizes to zero".into(),
            ));
        }
        pbars.push(row);
    }
    let horizon = (0..m)
        .map(|i| {
            let load: u64 = pbars[i].iter().sum();
            releases.iter().max().copied().unwrap_or(0) + load
        })
        .max()
        .unwrap_or(0);
    if horizon > cap {
        return Err(Error::HorizonCapExceeded {
            required: horizon,
            cap,
        });
    }
    let reduce = gcd_u64(2 * lcm, gcd);
    Ok(LprModel {
        machines: m,
        job_ids: inst.jobs.iter().map(|j| j.id).collect(),
        weights: inst.jobs.iter().map(|j| j.weight).collect(),
        releases,
        pbars,
        horizon,
        sigma: (2 * lcm / reduce, gcd / reduce),
    })
}

impl LprModel {
    pub fn n(&self) -> usize {
        self.job_ids.len()
    }

    /// Multiply an original-units time by this to get scaled units.
    pub fn scale_factor(&self) -> f64 {
        self.sigma.0 as f64 / self.sigma.1 as f64
    }

    /// The even-integer deterministic counterpart instance this model
    /// describes (weights kept, times scaled).
    pub fn scaled_instance(&self) -> Result<UnrelatedInstance> {
        let jobs: Vec<Job> = self
            .job_ids
            .iter()
            .zip(&self.weights)
            .zip(&self.releases)
            .map(|((&id, &weight), &release)| Job {
                id,
                weight,
                release: release as f64,
            })
            .collect();
        let dists: Vec<Vec<Distribution>> = self
            .pbars
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&p| Distribution::Deterministic { value: p as f64 })
                    .collect()
            })
            .collect();
        UnrelatedInstance::new(self.machines, jobs, dists)
    }

    /// Objective coefficient of y_{ijt} in scaled units.
    fn coef(&self, i: usize, j: usize, t: u64) -> f64 {
        self.weights[j] * ((t as f64 + 0.5) / self.pbars[i][j] as f64 + 0.5)
    }

    /// Export in the plain text LP interchange format (objective, rows,
    /// bounds). Lines starting with a backslash are comments.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::new();
        out.push_str("\\ slot-indexed relaxation; times scaled by ");
        out.push_str(&format!("{}/{}\n", self.sigma.0, self.sigma.1));
        out.push_str("Minimize\n obj:");
        let mut first = true;
        for i in 0..self.machines {
            for j in 0..self.n() {
                for t in self.releases[j]..self.horizon {
                    let sep = if first { " " } else { " + " };
                    first = false;
                    out.push_str(&format!("{sep}{} y_{i}_{j}_{t}", self.coef(i, j, t)));
                }
            }
        }
        out.push_str("\nSubject To\n");
        for j in 0..self.n() {
            out.push_str(&format!(" assign_{j}:"));
            let mut first = true;
            for i in 0..self.machines {
                for t in self.releases[j]..self.horizon {
                    let sep = if first { " " } else { " + " };
                    first = false;
                    out.push_str(&format!("{sep}{} y_{i}_{j}_{t}", 1.0 / self.pbars[i][j] as f64));
                }
            }
            out.push_str(" = 1\n");
        }
        for i in 0..self.machines {
            for t in 0..self.horizon {
                let vars: Vec<String> = (0..self.n())
                    .filter(|&j| t >= self.releases[j])
                    .map(|j| format!("y_{i}_{j}_{t}"))
                    .collect();
                if !vars.is_empty() {
                    out.push_str(&format!(" cap_{i}_{t}: {} <= 1\n", vars.join(" + ")));
                }
            }
        }
        out.push_str("Bounds\n");
        for i in 0..self.machines {
            for j in 0..self.n() {
                for t in self.releases[j]..self.horizon {
                    out.push_str(&format!(" 0 <= y_{i}_{j}_{t} <= 1\n"));
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

/// An optimal solution of the relaxation.
#[derive(Debug, Clone)]
pub struct LprSolution {
    /// Optimal value in original time units.
    pub objective: f64,
    /// Optimal value in scaled units (objective * scale factor).
    pub scaled_objective: f64,
    /// Nonzero slot variables (i, j, t) -> value.
    pub y: BTreeMap<(usize, usize, u64), f64>,
}

/// Solve the relaxation with a simplex method.
pub fn solve_lpr(model: &LprModel) -> Result<LprSolution> {
    let mut prob = Problem::new(OptimizationDirection::Minimize);
    // vars[i][j] holds handles for t in releases[j]..horizon.
    let mut vars: Vec<Vec<Vec<Variable>>> = Vec::with_capacity(model.machines);
    for i in 0..model.machines {
        let mut row = Vec::with_capacity(model.n());
        for j in 0..model.n() {
            let handles: Vec<Variable> = (model.releases[j]..model.horizon)
                .map(|t| prob.add_var(model.coef(i, j, t), (0.0, 1.0)))
                .collect();
            row.push(handles);
        }
        vars.push(row);
    }
    for j in 0..model.n() {
        let mut expr = Vec::new();
        for i in 0..model.machines {
            let inv = 1.0 / model.pbars[i][j] as f64;
            for v in &vars[i][j] {
                expr.push((*v, inv));
            }
        }
        prob.add_constraint(&expr, ComparisonOp::Eq, 1.0);
    }
    for i in 0..model.machines {
        for t in 0..model.horizon {
            let expr: Vec<(Variable, f64)> = (0..model.n())
                .filter(|&j| t >= model.releases[j])
                .map(|j| (vars[i][j][(t - model.releases[j]) as usize], 1.0))
                .collect();
            if !expr.is_empty() {
                prob.add_constraint(&expr, ComparisonOp::Le, 1.0);
            }
        }
    }
    let sol = prob
        .solve()
        .map_err(|e| Error::LpSolve(format!("simplex failed: {e}")))?;
    let mut y = BTreeMap::new();
    for i in 0..model.machines {
        for j in 0..model.n() {
            for (k, v) in vars[i][j].iter().enumerate() {
                let val = sol[*v];
                if val > 1e-12 {
                    y.insert((i, j, model.releases[j] + k as u64), val);
                }
            }
        }
    }
    let scaled = sol.objective();
    Ok(LprSolution {
        objective: scaled / model.scale_factor(),
        scaled_objective: scaled,
        y,
    })
}

/// A dual solution for the relaxation: chi per job (free) and psi per
/// machine-slot (nonnegative), in scaled units.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub chi: BTreeMap<u32, f64>,
    /// psi[i][t] for t in 0..horizon.
    pub psi: Vec<Vec<f64>>,
}

impl DualCertificate {
    /// Certificate value sum(chi) - sum(psi), scaled units.
    pub fn value(&self) -> f64 {
        let chis: Vec<f64> = self.chi.values().copied().collect();
        let psis: Vec<f64> = self.psi.iter().flatten().copied().collect();
        neumaier_sum(&chis) - neumaier_sum(&psis)
    }
}

/// Remaining weighted fractions per slot for one machine's final virtual
/// schedule: for slot t the value is half the sum of w_k * iota_k(2t).
fn psi_row(vs: &VirtualSchedule, horizon: u64) -> Vec<f64> {
    let ids: Vec<(u32, f64, f64)> = vs.jobs().collect();
    let mut index_of = BTreeMap::new();
    let mut processed = vec![0.0f64; ids.len()];
    for (k, (id, _, _)) in ids.iter().enumerate() {
        index_of.insert(*id, k);
    }
    let pieces = vs.pieces();
    let mut ptr = 0usize;
    let mut out = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let s = (2 * t) as f64;
        while ptr < pieces.len() && pieces[ptr].end <= s {
            processed[index_of[&pieces[ptr].job]] += pieces[ptr].end - pieces[ptr].start;
            ptr += 1;
        }
        let mut partial = 0.0;
        let mut partial_job = usize::MAX;
        if ptr < pieces.len() && pieces[ptr].start < s {
            partial = s - pieces[ptr].start;
            partial_job = index_of[&pieces[ptr].job];
        }
        let mut val = 0.0;
        for (k, (_, w, p)) in ids.iter().enumerate() {
            let mut done = processed[k];
            if k == partial_job {
                done += partial;
            }
            val += w * (1.0 - done / p).max(0.0);
        }
        out.push(0.5 * val);
    }
    out
}

/// Build the dual-fitting certificate from a greedy-dispatch run on the
/// scaled even-integer instance: chi_j is half the winning cost quote and
/// psi_{it} is half the remaining weighted fraction of machine i's final
/// virtual schedule sampled at time 2t.
pub fn build_dual_certificate(run: &GaRun, model: &LprModel) -> DualCertificate {
    let chi = run
        .trace
        .iter()
        .map(|t| (t.job, 0.5 * t.costs[t.chosen]))
        .collect();
    let psi = run
        .machines
        .iter()
        .map(|ms| psi_row(ms.virtual_schedule(), model.horizon))
        .collect();
    DualCertificate { chi, psi }
}

/// Outcome of checking a certificate against a model and the solved
/// relaxation.
#[derive(Debug, Clone)]
pub struct CertificateCheck {
    pub feasible: bool,
    /// Smallest dual-constraint slack over all (i, j, t >= r_j).
    pub min_slack: f64,
    /// Certificate value in scaled units.
    pub dual_value_scaled: f64,
    /// Certificate value in original units.
    pub dual_value: f64,
    /// OPT minus certificate value, original units; nonnegative up to
    /// solver tolerance by weak duality.
    pub weak_duality_gap: f64,
}

/// Check psi signs and every dual constraint
/// chi_j / pbar_ij <= psi_it + w_j ((t + 1/2)/pbar_ij + 1/2)
/// for t >= r_j, then compare the certificate value with the optimum.
pub fn verify_dual_certificate(
    cert: &DualCertificate,
    model: &LprModel,
    lp: &LprSolution,
) -> Result<CertificateCheck> {
    if cert.psi.len() != model.machines
        || cert.psi.iter().any(|row| row.len() != model.horizon as usize)
    {
        return Err(Error::InvalidParameter(
            "certificate psi dimensions do not match the model".into(),
        ));
    }
    for id in &model.job_ids {
        if !cert.chi.contains_key(id) {
            return Err(Error::JobNotFound(*id));
        }
    }
    let mut min_slack = f64::INFINITY;
    let mut signs_ok = true;
    for row in &cert.psi {
        for &v in row {
            if v < 0.0 {
                signs_ok = false;
            }
        }
    }
    for i in 0..model.machines {
        for j in 0..model.n() {
            let chi = cert.chi[&model.job_ids[j]];
            let pbar = model.pbars[i][j] as f64;
            for t in model.releases[j]..model.horizon {
                let slack = cert.psi[i][t as usize] + model.coef(i, j, t) - chi / pbar;
                if slack < min_slack {
                    min_slack = slack;
                }
            }
        }
    }
    if !min_slack.is_finite() {
        // No constraints at all (horizon 0) — vacuously feasible.
        min_slack = 0.0;
    }
    let dual_value_scaled = cert.value();
    let dual_value = dual_value_scaled / model.scale_factor();
    Ok(CertificateCheck {
        feasible: signs_ok && min_slack >= -1e-9,
        min_slack,
        dual_value_scaled,
        dual_value,
        weak_duality_gap: lp.objective - dual_value,
    })
}

/// Full certification pipeline for one instance: scale, dispatch greedily,
/// build and verify the certificate, solve the relaxation, and compare
/// everything.
#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub model: LprModel,
    pub lp: LprSolution,
    pub certificate: DualCertificate,
    pub check: CertificateCheck,
    /// Greedy surrogate total in original units.
    pub surrogate: f64,
    /// Certificate value >= surrogate/4 (scaled units, tolerance 1e-9).
    pub quarter_surrogate_ok: bool,
    /// Surrogate <= 4*OPT within 1e-6 relative.
    pub four_opt_ok: bool,
    /// Weak duality gap >= -1e-7.
    pub gap_ok: bool,
    pub certified: bool,
}

pub fn certify_instance(inst: &UnrelatedInstance, cap: u64) -> Result<CertifyReport> {
    let model = build_lpr(inst, cap)?;
    let scaled = model.scaled_instance()?;
    let run = run_ga(&scaled)?;
    let certificate = build_dual_certificate(&run, &model);
    let lp = solve_lpr(&model)?;
    let check = verify_dual_certificate(&certificate, &model, &lp)?;
    let surrogate_scaled = run.surrogate;
    let surrogate = surrogate_scaled / model.scale_factor();
    let quarter_surrogate_ok =
        check.dual_value_scaled >= 0.25 * surrogate_scaled - 1e-9 * surrogate_scaled.abs().max(1.0);
    let four_opt_ok =
        surrogate <= 4.0 * lp.objective + 1e-6 * lp.objective.abs().max(1.0);
    let gap_ok = check.weak_duality_gap >= -1e-7 * lp.objective.abs().max(1.0);
    let certified = check.feasible && quarter_surrogate_ok && four_opt_ok && gap_ok;
    Ok(CertifyReport {
        model,
        lp,
        certificate,
        check,
        surrogate,
        quarter_surrogate_ok,
        four_opt_ok,
        gap_ok,
        certified,
    })
}

/// Which realized objective a brute-force enumeration minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteObjective {
    WeightedCompletion,
    WeightedMeanBusy,
}

/// Expected objective of the best fixed-assignment nonpreemptive list
/// schedule, by exhausting assignments, per-machine list orders, and all
/// outcomes of discrete processing-time laws. Only Deterministic and
/// TwoPoint distributions are supported; sizes are capped for enumeration.
pub fn brute_force_best_fixed_assignment(
    inst: &UnrelatedInstance,
    objective: BruteObjective,
) -> Result<f64> {
    inst.validate()?;
    let n = inst.n();
    let m = inst.m();
    if n > 8 {
        return Err(Error::SubsetTooLarge { got: n, limit: 8 });
    }
    if (m as f64).powi(n as i32) > 2e5 {
        return Err(Error::InvalidParameter(
            "too many assignments to enumerate".into(),
        ));
    }
    let outcomes: Vec<Vec<Vec<(f64, f64)>>> = inst
        .dists
        .iter()
        .map(|row| row.iter().map(discrete_outcomes).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let mut assignment = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut total = 0.0;
        for i in 0..m {
            let members: Vec<usize> = (0..n).filter(|&j| assignment[j] == i).collect();
            if !members.is_empty() {
                total += best_list_value(inst, i, &members, &outcomes[i], objective);
            }
        }
        best = best.min(total);
        // Next assignment in mixed-radix order.
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best);
            }
            assignment[k] += 1;
            if assignment[k] < m {
                break;
            }
            assignment[k] = 0;
            k += 1;
        }
    }
}

fn discrete_outcomes(d: &Distribution) -> Result<Vec<(f64, f64)>> {
    match *d {
        Distribution::Deterministic { value } => Ok(vec![(value, 1.0)]),
        Distribution::TwoPoint { x1, q, x2 } => Ok(vec![(x1, q), (x2, 1.0 - q)]),
        _ => Err(Error::InvalidParameter(
            "brute force needs Deterministic or TwoPoint laws".into(),
        )),
    }
}

/// Best expected objective over all list orders of `members` on machine
/// `i`, exact expectation over all outcome combinations.
fn best_list_value(
    inst: &UnrelatedInstance,
    _machine: usize,
    members: &[usize],
    outcomes: &[Vec<(f64, f64)>],
    objective: BruteObjective,
) -> f64 {
    let mut order: Vec<usize> = members.to_vec();
    let mut best = f64::INFINITY;
    permute(&mut order, 0, &mut |perm| {
        let value = expected_list_value(inst, perm, outcomes, objective);
        if value < best {
            best = value;
        }
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for swap in k..items.len() {
        items.swap(k, swap);
        permute(items, k + 1, visit);
        items.swap(k, swap);
    }
}

fn expected_list_value(
    inst: &UnrelatedInstance,
    order: &[usize],
    outcomes: &[Vec<(f64, f64)>],
    objective: BruteObjective,
) -> f64 {
    let mut total = 0.0;
    let mut times = vec![0.0f64; order.len()];
    enumerate_outcomes(order, outcomes, 0, 1.0, &mut times, &mut |prob, times| {
        let mut frontier = 0.0f64;
        let mut value = 0.0;
        for (pos, &j) in order.iter().enumerate() {
            let job = &inst.jobs[j];
            let p = times[pos];
            let start = frontier.max(job.release);
            let completion = start + p;
            frontier = completion;
            value += match objective {
                BruteObjective::WeightedCompletion => job.weight * completion,
                BruteObjective::WeightedMeanBusy => job.weight * (completion - 0.5 * p),
            };
        }
        total += prob * value;
    });
    total
}

fn enumerate_outcomes(
    order: &[usize],
    outcomes: &[Vec<(f64, f64)>],
    pos: usize,
    prob: f64,
    times: &mut Vec<f64>,
    visit: &mut impl FnMut(f64, &[f64]),
) {
    if pos == order.len() {
        visit(prob, times);
        return;
    }
    let j = order[pos];
    for &(value, q) in &outcomes[j] {
        if q == 0.0 {
            continue;
        }
        times[pos] = value;
        enumerate_outcomes(order, outcomes, pos + 1, prob * q, times, visit);
    }
}
