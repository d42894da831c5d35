//! Problem data: processing-time distributions, jobs, instances,
//! realization sampling and a reproducible random-instance generator.

use crate::rng::{self, PURPOSE_GEN};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A processing-time law. A closed union: every member has closed-form
/// moments and overshoot expectations, which the bound machinery relies on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistSpec", into = "DistSpec")]
pub enum Distribution {
    /// Point mass at `value` (> 0).
    Deterministic { value: f64 },
    /// Exponential with the given mean (> 0).
    Exponential { mean: f64 },
    /// Uniform on [lo, hi], 0 <= lo < hi.
    Uniform { lo: f64, hi: f64 },
    /// Takes x1 with probability q, x2 otherwise; 0 <= x1 < x2, 0 < q < 1.
    TwoPoint { x1: f64, q: f64, x2: f64 },
    /// Takes `scale` with probability q, 0 otherwise; scale > 0, 0 < q <= 1.
    ScaledBernoulli { scale: f64, q: f64 },
}

/// Wire form: {"kind": "...", "params": [...]}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistSpec {
    kind: String,
    params: Vec<f64>,
}

impl TryFrom<DistSpec> for Distribution {
    type Error = Error;

    fn try_from(spec: DistSpec) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if spec.params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidDistribution(format!(
                    "{} expects {} params, got {}",
                    spec.kind,
                    n,
                    spec.params.len()
                )))
            }
        };
        let p = &spec.params;
        let d = match spec.kind.as_str() {
            "Deterministic" => {
                want(1)?;
                Distribution::Deterministic { value: p[0] }
            }
            "Exponential" => {
                want(1)?;
                Distribution::Exponential { mean: p[0] }
            }
            "Uniform" => {
                want(2)?;
                Distribution::Uniform { lo: p[0], hi: p[1] }
            }
            "TwoPoint" => {
                want(3)?;
                Distribution::TwoPoint {
                    x1: p[0],
                    q: p[1],
                    x2: p[2],
                }
            }
            "ScaledBernoulli" => {
                want(2)?;
                Distribution::ScaledBernoulli {
                    scale: p[0],
                    q: p[1],
                }
            }
            other => {
                return Err(Error::InvalidDistribution(format!(
                    "unknown kind {other:?}"
                )))
            }
        };
        d.validate()?;
        Ok(d)
    }
}

impl From<Distribution> for DistSpec {
    fn from(d: Distribution) -> Self {
        let (kind, params) = match d {
            Distribution::Deterministic { value } => ("Deterministic", vec![value]),
            Distribution::Exponential { mean } => ("Exponential", vec![mean]),
            Distribution::Uniform { lo, hi } => ("Uniform", vec![lo, hi]),
            Distribution::TwoPoint { x1, q, x2 } => ("TwoPoint", vec![x1, q, x2]),
            Distribution::ScaledBernoulli { scale, q } => ("ScaledBernoulli", vec![scale, q]),
        };
        DistSpec {
            kind: kind.to_string(),
            params,
        }
    }
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        let fin = |x: f64| x.is_finite();
        match *self {
            Distribution::Deterministic { value } => {
                if !(fin(value) && value > 0.0) {
                    return bad(format!("Deterministic value must be positive, got {value}"));
                }
            }
            Distribution::Exponential { mean } => {
                if !(fin(mean) && mean > 0.0) {
                    return bad(format!("Exponential mean must be positive, got {mean}"));
                }
            }
            Distribution::Uniform { lo, hi } => {
                if !(fin(lo) && fin(hi) && 0.0 <= lo && lo < hi) {
                    return bad(format!("Uniform requires 0 <= lo < hi, got [{lo}, {hi}]"));
                }
            }
            Distribution::TwoPoint { x1, q, x2 } => {
                if !(fin(x1) && fin(x2) && 0.0 <= x1 && x1 < x2) {
                    return bad(format!("TwoPoint requires 0 <= x1 < x2, got {x1}, {x2}"));
                }
                if !(fin(q) && 0.0 < q && q < 1.0) {
                    return bad(format!("TwoPoint requires 0 < q < 1, got {q}"));
                }
            }
            Distribution::ScaledBernoulli { scale, q } => {
                if !(fin(scale) && scale > 0.0) {
                    return bad(format!("ScaledBernoulli scale must be positive, got {scale}"));
                }
                if !(fin(q) && 0.0 < q && q <= 1.0) {
                    return bad(format!("ScaledBernoulli requires 0 < q <= 1, got {q}"));
                }
            }
        }
        Ok(())
    }

    /// Expected value.
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Deterministic { value } => value,
            Distribution::Exponential { mean } => mean,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::TwoPoint { x1, q, x2 } => q * x1 + (1.0 - q) * x2,
            Distribution::ScaledBernoulli { scale, q } => scale * q,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Deterministic { .. } => 0.0,
            Distribution::Exponential { mean } => mean * mean,
            Distribution::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Distribution::TwoPoint { x1, q, x2 } => q * (1.0 - q) * (x2 - x1) * (x2 - x1),
            Distribution::ScaledBernoulli { scale, q } => scale * scale * q * (1.0 - q),
        }
    }

    /// Squared coefficient of variation Var/E^2.
    pub fn squared_cv(&self) -> f64 {
        let m = self.mean();
        self.variance() / (m * m)
    }

    /// E[(X - beta * E[X])^+], in closed form per family.
    pub fn overshoot_expectation(&self, beta: f64) -> f64 {
        let t = beta * self.mean();
        match *self {
            Distribution::Deterministic { value } => (value - t).max(0.0),
            Distribution::Exponential { mean } => mean * (-t / mean).exp(),
            Distribution::Uniform { lo, hi } => {
                if t <= lo {
                    self.mean() - t
                } else if t < hi {
                    (hi - t) * (hi - t) / (2.0 * (hi - lo))
                } else {
                    0.0
                }
            }
            Distribution::TwoPoint { x1, q, x2 } => {
                q * (x1 - t).max(0.0) + (1.0 - q) * (x2 - t).max(0.0)
            }
            Distribution::ScaledBernoulli { scale, q } => q * (scale - t).max(0.0),
        }
    }

    /// Smallest delta such that E[X - t | X > t] <= delta * E[X] for all t
    /// (the new-better-than-used-in-expectation constant, closed form).
    pub fn nbue_delta(&self) -> f64 {
        match *self {
            Distribution::Deterministic { .. }
            | Distribution::Exponential { .. }
            | Distribution::Uniform { .. } => 1.0,
            // Conditional residual life peaks either at t = 0 (value: the
            // mean) or just above x1, where it equals x2 - x1.
            Distribution::TwoPoint { x1, x2, .. } => ((x2 - x1) / self.mean()).max(1.0),
            Distribution::ScaledBernoulli { q, .. } => 1.0 / q,
        }
    }

    /// One inverse-CDF draw from the given stream.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match *self {
            Distribution::Deterministic { value } => value,
            Distribution::Exponential { mean } => -mean * (1.0 - u).ln(),
            Distribution::Uniform { lo, hi } => lo + u * (hi - lo),
            Distribution::TwoPoint { x1, q, x2 } => {
                if u < q {
                    x1
                } else {
                    x2
                }
            }
            Distribution::ScaledBernoulli { scale, q } => {
                if u < q {
                    scale
                } else {
                    0.0
                }
            }
        }
    }
}

/// One job: identity, weight and release date. Processing times live in the
/// instance's distribution matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub id: u32,
    pub weight: f64,
    pub release: f64,
}

/// An unrelated-machines instance: `dists[i][j]` is the processing-time law
/// of job `jobs[j]` on machine `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnrelatedInstance {
    pub machines: usize,
    pub jobs: Vec<Job>,
    pub dists: Vec<Vec<Distribution>>,
}

/// One sampled processing-time matrix: `p[i][j]` indexed like `dists`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub p: Vec<Vec<f64>>,
}

impl UnrelatedInstance {
    pub fn new(machines: usize, jobs: Vec<Job>, dists: Vec<Vec<Distribution>>) -> Result<Self> {
        let inst = UnrelatedInstance {
            machines,
            jobs,
            dists,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Convenience constructor for m = 1.
    pub fn single_machine(jobs: Vec<Job>, dists: Vec<Distribution>) -> Result<Self> {
        Self::new(1, jobs, vec![dists])
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    pub fn m(&self) -> usize {
        self.machines
    }

    /// Expected processing time of job index `j` on machine `i`.
    pub fn pbar(&self, i: usize, j: usize) -> f64 {
        self.dists[i][j].mean()
    }

    pub fn validate(&self) -> Result<()> {
        if self.machines < 1 {
            return Err(Error::InvalidInstance("need at least one machine".into()));
        }
        if self.jobs.is_empty() {
            return Err(Error::InvalidInstance("need at least one job".into()));
        }
        if self.dists.len() != self.machines {
            return Err(Error::InvalidInstance(format!(
                "dists has {} rows but machines = {}",
                self.dists.len(),
                self.machines
            )));
        }
        for (i, row) in self.dists.iter().enumerate() {
            if row.len() != self.jobs.len() {
                return Err(Error::InvalidInstance(format!(
                    "dists row {} has {} entries but there are {} jobs",
                    i,
                    row.len(),
                    self.jobs.len()
                )));
            }
            for d in row {
                d.validate()?;
            }
        }
        let mut ids: Vec<u32> = self.jobs.iter().map(|j| j.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.jobs.len() {
            return Err(Error::InvalidInstance("duplicate job ids".into()));
        }
        for j in &self.jobs {
            if !(j.weight.is_finite() && j.weight >= 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "job {} has invalid weight {}",
                    j.id, j.weight
                )));
            }
            if !(j.release.is_finite() && j.release >= 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "job {} has invalid release {}",
                    j.id, j.release
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: UnrelatedInstance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Tight a-posteriori upper bound on squared coefficients of variation:
    /// the maximum of `squared_cv` over all matrix cells.
    pub fn delta(&self) -> f64 {
        self.dists
            .iter()
            .flatten()
            .map(|d| d.squared_cv())
            .fold(0.0, f64::max)
    }
}

/// Sample the full processing-time matrix for one replication. Each cell
/// draws from its own stream, so the result is independent of evaluation
/// order and of which machine a job is eventually assigned to.
pub fn sample_realization(inst: &UnrelatedInstance, base_seed: u64, rep: u64) -> Realization {
    let p = inst
        .dists
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(&inst.jobs)
                .map(|(d, job)| d.sample(&mut rng::proc_stream(base_seed, rep, i as u32, job.id)))
                .collect()
        })
        .collect();
    Realization { p }
}

/// Distribution family selector for the instance generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Deterministic,
    Exponential,
    Uniform,
    TwoPoint,
    ScaledBernoulli,
    Mixed,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "deterministic" => Family::Deterministic,
            "exponential" => Family::Exponential,
            "uniform" => Family::Uniform,
            "twopoint" => Family::TwoPoint,
            "scaledbernoulli" => Family::ScaledBernoulli,
            "mixed" => Family::Mixed,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown family {other:?} (expected deterministic, exponential, uniform, twopoint, scaledbernoulli or mixed)"
                )))
            }
        })
    }
}

/// Parameters for [`random_instance`]. Weights are drawn uniformly from
/// `weight_range`; releases and expected processing times are drawn from the
/// integers inside their ranges so that generated instances stay friendly to
/// the integral time-indexed relaxation.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    pub weight_range: (f64, f64),
    pub release_range: (f64, f64),
    pub mean_range: (f64, f64),
    pub family: Family,
    pub delta_target: Option<f64>,
}

fn int_in_range<R: Rng>(rng: &mut R, range: (f64, f64), what: &str) -> Result<f64> {
    let lo = range.0.ceil() as i64;
    let hi = range.1.floor() as i64;
    if !(range.0.is_finite() && range.1.is_finite() && range.0 >= 0.0 && lo <= hi) {
        return Err(Error::InvalidParameter(format!(
            "{what} range [{}, {}] contains no usable nonnegative integer",
            range.0, range.1
        )));
    }
    Ok(rng.gen_range(lo..=hi) as f64)
}

/// Build one distribution of the requested family with the given mean,
/// hitting the squared-CV target exactly when one is supplied.
fn dist_for(family: Family, mean: f64, target: Option<f64>) -> Result<Distribution> {
    let infeasible = |msg: String| Err(Error::InvalidParameter(msg));
    match family {
        Family::Deterministic => match target {
            None => Ok(Distribution::Deterministic { value: mean }),
            Some(t) if t == 0.0 => Ok(Distribution::Deterministic { value: mean }),
            Some(t) => infeasible(format!(
                "deterministic family has squared CV 0, cannot hit delta target {t}"
            )),
        },
        Family::Exponential => match target {
            None => Ok(Distribution::Exponential { mean }),
            Some(t) if (t - 1.0).abs() <= 1e-12 => Ok(Distribution::Exponential { mean }),
            Some(t) => infeasible(format!(
                "exponential family has squared CV 1, cannot hit delta target {t}"
            )),
        },
        Family::Uniform => {
            // Uniform(mean*(1-rho), mean*(1+rho)) has squared CV rho^2/3.
            let rho = match target {
                None => 0.5,
                Some(t) if t > 0.0 && t < 1.0 / 3.0 => (3.0 * t).sqrt(),
                Some(t) => {
                    return infeasible(format!(
                        "uniform family realizes squared CV in (0, 1/3), cannot hit {t}"
                    ))
                }
            };
            Ok(Distribution::Uniform {
                lo: mean * (1.0 - rho),
                hi: mean * (1.0 + rho),
            })
        }
        Family::TwoPoint => match target {
            // Symmetric two-point law mean*(1 -/+ s) has squared CV s^2.
            None => Ok(Distribution::TwoPoint {
                x1: 0.5 * mean,
                q: 0.5,
                x2: 1.5 * mean,
            }),
            Some(t) if t > 0.0 && t <= 1.0 => {
                let s = t.sqrt();
                Ok(Distribution::TwoPoint {
                    x1: mean * (1.0 - s),
                    q: 0.5,
                    x2: mean * (1.0 + s),
                })
            }
            // Mass at zero: squared CV q/(1-q) is unbounded.
            Some(t) if t > 1.0 => {
                let q = t / (1.0 + t);
                Ok(Distribution::TwoPoint {
                    x1: 0.0,
                    q,
                    x2: mean / (1.0 - q),
                })
            }
            Some(t) => infeasible(format!(
                "two-point family realizes positive squared CV, cannot hit {t}"
            )),
        },
        Family::ScaledBernoulli => {
            // Squared CV (1-q)/q; q = 1 degenerates to a point mass.
            let t = target.unwrap_or(1.0);
            if t < 0.0 {
                return infeasible(format!("delta target must be nonnegative, got {t}"));
            }
            let q = 1.0 / (1.0 + t);
            Ok(Distribution::ScaledBernoulli {
                scale: mean / q,
                q,
            })
        }
        Family::Mixed => infeasible("mixed cells are drawn per entry, not here".into()),
    }
}

/// Generate a reproducible random instance. With a delta target the
/// generator shapes every cell to hit the target exactly (so the instance's
/// `delta()` equals the request up to rounding); an infeasible target for
/// the chosen family is an error.
pub fn random_instance(spec: &GeneratorSpec, seed: u64) -> Result<UnrelatedInstance> {
    if spec.n < 1 || spec.m < 1 {
        return Err(Error::InvalidParameter(
            "need n >= 1 jobs and m >= 1 machines".into(),
        ));
    }
    if let Some(t) = spec.delta_target {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta target must be a nonnegative real, got {t}"
            )));
        }
        if spec.family == Family::Mixed {
            return Err(Error::InvalidParameter(
                "delta target is not supported for the mixed family; pick a concrete family".into(),
            ));
        }
    }
    if !(spec.weight_range.0.is_finite()
        && spec.weight_range.1.is_finite()
        && spec.weight_range.0 >= 0.0
        && spec.weight_range.0 <= spec.weight_range.1)
    {
        return Err(Error::InvalidParameter(format!(
            "weight range [{}, {}] is invalid",
            spec.weight_range.0, spec.weight_range.1
        )));
    }
    let mut r = rng::stream(seed, 0, PURPOSE_GEN, 0, 0);
    let mut jobs = Vec::with_capacity(spec.n);
    for id in 0..spec.n {
        let weight = if spec.weight_range.0 == spec.weight_range.1 {
            spec.weight_range.0
        } else {
            r.gen_range(spec.weight_range.0..spec.weight_range.1)
        };
        let release = int_in_range(&mut r, spec.release_range, "release")?;
        jobs.push(Job {
            id: id as u32,
            weight,
            release,
        });
    }
    let mixed_pool = [
        Family::Deterministic,
        Family::Exponential,
        Family::Uniform,
        Family::TwoPoint,
    ];
    let mut dists = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let mut row = Vec::with_capacity(spec.n);
        for _ in 0..spec.n {
            let mean = int_in_range(&mut r, spec.mean_range, "mean")?;
            if mean <= 0.0 {
                return Err(Error::InvalidParameter(
                    "mean range must contain a positive integer".into(),
                ));
            }
            let fam = match spec.family {
                Family::Mixed => mixed_pool[r.gen_range(0..mixed_pool.len())],
                f => f,
            };
            row.push(dist_for(fam, mean, spec.delta_target)?);
        }
        dists.push(row);
    }
    UnrelatedInstance::new(spec.m, jobs, dists)
}
