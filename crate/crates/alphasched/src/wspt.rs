//! The virtual single-machine schedule: a preemptive WSPT schedule of
//! deterministic counterparts (each job shrunk to its expected processing
//! time). Policies never run jobs here; they only query it for alpha-points,
//! mean busy times and processed fractions.

use crate::model::Job;
use crate::{Error, Result};

/// One maximal interval during which a single counterpart is processed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub job: u32,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone)]
struct Entry {
    id: u32,
    weight: f64,
    release: f64,
    pbar: f64,
}

/// Strict processing order on raw `(weight, expected time, id)` triples:
/// larger weight-to-mean ratio first, ties by smaller id. Compared by
/// cross-multiplication to avoid division. Every tie in the crate is broken
/// through this one order.
pub fn priority_precedes(a: (f64, f64, u32), b: (f64, f64, u32)) -> bool {
    let left = a.0 * b.1;
    let right = b.0 * a.1;
    if left != right {
        left > right
    } else {
        a.2 < b.2
    }
}

fn precedes(a: &Entry, b: &Entry) -> bool {
    priority_precedes((a.weight, a.pbar, a.id), (b.weight, b.pbar, b.id))
}

/// Preemptive WSPT schedule of deterministic counterparts on one machine.
///
/// Construction is event-driven: time only advances to release dates and
/// virtual completions, and between events the released unfinished
/// counterpart with the highest priority runs. Inserting a job re-runs the
/// sweep; because WSPT decisions before the new release date are unaffected
/// by it, everything before that date is reproduced bit-identically.
#[derive(Debug, Clone, Default)]
pub struct VirtualSchedule {
    entries: Vec<Entry>,
    pieces: Vec<Piece>,
    frontier: f64,
}

impl VirtualSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Last event time processed (completion of the final piece).
    pub fn horizon(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.end)
    }

    pub fn contains(&self, job: u32) -> bool {
        self.entries.iter().any(|e| e.id == job)
    }

    /// `(id, weight, expected processing time)` of every inserted
    /// counterpart, in insertion order.
    pub fn jobs(&self) -> impl Iterator<Item = (u32, f64, f64)> + '_ {
        self.entries.iter().map(|e| (e.id, e.weight, e.pbar))
    }

    /// Insert a job's deterministic counterpart. Jobs must arrive in
    /// nondecreasing release order.
    pub fn insert_job(&mut self, job: &Job, pbar: f64) -> Result<()> {
        if !(pbar.is_finite() && pbar > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "expected processing time must be positive, got {pbar}"
            )));
        }
        if job.release < self.frontier {
            return Err(Error::OutOfOrderInsertion {
                job: job.id,
                release: job.release,
                frontier: self.frontier,
            });
        }
        if self.contains(job.id) {
            return Err(Error::InvalidInstance(format!(
                "job {} inserted twice",
                job.id
            )));
        }
        self.entries.push(Entry {
            id: job.id,
            weight: job.weight,
            release: job.release,
            pbar,
        });
        self.frontier = job.release;
        self.rebuild();
        Ok(())
    }

    fn rebuild(&mut self) {
        self.pieces.clear();
        let n = self.entries.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            ea.release
                .total_cmp(&eb.release)
                .then(ea.id.cmp(&eb.id))
        });
        let mut remaining: Vec<f64> = self.entries.iter().map(|e| e.pbar).collect();
        let mut released: Vec<usize> = Vec::new();
        let mut next = 0usize;
        let mut t = 0.0f64;
        loop {
            while next < n && self.entries[order[next]].release <= t {
                released.push(order[next]);
                next += 1;
            }
            let running = released
                .iter()
                .copied()
                .filter(|&k| remaining[k] > 0.0)
                .reduce(|best, k| {
                    if precedes(&self.entries[k], &self.entries[best]) {
                        k
                    } else {
                        best
                    }
                });
            let Some(k) = running else {
                if next == n {
                    break;
                }
                t = self.entries[order[next]].release;
                continue;
            };
            let next_release = if next < n {
                self.entries[order[next]].release
            } else {
                f64::INFINITY
            };
            let finish = t + remaining[k];
            if finish <= next_release {
                self.push_piece(self.entries[k].id, t, finish);
                remaining[k] = 0.0;
                t = finish;
            } else {
                self.push_piece(self.entries[k].id, t, next_release);
                remaining[k] -= next_release - t;
                if remaining[k] <= 0.0 {
                    remaining[k] = 0.0;
                }
                t = next_release;
            }
        }
        debug_assert!(remaining.iter().all(|&r| r == 0.0));
    }

    fn push_piece(&mut self, job: u32, start: f64, end: f64) {
        if end <= start {
            return;
        }
        if let Some(last) = self.pieces.last_mut() {
            if last.job == job && last.end == start {
                last.end = end;
                return;
            }
        }
        self.pieces.push(Piece { job, start, end });
    }

    fn entry(&self, job: u32) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|e| e.id == job)
            .ok_or(Error::JobNotFound(job))
    }

    /// First time by which an `alpha` fraction of the counterpart's expected
    /// processing time has been completed; alpha in (0, 1].
    pub fn alpha_point(&self, job: u32, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        let entry = self.entry(job)?;
        let total: f64 = self
            .pieces
            .iter()
            .filter(|p| p.job == job)
            .map(|p| p.end - p.start)
            .sum();
        if total <= 0.0 {
            return Err(Error::JobIncomplete(job));
        }
        // The counterpart is complete by construction, but its piece lengths
        // may sum to pbar only up to rounding; clamp the target so alpha = 1
        // always lands inside the last piece.
        let target = (alpha * entry.pbar).min(total);
        let mut cum = 0.0;
        for p in self.pieces.iter().filter(|p| p.job == job) {
            let len = p.end - p.start;
            if target <= cum + len {
                return Ok(p.start + (target - cum));
            }
            cum += len;
        }
        Err(Error::JobIncomplete(job))
    }

    /// Completion time of the counterpart (its 1-point).
    pub fn completion(&self, job: u32) -> Result<f64> {
        self.entry(job)?;
        self.pieces
            .iter()
            .rev()
            .find(|p| p.job == job)
            .map(|p| p.end)
            .ok_or(Error::JobIncomplete(job))
    }

    /// Average instant at which the counterpart is in process:
    /// (1/pbar) * sum over pieces of (end^2 - start^2)/2. Coincides with the
    /// integral of alpha_point over alpha in (0, 1].
    pub fn mean_busy_time(&self, job: u32) -> Result<f64> {
        let entry = self.entry(job)?;
        let mut found = false;
        let mut acc = 0.0;
        for p in self.pieces.iter().filter(|p| p.job == job) {
            found = true;
            acc += (p.end - p.start) * (p.end + p.start) * 0.5;
        }
        if !found {
            return Err(Error::JobIncomplete(job));
        }
        Ok(acc / entry.pbar)
    }

    /// Fraction of the counterpart processed in (0, t]. Unknown jobs give 0.
    pub fn processed_fraction_before(&self, job: u32, t: f64) -> f64 {
        let Ok(entry) = self.entry(job) else {
            return 0.0;
        };
        let amount: f64 = self
            .pieces
            .iter()
            .filter(|p| p.job == job)
            .map(|p| (p.end.min(t) - p.start).max(0.0))
            .sum();
        (amount / entry.pbar).min(1.0)
    }

    /// Fraction of the counterpart processed after t (complement above).
    pub fn remaining_fraction(&self, job: u32, t: f64) -> f64 {
        1.0 - self.processed_fraction_before(job, t)
    }

    /// Ids of the k highest-priority jobs, in processing-order rank.
    pub fn top_k(&self, k: usize) -> Vec<u32> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            if precedes(&self.entries[a], &self.entries[b]) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        idx.into_iter()
            .take(k)
            .map(|i| self.entries[i].id)
            .collect()
    }

    /// Partition of the k highest-priority jobs into maximal sets whose
    /// pieces are processed back-to-back (no gap) once the schedule is
    /// restricted to those jobs. Blocks in chronological order; ids sorted.
    pub fn canonical_decomposition(&self, k: usize) -> Result<Vec<Vec<u32>>> {
        if k < 1 || k > self.entries.len() {
            return Err(Error::InvalidParameter(format!(
                "prefix length {k} out of range 1..={}",
                self.entries.len()
            )));
        }
        let top: Vec<u32> = self.top_k(k);
        let mut blocks: Vec<Vec<u32>> = Vec::new();
        let mut current: Vec<u32> = Vec::new();
        let mut last_end: Option<f64> = None;
        for p in self.pieces.iter().filter(|p| top.contains(&p.job)) {
            if last_end != Some(p.start) && last_end.is_some() {
                blocks.push(std::mem::take(&mut current));
            }
            if !current.contains(&p.job) {
                current.push(p.job);
            }
            last_end = Some(p.end);
        }
        if !current.is_empty() {
            blocks.push(current);
        }
        for b in &mut blocks {
            b.sort_unstable();
        }
        Ok(blocks)
    }

    /// Text dump of pieces, one "(job, start, end)" line each.
    pub fn dump(&self) -> String {
        self.pieces
            .iter()
            .map(|p| format!("({}, {}, {})", p.job, p.start, p.end))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Build the schedule for a full job list (sorted internally by release).
pub fn schedule_of(jobs: &[(Job, f64)]) -> Result<VirtualSchedule> {
    let mut sorted: Vec<&(Job, f64)> = jobs.iter().collect();
    sorted.sort_by(|a, b| a.0.release.total_cmp(&b.0.release).then(a.0.id.cmp(&b.0.id)));
    let mut vs = VirtualSchedule::new();
    for (job, pbar) in sorted {
        vs.insert_job(job, *pbar)?;
    }
    Ok(vs)
}
