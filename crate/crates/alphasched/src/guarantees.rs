//! Closed-form guarantee arithmetic: the variability discount g, guarantee
//! curves for single and unrelated machines, parameter-mis-specification
//! tables and their CSV emission.

use crate::policies::{
    alpha_star_delta, alpha_star_delta_nbue, density_f_delta, verify_density_conditions, Density,
};
use crate::util::{bisect, fmt_sig};
use crate::{Error, Result, PHI};

/// The variability discount used throughout the guarantee analysis:
/// (2 - sqrt(delta))/2 for delta <= 1 and 1/(delta + 1) beyond; the two
/// branches agree at 1. Decreasing from 1 at delta = 0 towards 0.
pub fn g_of_delta(delta: f64) -> f64 {
    if delta <= 1.0 {
        (2.0 - delta.sqrt()) / 2.0
    } else {
        1.0 / (delta + 1.0)
    }
}

/// Which benchmark class a guarantee is stated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparatorClass {
    /// Any policy, including ones with full distributional foresight.
    AllPolicies,
    /// Policies whose job-to-machine assignment ignores realized times.
    FixedAssignment,
}

impl std::fmt::Display for ComparatorClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ComparatorClass::AllPolicies => write!(f, "all-policies"),
            ComparatorClass::FixedAssignment => write!(f, "fixed-assignment"),
        }
    }
}

/// One guarantee-table row.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeRow {
    /// Predicted variability bound, for mis-specification rows only.
    pub delta_bar: Option<f64>,
    /// The abscissa: a squared-CV bound (or a residual-life factor for the
    /// rows produced by [`nbue_guarantees`]).
    pub delta: f64,
    pub policy: String,
    pub guarantee: f64,
    pub class: ComparatorClass,
}

fn row(delta: f64, policy: &str, guarantee: f64, class: ComparatorClass) -> GuaranteeRow {
    GuaranteeRow {
        delta_bar: None,
        delta,
        policy: policy.to_string(),
        guarantee,
        class,
    }
}

/// All unrelated-machines guarantee curves at one variability bound: the
/// greedy-dispatch policies (uniform, golden-ratio and optimized alphas),
/// each against all policies and against fixed-assignment policies, plus the
/// all-policies baseline curve of the greedy-multiplexing algorithm.
pub fn unrelated_guarantees(delta: f64) -> Result<Vec<GuaranteeRow>> {
    use ComparatorClass::*;
    let g = g_of_delta(delta);
    let c_rand = density_f_delta(delta)?.guarantee();
    let (_, c_det) = alpha_star_delta(delta)?;
    let horizon = 4.0 + 2.0 * delta;
    let sqrt5 = 5.0_f64.sqrt();
    Ok(vec![
        row(delta, "ga-rsos", 8.0 + 4.0 * delta, AllPolicies),
        row(delta, "ga-dsos", (3.0 + sqrt5) * (2.0 + delta), AllPolicies),
        row(
            delta,
            "gmux",
            184.0 / 51.0 * (2.0 - g) * (2.0 + delta),
            AllPolicies,
        ),
        row(delta, "ga-rsos-fdelta", c_rand * horizon, AllPolicies),
        row(delta, "ga-sos-astar", c_det * horizon, AllPolicies),
        row(delta, "ga-rsos", 8.0, FixedAssignment),
        row(delta, "ga-dsos", 2.0 * (3.0 + sqrt5), FixedAssignment),
        row(delta, "ga-rsos-fdelta", 4.0 * c_rand, FixedAssignment),
        row(delta, "ga-sos-astar", 4.0 * c_det, FixedAssignment),
    ])
}

/// Single-machine guarantee curves at one variability bound: the uniform and
/// golden-ratio policies (constants) and the two optimized variants.
pub fn single_machine_guarantees(delta: f64) -> Result<Vec<GuaranteeRow>> {
    use ComparatorClass::*;
    let c_rand = density_f_delta(delta)?.guarantee();
    let (_, c_det) = alpha_star_delta(delta)?;
    Ok(vec![
        row(delta, "rsos", 2.0, AllPolicies),
        row(delta, "dsos", PHI + 1.0, AllPolicies),
        row(delta, "rsos-fdelta", c_rand, AllPolicies),
        row(delta, "sos-astar", c_det, AllPolicies),
    ])
}

/// Guarantees under a residual-life bound delta (>= 1): the fixed-alpha
/// policy via the squared-CV reduction (a residual-life factor of delta
/// caps squared CVs at 2*delta - 1) and via the direct cubic optimization,
/// plus the randomized density via the same reduction. The direct value
/// never exceeds the reduction value.
pub fn nbue_guarantees(delta_nbue: f64) -> Result<Vec<GuaranteeRow>> {
    use ComparatorClass::*;
    if !(delta_nbue >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "residual-life factor must be >= 1, got {delta_nbue}"
        )));
    }
    let cv_bound = 2.0 * delta_nbue - 1.0;
    let (_, c_via) = alpha_star_delta(cv_bound)?;
    let (_, c_direct) = alpha_star_delta_nbue(delta_nbue)?;
    let c_rand_via = density_f_delta(cv_bound)?.guarantee();
    Ok(vec![
        row(delta_nbue, "sos-astar-via-cv", c_via, AllPolicies),
        row(delta_nbue, "sos-astar-direct", c_direct, AllPolicies),
        row(delta_nbue, "rsos-fdelta-via-cv", c_rand_via, AllPolicies),
    ])
}

/// Which policy family a mis-specification query concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisSpecPolicy {
    /// Randomized policy using the density optimized for the predicted bound.
    Rsos,
    /// Deterministic policy using the alpha optimized for the predicted bound.
    Sos,
}

/// Guarantee of a policy tuned for predicted variability `delta_bar` when
/// the true bound is `delta`. For the randomized policy this is the smallest
/// ratio still satisfying both guarantee conditions with the mismatched
/// density (binary search, grid 10^4, tolerance 1e-4); for the deterministic
/// policy it is the closed-form worst case of the fixed alpha.
pub fn mis_specified_guarantee(
    delta_bar: f64,
    delta: f64,
    policy: MisSpecPolicy,
) -> Result<f64> {
    if !(delta_bar >= 0.0 && delta >= 0.0) {
        return Err(Error::InvalidParameter(
            "variability bounds must be nonnegative".into(),
        ));
    }
    match policy {
        MisSpecPolicy::Sos => {
            let (alpha, _) = alpha_star_delta(delta_bar)?;
            let g = g_of_delta(delta);
            Ok(1.0 + (1.0 / alpha).max(1.0 + alpha - g * (1.0 - alpha)))
        }
        MisSpecPolicy::Rsos => {
            let f = density_f_delta(delta_bar)?;
            let feasible =
                |c: f64| verify_density_conditions(&f.with_guarantee(c), delta, 10_000)
                    .compliant(1e-8);
            let mut lo = 1.0;
            let mut hi = 10.0;
            if !feasible(hi) {
                return Err(Error::Numerical(format!(
                    "no ratio below {hi} satisfies the conditions for predicted {delta_bar} vs true {delta}"
                )));
            }
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if feasible(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

/// Abscissa where the uniform greedy-dispatch curve 8 + 4*delta crosses the
/// greedy-multiplexing baseline; below it the baseline is smaller.
pub fn rsos_gmux_crossing() -> f64 {
    bisect(
        |d| {
            let gmux = 184.0 / 51.0 * (2.0 - g_of_delta(d)) * (2.0 + d);
            8.0 + 4.0 * d - gmux
        },
        0.0,
        1.0,
        200,
    )
}

fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo >= 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "bad grid [{lo}, {hi}] step {step}"
        )));
    }
    let mut points = Vec::new();
    let mut k = 0u64;
    loop {
        let x = lo + k as f64 * step;
        if x > hi + 0.5 * step {
            break;
        }
        points.push(x.min(hi));
        k += 1;
    }
    Ok(points)
}

fn push_rows(out: &mut String, rows: &[GuaranteeRow]) {
    for r in rows {
        match r.delta_bar {
            Some(db) => out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_sig(db, 12),
                fmt_sig(r.delta, 12),
                r.policy,
                fmt_sig(r.guarantee, 12),
                r.class
            )),
            None => out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_sig(r.delta, 12),
                r.policy,
                fmt_sig(r.guarantee, 12),
                r.class
            )),
        }
    }
}

/// CSV with all unrelated-machines curves over a delta grid.
pub fn unrelated_curve_csv(lo: f64, hi: f64, step: f64) -> Result<String> {
    let mut out = String::from("delta,policy,guarantee,class\n");
    for d in grid(lo, hi, step)? {
        push_rows(&mut out, &unrelated_guarantees(d)?);
    }
    Ok(out)
}

/// CSV with the single-machine curves over a delta grid.
pub fn single_machine_curve_csv(lo: f64, hi: f64, step: f64) -> Result<String> {
    let mut out = String::from("delta,policy,guarantee,class\n");
    for d in grid(lo, hi, step)? {
        push_rows(&mut out, &single_machine_guarantees(d)?);
    }
    Ok(out)
}

/// CSV with mis-specification curves: policies tuned for predicted bounds 0
/// and 1, evaluated against every true bound on the grid. The randomized
/// search is comparatively expensive, so callers usually pass a coarser
/// step here than for the closed-form curves.
pub fn misspec_curve_csv(lo: f64, hi: f64, step: f64) -> Result<String> {
    let mut out = String::from("delta_bar,delta,policy,guarantee,class\n");
    for &delta_bar in &[0.0, 1.0] {
        for delta in grid(lo, hi, step)? {
            let rows = vec![
                GuaranteeRow {
                    delta_bar: Some(delta_bar),
                    delta,
                    policy: "rsos-fdelta".into(),
                    guarantee: mis_specified_guarantee(delta_bar, delta, MisSpecPolicy::Rsos)?,
                    class: ComparatorClass::AllPolicies,
                },
                GuaranteeRow {
                    delta_bar: Some(delta_bar),
                    delta,
                    policy: "sos-astar".into(),
                    guarantee: mis_specified_guarantee(delta_bar, delta, MisSpecPolicy::Sos)?,
                    class: ComparatorClass::AllPolicies,
                },
            ];
            push_rows(&mut out, &rows);
        }
    }
    Ok(out)
}

/// Convenience: the density a mis-specification query would use.
pub fn density_for(delta_bar: f64) -> Result<Density> {
    density_f_delta(delta_bar)
}
