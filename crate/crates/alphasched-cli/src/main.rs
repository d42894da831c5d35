//! Command-line front end: instance generation, replicated policy runs,
//! guarantee-curve emission and dual-certificate checks.
//!
//! Exit codes: 0 when everything passed, 1 on usage or input errors, 2 when
//! a numerical guarantee check failed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use alphasched::assign::run_ga;
use alphasched::bounds::certify_instance;
use alphasched::guarantees::{misspec_curve_csv, single_machine_curve_csv, unrelated_curve_csv};
use alphasched::model::{random_instance, Family, GeneratorSpec};
use alphasched::policies::{alpha_star_delta, alpha_star_delta_nbue, density_f_delta};
use alphasched::sim::{ratio_report, results_csv_header, ComparatorKind, Policy};
use alphasched::util::fmt_sig;
use alphasched::{Density, SingleMachinePolicy, UnrelatedInstance};

#[derive(Parser)]
#[command(
    name = "alphasched",
    version,
    about = "Stochastic online scheduling laboratory: alpha-point policies, \
             greedy dispatch, relaxation bounds and guarantee curves"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a reproducible random instance as JSON.
    Generate(GenerateArgs),
    /// Replicate a policy on an instance and check its guarantee.
    Run(RunArgs),
    /// Emit guarantee-curve CSV files over a variability grid.
    Curves(CurvesArgs),
    /// Build, verify and export a dual certificate for an instance.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of jobs.
    #[arg(long)]
    n: usize,
    /// Number of machines.
    #[arg(long)]
    m: usize,
    /// Processing-time family: deterministic, exponential, uniform,
    /// twopoint, scaledbernoulli or mixed.
    #[arg(long, default_value = "exponential")]
    family: String,
    /// Weight range LO,HI (drawn uniformly).
    #[arg(long, value_parser = parse_pair, default_value = "1,10")]
    weights: (f64, f64),
    /// Release range LO,HI (integer draws).
    #[arg(long, value_parser = parse_pair, default_value = "0,10")]
    releases: (f64, f64),
    /// Expected-processing-time range LO,HI (integer draws).
    #[arg(long, value_parser = parse_pair, default_value = "1,8")]
    means: (f64, f64),
    /// Shape every processing-time law to this squared coefficient of
    /// variation exactly.
    #[arg(long)]
    delta_target: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Instance JSON path.
    #[arg(long)]
    instance: PathBuf,
    /// rsos, dsos, sos, ga-rsos, ga-dsos or ga-sos.
    #[arg(long)]
    policy: String,
    /// Fixed alpha in (0, 1] for the sos policies.
    #[arg(long)]
    alpha: Option<f64>,
    /// Alpha density for the rsos policies: uniform or fdelta.
    #[arg(long)]
    density: Option<String>,
    /// Squared-coefficient-of-variation bound used for tuning and for the
    /// recorded guarantee; defaults to the instance's own value.
    #[arg(long)]
    delta: Option<f64>,
    /// Residual-life factor (>= 1); tunes sos via the cubic characteristic
    /// and fdelta via the implied variability bound.
    #[arg(long)]
    nbue_delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// surrogate, single-machine-bound, lp-opt or auto.
    #[arg(long, default_value = "auto")]
    comparator: String,
    /// Slot cap for the time-indexed relaxation comparator.
    #[arg(long, default_value_t = 400)]
    lp_cap: u64,
    /// Override the guarantee the run is held to.
    #[arg(long)]
    guarantee: Option<f64>,
    /// Results CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-job dispatch quotes to this CSV path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CurvesArgs {
    /// Variability grid LO,HI; must lie inside [0, 10].
    #[arg(long, value_parser = parse_pair, default_value = "0,2")]
    range: (f64, f64),
    /// Grid step; the mis-specification file uses ten times this step.
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    /// Output directory for the three CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    /// Instance JSON path.
    #[arg(long)]
    instance: PathBuf,
    /// Slot cap for the time-indexed relaxation.
    #[arg(long, default_value_t = 400)]
    lp_cap: u64,
    /// Write the relaxation in LP interchange format, with the certificate
    /// report embedded as comments.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected LO,HI, got {s:?}"));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|e| format!("bad lower bound {:?}: {e}", parts[0]))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|e| format!("bad upper bound {:?}: {e}", parts[1]))?;
    Ok((lo, hi))
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

/// Returns whether every numerical check passed.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a).map(|()| true),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Curves(a) => cmd_curves(a).map(|()| true),
        Cmd::Certify(a) => cmd_certify(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let family: Family = a.family.parse()?;
    let spec = GeneratorSpec {
        n: a.n,
        m: a.m,
        weight_range: a.weights,
        release_range: a.releases,
        mean_range: a.means,
        family,
        delta_target: a.delta_target,
    };
    let inst = random_instance(&spec, a.seed)?;
    let json = inst.to_json_string()?;
    emit(a.out.as_deref(), &json)
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let inst = load_instance(&a.instance)?;
    let comparator = parse_comparator(&a.comparator, &a.policy)?;
    let (policy, base_guarantee) = build_policy(&a, &inst)?;
    let guarantee = a.guarantee.unwrap_or(match comparator {
        ComparatorKind::LpOpt => 4.0 * base_guarantee,
        _ => base_guarantee,
    });

    let report = ratio_report(&inst, &policy, comparator, guarantee, a.reps, a.seed, a.lp_cap)?;
    let id = instance_id(&a.instance);
    let csv = format!("{}\n{}\n", results_csv_header(), report.csv_row(&id));
    emit(a.out.as_deref(), &csv)?;

    if let Some(path) = &a.trace {
        write_atomic(path, &trace_csv(&inst)?)?;
    }
    Ok(report.pass)
}

fn cmd_curves(a: CurvesArgs) -> Result<()> {
    let (lo, hi) = a.range;
    if !(0.0..=10.0).contains(&lo) || !(0.0..=10.0).contains(&hi) || lo > hi {
        bail!("range must satisfy 0 <= LO <= HI <= 10, got {lo},{hi}");
    }
    if !(a.step > 0.0) {
        bail!("step must be positive, got {}", a.step);
    }
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating output directory {}", a.out.display()))?;
    for (name, contents) in [
        ("fig-unrelated.csv", unrelated_curve_csv(lo, hi, a.step)?),
        ("fig-single.csv", single_machine_curve_csv(lo, hi, a.step)?),
        ("fig-misspec.csv", misspec_curve_csv(lo, hi, 10.0 * a.step)?),
    ] {
        let path = a.out.join(name);
        write_atomic(&path, &contents)?;
        println!("wrote {} ({} rows)", path.display(), contents.lines().count() - 1);
    }
    Ok(())
}

fn cmd_certify(a: CertifyArgs) -> Result<bool> {
    let inst = load_instance(&a.instance)?;
    let report = certify_instance(&inst, a.lp_cap)?;
    let yes_no = |b: bool| if b { "yes" } else { "no" };
    println!("instance: {}", instance_id(&a.instance));
    println!(
        "machines: {}, jobs: {}, slots: {} (times scaled by {})",
        report.model.machines,
        report.model.n(),
        report.model.horizon,
        fmt_sig(report.model.scale_factor(), 12),
    );
    println!("surrogate total: {}", fmt_sig(report.surrogate, 12));
    println!("relaxation optimum: {}", fmt_sig(report.lp.objective, 12));
    println!("certificate value: {}", fmt_sig(report.check.dual_value, 12));
    println!("min dual slack: {}", fmt_sig(report.check.min_slack, 12));
    println!("dual feasible: {}", yes_no(report.check.feasible));
    println!("certificate >= surrogate/4: {}", yes_no(report.quarter_surrogate_ok));
    println!("surrogate <= 4*optimum: {}", yes_no(report.four_opt_ok));
    println!("certified: {}", yes_no(report.certified));

    if let Some(path) = &a.out {
        let mut text = String::new();
        text.push_str("\\ certificate report\n");
        text.push_str(&format!("\\ surrogate-total {}\n", fmt_sig(report.surrogate, 12)));
        text.push_str(&format!(
            "\\ relaxation-optimum {}\n",
            fmt_sig(report.lp.objective, 12)
        ));
        text.push_str(&format!(
            "\\ certificate-value {}\n",
            fmt_sig(report.check.dual_value, 12)
        ));
        text.push_str(&format!("\\ min-slack {}\n", fmt_sig(report.check.min_slack, 12)));
        text.push_str(&format!("\\ certified {}\n", report.certified));
        text.push_str(&report.model.to_lp_text());
        write_atomic(path, &text)?;
    }
    Ok(report.certified)
}

/// Build the policy and its per-machine guarantee from the flag set.
fn build_policy(a: &RunArgs, inst: &UnrelatedInstance) -> Result<(Policy, f64)> {
    let (ga, kind) = match a.policy.as_str() {
        "rsos" => (false, "rsos"),
        "dsos" => (false, "dsos"),
        "sos" => (false, "sos"),
        "ga-rsos" => (true, "rsos"),
        "ga-dsos" => (true, "dsos"),
        "ga-sos" => (true, "sos"),
        other => bail!("unknown policy {other:?} (expected rsos, dsos, sos, ga-rsos, ga-dsos or ga-sos)"),
    };
    if kind != "rsos" && a.density.is_some() {
        bail!("--density only applies to the rsos policies");
    }
    if kind != "sos" && a.alpha.is_some() {
        bail!("--alpha only applies to the sos policies");
    }
    if kind == "dsos" && a.nbue_delta.is_some() {
        bail!("--nbue-delta does not apply to dsos");
    }
    if a.alpha.is_some() && a.nbue_delta.is_some() {
        bail!("--alpha and --nbue-delta are mutually exclusive");
    }
    // The variability bound the guarantee refers to: an explicit bound, the
    // bound implied by a residual-life factor, or the instance's own value.
    let delta = match (a.delta, a.nbue_delta) {
        (Some(d), _) => d,
        (None, Some(nd)) => 2.0 * nd - 1.0,
        (None, None) => inst.delta(),
    };

    let (per_machine, guarantee) = match kind {
        "rsos" => {
            let density = match a.density.as_deref().unwrap_or("uniform") {
                "uniform" => Density::uniform(),
                "fdelta" => density_f_delta(delta)?,
                other => bail!("unknown density {other:?} (expected uniform or fdelta)"),
            };
            let c = density.guarantee();
            (SingleMachinePolicy::Rsos(density), c)
        }
        "dsos" => (SingleMachinePolicy::Dsos, alphasched::PHI + 1.0),
        _ => {
            let (alpha, c) = match (a.alpha, a.nbue_delta) {
                (Some(alpha), _) => {
                    let g = alphasched::guarantees::g_of_delta(delta);
                    (alpha, 1.0 + (1.0 / alpha).max(1.0 + alpha - g * (1.0 - alpha)))
                }
                (None, Some(nd)) => alpha_star_delta_nbue(nd)?,
                (None, None) => alpha_star_delta(delta)?,
            };
            (SingleMachinePolicy::Sos(alpha), c)
        }
    };
    let policy = if ga {
        Policy::Ga(per_machine)
    } else {
        Policy::Single(per_machine)
    };
    Ok((policy, guarantee))
}

fn parse_comparator(s: &str, policy: &str) -> Result<ComparatorKind> {
    Ok(match s {
        "auto" => {
            if policy.starts_with("ga-") {
                ComparatorKind::Surrogate
            } else {
                ComparatorKind::SingleMachineBound
            }
        }
        "surrogate" => ComparatorKind::Surrogate,
        "single-machine-bound" => ComparatorKind::SingleMachineBound,
        "lp-opt" => ComparatorKind::LpOpt,
        other => bail!(
            "unknown comparator {other:?} (expected auto, surrogate, single-machine-bound or lp-opt)"
        ),
    })
}

/// Per-job dispatch quotes: one row per job in dispatch order, one cost
/// column per machine, and the chosen machine index.
fn trace_csv(inst: &UnrelatedInstance) -> Result<String> {
    let run = run_ga(inst)?;
    let mut out = String::from("job_id");
    for i in 0..inst.m() {
        out.push_str(&format!(",cost_m{i}"));
    }
    out.push_str(",chosen\n");
    for tr in &run.trace {
        out.push_str(&tr.job.to_string());
        for c in &tr.costs {
            out.push(',');
            out.push_str(&fmt_sig(*c, 12));
        }
        out.push_str(&format!(",{}\n", tr.chosen));
    }
    Ok(out)
}

fn load_instance(path: &Path) -> Result<UnrelatedInstance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading instance {}", path.display()))?;
    UnrelatedInstance::from_json_str(&text)
        .with_context(|| format!("parsing instance {}", path.display()))
}

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Write via a temporary sibling and rename, so readers never observe a
/// half-written file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating directory {}", dir.display()))?;
    let stem = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{stem}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}
