use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use alphasched::model::{random_instance, sample_realization, Family, GeneratorSpec};
use alphasched::policies::{alpha_star_delta, density_f_delta, sos_schedule};
use alphasched::wspt::schedule_of;
use alphasched::{SingleMachinePolicy, UnrelatedInstance};

fn spec(n: usize, m: usize, family: Family) -> GeneratorSpec {
    GeneratorSpec {
        n,
        m,
        weight_range: (1.0, 10.0),
        release_range: (0.0, 12.0),
        mean_range: (1.0, 8.0),
        family,
        delta_target: None,
    }
}

fn single_machine_pairs(inst: &UnrelatedInstance) -> Vec<(alphasched::Job, f64)> {
    inst.jobs
        .iter()
        .enumerate()
        .map(|(j, job)| (job.clone(), inst.pbar(0, j)))
        .collect()
}

fn density_solves(c: &mut Criterion) {
    c.bench_function("density_f_delta(2)", |b| {
        b.iter(|| density_f_delta(black_box(2.0)).unwrap())
    });
    c.bench_function("alpha_star_delta(2)", |b| {
        b.iter(|| alpha_star_delta(black_box(2.0)).unwrap())
    });
}

/// The Monte Carlo inner loop: draw alphas, sample processing times, run the
/// alpha-point schedule. 60 jobs on one machine.
fn replication(c: &mut Criterion) {
    let inst = random_instance(&spec(60, 1, Family::Mixed), 1).unwrap();
    let pairs = single_machine_pairs(&inst);
    let vs = schedule_of(&pairs).unwrap();
    let ids: Vec<u32> = inst.jobs.iter().map(|j| j.id).collect();
    let policy = SingleMachinePolicy::Rsos(density_f_delta(2.0).unwrap());

    c.bench_function("rsos_replication_n60", |b| {
        let mut rep = 0u64;
        b.iter(|| {
            rep += 1;
            let alphas = policy.alpha_vector(&ids, 7, rep).unwrap();
            let realization = sample_realization(&inst, 7, rep);
            let realized: BTreeMap<u32, f64> = inst
                .jobs
                .iter()
                .enumerate()
                .map(|(j, job)| (job.id, realization.p[0][j]))
                .collect();
            sos_schedule(&vs, &alphas, &realized).unwrap()
        })
    });
}

/// Greedy immediate-dispatch assignment of 40 jobs to 4 machines.
fn greedy_assignment(c: &mut Criterion) {
    let inst = random_instance(&spec(40, 4, Family::Mixed), 2).unwrap();
    c.bench_function("run_ga_n40_m4", |b| {
        b.iter(|| alphasched::assign::run_ga(black_box(&inst)).unwrap())
    });
}

criterion_group!(benches, density_solves, replication, greedy_assignment);
criterion_main!(benches);
