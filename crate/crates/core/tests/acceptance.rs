//! End-to-end acceptance checks. Runs every criterion, prints one PASS/FAIL
//! line each, and exits nonzero when any fails.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use prophunt::ambiguity::{is_ambiguous, sample_subgraph, subgraph_from_syndromes, Subgraph};
use prophunt::circuit::{
    coloration_schedule, memory_circuit, nz_schedule, nz_transposed_schedule, random_schedule, random_valid_schedule,
    validate_schedule, SmSchedule,
};
use prophunt::code::{load_code, make_rotated_surface, CheckType, CssCode};
use prophunt::dem::{build_dem, DetectorErrorModel, NoiseModel};
use prophunt::minweight::{encode_wcnf, export_wcnf, min_weight_logical, Budget, Status};
use prophunt::optimizer::{memory_dems, optimize, schedule_distance, OptimizerConfig};
use prophunt::sim::logical_error_rate;
use prophunt::tableau::noiseless_detectors_deterministic;
use prophunt::zne::{compare, CompareConfig, CompareReport};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn first<T: std::fmt::Debug>(v: &[T]) -> String {
    v.first().map(|x| format!(", first {x:?}")).unwrap_or_default()
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn surface(d: usize) -> Arc<CssCode> {
    Arc::new(make_rotated_surface(d).unwrap())
}

fn lp_code() -> Arc<CssCode> {
    Arc::new(load_code(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/lp_39_3_3.json")).unwrap())
}

fn dem_of(s: &SmSchedule, basis: CheckType, rounds: usize) -> DetectorErrorModel {
    build_dem(memory_circuit(s, rounds, basis).unwrap(), &NoiseModel::new(1e-3)).unwrap()
}

fn validity_oracle() -> Outcome {
    let mut problems = Vec::new();
    let mut checked = 0;
    for (name, code) in [("surface:3", surface(3)), ("lp39", lp_code())] {
        let mut rng = prophunt::rng(1);
        for i in 0..1000 {
            let s = random_valid_schedule(code.clone(), 4, &mut rng);
            let fast = validate_schedule(&s).is_ok();
            let oracle = noiseless_detectors_deterministic(&s, 2).unwrap();
            if !fast || !oracle {
                problems.push(format!("{name} valid #{i}: parity {fast}, oracle {oracle}"));
            }
            let r = random_schedule(code.clone(), 4, &mut rng);
            let fast = validate_schedule(&r).is_ok();
            let oracle = noiseless_detectors_deterministic(&r, 2).unwrap();
            if fast != oracle {
                problems.push(format!("{name} random #{i}: parity {fast}, oracle {oracle}"));
            }
            checked += 2;
        }
    }
    outcome(
        problems.is_empty(),
        format!("{checked} schedules checked, {} disagreements{}", problems.len(), first(&problems)),
    )
}

/// A random connected detector set of up to `size` detectors.
fn random_syndromes<R: Rng>(dem: &DetectorErrorModel, size: usize, rng: &mut R) -> Vec<usize> {
    let start = rng.gen_range(0..dem.num_detectors());
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(d) = queue.pop_front() {
        let cols = dem.detector_columns(d);
        let mut next: Vec<usize> = cols
            .iter()
            .flat_map(|&j| dem.column_detectors(j as usize).iter().map(|&x| x as usize))
            .collect();
        next.sort_unstable();
        next.dedup();
        for x in next {
            if seen.len() >= size {
                break;
            }
            if rng.gen_bool(0.6) && seen.insert(x) {
                queue.push_back(x);
            }
        }
        if seen.len() >= size {
            break;
        }
    }
    seen.into_iter().collect()
}

fn benchmark_dems() -> Vec<(String, DetectorErrorModel)> {
    let mut out = Vec::new();
    for d in [3, 5] {
        let schedules = [
            ("nz", nz_schedule(d).unwrap()),
            ("nz-transposed", nz_transposed_schedule(d).unwrap()),
            ("coloration", coloration_schedule(surface(d), 0)),
        ];
        for (name, s) in schedules {
            for basis in [CheckType::X, CheckType::Z] {
                out.push((format!("d={d} {name} {basis:?}"), dem_of(&s, basis, d)));
            }
        }
    }
    out
}

fn ambiguity_vs_solver() -> Outcome {
    let dems = benchmark_dems();
    let mut rng = prophunt::rng(2);
    let (mut total, mut ambiguous, mut disagreements) = (0, 0, Vec::new());
    for (name, dem) in &dems {
        for k in 0..40 {
            let sub = if k % 2 == 0 {
                match sample_subgraph(dem, &mut rng, 500) {
                    Some(s) => s,
                    None => continue,
                }
            } else {
                let size = rng.gen_range(2..=40);
                let dets = random_syndromes(dem, size, &mut rng);
                subgraph_from_syndromes(dem, &dets, 0)
            };
            let claim = is_ambiguous(dem, &sub.syndrome_nodes);
            let r = min_weight_logical(&sub, Duration::from_secs(360));
            let solver = match r.status {
                Status::Found => Some(true),
                Status::None => Some(false),
                Status::Timeout => None,
            };
            total += 1;
            ambiguous += claim as usize;
            if solver != Some(claim) {
                disagreements.push(format!("{name} sample {k}: ambiguous {claim}, solver {:?}", r.status));
            }
        }
    }
    outcome(
        total >= 200 && disagreements.is_empty() && ambiguous > 0 && ambiguous < total,
        format!(
            "{total} subgraphs ({ambiguous} ambiguous), {} disagreements{}",
            disagreements.len(),
            first(&disagreements)
        ),
    )
}

/// Exhaustive minimum weight of a nonempty column set with zero syndrome and
/// nonzero observable parity; None when no such set exists.
fn brute_force(sub: &Subgraph) -> Option<usize> {
    let n = sub.error_nodes.len();
    let cols: Vec<(u128, u64)> = (0..n)
        .map(|c| {
            let mut syn = 0u128;
            for r in 0..sub.h.rows() {
                if sub.h.get(r, c) {
                    syn |= 1 << r;
                }
            }
            let mut obs = 0u64;
            for k in 0..sub.l.rows() {
                if sub.l.get(k, c) {
                    obs |= 1 << k;
                }
            }
            (syn, obs)
        })
        .collect();
    fn search(cols: &[(u128, u64)], from: usize, left: usize, syn: u128, obs: u64) -> bool {
        if left == 0 {
            return syn == 0 && obs != 0;
        }
        (from..cols.len()).any(|i| search(cols, i + 1, left - 1, syn ^ cols[i].0, obs ^ cols[i].1))
    }
    (1..=n).find(|&w| search(&cols, 0, w, 0, 0))
}

fn brute_force_oracle() -> Outcome {
    let dems = benchmark_dems();
    let mut rng = prophunt::rng(3);
    let (mut checked, mut found, mut mismatches) = (0, 0, Vec::new());
    let mut attempts = 0;
    while checked < 240 && attempts < 100_000 {
        attempts += 1;
        let (name, dem) = &dems[attempts % dems.len()];
        let sub = if attempts % 3 == 0 {
            let size = rng.gen_range(2..=12);
            subgraph_from_syndromes(dem, &random_syndromes(dem, size, &mut rng), 0)
        } else {
            match sample_subgraph(dem, &mut rng, 500) {
                Some(s) => s,
                None => continue,
            }
        };
        let n = sub.error_nodes.len();
        if n == 0 || n > 30 || sub.syndrome_nodes.len() > 128 {
            continue;
        }
        // Without a logical error, exhaustive search over every subset is
        // needed; keep those instances small enough to enumerate.
        if !sub.ambiguous && n > 22 {
            continue;
        }
        let oracle = brute_force(&sub);
        let r = min_weight_logical(&sub, Duration::from_secs(360));
        let solver = (r.status == Status::Found).then_some(r.weight);
        checked += 1;
        found += oracle.is_some() as usize;
        if solver != oracle || r.status == Status::Timeout {
            mismatches.push(format!("{name}: solver {:?} {}, oracle {oracle:?}", r.status, r.weight));
        }
    }
    outcome(
        checked >= 200 && mismatches.is_empty(),
        format!(
            "{checked} subgraphs with at most 30 errors ({found} with a logical error), {} mismatches{}",
            mismatches.len(),
            first(&mismatches)
        ),
    )
}

fn distance_recovery() -> (Outcome, Vec<(usize, bool)>) {
    let cases = [
        (nz_transposed_schedule(3).unwrap(), 3, 2),
        (nz_schedule(3).unwrap(), 3, 3),
        (nz_schedule(5).unwrap(), 5, 5),
    ];
    let mut got = Vec::new();
    let mut pass = true;
    for (s, rounds, want) in cases {
        let r = schedule_distance(&s, rounds, Budget::unlimited()).unwrap();
        pass &= r.exact && r.value == want;
        got.push((r.value, r.exact));
    }
    (outcome(pass, format!("(value, exact) = {got:?}, expected values [2, 3, 5]")), got)
}

type Trajectory = Vec<(String, Vec<String>)>;

fn convergence() -> (Outcome, Vec<Trajectory>, Option<SmSchedule>) {
    let configs: Vec<(String, Box<dyn Fn(u64) -> SmSchedule>, usize)> = vec![
        ("bad d=3".into(), Box::new(|_| nz_transposed_schedule(3).unwrap()), 3),
        ("coloration d=3".into(), Box::new(|seed| coloration_schedule(surface(3), seed)), 3),
        ("coloration d=5".into(), Box::new(|seed| coloration_schedule(surface(5), seed)), 5),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    let mut trajectories = Vec::new();
    let mut optimized_bad = None;
    for (name, start, d) in &configs {
        let mut reached = 0;
        let mut iters = Vec::new();
        for seed in 0..3u64 {
            let s = start(seed);
            let cfg = OptimizerConfig {
                iterations: 25,
                samples_per_iteration: 500,
                workers: 1,
                seed,
                ..OptimizerConfig::default()
            };
            let reports = optimize(&s, &cfg).unwrap();
            let last = reports.last().unwrap().schedule.clone();
            let dist = schedule_distance(&last, *d, Budget::unlimited()).unwrap();
            if dist.value == *d && dist.exact {
                reached += 1;
            }
            iters.push(reports.len());
            trajectories.push(
                reports
                    .iter()
                    .map(|r| (serde_json::to_string(&r.schedule.to_file()).unwrap(), r.applied.clone()))
                    .collect(),
            );
            if name == "bad d=3" && seed == 1 {
                optimized_bad = Some(last);
            }
        }
        pass &= reached >= 2;
        details.push(format!("{name}: {reached}/3 seeds reach {d} (iterations {iters:?})"));
    }
    (outcome(pass, details.join("; ")), trajectories, optimized_bad)
}

fn ler_ordering(optimized: Option<SmSchedule>) -> Outcome {
    let Some(optimized) = optimized else {
        return outcome(false, "no optimized schedule available");
    };
    let noise = NoiseModel::new(1e-3);
    let shots = 1_000_000;
    let run = |s: &SmSchedule, seed: u64| {
        let dems = memory_dems(s, 3, &noise).unwrap();
        let per: Vec<_> = dems
            .iter()
            .enumerate()
            .map(|(i, d)| logical_error_rate(d, shots, prophunt::derive_seed(seed, 0, i as u64)).unwrap())
            .collect();
        let combined = 1.0 - per.iter().map(|e| 1.0 - e.rate).product::<f64>();
        (per, combined)
    };
    let (bad, bad_c) = run(&nz_transposed_schedule(3).unwrap(), 1);
    let (nz, nz_c) = run(&nz_schedule(3).unwrap(), 2);
    let (_, opt_c) = run(&optimized, 3);
    let separated = bad.iter().zip(&nz).all(|(b, n)| b.rate > n.rate && !b.overlaps(n));
    let ratio = opt_c / nz_c;
    outcome(
        separated && (0.5..=2.0).contains(&ratio),
        format!(
            "combined LER bad {bad_c:.3e}, N-Z {nz_c:.3e}, optimized {opt_c:.3e}; per-basis CIs separated: {separated}; optimized/N-Z {ratio:.2}"
        ),
    )
}

/// Minimum number of violated soft clauses, by SAT calls with a sequential
/// at-most-k counter over relaxation variables.
fn external_maxsat(text: &str) -> Option<usize> {
    use varisat::{ExtendFormula, Lit, Solver};
    let mut nvars = 0isize;
    let mut top = 0u64;
    let mut hard: Vec<Vec<isize>> = Vec::new();
    let mut soft: Vec<Vec<isize>> = Vec::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() || f[0] == "c" {
            continue;
        }
        if f[0] == "p" {
            nvars = f[2].parse().unwrap();
            top = f[4].parse().unwrap();
            continue;
        }
        let w: u64 = f[0].parse().unwrap();
        let lits: Vec<isize> = f[1..f.len() - 1].iter().map(|x| x.parse().unwrap()).collect();
        if w >= top {
            hard.push(lits);
        } else {
            soft.push(lits);
        }
    }
    let n = soft.len();
    for k in 0..=n {
        let mut solver = Solver::new();
        let mut next = nvars;
        let mut fresh = || {
            next += 1;
            next
        };
        let lit = |v: isize| Lit::from_dimacs(v);
        for c in &hard {
            solver.add_clause(&c.iter().map(|&v| lit(v)).collect::<Vec<_>>());
        }
        let relax: Vec<isize> = soft
            .iter()
            .map(|c| {
                let r = fresh();
                let mut cl: Vec<Lit> = c.iter().map(|&v| lit(v)).collect();
                cl.push(lit(r));
                solver.add_clause(&cl);
                r
            })
            .collect();
        if k == 0 {
            for &r in &relax {
                solver.add_clause(&[lit(-r)]);
            }
        } else if k < n {
            let s: Vec<Vec<isize>> = (0..n).map(|_| (0..k).map(|_| fresh()).collect()).collect();
            solver.add_clause(&[lit(-relax[0]), lit(s[0][0])]);
            for j in 1..k {
                solver.add_clause(&[lit(-s[0][j])]);
            }
            for i in 1..n {
                solver.add_clause(&[lit(-relax[i]), lit(s[i][0])]);
                solver.add_clause(&[lit(-s[i - 1][0]), lit(s[i][0])]);
                for j in 1..k {
                    solver.add_clause(&[lit(-relax[i]), lit(-s[i - 1][j - 1]), lit(s[i][j])]);
                    solver.add_clause(&[lit(-s[i - 1][j]), lit(s[i][j])]);
                }
                solver.add_clause(&[lit(-relax[i]), lit(-s[i - 1][k - 1])]);
            }
        }
        if solver.solve().unwrap() {
            return Some(k);
        }
    }
    None
}

fn solve_time_and_wcnf() -> Outcome {
    let mut times = Vec::new();
    let mut rng = prophunt::rng(7);
    for d in [3, 5, 7] {
        let s = coloration_schedule(surface(d), 0);
        let dems = memory_dems(&s, d, &NoiseModel::new(1e-3)).unwrap();
        for i in 0..40 {
            if let Some(sub) = sample_subgraph(&dems[i % 2], &mut rng, 500) {
                let t = Instant::now();
                let r = min_weight_logical(&sub, Duration::from_secs(360));
                let secs = t.elapsed().as_secs_f64();
                if r.status == Status::Found && r.weight <= 4 {
                    times.push(secs);
                }
            }
        }
    }
    times.sort_by(f64::total_cmp);
    let median = times.get(times.len() / 2).copied().unwrap_or(f64::INFINITY);

    let dir = tempfile::tempdir().unwrap();
    let dem = dem_of(&nz_transposed_schedule(3).unwrap(), CheckType::Z, 3);
    let dem5 = dem_of(&coloration_schedule(surface(5), 0), CheckType::X, 5);
    let mut agree = 0;
    let mut mismatches = Vec::new();
    let mut i = 0;
    while agree + mismatches.len() < 20 {
        let source = if i % 2 == 0 { &dem } else { &dem5 };
        i += 1;
        let Some(sub) = sample_subgraph(source, &mut rng, 500) else {
            continue;
        };
        let path = dir.path().join(format!("s{i}.wcnf"));
        export_wcnf(&encode_wcnf(&sub), &path).unwrap();
        let external = external_maxsat(&std::fs::read_to_string(&path).unwrap());
        let r = min_weight_logical(&sub, Duration::from_secs(360));
        if r.status == Status::Found && external == Some(r.weight) {
            agree += 1;
        } else {
            mismatches.push((r.weight, external));
        }
    }
    outcome(
        median < 10.0 && mismatches.is_empty(),
        format!(
            "median solve {median:.4}s over {} subgraphs with weight at most 4; external MaxSAT agrees on {agree}/20{}",
            times.len(),
            first(&mismatches)
        ),
    )
}

fn zne_comparison() -> (Outcome, CompareReport) {
    let report = compare(&CompareConfig::default()).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for s in &report.summaries {
        let ok = s.hook_mean_bias < s.ds_mean_bias && (2.0..=8.0).contains(&s.improvement);
        pass &= ok;
        details.push(format!(
            "range {}: DS {:.4}, Hook {:.4}, factor {:.2}",
            s.range, s.ds_mean_bias, s.hook_mean_bias, s.improvement
        ));
    }
    (outcome(pass, details.join("; ")), report)
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and
    // ignored.
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {n} ({name}): {} [{secs:.1}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o, secs));
    };

    record(1, "validity oracle", &mut validity_oracle);
    record(2, "ambiguity vs solver", &mut ambiguity_vs_solver);
    record(3, "brute-force equivalence", &mut brute_force_oracle);
    let mut distances = Vec::new();
    record(4, "effective distance recovery", &mut || {
        let (o, d) = distance_recovery();
        distances = d;
        o
    });
    let mut trajectories = Vec::new();
    let mut optimized = None;
    record(5, "optimization convergence", &mut || {
        let (o, t, s) = convergence();
        trajectories = t;
        optimized = s;
        o
    });
    record(6, "LER ordering", &mut || ler_ordering(optimized.clone()));
    record(7, "solve time and WCNF cross-check", &mut solve_time_and_wcnf);
    let mut zne = None;
    record(8, "ZNE comparison", &mut || {
        let (o, r) = zne_comparison();
        zne = Some(r);
        o
    });
    record(9, "determinism", &mut || {
        let (_, d) = distance_recovery();
        let (_, t, _) = convergence();
        let (_, z) = zne_comparison();
        let same = [d == distances, t == trajectories, Some(&z) == zne.as_ref()];
        outcome(
            same.iter().all(|&x| x),
            format!("identical reruns (distance, optimizer, ZNE): {same:?}"),
        )
    });

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
