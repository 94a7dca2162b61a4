//! The iterative optimization loop: sample ambiguous subgraphs of the current
//! schedule's detector error models, solve them, and apply schedule edits
//! that remove the low-weight logical errors found.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{sample_subgraph, Subgraph, DEFAULT_MAX_STEPS};
use crate::circuit::{depth, memory_circuit, validate_schedule, ScheduleFile, SmSchedule};
use crate::code::{CheckType, CssCode};
use crate::dem::{build_dem, DetectorErrorModel, NoiseModel};
use crate::error::{Error, Result};
use crate::minweight::{
    code_distance, effective_distance_both, min_weight_logical, Budget, DistanceResult, MinWeightResult,
    Status, DEFAULT_SUBGRAPH_TIMEOUT,
};
use crate::mutate::{apply_changes, enumerate_changes, prune_changes, Origins, RebuildConfig, VerifiedChange};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub samples_per_iteration: usize,
    pub workers: usize,
    pub max_steps: usize,
    pub solver_timeout: Duration,
    pub seed: u64,
    /// Stop after an iteration with no ambiguous subgraph below the code
    /// distance.
    pub early_stop: bool,
    /// Memory rounds of the DEMs; the code distance when unset.
    pub rounds: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            iterations: 25,
            samples_per_iteration: 500,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            max_steps: DEFAULT_MAX_STEPS,
            solver_timeout: DEFAULT_SUBGRAPH_TIMEOUT,
            seed: 0,
            early_stop: true,
            rounds: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.samples_per_iteration == 0 || self.workers == 0 || self.max_steps == 0 {
            return Err(Error::Argument(
                "iterations, samples, workers and max_steps must be at least 1".into(),
            ));
        }
        if self.rounds == Some(0) {
            return Err(Error::Argument("rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// One solved ambiguous subgraph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubgraphReport {
    pub sample: usize,
    pub basis: CheckType,
    pub errors: usize,
    pub syndromes: usize,
    pub status: Status,
    pub weight: usize,
    pub solve_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct IterationReport {
    pub iteration: usize,
    /// Schedule at the start of the iteration.
    pub input: SmSchedule,
    /// Schedule after this iteration's changes.
    pub schedule: SmSchedule,
    pub depth: usize,
    /// Distinct ambiguous subgraphs sampled.
    pub ambiguous_hits: usize,
    /// Of those, the ones with a logical error below the code distance.
    pub sub_distance_hits: usize,
    pub min_weight: Option<usize>,
    pub timeouts: usize,
    pub candidates: usize,
    pub verified: usize,
    pub applied: Vec<String>,
    pub skipped: usize,
    pub subgraphs: Vec<SubgraphReport>,
    pub wall_seconds: f64,
}

/// Serializable form of an [`IterationReport`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub schedule: ScheduleFile,
    pub depth: usize,
    pub ambiguous_hits: usize,
    pub sub_distance_hits: usize,
    pub min_weight: Option<usize>,
    pub timeouts: usize,
    pub candidates: usize,
    pub verified: usize,
    pub applied: Vec<String>,
    pub skipped: usize,
    pub solve_seconds: Vec<f64>,
    pub subgraphs: Vec<SubgraphReport>,
    pub wall_seconds: f64,
}

impl IterationReport {
    pub fn record(&self) -> IterationRecord {
        IterationRecord {
            iteration: self.iteration,
            schedule: self.schedule.to_file(),
            depth: self.depth,
            ambiguous_hits: self.ambiguous_hits,
            sub_distance_hits: self.sub_distance_hits,
            min_weight: self.min_weight,
            timeouts: self.timeouts,
            candidates: self.candidates,
            verified: self.verified,
            applied: self.applied.clone(),
            skipped: self.skipped,
            solve_seconds: self.subgraphs.iter().map(|s| s.solve_seconds).collect(),
            subgraphs: self.subgraphs.clone(),
            wall_seconds: self.wall_seconds,
        }
    }
}

/// X- and Z-memory DEMs of a schedule.
pub fn memory_dems(s: &SmSchedule, rounds: usize, noise: &NoiseModel) -> Result<[DetectorErrorModel; 2]> {
    Ok([
        build_dem(memory_circuit(s, rounds, CheckType::X)?, noise)?,
        build_dem(memory_circuit(s, rounds, CheckType::Z)?, noise)?,
    ])
}

/// Effective distance of a schedule over both memory bases, capped at the
/// code distance when known.
pub fn schedule_distance(s: &SmSchedule, rounds: usize, budget: Budget<'_>) -> Result<DistanceResult> {
    let dems = memory_dems(s, rounds, &NoiseModel::new(1e-3))?;
    let cap = code_distance(s.code());
    Ok(effective_distance_both(&[&dems[0], &dems[1]], cap, budget).0)
}

fn code_distance_of(code: &CssCode) -> Result<usize> {
    code_distance(code).ok_or_else(|| Error::CodeInvariant("code has no logical operators".into()))
}

struct Sampled {
    index: usize,
    sub: Subgraph,
}

struct Solved {
    index: usize,
    sub: Subgraph,
    result: MinWeightResult,
    seconds: f64,
}

/// Runs the optimization loop from `start`.
pub fn optimize(start: &SmSchedule, cfg: &OptimizerConfig) -> Result<Vec<IterationReport>> {
    cfg.validate()?;
    validate_schedule(start).map_err(|e| Error::Precondition(format!("start schedule is invalid: {e}")))?;
    let d = code_distance_of(start.code())?;
    let rounds = cfg.rounds.unwrap_or(d);
    let rebuild = RebuildConfig {
        rounds,
        noise: NoiseModel::new(1e-3),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;

    let mut current = start.clone();
    let mut reports = Vec::new();
    for it in 0..cfg.iterations {
        let t0 = Instant::now();
        let dems = memory_dems(&current, rounds, &rebuild.noise)?;
        let report = pool.install(|| iteration(it, &current, &dems, d, cfg, &rebuild))?;
        log::info!(
            "iteration {it}: {} ambiguous, {} below d, min weight {:?}, applied {}, depth {}",
            report.ambiguous_hits,
            report.sub_distance_hits,
            report.min_weight,
            report.applied.len(),
            report.depth
        );
        let report = IterationReport {
            wall_seconds: t0.elapsed().as_secs_f64(),
            ..report
        };
        current = report.schedule.clone();
        let stop = cfg.early_stop && report.sub_distance_hits == 0;
        reports.push(report);
        if stop {
            break;
        }
    }
    Ok(reports)
}

fn iteration(
    it: usize,
    current: &SmSchedule,
    dems: &[DetectorErrorModel; 2],
    d: usize,
    cfg: &OptimizerConfig,
    rebuild: &RebuildConfig,
) -> Result<IterationReport> {
    let sampled: Vec<Option<Sampled>> = (0..cfg.samples_per_iteration)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng(crate::derive_seed(cfg.seed, it as u64, i as u64));
            sample_subgraph(&dems[i % 2], &mut rng, cfg.max_steps).map(|sub| Sampled { index: i, sub })
        })
        .collect();
    let mut seen = HashSet::new();
    let unique: Vec<Sampled> = sampled
        .into_iter()
        .flatten()
        .filter(|s| seen.insert((s.sub.basis, s.sub.syndrome_nodes.clone())))
        .collect();

    let solved: Vec<Solved> = unique
        .into_par_iter()
        .map(|s| {
            let t = Instant::now();
            let result = min_weight_logical(&s.sub, cfg.solver_timeout);
            Solved {
                index: s.index,
                sub: s.sub,
                result,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect();

    let below: Vec<&Solved> = solved
        .iter()
        .filter(|s| s.result.status == Status::Found && s.result.weight < d)
        .collect();

    let per_subgraph: Vec<Result<(usize, Vec<VerifiedChange>)>> = below
        .par_iter()
        .map(|s| {
            let dem = &dems[s.index % 2];
            let mut rng = crate::rng(crate::derive_seed(!cfg.seed, it as u64, s.index as u64));
            let cands = enumerate_changes(dem, current, &s.result.errors, s.index, &mut rng)?;
            let n = cands.len();
            let verified = prune_changes(current, dem, &s.sub, &s.result.errors, cands, rebuild)?;
            Ok((n, verified))
        })
        .collect();
    let mut candidates = 0;
    let mut verified = Vec::new();
    for r in per_subgraph {
        let (n, v) = r?;
        candidates += n;
        verified.extend(v);
    }
    let num_verified = verified.len();

    let origins: Origins = below
        .iter()
        .map(|s| {
            let dem = &dems[s.index % 2];
            let dets = s.sub.syndrome_nodes.iter().map(|&x| dem.detector_meta[x]).collect();
            (s.index, (s.sub.basis, dets))
        })
        .collect();
    let outcome = apply_changes(current, verified, Some((rebuild, &origins)))?;
    validate_schedule(&outcome.schedule)
        .map_err(|e| Error::Internal(format!("optimizer produced an invalid schedule: {e}")))?;

    Ok(IterationReport {
        iteration: it,
        input: current.clone(),
        depth: depth(&outcome.schedule)?,
        schedule: outcome.schedule,
        ambiguous_hits: solved.len(),
        sub_distance_hits: below.len(),
        min_weight: solved
            .iter()
            .filter(|s| s.result.status == Status::Found)
            .map(|s| s.result.weight)
            .min(),
        timeouts: solved.iter().filter(|s| s.result.status == Status::Timeout).count(),
        candidates,
        verified: num_verified,
        applied: outcome.applied.iter().map(|v| v.change.describe()).collect(),
        skipped: outcome.skipped.len(),
        subgraphs: solved
            .iter()
            .map(|s| SubgraphReport {
                sample: s.index,
                basis: s.sub.basis,
                errors: s.sub.error_nodes.len(),
                syndromes: s.sub.syndrome_nodes.len(),
                status: s.result.status,
                weight: s.result.weight,
                solve_seconds: s.seconds,
            })
            .collect(),
        wall_seconds: 0.0,
    })
}

#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    /// Iteration after which this schedule was current; None for the start.
    pub iteration: Option<usize>,
    pub schedule: SmSchedule,
    pub distance: DistanceResult,
    /// Effective distance dropped relative to the previous point.
    pub decreased: bool,
}

/// Distinct schedules visited by a run, in order, with effective distances.
pub fn trajectory_circuits(
    reports: &[IterationReport],
    rounds: Option<usize>,
    timeout: Duration,
) -> Result<Vec<TrajectoryPoint>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Argument("no iteration reports".into()))?;
    let rounds = match rounds {
        Some(r) => r,
        None => code_distance_of(first.input.code())?,
    };
    let mut snapshots = vec![(None, first.input.clone())];
    snapshots.extend(reports.iter().map(|r| (Some(r.iteration), r.schedule.clone())));
    let mut seen = HashSet::new();
    let mut out: Vec<TrajectoryPoint> = Vec::new();
    for (iteration, schedule) in snapshots {
        if !seen.insert(schedule.clone()) {
            continue;
        }
        let distance = schedule_distance(&schedule, rounds, Budget::timeout(timeout))?;
        let decreased = out.last().is_some_and(|p| distance.value < p.distance.value);
        if decreased {
            log::warn!("effective distance decreased to {} at iteration {iteration:?}", distance.value);
        }
        out.push(TrajectoryPoint {
            iteration,
            schedule,
            distance,
            decreased,
        });
    }
    Ok(out)
}
