//! Monte Carlo logical error rates: independent sampling of DEM mechanisms
//! and a shortest-path matching decoder for graphlike models.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::CheckType;
use crate::dem::DetectorErrorModel;
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

/// Sampled detector and observable rows.
#[derive(Clone, Debug)]
pub struct ShotBatch {
    /// Shots × detectors.
    pub detectors: BitMatrix,
    /// Shots × observables.
    pub observables: BitMatrix,
    pub seed: u64,
}

/// Draws the number of failures before the next success of a Bernoulli(p)
/// sequence.
fn geometric<R: Rng>(rng: &mut R, ln_q: f64) -> usize {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let k = u.ln() / ln_q;
    if k >= usize::MAX as f64 {
        usize::MAX
    } else {
        k as usize
    }
}

/// Calls `fire(shot, mechanism)` for every mechanism that fires in each of
/// `shots` shots.
fn for_each_firing<R: Rng>(priors: &[f64], shots: usize, rng: &mut R, mut fire: impl FnMut(usize, usize)) {
    for (j, &p) in priors.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        if p >= 1.0 {
            (0..shots).for_each(|s| fire(s, j));
            continue;
        }
        let ln_q = (-p).ln_1p();
        let mut s = geometric(rng, ln_q);
        while s < shots {
            fire(s, j);
            s = s.saturating_add(1).saturating_add(geometric(rng, ln_q));
        }
    }
}

/// Samples `shots` independent shots of a DEM.
pub fn sample_shots(dem: &DetectorErrorModel, shots: usize, seed: u64) -> Result<ShotBatch> {
    if shots == 0 {
        return Err(Error::Argument("shots must be at least 1".into()));
    }
    let mut rng = crate::rng(seed);
    let mut detectors = BitMatrix::zeros(shots, dem.num_detectors());
    let mut observables = BitMatrix::zeros(shots, dem.num_observables());
    for_each_firing(&dem.priors, shots, &mut rng, |s, j| {
        for &d in dem.column_detectors(j) {
            detectors.toggle(s, d as usize);
        }
        let obs = dem.column_observables(j);
        for k in 0..dem.num_observables() {
            if obs >> k & 1 == 1 {
                observables.toggle(s, k);
            }
        }
    });
    Ok(ShotBatch {
        detectors,
        observables,
        seed,
    })
}

const BOUNDARY: u32 = u32::MAX;
const EXACT_LIMIT: usize = 12;

/// Matching decoder over the detectors of the memory basis.
#[derive(Clone, Debug)]
pub struct MatchingDecoder {
    /// DEM detector id → node index, or u32::MAX when ignored.
    node_of: Vec<u32>,
    num_nodes: usize,
    /// (num_nodes + 1)² distances; the last node is the boundary.
    dist: Vec<f64>,
    obs: Vec<u64>,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn xor_prob(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + q * (1.0 - p)
}

/// Splits `dets` into existing graphlike edges whose observables XOR to
/// `target`.
fn decompose(
    dets: &[u32],
    target: u64,
    edges: &HashMap<(u32, u32), Vec<(u64, f64)>>,
    parts: &mut Vec<((u32, u32), u64)>,
) -> bool {
    let Some((&a, rest)) = dets.split_first() else {
        return target == 0;
    };
    let mut options: Vec<(u32, usize)> = rest.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    options.push((BOUNDARY, usize::MAX));
    for (b, i) in options {
        let Some(variants) = edges.get(&key(a, b)) else {
            continue;
        };
        let remaining: Vec<u32> = rest
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, &x)| x)
            .collect();
        for &(o, _) in variants {
            parts.push((key(a, b), o));
            if decompose(&remaining, target ^ o, edges, parts) {
                return true;
            }
            parts.pop();
        }
    }
    false
}

impl MatchingDecoder {
    /// Builds the decoding graph from the detectors of the DEM's memory
    /// basis.
    pub fn new(dem: &DetectorErrorModel) -> Result<Self> {
        let code = dem.circuit.code.clone();
        let mut node_of = vec![BOUNDARY; dem.num_detectors()];
        let mut num_nodes = 0usize;
        for (d, &(stab, _)) in dem.detector_meta.iter().enumerate() {
            if code.stabilizer_kind(stab) == dem.basis {
                node_of[d] = num_nodes as u32;
                num_nodes += 1;
            }
        }
        let projected: Vec<Vec<u32>> = (0..dem.num_mechanisms())
            .map(|j| {
                dem.column_detectors(j)
                    .iter()
                    .map(|&d| node_of[d as usize])
                    .filter(|&n| n != BOUNDARY)
                    .collect()
            })
            .collect();

        let mut edges: HashMap<(u32, u32), Vec<(u64, f64)>> = HashMap::new();
        let add = |edges: &mut HashMap<(u32, u32), Vec<(u64, f64)>>, k: (u32, u32), o: u64, p: f64| {
            let v = edges.entry(k).or_default();
            match v.iter_mut().find(|(x, _)| *x == o) {
                Some(e) => e.1 = xor_prob(e.1, p),
                None => v.push((o, p)),
            }
        };
        let mut hyper = Vec::new();
        for (j, dets) in projected.iter().enumerate() {
            let o = dem.column_observables(j);
            match dets.len() {
                0 => {}
                1 => add(&mut edges, (dets[0], BOUNDARY), o, dem.priors[j]),
                2 => add(&mut edges, key(dets[0], dets[1]), o, dem.priors[j]),
                _ => hyper.push(j),
            }
        }
        for j in hyper {
            let mut parts = Vec::new();
            if !decompose(&projected[j], dem.column_observables(j), &edges, &mut parts) {
                return Err(Error::Unsupported(format!(
                    "mechanism {j} touching {} detectors has no graphlike decomposition",
                    projected[j].len()
                )));
            }
            for (k, o) in parts {
                add(&mut edges, k, o, dem.priors[j]);
            }
        }

        let n = num_nodes + 1;
        let mut dist = vec![f64::INFINITY; n * n];
        let mut obs = vec![0u64; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        for (&(a, b), variants) in &edges {
            let (o, p) = variants
                .iter()
                .copied()
                .fold((0, 0.0), |best, v| if v.1 > best.1 { v } else { best });
            let p = p.clamp(1e-300, 0.5 - 1e-12);
            let w = ((1.0 - p) / p).ln();
            let a = a as usize;
            let b = if b == BOUNDARY { num_nodes } else { b as usize };
            if w < dist[a * n + b] {
                dist[a * n + b] = w;
                dist[b * n + a] = w;
                obs[a * n + b] = o;
                obs[b * n + a] = o;
            }
        }
        for k in 0..n {
            for i in 0..n {
                let dik = dist[i * n + k];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let c = dik + dist[k * n + j];
                    if c < dist[i * n + j] {
                        dist[i * n + j] = c;
                        obs[i * n + j] = obs[i * n + k] ^ obs[k * n + j];
                    }
                }
            }
        }
        Ok(MatchingDecoder {
            node_of,
            num_nodes,
            dist,
            obs,
        })
    }

    fn pair(&self, a: usize, b: usize) -> (f64, u64) {
        let n = self.num_nodes + 1;
        (self.dist[a * n + b], self.obs[a * n + b])
    }

    /// Graph nodes of the flipped detectors among `detectors` (DEM ids).
    pub fn defects(&self, detectors: impl IntoIterator<Item = usize>) -> Vec<usize> {
        detectors
            .into_iter()
            .filter_map(|d| {
                let n = self.node_of[d];
                (n != BOUNDARY).then_some(n as usize)
            })
            .collect()
    }

    /// Predicted observable mask and matching weight for a defect set.
    pub fn match_defects(&self, defects: &[usize]) -> (u64, f64) {
        let k = defects.len();
        let b = self.num_nodes;
        if k == 0 {
            return (0, 0.0);
        }
        if k <= EXACT_LIMIT {
            let full = (1usize << k) - 1;
            let mut cost = vec![f64::INFINITY; full + 1];
            let mut mask_obs = vec![0u64; full + 1];
            cost[0] = 0.0;
            for mask in 1..=full {
                let i = mask.trailing_zeros() as usize;
                let rest = mask & !(1 << i);
                let (w, o) = self.pair(defects[i], b);
                let mut best = (cost[rest] + w, mask_obs[rest] ^ o);
                let mut others = rest;
                while others != 0 {
                    let j = others.trailing_zeros() as usize;
                    others &= others - 1;
                    let r = rest & !(1 << j);
                    let (w, o) = self.pair(defects[i], defects[j]);
                    let c = cost[r] + w;
                    if c < best.0 {
                        best = (c, mask_obs[r] ^ o);
                    }
                }
                cost[mask] = best.0;
                mask_obs[mask] = best.1;
            }
            return (mask_obs[full], cost[full]);
        }
        // Greedy: repeatedly take the cheapest remaining pair or boundary match.
        let mut alive: Vec<usize> = defects.to_vec();
        let mut total = (0u64, 0.0);
        while !alive.is_empty() {
            let mut best = (f64::INFINITY, 0usize, None::<usize>);
            for x in 0..alive.len() {
                let (w, _) = self.pair(alive[x], b);
                if w < best.0 {
                    best = (w, x, None);
                }
                for y in x + 1..alive.len() {
                    let (w, _) = self.pair(alive[x], alive[y]);
                    if w < best.0 {
                        best = (w, x, Some(y));
                    }
                }
            }
            let (_, x, y) = best;
            let (w, o) = match y {
                Some(y) => self.pair(alive[x], alive[y]),
                None => self.pair(alive[x], b),
            };
            total = (total.0 ^ o, total.1 + w);
            if let Some(y) = y {
                alive.swap_remove(y);
            }
            alive.swap_remove(x);
        }
        total
    }

    /// Weight of matching every defect to the boundary.
    pub fn boundary_weight(&self, defects: &[usize]) -> f64 {
        defects.iter().map(|&d| self.pair(d, self.num_nodes).0).sum()
    }

    /// Predicted observable mask for a set of flipped DEM detectors.
    pub fn decode(&self, detectors: &[usize]) -> u64 {
        self.match_defects(&self.defects(detectors.iter().copied())).0
    }
}

/// Predicted observable mask for one detector row.
pub fn decode_shot(dem: &DetectorErrorModel, detectors: &[usize]) -> Result<u64> {
    Ok(MatchingDecoder::new(dem)?.decode(detectors))
}

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LerEstimate {
    pub basis: Option<CheckType>,
    pub failures: u64,
    pub shots: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl LerEstimate {
    pub fn new(basis: Option<CheckType>, failures: u64, shots: u64) -> Self {
        let (ci_low, ci_high) = wilson(failures, shots);
        LerEstimate {
            basis,
            failures,
            shots,
            rate: if shots == 0 { 0.0 } else { failures as f64 / shots as f64 },
            ci_low,
            ci_high,
        }
    }

    pub fn overlaps(&self, other: &LerEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// 95% Wilson score interval.
pub fn wilson(failures: u64, shots: u64) -> (f64, f64) {
    if shots == 0 {
        return (0.0, 1.0);
    }
    let n = shots as f64;
    let p = failures as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedLer {
    pub per_basis: Vec<LerEstimate>,
    /// 1 − Π(1 − rate) over bases.
    pub combined: f64,
}

const BATCH: usize = 1 << 14;

/// Logical error rate of one memory DEM under the matching decoder.
pub fn logical_error_rate(dem: &DetectorErrorModel, shots: u64, seed: u64) -> Result<LerEstimate> {
    let decoder = MatchingDecoder::new(dem)?;
    let batches = shots.div_ceil(BATCH as u64);
    let nd = dem.num_detectors();
    let failures: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let n = (shots - b * BATCH as u64).min(BATCH as u64) as usize;
            let mut rng = crate::rng(crate::derive_seed(seed, b, 0));
            let mut fired: Vec<Vec<u32>> = vec![Vec::new(); n];
            let mut actual = vec![0u64; n];
            for_each_firing(&dem.priors, n, &mut rng, |s, j| {
                fired[s].push(j as u32);
                actual[s] ^= dem.column_observables(j);
            });
            let mut flips = vec![false; nd];
            let mut failures = 0u64;
            for (s, cols) in fired.iter().enumerate() {
                if cols.is_empty() {
                    continue;
                }
                let mut touched = Vec::new();
                for &j in cols {
                    for &d in dem.column_detectors(j as usize) {
                        flips[d as usize] ^= true;
                        touched.push(d as usize);
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                let dets: Vec<usize> = touched.iter().copied().filter(|&d| flips[d]).collect();
                for &d in &touched {
                    flips[d] = false;
                }
                if decoder.decode(&dets) != actual[s] {
                    failures += 1;
                }
            }
            failures
        })
        .sum();
    Ok(LerEstimate::new(Some(dem.basis), failures, shots))
}

/// Logical error rates of several memory DEMs and their combination.
pub fn logical_error_rate_combined(dems: &[&DetectorErrorModel], shots: u64, seed: u64) -> Result<CombinedLer> {
    let per_basis = dems
        .iter()
        .enumerate()
        .map(|(i, d)| logical_error_rate(d, shots, crate::derive_seed(seed, u64::MAX, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let combined = 1.0 - per_basis.iter().map(|e| 1.0 - e.rate).product::<f64>();
    Ok(CombinedLer { per_basis, combined })
}
