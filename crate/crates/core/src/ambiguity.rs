//! Random ambiguous-subgraph search over the decoding graph of a DEM.

use rand::Rng;

use crate::code::CheckType;
use crate::dem::DetectorErrorModel;
use crate::gf2::{rank, BitMatrix, BitVec, XorBasis};

/// Default cap on expansion steps per sample.
pub const DEFAULT_MAX_STEPS: usize = 500;

/// A connected piece of the decoding graph closed under "every error whose
/// detectors all lie in the subgraph belongs to it".
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub basis: CheckType,
    /// DEM mechanism ids, ascending.
    pub error_nodes: Vec<usize>,
    /// DEM detector ids, ascending.
    pub syndrome_nodes: Vec<usize>,
    /// Syndrome nodes × error nodes.
    pub h: BitMatrix,
    /// Observables × error nodes.
    pub l: BitMatrix,
    pub ambiguous: bool,
    pub seed_error: usize,
}

/// Mechanisms with nonempty detector support contained in `syndromes`.
pub fn closure(dem: &DetectorErrorModel, syndromes: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; dem.num_detectors()];
    for &d in syndromes {
        inside[d] = true;
    }
    let mut cols: Vec<usize> = syndromes
        .iter()
        .flat_map(|&d| dem.detector_columns(d).iter().map(|&j| j as usize))
        .filter(|&j| {
            dem.column_detectors(j)
                .iter()
                .all(|&d| inside[d as usize])
        })
        .collect();
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// H′ and L′ restricted to `syndromes` (rows, in the given order) and `errors`.
pub fn submatrices(
    dem: &DetectorErrorModel,
    syndromes: &[usize],
    errors: &[usize],
) -> (BitMatrix, BitMatrix) {
    let mut row_of = vec![usize::MAX; dem.num_detectors()];
    for (i, &d) in syndromes.iter().enumerate() {
        row_of[d] = i;
    }
    let mut h = BitMatrix::zeros(syndromes.len(), errors.len());
    let mut l = BitMatrix::zeros(dem.num_observables(), errors.len());
    for (c, &j) in errors.iter().enumerate() {
        for &d in dem.column_detectors(j) {
            let r = row_of[d as usize];
            if r != usize::MAX {
                h.set(r, c, true);
            }
        }
        let obs = dem.column_observables(j);
        for k in 0..dem.num_observables() {
            if obs >> k & 1 == 1 {
                l.set(k, c, true);
            }
        }
    }
    (h, l)
}

/// True iff some observable row restricted to the closure of `syndromes` lies
/// outside the rowspace of the restricted check matrix.
pub fn is_ambiguous(dem: &DetectorErrorModel, syndromes: &[usize]) -> bool {
    let errors = closure(dem, syndromes);
    if errors.is_empty() {
        return false;
    }
    let (h, l) = submatrices(dem, syndromes, &errors);
    let stacked = h.vstack(&l).expect("same column count");
    rank(&stacked) > rank(&h)
}

/// Builds the subgraph record for a syndrome set.
pub fn subgraph_from_syndromes(
    dem: &DetectorErrorModel,
    syndromes: &[usize],
    seed_error: usize,
) -> Subgraph {
    let mut syndrome_nodes = syndromes.to_vec();
    syndrome_nodes.sort_unstable();
    syndrome_nodes.dedup();
    let error_nodes = closure(dem, &syndrome_nodes);
    let (h, l) = submatrices(dem, &syndrome_nodes, &error_nodes);
    let ambiguous = !error_nodes.is_empty() && {
        let stacked = h.vstack(&l).expect("same column count");
        rank(&stacked) > rank(&h)
    };
    Subgraph {
        basis: dem.basis,
        error_nodes,
        syndrome_nodes,
        h,
        l,
        ambiguous,
        seed_error,
    }
}

/// Grows a random connected subgraph one error node at a time and returns it
/// as soon as it is ambiguous; None when `max_steps` expansions pass first or
/// the component is exhausted.
pub fn sample_subgraph<R: Rng>(
    dem: &DetectorErrorModel,
    rng: &mut R,
    max_steps: usize,
) -> Option<Subgraph> {
    let candidates: Vec<usize> = (0..dem.num_mechanisms())
        .filter(|&j| !dem.column_detectors(j).is_empty())
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let nd = dem.num_detectors();
    let width = nd + dem.num_observables();
    let seed_error = candidates[rng.gen_range(0..candidates.len())];

    let mut in_syndromes = vec![false; nd];
    let mut syndromes: Vec<usize> = Vec::new();
    let mut in_errors = vec![false; dem.num_mechanisms()];
    let mut in_frontier = vec![false; dem.num_mechanisms()];
    let mut frontier: Vec<usize> = Vec::new();
    let mut with_obs = XorBasis::new();
    let mut without_obs = XorBasis::new();

    let column_vectors = |j: usize| {
        let mut hv = BitVec::zeros(width);
        for &d in dem.column_detectors(j) {
            hv.set(d as usize, true);
        }
        let mut hl = hv.clone();
        let obs = dem.column_observables(j);
        for k in 0..dem.num_observables() {
            if obs >> k & 1 == 1 {
                hl.set(nd + k, true);
            }
        }
        (hv, hl)
    };

    let mut add_error = |j: usize,
                         in_syndromes: &mut Vec<bool>,
                         syndromes: &mut Vec<usize>,
                         in_errors: &mut Vec<bool>,
                         frontier: &mut Vec<usize>,
                         in_frontier: &mut Vec<bool>| {
        let mut new_dets = Vec::new();
        for &d in dem.column_detectors(j) {
            let d = d as usize;
            if !in_syndromes[d] {
                in_syndromes[d] = true;
                syndromes.push(d);
                new_dets.push(d);
            }
        }
        for d in new_dets {
            for &c in dem.detector_columns(d) {
                let c = c as usize;
                if in_errors[c] {
                    continue;
                }
                if dem
                    .column_detectors(c)
                    .iter()
                    .all(|&x| in_syndromes[x as usize])
                {
                    in_errors[c] = true;
                    let (hv, hl) = column_vectors(c);
                    without_obs.insert(&hv);
                    with_obs.insert(&hl);
                } else if !in_frontier[c] {
                    in_frontier[c] = true;
                    frontier.push(c);
                }
            }
        }
        with_obs.rank() > without_obs.rank()
    };

    let mut ambiguous = add_error(
        seed_error,
        &mut in_syndromes,
        &mut syndromes,
        &mut in_errors,
        &mut frontier,
        &mut in_frontier,
    );
    let mut steps = 0;
    while !ambiguous && steps < max_steps {
        // Drop frontier entries absorbed by closure.
        let pick = loop {
            if frontier.is_empty() {
                return None;
            }
            let i = rng.gen_range(0..frontier.len());
            let c = frontier.swap_remove(i);
            in_frontier[c] = false;
            if !in_errors[c] {
                break c;
            }
        };
        steps += 1;
        ambiguous = add_error(
            pick,
            &mut in_syndromes,
            &mut syndromes,
            &mut in_errors,
            &mut frontier,
            &mut in_frontier,
        );
    }
    if !ambiguous {
        return None;
    }
    let sub = subgraph_from_syndromes(dem, &syndromes, seed_error);
    debug_assert!(sub.ambiguous);
    Some(sub)
}
