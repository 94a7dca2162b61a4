//! Minimum-weight undetected logical errors: an exact iterative-deepening
//! search, the weighted MaxSAT encoding with XOR trees, WCNF export, and
//! effective-distance estimation.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::ambiguity::Subgraph;
use crate::code::CssCode;
use crate::dem::DetectorErrorModel;
use crate::error::{Error, Result};
use crate::gf2::{kernel_basis, BitMatrix};

/// Per-subgraph solver budget.
pub const DEFAULT_SUBGRAPH_TIMEOUT: Duration = Duration::from_secs(360);
/// Whole-model effective-distance budget.
pub const DEFAULT_DISTANCE_TIMEOUT: Duration = Duration::from_secs(7200);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Found,
    None,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinWeightResult {
    pub status: Status,
    /// Column ids of the solution (DEM mechanism ids for subgraphs). On
    /// timeout, the best solution found so far, possibly empty.
    pub errors: Vec<usize>,
    pub weight: usize,
}

/// Parity problem: find a smallest nonempty column set with zero total row
/// parity and nonzero total observable mask.
#[derive(Clone, Debug)]
pub struct Problem {
    pub num_rows: usize,
    pub rows: Vec<Vec<u32>>,
    pub obs: Vec<u64>,
}

impl Problem {
    pub fn from_matrices(h: &BitMatrix, l: &BitMatrix) -> Result<Self> {
        if h.cols() != l.cols() {
            return Err(Error::Dimension(format!(
                "H has {} columns, L has {}",
                h.cols(),
                l.cols()
            )));
        }
        if l.rows() > 64 {
            return Err(Error::Unsupported("more than 64 observables".into()));
        }
        let ht = h.transpose();
        let lt = l.transpose();
        let rows = (0..ht.rows())
            .map(|c| ht.row_ones(c).into_iter().map(|r| r as u32).collect())
            .collect();
        let obs = (0..lt.rows())
            .map(|c| lt.row_ones(c).into_iter().fold(0u64, |m, k| m | 1 << k))
            .collect();
        Ok(Problem {
            num_rows: h.rows(),
            rows,
            obs,
        })
    }

    pub fn from_dem(dem: &DetectorErrorModel) -> Self {
        Problem {
            num_rows: dem.num_detectors(),
            rows: (0..dem.num_mechanisms())
                .map(|j| dem.column_detectors(j).to_vec())
                .collect(),
            obs: (0..dem.num_mechanisms())
                .map(|j| dem.column_observables(j))
                .collect(),
        }
    }

    /// X-type logical errors of a code: columns are qubits, rows Z checks,
    /// observables the Z logicals (or the other way round).
    pub fn from_code_checks(checks: &BitMatrix, logicals: &BitMatrix) -> Result<Self> {
        Self::from_matrices(checks, logicals)
    }

    pub fn num_cols(&self) -> usize {
        self.rows.len()
    }

    fn h_matrix(&self) -> BitMatrix {
        let mut h = BitMatrix::zeros(self.num_rows, self.num_cols());
        for (c, rows) in self.rows.iter().enumerate() {
            for &r in rows {
                h.toggle(r as usize, c);
            }
        }
        h
    }

    /// Row parity and observable mask of a column set.
    pub fn evaluate(&self, cols: &[usize]) -> (Vec<u32>, u64) {
        let mut parity = vec![false; self.num_rows];
        let mut obs = 0;
        for &c in cols {
            for &r in &self.rows[c] {
                parity[r as usize] ^= true;
            }
            obs ^= self.obs[c];
        }
        let rows = (0..self.num_rows as u32).filter(|&r| parity[r as usize]).collect();
        (rows, obs)
    }

    pub fn is_logical(&self, cols: &[usize]) -> bool {
        let (rows, obs) = self.evaluate(cols);
        !cols.is_empty() && rows.is_empty() && obs != 0
    }
}

/// Lowest-weight kernel basis vector with a nonzero observable mask. None iff
/// no logical error exists.
fn kernel_witness(p: &Problem) -> Option<Vec<usize>> {
    let basis = kernel_basis(&p.h_matrix());
    basis
        .into_iter()
        .map(|v| v.ones())
        .filter(|cols| cols.iter().fold(0u64, |m, &c| m ^ p.obs[c]) != 0)
        .min_by_key(|cols| cols.len())
}

/// Stop conditions for a search.
#[derive(Clone, Copy)]
pub struct Budget<'a> {
    pub deadline: Option<Instant>,
    pub cancel: Option<&'a AtomicBool>,
}

impl<'a> Budget<'a> {
    pub fn timeout(t: Duration) -> Self {
        Budget {
            deadline: Instant::now().checked_add(t),
            cancel: None,
        }
    }

    pub fn unlimited() -> Self {
        Budget {
            deadline: None,
            cancel: None,
        }
    }

    pub fn with_cancel(mut self, cancel: &'a AtomicBool) -> Self {
        self.cancel = Some(cancel);
        self
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
            || self.cancel.is_some_and(|c| c.load(Ordering::Relaxed))
    }
}

struct Search<'a> {
    p: &'a Problem,
    min_row: Vec<u32>,
    /// Columns containing each row, by ascending column id.
    row_cols: Vec<Vec<u32>>,
    /// Exact row set → columns with that row set.
    by_rows: HashMap<Vec<u32>, Vec<u32>>,
    max_deg: usize,
    used: Vec<bool>,
    stack: Vec<usize>,
    nodes: u64,
    budget: Budget<'a>,
    stopped: bool,
}

/// Symmetric difference of two ascending lists.
fn sym_diff(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

impl<'a> Search<'a> {
    fn new(p: &'a Problem, budget: Budget<'a>) -> Self {
        let mut row_cols = vec![Vec::new(); p.num_rows];
        let mut by_rows: HashMap<Vec<u32>, Vec<u32>> = HashMap::new();
        let mut min_row = Vec::with_capacity(p.num_cols());
        for (c, rows) in p.rows.iter().enumerate() {
            for &r in rows {
                row_cols[r as usize].push(c as u32);
            }
            min_row.push(rows.first().copied().unwrap_or(u32::MAX));
            if !rows.is_empty() {
                by_rows.entry(rows.clone()).or_default().push(c as u32);
            }
        }
        let max_deg = p.rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
        Search {
            p,
            min_row,
            row_cols,
            by_rows,
            max_deg,
            used: vec![false; p.num_cols()],
            stack: Vec::new(),
            nodes: 0,
            budget,
            stopped: false,
        }
    }

    /// Searches for a logical error of weight exactly `w` whose lowest row is
    /// `d0`, given the active rows and observable mask of the chosen columns.
    fn extend(&mut self, active: &[u32], obs: u64, remaining: usize, d0: u32) -> bool {
        self.nodes += 1;
        if self.nodes % 4096 == 0 && self.budget.expired() {
            self.stopped = true;
        }
        if self.stopped {
            return false;
        }
        if active.is_empty() {
            return remaining == 0 && obs != 0;
        }
        if remaining == 0 || active.len() > remaining * self.max_deg {
            return false;
        }
        if remaining == 1 {
            if let Some(cols) = self.by_rows.get(active) {
                for &c in cols {
                    let c = c as usize;
                    if !self.used[c] && self.min_row[c] >= d0 && obs ^ self.p.obs[c] != 0 {
                        self.stack.push(c);
                        return true;
                    }
                }
            }
            return false;
        }
        let r = active[0] as usize;
        let mut next = Vec::with_capacity(active.len() + self.max_deg);
        for i in 0..self.row_cols[r].len() {
            let c = self.row_cols[r][i] as usize;
            if self.used[c] || self.min_row[c] < d0 {
                continue;
            }
            sym_diff(active, &self.p.rows[c], &mut next);
            self.used[c] = true;
            self.stack.push(c);
            let snapshot = next.clone();
            if self.extend(&snapshot, obs ^ self.p.obs[c], remaining - 1, d0) {
                return true;
            }
            self.stack.pop();
            self.used[c] = false;
            if self.stopped {
                return false;
            }
        }
        false
    }

    /// A logical error of weight exactly `w`, if one exists.
    fn search_weight(&mut self, w: usize) -> Option<Vec<usize>> {
        if w == 1 {
            return (0..self.p.num_cols())
                .find(|&c| self.p.rows[c].is_empty() && self.p.obs[c] != 0)
                .map(|c| vec![c]);
        }
        for d0 in 0..self.p.num_rows as u32 {
            for i in 0..self.row_cols[d0 as usize].len() {
                let c = self.row_cols[d0 as usize][i] as usize;
                if self.min_row[c] != d0 {
                    continue;
                }
                self.used[c] = true;
                self.stack.clear();
                self.stack.push(c);
                let rows = self.p.rows[c].clone();
                let found = self.extend(&rows, self.p.obs[c], w - 1, d0);
                self.used[c] = false;
                if found {
                    for &x in &self.stack {
                        self.used[x] = false;
                    }
                    return Some(std::mem::take(&mut self.stack));
                }
                if self.stopped {
                    return None;
                }
            }
        }
        None
    }
}

/// Outcome of a weight-capped search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Capped {
    /// Exact minimum, at most the cap.
    Found(Vec<usize>),
    /// Logical errors exist, none at or below the cap.
    AboveCap,
    None,
    /// Budget exhausted; carries the best known logical error.
    Timeout(Vec<usize>),
}

/// Exact minimum-weight logical error of `p` among weights ≤ `max_weight`.
pub fn solve_capped(p: &Problem, max_weight: Option<usize>, budget: Budget<'_>) -> Capped {
    let witness = match kernel_witness(p) {
        Some(w) => w,
        None => return Capped::None,
    };
    let mut search = Search::new(p, budget);
    let last = witness.len() - 1;
    let cap = max_weight.map_or(last, |m| m.min(last));
    for w in 1..=cap {
        if let Some(mut cols) = search.search_weight(w) {
            cols.sort_unstable();
            assert!(p.is_logical(&cols), "solver returned a non-logical set");
            return Capped::Found(cols);
        }
        if search.stopped {
            return Capped::Timeout(witness);
        }
        log::debug!("no logical error of weight {w} ({} nodes)", search.nodes);
    }
    if max_weight.is_some_and(|m| m < witness.len()) {
        Capped::AboveCap
    } else {
        Capped::Found(witness)
    }
}

/// Exact minimum-weight logical error of `p`.
pub fn solve(p: &Problem, budget: Budget<'_>) -> MinWeightResult {
    let (status, errors) = match solve_capped(p, None, budget) {
        Capped::Found(e) => (Status::Found, e),
        Capped::None | Capped::AboveCap => (Status::None, vec![]),
        Capped::Timeout(e) => (Status::Timeout, e),
    };
    MinWeightResult {
        status,
        weight: errors.len(),
        errors,
    }
}

/// Minimum-weight logical error inside a subgraph; error ids are DEM
/// mechanism ids.
pub fn min_weight_logical(sub: &Subgraph, timeout: Duration) -> MinWeightResult {
    min_weight_logical_with(sub, Budget::timeout(timeout))
}

pub fn min_weight_logical_with(sub: &Subgraph, budget: Budget<'_>) -> MinWeightResult {
    let p = Problem::from_matrices(&sub.h, &sub.l).expect("subgraph matrices agree");
    let mut r = solve(&p, budget);
    r.errors = r.errors.iter().map(|&c| sub.error_nodes[c]).collect();
    r
}

/// Minimum-weight X- or Z-type logical operator of a code, i.e. its distance.
pub fn code_distance(code: &CssCode) -> Option<usize> {
    if let Some(d) = code.known_distance() {
        return Some(d);
    }
    let mut best: Option<usize> = None;
    for (checks, logicals) in [(code.hz(), code.lz()), (code.hx(), code.lx())] {
        let p = Problem::from_code_checks(checks, logicals).ok()?;
        let r = solve(&p, Budget::unlimited());
        if r.status == Status::Found {
            best = Some(best.map_or(r.weight, |b| b.min(r.weight)));
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: usize,
    pub exact: bool,
    /// A logical error of weight `value` when one was constructed.
    pub witness: Vec<usize>,
}

/// Effective distance of one DEM: exact when the search completes, otherwise
/// the best upper bound with `exact = false`. With `cap` (normally the code
/// distance, which bounds the effective distance from above) only weights
/// below the cap are searched.
pub fn effective_distance(dem: &DetectorErrorModel, cap: Option<usize>, budget: Budget<'_>) -> DistanceResult {
    let p = Problem::from_dem(dem);
    match solve_capped(&p, cap.map(|c| c.saturating_sub(1)), budget) {
        Capped::Found(witness) => DistanceResult {
            value: witness.len(),
            exact: true,
            witness,
        },
        Capped::AboveCap => DistanceResult {
            value: cap.expect("cap set"),
            exact: true,
            witness: vec![],
        },
        Capped::None => DistanceResult {
            value: usize::MAX,
            exact: true,
            witness: vec![],
        },
        Capped::Timeout(witness) => DistanceResult {
            value: cap.map_or(witness.len(), |c| c.min(witness.len())),
            exact: false,
            witness,
        },
    }
}

/// Overall (minimum) and per-basis effective distance of several DEMs.
pub fn effective_distance_both(
    dems: &[&DetectorErrorModel],
    cap: Option<usize>,
    budget: Budget<'_>,
) -> (DistanceResult, Vec<DistanceResult>) {
    let per: Vec<DistanceResult> = dems
        .iter()
        .map(|d| effective_distance(d, cap, budget))
        .collect();
    let value = per.iter().map(|r| r.value).min().unwrap_or(usize::MAX);
    let best = per
        .iter()
        .filter(|r| r.value == value)
        .min_by_key(|r| !r.exact)
        .cloned()
        .unwrap_or(DistanceResult {
            value,
            exact: true,
            witness: vec![],
        });
    let exact = per.iter().all(|r| r.exact);
    (DistanceResult { exact, ..best }, per)
}

/// Variable roles in a WCNF model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    Error(usize),
    Syndrome(usize),
    Observable(usize),
    Aux,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WcnfModel {
    pub num_vars: usize,
    pub hard: Vec<Vec<i64>>,
    /// Unit soft clauses, weight 1 each.
    pub soft: Vec<Vec<i64>>,
    pub vars: Vec<Var>,
}

impl WcnfModel {
    pub fn top(&self) -> usize {
        self.soft.len() + 1
    }

    fn new_var(&mut self, role: Var) -> i64 {
        self.vars.push(role);
        self.num_vars += 1;
        self.num_vars as i64
    }

    fn xor_def(&mut self, out: i64, a: i64, b: i64) {
        self.hard.push(vec![-out, a, b]);
        self.hard.push(vec![-out, -a, -b]);
        self.hard.push(vec![out, -a, b]);
        self.hard.push(vec![out, a, -b]);
    }

    /// Constrains `out` to the parity of `leaves` through a balanced tree of
    /// binary XOR definitions.
    fn parity(&mut self, out: i64, leaves: &[i64]) {
        match leaves.len() {
            0 => self.hard.push(vec![-out]),
            1 => {
                self.hard.push(vec![-out, leaves[0]]);
                self.hard.push(vec![out, -leaves[0]]);
            }
            _ => {
                let mut level = leaves.to_vec();
                while level.len() > 2 {
                    let mut next = Vec::with_capacity(level.len().div_ceil(2));
                    for pair in level.chunks(2) {
                        if pair.len() == 2 {
                            let a = self.new_var(Var::Aux);
                            self.xor_def(a, pair[0], pair[1]);
                            next.push(a);
                        } else {
                            next.push(pair[0]);
                        }
                    }
                    level = next;
                }
                self.xor_def(out, level[0], level[1]);
            }
        }
    }

    pub fn num_aux(&self) -> usize {
        self.vars.iter().filter(|v| **v == Var::Aux).count()
    }

    pub fn to_dimacs(&self) -> String {
        let top = self.top();
        let mut out = format!(
            "p wcnf {} {} {}\n",
            self.num_vars,
            self.hard.len() + self.soft.len(),
            top
        );
        for (w, clauses) in [(top, &self.hard), (1, &self.soft)] {
            for c in clauses.iter() {
                out.push_str(&w.to_string());
                for l in c {
                    out.push(' ');
                    out.push_str(&l.to_string());
                }
                out.push_str(" 0\n");
            }
        }
        out
    }

    /// Parses classic WCNF text; clauses weighted `top` are hard.
    pub fn parse_dimacs(text: &str) -> Result<WcnfModel> {
        let bad = |m: &str| Error::Argument(format!("wcnf: {m}"));
        let mut model = WcnfModel::default();
        let mut top = None;
        let mut declared = 0usize;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p wcnf") {
                let f: Vec<usize> = rest
                    .split_whitespace()
                    .map(|x| x.parse().map_err(|_| bad("bad header")))
                    .collect::<Result<_>>()?;
                if f.len() != 3 {
                    return Err(bad("header needs nvars nclauses top"));
                }
                model.num_vars = f[0];
                declared = f[1];
                top = Some(f[2]);
                continue;
            }
            let top = top.ok_or_else(|| bad("clause before header"))?;
            let nums: Vec<i64> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad literal")))
                .collect::<Result<_>>()?;
            if nums.len() < 2 || *nums.last().unwrap() != 0 || nums[0] < 1 {
                return Err(bad("malformed clause"));
            }
            let lits = nums[1..nums.len() - 1].to_vec();
            if nums[0] as usize >= top {
                model.hard.push(lits);
            } else {
                model.soft.push(lits);
            }
        }
        if model.hard.len() + model.soft.len() != declared {
            return Err(bad("clause count differs from header"));
        }
        Ok(model)
    }
}

/// Weighted MaxSAT encoding of the minimum-weight logical error problem.
pub fn encode_problem(p: &Problem, num_observables: usize) -> WcnfModel {
    let mut m = WcnfModel::default();
    let errors: Vec<i64> = (0..p.num_cols()).map(|c| m.new_var(Var::Error(c))).collect();
    let syndromes: Vec<i64> = (0..p.num_rows).map(|r| m.new_var(Var::Syndrome(r))).collect();
    let observables: Vec<i64> = (0..num_observables)
        .map(|k| m.new_var(Var::Observable(k)))
        .collect();
    let mut row_leaves = vec![Vec::new(); p.num_rows];
    let mut obs_leaves = vec![Vec::new(); num_observables];
    for c in 0..p.num_cols() {
        for &r in &p.rows[c] {
            row_leaves[r as usize].push(errors[c]);
        }
        for (k, leaves) in obs_leaves.iter_mut().enumerate() {
            if p.obs[c] >> k & 1 == 1 {
                leaves.push(errors[c]);
            }
        }
    }
    for (r, leaves) in row_leaves.iter().enumerate() {
        m.parity(syndromes[r], leaves);
        m.hard.push(vec![-syndromes[r]]);
    }
    for (k, leaves) in obs_leaves.iter().enumerate() {
        m.parity(observables[k], leaves);
    }
    m.hard.push(observables.clone());
    for &e in &errors {
        m.soft.push(vec![-e]);
    }
    m
}

pub fn encode_wcnf(sub: &Subgraph) -> WcnfModel {
    let p = Problem::from_matrices(&sub.h, &sub.l).expect("subgraph matrices agree");
    encode_problem(&p, sub.l.rows())
}

pub fn export_wcnf(model: &WcnfModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_dimacs()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn problem(rows: &[&[u32]], obs: &[u64], num_rows: usize) -> Problem {
        Problem {
            num_rows,
            rows: rows.iter().map(|r| r.to_vec()).collect(),
            obs: obs.to_vec(),
        }
    }

    /// Smallest logical error by enumerating all subsets in weight order.
    fn brute_force(p: &Problem, max_w: usize) -> Option<usize> {
        fn rec(p: &Problem, start: usize, left: usize, chosen: &mut Vec<usize>) -> bool {
            if left == 0 {
                return p.is_logical(chosen);
            }
            for c in start..p.num_cols() {
                chosen.push(c);
                if rec(p, c + 1, left - 1, chosen) {
                    return true;
                }
                chosen.pop();
            }
            false
        }
        (1..=max_w).find(|&w| rec(p, 0, w, &mut Vec::new()))
    }

    #[test]
    fn single_error_without_observable_is_none() {
        let p = problem(&[&[0]], &[0], 1);
        assert_eq!(solve(&p, Budget::unlimited()).status, Status::None);
    }

    #[test]
    fn weight_two_pair() {
        let p = problem(&[&[0], &[0], &[0, 1]], &[0, 1, 0], 2);
        let r = solve(&p, Budget::unlimited());
        assert_eq!((r.status, r.weight, r.errors), (Status::Found, 2, vec![0, 1]));
    }

    #[test]
    fn undetectable_column_is_weight_one() {
        let p = problem(&[&[0], &[]], &[1, 1], 1);
        assert_eq!(solve(&p, Budget::unlimited()).weight, 1);
    }

    #[test]
    fn matches_brute_force_on_random_problems() {
        let mut rng = crate::rng(17);
        for _ in 0..300 {
            let rows = rng.gen_range(3..12);
            let cols = rng.gen_range(4..16);
            let p = Problem {
                num_rows: rows,
                rows: (0..cols)
                    .map(|_| {
                        let mut r: Vec<u32> = (0..rows as u32).filter(|_| rng.gen_bool(0.25)).collect();
                        if r.is_empty() && rng.gen_bool(0.8) {
                            r.push(rng.gen_range(0..rows as u32));
                        }
                        r
                    })
                    .collect(),
                obs: (0..cols).map(|_| rng.gen_range(0..4u64) & rng.gen_range(0..4u64)).collect(),
            };
            let r = solve(&p, Budget::unlimited());
            let bf = brute_force(&p, cols);
            match bf {
                Some(w) => {
                    assert_eq!(r.status, Status::Found);
                    assert_eq!(r.weight, w);
                    assert!(p.is_logical(&r.errors));
                }
                None => assert_eq!(r.status, Status::None),
            }
        }
    }

    #[test]
    fn surface_code_distance() {
        let code = crate::code::make_rotated_surface(5).unwrap();
        for (h, l) in [(code.hz(), code.lz()), (code.hx(), code.lx())] {
            let p = Problem::from_code_checks(h, l).unwrap();
            assert_eq!(solve(&p, Budget::unlimited()).weight, 5);
        }
    }

    #[test]
    fn xor_of_four_uses_two_auxiliaries() {
        let p = problem(&[&[0], &[0], &[0], &[0]], &[0, 0, 0, 1], 1);
        let m = encode_problem(&p, 1);
        assert_eq!(m.num_aux(), 2);
        // Row: 3 XOR definitions; observable: single-leaf equivalence.
        let xor_clauses = m.hard.iter().filter(|c| c.len() == 3).count();
        assert_eq!(xor_clauses, 12);
        assert_eq!(m.soft.len(), 4);
        assert_eq!(m.top(), 5);
    }

    #[test]
    fn dimacs_round_trip() {
        let empty = WcnfModel::default();
        assert_eq!(empty.to_dimacs(), "p wcnf 0 0 1\n");
        let p = problem(&[&[0, 1], &[1, 2], &[2], &[0]], &[1, 0, 0, 1], 3);
        let m = encode_problem(&p, 1);
        let back = WcnfModel::parse_dimacs(&m.to_dimacs()).unwrap();
        assert_eq!(back.hard, m.hard);
        assert_eq!(back.soft, m.soft);
        assert_eq!(back.num_vars, m.num_vars);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wcnf");
        export_wcnf(&m, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(WcnfModel::parse_dimacs(&text).unwrap().hard.len(), m.hard.len());
    }

    #[test]
    fn cancel_flag_stops_search() {
        let code = crate::code::make_rotated_surface(9).unwrap();
        let p = Problem::from_code_checks(code.hz(), code.lz()).unwrap();
        let flag = AtomicBool::new(true);
        let r = solve(&p, Budget::unlimited().with_cancel(&flag));
        assert_eq!(r.status, Status::Timeout);
        assert!(p.is_logical(&r.errors));
    }
}
