//! Syndrome-measurement schedules: per-stabilizer CNOT orderings plus the
//! propagation graph, baseline generators, validity checks, layering, and the
//! memory-experiment circuit built from a schedule.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::code::{surface_plaquettes, CheckType, CssCode};
use crate::dem::NoiseModel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InvalidSchedule {
    #[error("malformed schedule: {0}")]
    Malformed(String),
    #[error("CNOT ordering cycle through stabilizers {stabilizers:?}")]
    Cycle { stabilizers: Vec<usize> },
    #[error("X check {x_check} and Z check {z_check} touch an odd number of shared qubits X-check first")]
    Commutation { x_check: usize, z_check: usize },
}

/// Directed multigraph over stabilizers. There is one edge per unordered
/// stabilizer pair and shared data qubit, pointing away from the stabilizer
/// whose CNOT on that qubit comes first in a round.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PropagationGraph {
    /// (a, b, qubit) with a < b → the stabilizer that goes first.
    edges: BTreeMap<(usize, usize, usize), usize>,
}

impl PropagationGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The stabilizer of the pair {a, b} that touches `qubit` first.
    pub fn first(&self, a: usize, b: usize, qubit: usize) -> Option<usize> {
        self.edges.get(&(a.min(b), a.max(b), qubit)).copied()
    }

    /// Points the edge of {first, second} on `qubit` from `first` to `second`.
    pub fn set_first(&mut self, first: usize, second: usize, qubit: usize) {
        self.edges
            .insert((first.min(second), first.max(second), qubit), first);
    }

    /// Edges as (from, to, qubit) in key order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.edges.iter().map(|(&(a, b, q), &f)| {
            if f == a {
                (a, b, q)
            } else {
                (b, a, q)
            }
        })
    }
}

/// One CNOT of a round: ancilla of `stab` interacting with data `qubit`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cnot {
    pub stab: usize,
    pub qubit: usize,
    pub control: usize,
    pub target: usize,
}

/// A CNOT schedule for one round, ASAP-layered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredCircuit {
    pub layers: Vec<Vec<Cnot>>,
}

impl LayeredCircuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

#[derive(Clone, Debug)]
pub struct SmSchedule {
    code: Arc<CssCode>,
    orders: Vec<Vec<usize>>,
    graph: PropagationGraph,
}

impl PartialEq for SmSchedule {
    fn eq(&self, other: &Self) -> bool {
        self.orders == other.orders && self.graph == other.graph
    }
}

impl Eq for SmSchedule {}

impl std::hash::Hash for SmSchedule {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.orders.hash(state);
        self.graph.hash(state);
    }
}

/// Every (a, b, qubit) with a < b where stabilizers a and b both touch qubit.
pub fn shared_qubit_pairs(code: &CssCode) -> Vec<(usize, usize, usize)> {
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); code.n()];
    for s in 0..code.num_stabilizers() {
        for q in code.stabilizer_support(s) {
            touching[q].push(s);
        }
    }
    let mut out = Vec::new();
    for (q, stabs) in touching.iter().enumerate() {
        for (i, &a) in stabs.iter().enumerate() {
            for &b in &stabs[i + 1..] {
                out.push((a, b, q));
            }
        }
    }
    out.sort_unstable();
    out
}

impl SmSchedule {
    pub fn new(code: Arc<CssCode>, orders: Vec<Vec<usize>>, graph: PropagationGraph) -> Self {
        SmSchedule {
            code,
            orders,
            graph,
        }
    }

    /// Builds a schedule from a sort key per CNOT: each ancilla visits its
    /// qubits in key order and every shared qubit goes first to the smaller
    /// key. Distinct keys always give an acyclic schedule.
    pub fn from_keys<K: Ord>(code: Arc<CssCode>, key: impl Fn(usize, usize) -> K) -> Self {
        let orders = (0..code.num_stabilizers())
            .map(|s| {
                let mut sup = code.stabilizer_support(s);
                sup.sort_by_key(|&q| key(s, q));
                sup
            })
            .collect();
        let mut graph = PropagationGraph::default();
        for (a, b, q) in shared_qubit_pairs(&code) {
            if key(a, q) <= key(b, q) {
                graph.set_first(a, b, q);
            } else {
                graph.set_first(b, a, q);
            }
        }
        SmSchedule {
            code,
            orders,
            graph,
        }
    }

    pub fn code(&self) -> &Arc<CssCode> {
        &self.code
    }

    pub fn orders(&self) -> &[Vec<usize>] {
        &self.orders
    }

    pub fn order(&self, s: usize) -> &[usize] {
        &self.orders[s]
    }

    pub fn graph(&self) -> &PropagationGraph {
        &self.graph
    }

    pub fn set_order(&mut self, s: usize, order: Vec<usize>) {
        self.orders[s] = order;
    }

    pub fn set_first(&mut self, first: usize, second: usize, qubit: usize) {
        self.graph.set_first(first, second, qubit);
    }

    /// Every order and every edge reversed.
    pub fn reversed(&self) -> SmSchedule {
        let orders = self
            .orders
            .iter()
            .map(|o| o.iter().rev().copied().collect())
            .collect();
        let mut graph = PropagationGraph::default();
        for (from, to, q) in self.graph.edges() {
            graph.set_first(to, from, q);
        }
        SmSchedule {
            code: self.code.clone(),
            orders,
            graph,
        }
    }

    pub fn to_file(&self) -> ScheduleFile {
        let orders = self
            .orders
            .iter()
            .enumerate()
            .map(|(s, o)| (s.to_string(), o.clone()))
            .collect();
        let edges = self
            .graph
            .edges
            .iter()
            .map(|(&(a, b, q), &f)| [a as i64, b as i64, q as i64, if f == a { 1 } else { -1 }])
            .collect();
        ScheduleFile {
            code: self.code.name().to_string(),
            orders,
            edges,
        }
    }

    pub fn from_file(code: Arc<CssCode>, file: &ScheduleFile) -> Result<Self> {
        if file.code != code.name() {
            log::warn!(
                "schedule was written for code {:?}, loading against {:?}",
                file.code,
                code.name()
            );
        }
        let m = code.num_stabilizers();
        let mut orders = vec![Vec::new(); m];
        for (key, order) in &file.orders {
            let s: usize = key
                .parse()
                .map_err(|_| Error::Argument(format!("bad stabilizer id {key:?}")))?;
            if s >= m {
                return Err(Error::Argument(format!("stabilizer id {s} out of range")));
            }
            orders[s] = order.clone();
        }
        let mut graph = PropagationGraph::default();
        for &[a, b, q, dir] in &file.edges {
            if a < 0 || b < 0 || q < 0 || (dir != 1 && dir != -1) {
                return Err(Error::Argument(format!(
                    "bad edge [{a}, {b}, {q}, {dir}]"
                )));
            }
            let (a, b, q) = (a as usize, b as usize, q as usize);
            if dir == 1 {
                graph.set_first(a, b, q);
            } else {
                graph.set_first(b, a, q);
            }
        }
        let schedule = SmSchedule {
            code,
            orders,
            graph,
        };
        check_shape(&schedule).map_err(Error::InvalidSchedule)?;
        Ok(schedule)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())
            .map_err(|e| Error::Internal(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk schedule. `edges` rows are [a, b, qubit, dir] with a < b and dir = 1
/// when a touches the qubit first, −1 otherwise.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ScheduleFile {
    pub code: String,
    pub orders: BTreeMap<String, Vec<usize>>,
    pub edges: Vec<[i64; 4]>,
}

pub fn load_schedule(path: impl AsRef<Path>, code: Arc<CssCode>) -> Result<SmSchedule> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScheduleFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    SmSchedule::from_file(code, &file)
}

/// Hand-designed surface-code schedule: X checks visit top-left, bottom-left,
/// top-right, bottom-right; Z checks visit top-left, top-right, bottom-left,
/// bottom-right. With `transposed` the two patterns are swapped, which aligns
/// hook errors with the logical operators.
fn surface_pattern_schedule(d: usize, transposed: bool) -> Result<SmSchedule> {
    let code = Arc::new(crate::code::make_rotated_surface(d)?);
    let plaquettes = surface_plaquettes(d);
    let mut slot: HashMap<(usize, usize), usize> = HashMap::new();
    for (s, p) in plaquettes.iter().enumerate() {
        let n_order = [p.top_left, p.bottom_left, p.top_right, p.bottom_right];
        let z_order = [p.top_left, p.top_right, p.bottom_left, p.bottom_right];
        let use_n = (p.kind == CheckType::X) != transposed;
        let corners = if use_n { n_order } else { z_order };
        for (t, q) in corners.iter().enumerate() {
            if let Some(q) = q {
                slot.insert((s, *q), t);
            }
        }
    }
    Ok(SmSchedule::from_keys(code, |s, q| slot[&(s, q)]))
}

/// The distance-preserving N-Z schedule for the rotated surface code.
pub fn nz_schedule(d: usize) -> Result<SmSchedule> {
    surface_pattern_schedule(d, false)
}

/// The N-Z schedule with the two traversal patterns swapped.
pub fn nz_transposed_schedule(d: usize) -> Result<SmSchedule> {
    surface_pattern_schedule(d, true)
}

/// Proper edge coloring of a bipartite graph with max-degree colors.
/// Edges are (left, right) pairs; returns one color per edge.
fn bipartite_edge_coloring(
    edges: &[(usize, usize)],
    num_left: usize,
    num_right: usize,
    colors: usize,
) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    // at[node][color] = edge index; left nodes first, then right nodes.
    let mut at = vec![vec![NONE; colors]; num_left + num_right];
    let mut color = vec![NONE; edges.len()];
    let ends = |e: usize| (edges[e].0, num_left + edges[e].1);
    for e in 0..edges.len() {
        let (u, v) = ends(e);
        let a = (0..colors).find(|&c| at[u][c] == NONE).expect("free color at u");
        let b = (0..colors).find(|&c| at[v][c] == NONE).expect("free color at v");
        if at[v][a] != NONE {
            // Swap colors a/b along the alternating path starting at v.
            let mut path = Vec::new();
            let mut node = v;
            let mut c = a;
            while at[node][c] != NONE {
                let f = at[node][c];
                path.push(f);
                let (x, y) = ends(f);
                node = if x == node { y } else { x };
                c = if c == a { b } else { a };
            }
            for &f in &path {
                let (x, y) = ends(f);
                at[x][color[f]] = NONE;
                at[y][color[f]] = NONE;
            }
            for &f in &path {
                let (x, y) = ends(f);
                color[f] = if color[f] == a { b } else { a };
                at[x][color[f]] = f;
                at[y][color[f]] = f;
            }
        }
        color[e] = a;
        at[u][a] = e;
        at[v][a] = e;
    }
    color
}

/// Baseline schedule from an edge coloring of the Tanner graph of each check
/// type. All Z-check CNOTs run before all X-check CNOTs; the seed shuffles edge
/// order and the color-to-layer assignment.
pub fn coloration_schedule(code: Arc<CssCode>, seed: u64) -> SmSchedule {
    let mut rng = crate::rng(seed);
    let mut time: HashMap<(usize, usize), usize> = HashMap::new();
    let mut offset = 0;
    for kind in [CheckType::Z, CheckType::X] {
        let h = code.check_matrix(kind);
        let base = match kind {
            CheckType::X => 0,
            CheckType::Z => code.num_x_checks(),
        };
        let mut edges: Vec<(usize, usize)> = (0..h.rows())
            .flat_map(|r| h.row_ones(r).into_iter().map(move |q| (r, q)))
            .collect();
        if edges.is_empty() {
            continue;
        }
        let mut degree = vec![0usize; code.n()];
        for &(_, q) in &edges {
            degree[q] += 1;
        }
        let delta = (0..h.rows())
            .map(|r| h.row_weight(r))
            .chain(degree)
            .max()
            .unwrap_or(0);
        edges.shuffle(&mut rng);
        let colors = bipartite_edge_coloring(&edges, h.rows(), code.n(), delta);
        let mut perm: Vec<usize> = (0..delta).collect();
        perm.shuffle(&mut rng);
        for (&(r, q), &c) in edges.iter().zip(&colors) {
            time.insert((base + r, q), offset + perm[c]);
        }
        offset += delta;
    }
    SmSchedule::from_keys(code, |s, q| time[&(s, q)])
}

/// Random acyclic schedule: each ancilla gets a random start offset in
/// `0..=spread` and a random qubit order; ties on a shared qubit are broken at
/// random. Commutation is not enforced.
pub fn random_schedule<R: Rng>(code: Arc<CssCode>, spread: usize, rng: &mut R) -> SmSchedule {
    let m = code.num_stabilizers();
    let mut key: HashMap<(usize, usize), (usize, u64)> = HashMap::new();
    for s in 0..m {
        let start = rng.gen_range(0..=spread);
        let mut sup = code.stabilizer_support(s);
        sup.shuffle(rng);
        for (i, q) in sup.into_iter().enumerate() {
            key.insert((s, q), (start + i, rng.gen()));
        }
    }
    SmSchedule::from_keys(code, |s, q| key[&(s, q)])
}

/// Random valid schedule. Starts from `random_schedule`, then repeatedly moves
/// one check of a non-commuting X/Z pair to start after the other finishes.
pub fn random_valid_schedule<R: Rng>(code: Arc<CssCode>, spread: usize, rng: &mut R) -> SmSchedule {
    let m = code.num_stabilizers();
    let mut start: Vec<usize> = (0..m).map(|_| rng.gen_range(0..=spread)).collect();
    let mut perm: Vec<Vec<usize>> = (0..m)
        .map(|s| {
            let mut sup = code.stabilizer_support(s);
            sup.shuffle(rng);
            sup
        })
        .collect();
    let tiebreak: Vec<u64> = (0..m).map(|_| rng.gen()).collect();
    for _ in 0..100 * m.max(1) {
        let key: HashMap<(usize, usize), (usize, u64)> = (0..m)
            .flat_map(|s| {
                perm[s]
                    .iter()
                    .enumerate()
                    .map(move |(i, &q)| ((s, q), (i, s)))
                    .collect::<Vec<_>>()
            })
            .map(|((s, q), (i, _))| ((s, q), (start[s] + i, tiebreak[s])))
            .collect();
        let schedule = SmSchedule::from_keys(code.clone(), |s, q| key[&(s, q)]);
        match validate_schedule(&schedule) {
            Ok(()) => return schedule,
            Err(InvalidSchedule::Commutation { x_check, z_check }) => {
                let (early, late) = if rng.gen() {
                    (x_check, z_check)
                } else {
                    (z_check, x_check)
                };
                start[late] = start[early] + perm[early].len();
                perm[late].shuffle(rng);
            }
            Err(e) => unreachable!("keyed schedules are acyclic: {e}"),
        }
    }
    // Sequential fallback: Z checks strictly before X checks.
    let key: HashMap<(usize, usize), (usize, usize)> = (0..m)
        .flat_map(|s| {
            let phase = match code.stabilizer_kind(s) {
                CheckType::Z => 0,
                CheckType::X => 1,
            };
            perm[s]
                .iter()
                .enumerate()
                .map(move |(i, &q)| ((s, q), (phase, i)))
                .collect::<Vec<_>>()
        })
        .collect();
    SmSchedule::from_keys(code, |s, q| (key[&(s, q)], s))
}

/// Checks orders are permutations of supports and the edge set is exactly one
/// edge per shared (pair, qubit).
fn check_shape(s: &SmSchedule) -> std::result::Result<(), InvalidSchedule> {
    let code = &s.code;
    if s.orders.len() != code.num_stabilizers() {
        return Err(InvalidSchedule::Malformed(format!(
            "{} orders for {} stabilizers",
            s.orders.len(),
            code.num_stabilizers()
        )));
    }
    for (id, order) in s.orders.iter().enumerate() {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != code.stabilizer_support(id) {
            return Err(InvalidSchedule::Malformed(format!(
                "order of stabilizer {id} is not a permutation of its support"
            )));
        }
    }
    let expected = shared_qubit_pairs(code);
    if expected.len() != s.graph.edges.len()
        || expected.iter().any(|k| !s.graph.edges.contains_key(k))
    {
        return Err(InvalidSchedule::Malformed(
            "propagation graph does not have exactly one edge per shared qubit".into(),
        ));
    }
    for (&(a, b, _), &f) in &s.graph.edges {
        if f != a && f != b {
            return Err(InvalidSchedule::Malformed(format!(
                "edge between {a} and {b} points from {f}"
            )));
        }
    }
    Ok(())
}

/// CNOT-level constraint graph: node offset[s] + i is the i-th CNOT of s.
struct CnotDag {
    offset: Vec<usize>,
    succ: Vec<Vec<usize>>,
    stab_of: Vec<usize>,
}

impl CnotDag {
    fn build(s: &SmSchedule) -> Self {
        let m = s.orders.len();
        let mut offset = Vec::with_capacity(m + 1);
        let mut stab_of = Vec::new();
        offset.push(0);
        for (id, o) in s.orders.iter().enumerate() {
            offset.push(offset[id] + o.len());
            stab_of.extend(std::iter::repeat_n(id, o.len()));
        }
        let total = offset[m];
        let mut succ = vec![Vec::new(); total];
        for (id, o) in s.orders.iter().enumerate() {
            for i in 1..o.len() {
                succ[offset[id] + i - 1].push(offset[id] + i);
            }
        }
        let node = |st: usize, q: usize| {
            offset[st] + s.orders[st].iter().position(|&x| x == q).expect("qubit in order")
        };
        for (from, to, q) in s.graph.edges() {
            succ[node(from, q)].push(node(to, q));
        }
        CnotDag {
            offset,
            succ,
            stab_of,
        }
    }

    /// Longest-path level of every node, or the nodes left on a cycle.
    fn levels(&self) -> std::result::Result<Vec<usize>, Vec<usize>> {
        let total = self.succ.len();
        let mut indeg = vec![0usize; total];
        for v in self.succ.iter().flatten() {
            indeg[*v] += 1;
        }
        let mut queue: Vec<usize> = (0..total).filter(|&v| indeg[v] == 0).collect();
        let mut level = vec![0usize; total];
        let mut seen = 0;
        while let Some(u) = queue.pop() {
            seen += 1;
            for &v in &self.succ[u] {
                level[v] = level[v].max(level[u] + 1);
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push(v);
                }
            }
        }
        if seen == total {
            Ok(level)
        } else {
            Err((0..total).filter(|&v| indeg[v] > 0).collect())
        }
    }
}

/// Ok iff the schedule is well-formed, its ordering constraints are acyclic at
/// the CNOT level, and every overlapping X/Z pair has an even number of shared
/// qubits on which the X check goes first.
pub fn validate_schedule(s: &SmSchedule) -> std::result::Result<(), InvalidSchedule> {
    check_shape(s)?;
    let dag = CnotDag::build(s);
    if let Err(stuck) = dag.levels() {
        let mut stabilizers: Vec<usize> = stuck.iter().map(|&v| dag.stab_of[v]).collect();
        stabilizers.dedup();
        stabilizers.sort_unstable();
        stabilizers.dedup();
        return Err(InvalidSchedule::Cycle { stabilizers });
    }
    let code = &s.code;
    let mut x_first: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (from, to, _) in s.graph.edges() {
        match (code.stabilizer_kind(from), code.stabilizer_kind(to)) {
            (CheckType::X, CheckType::Z) => *x_first.entry((from, to)).or_default() += 1,
            (CheckType::Z, CheckType::X) => {
                x_first.entry((to, from)).or_default();
            }
            _ => {}
        }
    }
    for (&(x_check, z_check), &count) in &x_first {
        if count % 2 == 1 {
            return Err(InvalidSchedule::Commutation { x_check, z_check });
        }
    }
    Ok(())
}

/// ASAP layering of one round of CNOTs.
pub fn extract_layers(s: &SmSchedule) -> Result<LayeredCircuit> {
    validate_schedule(s).map_err(|e| Error::Precondition(e.to_string()))?;
    layers_of_acyclic(s)
}

fn layers_of_acyclic(s: &SmSchedule) -> Result<LayeredCircuit> {
    check_shape(s).map_err(|e| Error::Precondition(e.to_string()))?;
    let dag = CnotDag::build(s);
    let level = dag
        .levels()
        .map_err(|_| Error::Precondition("CNOT ordering has a cycle".into()))?;
    let depth = level.iter().map(|l| l + 1).max().unwrap_or(0);
    let n = s.code.n();
    let mut layers = vec![Vec::new(); depth];
    for (stab, order) in s.orders.iter().enumerate() {
        for (i, &qubit) in order.iter().enumerate() {
            let ancilla = n + stab;
            let (control, target) = match s.code.stabilizer_kind(stab) {
                CheckType::X => (ancilla, qubit),
                CheckType::Z => (qubit, ancilla),
            };
            layers[level[dag.offset[stab] + i]].push(Cnot {
                stab,
                qubit,
                control,
                target,
            });
        }
    }
    for layer in &mut layers {
        layer.sort_unstable();
    }
    Ok(LayeredCircuit { layers })
}

/// CNOT depth of a valid schedule.
pub fn depth(s: &SmSchedule) -> Result<usize> {
    Ok(extract_layers(s)?.depth())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    ResetZ,
    ResetX,
    Cx,
    MeasureZ,
    MeasureX,
}

/// Which gate of the repeated template an operation instantiates. Gate ids are
/// stable under schedule edits, so they identify fault locations across
/// circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateId {
    DataReset(usize),
    AncillaReset(usize),
    Cnot { stab: usize, qubit: usize },
    AncillaMeasure(usize),
    DataMeasure(usize),
    Idle(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Op {
    pub kind: OpKind,
    /// Acting qubit, or the control for CX.
    pub q0: usize,
    /// Target for CX; equals `q0` otherwise.
    pub q1: usize,
    pub gate: GateId,
    /// Measurement record index for measurements.
    pub record: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentKind {
    DataPrep,
    AncillaPrep,
    Cnot(usize),
    AncillaMeasure,
    DataMeasure,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Moment {
    pub round: usize,
    pub kind: MomentKind,
    pub ops: Vec<Op>,
}

/// XOR of measurement records, named by (stabilizer, round). Round `rounds`
/// holds the detectors that compare the final data measurement with the last
/// ancilla round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detector {
    pub stab: usize,
    pub round: usize,
    pub records: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MemoryCircuit {
    pub code: Arc<CssCode>,
    pub basis: CheckType,
    pub rounds: usize,
    pub num_qubits: usize,
    pub depth: usize,
    pub moments: Vec<Moment>,
    pub num_records: usize,
    pub detectors: Vec<Detector>,
    pub observables: Vec<Vec<usize>>,
    detector_index: HashMap<(usize, usize), usize>,
    gate_moment: HashMap<(usize, GateId), usize>,
}

impl MemoryCircuit {
    pub fn detector_id(&self, stab: usize, round: usize) -> Option<usize> {
        self.detector_index.get(&(stab, round)).copied()
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    /// Moment index holding `gate` in `round` (idle locations excluded).
    pub fn moment_of(&self, round: usize, gate: GateId) -> Option<usize> {
        self.gate_moment.get(&(round, gate)).copied()
    }

    pub fn num_observables(&self) -> usize {
        self.observables.len()
    }

    /// Stim circuit text, with noise channels when `noise` is given.
    pub fn to_stim(&self, noise: Option<&NoiseModel>) -> String {
        let mut out = String::new();
        let list = |qs: &mut dyn Iterator<Item = usize>| {
            qs.map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
        };
        for moment in &self.moments {
            let mut by_kind: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for op in &moment.ops {
                let name = match op.kind {
                    OpKind::ResetZ => "R",
                    OpKind::ResetX => "RX",
                    OpKind::Cx => "CX",
                    OpKind::MeasureZ => "M",
                    OpKind::MeasureX => "MX",
                };
                let e = by_kind.entry(name).or_default();
                e.push(op.q0);
                if op.kind == OpKind::Cx {
                    e.push(op.q1);
                }
            }
            let spam = noise.filter(|m| m.include_spam && m.p > 0.0);
            let is_measure = matches!(
                moment.kind,
                MomentKind::AncillaMeasure | MomentKind::DataMeasure
            );
            if let (Some(m), true) = (spam, is_measure) {
                let qs: Vec<usize> = moment.ops.iter().map(|o| o.q0).collect();
                let _ = writeln!(out, "DEPOLARIZE1({}) {}", m.p, list(&mut qs.into_iter()));
            }
            // Measurement ops keep their record order: emit one line per kind
            // in op order.
            if is_measure {
                let mut last: Option<&str> = None;
                let mut line: Vec<usize> = Vec::new();
                for op in &moment.ops {
                    let name = if op.kind == OpKind::MeasureX { "MX" } else { "M" };
                    if let Some(prev) = last.filter(|&p| p != name) {
                        let _ = writeln!(out, "{} {}", prev, list(&mut line.drain(..)));
                    }
                    last = Some(name);
                    line.push(op.q0);
                }
                if let Some(name) = last {
                    let _ = writeln!(out, "{} {}", name, list(&mut line.drain(..)));
                }
            } else {
                for (name, qs) in &by_kind {
                    let _ = writeln!(out, "{} {}", name, list(&mut qs.iter().copied()));
                }
            }
            if let Some(m) = noise {
                match moment.kind {
                    MomentKind::DataPrep | MomentKind::AncillaPrep if m.include_spam && m.p > 0.0 => {
                        let qs: Vec<usize> = moment.ops.iter().map(|o| o.q0).collect();
                        let _ = writeln!(out, "DEPOLARIZE1({}) {}", m.p, list(&mut qs.into_iter()));
                    }
                    MomentKind::Cnot(_) => {
                        if m.p > 0.0 {
                            let qs = by_kind.get("CX").cloned().unwrap_or_default();
                            let _ = writeln!(out, "DEPOLARIZE2({}) {}", m.p, list(&mut qs.into_iter()));
                        }
                        let pi = m.idle_probability();
                        if pi > 0.0 {
                            let busy: std::collections::HashSet<usize> =
                                moment.ops.iter().flat_map(|o| [o.q0, o.q1]).collect();
                            let idle: Vec<usize> =
                                (0..self.num_qubits).filter(|q| !busy.contains(q)).collect();
                            if !idle.is_empty() {
                                let _ = writeln!(out, "DEPOLARIZE1({}) {}", pi, list(&mut idle.into_iter()));
                            }
                        }
                    }
                    _ => {}
                }
            }
            out.push_str("TICK\n");
        }
        let total = self.num_records;
        for det in &self.detectors {
            let recs: Vec<String> = det
                .records
                .iter()
                .map(|&r| format!("rec[-{}]", total - r))
                .collect();
            let _ = writeln!(out, "DETECTOR {}", recs.join(" "));
        }
        for (k, obs) in self.observables.iter().enumerate() {
            let recs: Vec<String> = obs.iter().map(|&r| format!("rec[-{}]", total - r)).collect();
            let _ = writeln!(out, "OBSERVABLE_INCLUDE({k}) {}", recs.join(" "));
        }
        out
    }
}

/// `rounds` repetitions of the schedule as a memory experiment in `basis`.
pub fn memory_circuit(s: &SmSchedule, rounds: usize, basis: CheckType) -> Result<MemoryCircuit> {
    memory_circuit_with(s, rounds, basis, true)
}

/// As `memory_circuit`; with `require_valid` false only acyclicity is needed,
/// so circuits of non-commuting schedules can be simulated.
pub(crate) fn memory_circuit_with(
    s: &SmSchedule,
    rounds: usize,
    basis: CheckType,
    require_valid: bool,
) -> Result<MemoryCircuit> {
    if rounds == 0 {
        return Err(Error::Argument("rounds must be at least 1".into()));
    }
    let layered = if require_valid {
        extract_layers(s)?
    } else {
        layers_of_acyclic(s)?
    };
    let code = s.code.clone();
    let n = code.n();
    let m = code.num_stabilizers();
    let mut moments = Vec::new();
    let mut records = 0usize;
    let (reset, measure) = match basis {
        CheckType::Z => (OpKind::ResetZ, OpKind::MeasureZ),
        CheckType::X => (OpKind::ResetX, OpKind::MeasureX),
    };
    moments.push(Moment {
        round: 0,
        kind: MomentKind::DataPrep,
        ops: (0..n)
            .map(|q| Op {
                kind: reset,
                q0: q,
                q1: q,
                gate: GateId::DataReset(q),
                record: None,
            })
            .collect(),
    });
    let anc_kind = |st: usize| match code.stabilizer_kind(st) {
        CheckType::X => (OpKind::ResetX, OpKind::MeasureX),
        CheckType::Z => (OpKind::ResetZ, OpKind::MeasureZ),
    };
    for round in 0..rounds {
        moments.push(Moment {
            round,
            kind: MomentKind::AncillaPrep,
            ops: (0..m)
                .map(|st| Op {
                    kind: anc_kind(st).0,
                    q0: n + st,
                    q1: n + st,
                    gate: GateId::AncillaReset(st),
                    record: None,
                })
                .collect(),
        });
        for (l, layer) in layered.layers.iter().enumerate() {
            moments.push(Moment {
                round,
                kind: MomentKind::Cnot(l),
                ops: layer
                    .iter()
                    .map(|c| Op {
                        kind: OpKind::Cx,
                        q0: c.control,
                        q1: c.target,
                        gate: GateId::Cnot {
                            stab: c.stab,
                            qubit: c.qubit,
                        },
                        record: None,
                    })
                    .collect(),
            });
        }
        moments.push(Moment {
            round,
            kind: MomentKind::AncillaMeasure,
            ops: (0..m)
                .map(|st| {
                    records += 1;
                    Op {
                        kind: anc_kind(st).1,
                        q0: n + st,
                        q1: n + st,
                        gate: GateId::AncillaMeasure(st),
                        record: Some(records - 1),
                    }
                })
                .collect(),
        });
    }
    moments.push(Moment {
        round: rounds,
        kind: MomentKind::DataMeasure,
        ops: (0..n)
            .map(|q| {
                records += 1;
                Op {
                    kind: measure,
                    q0: q,
                    q1: q,
                    gate: GateId::DataMeasure(q),
                    record: Some(records - 1),
                }
            })
            .collect(),
    });

    let anc_record = |round: usize, st: usize| round * m + st;
    let data_record = |q: usize| rounds * m + q;
    let mut detectors = Vec::new();
    for st in 0..m {
        if code.stabilizer_kind(st) == basis {
            detectors.push(Detector {
                stab: st,
                round: 0,
                records: vec![anc_record(0, st)],
            });
        }
    }
    for round in 1..rounds {
        for st in 0..m {
            detectors.push(Detector {
                stab: st,
                round,
                records: vec![anc_record(round - 1, st), anc_record(round, st)],
            });
        }
    }
    for st in 0..m {
        if code.stabilizer_kind(st) == basis {
            let mut recs = vec![anc_record(rounds - 1, st)];
            recs.extend(code.stabilizer_support(st).into_iter().map(data_record));
            detectors.push(Detector {
                stab: st,
                round: rounds,
                records: recs,
            });
        }
    }
    let logicals = code.logicals(basis);
    let observables = (0..logicals.rows())
        .map(|r| logicals.row_ones(r).into_iter().map(data_record).collect())
        .collect();
    let detector_index = detectors
        .iter()
        .enumerate()
        .map(|(i, d)| ((d.stab, d.round), i))
        .collect();
    let gate_moment = moments
        .iter()
        .enumerate()
        .flat_map(|(i, m)| m.ops.iter().map(move |op| ((m.round, op.gate), i)))
        .collect();
    Ok(MemoryCircuit {
        code,
        basis,
        rounds,
        num_qubits: n + m,
        depth: layered.depth(),
        moments,
        num_records: records,
        detectors,
        observables,
        detector_index,
        gate_moment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::make_rotated_surface;
    use crate::gf2::BitMatrix;
    use crate::tableau::noiseless_detectors_deterministic;
    use proptest::prelude::*;

    fn surface(d: usize) -> Arc<CssCode> {
        Arc::new(make_rotated_surface(d).unwrap())
    }

    #[test]
    fn nz_is_valid_with_four_layers() {
        for d in [3, 5, 7] {
            let s = nz_schedule(d).unwrap();
            assert_eq!(validate_schedule(&s), Ok(()));
            assert_eq!(depth(&s).unwrap(), 4);
            let t = nz_transposed_schedule(d).unwrap();
            assert_eq!(validate_schedule(&t), Ok(()));
            assert_eq!(depth(&t).unwrap(), 4);
        }
        assert_eq!(nz_schedule(5).unwrap().code().num_stabilizers(), 24);
    }

    #[test]
    fn nz_d3_orders() {
        let s = nz_schedule(3).unwrap();
        assert_eq!(s.order(0), &[0, 3, 1, 4]);
        assert_eq!(s.order(4), &[1, 2, 4, 5]);
        let t = nz_transposed_schedule(3).unwrap();
        assert_eq!(t.order(0), &[0, 1, 3, 4]);
        assert_eq!(t.order(4), &[1, 4, 2, 5]);
    }

    #[test]
    fn flipped_edge_creates_cycle() {
        let mut s = nz_schedule(3).unwrap();
        // X0 = {0,1,3,4} visits 0 before 1. With Z2 = {0,1} visiting 1 first,
        // X0 first on 1 and Z2 first on 0 close a loop.
        assert_eq!(s.graph().first(0, 6, 0), Some(0));
        s.set_order(6, vec![1, 0]);
        s.set_first(6, 0, 0);
        let err = validate_schedule(&s).unwrap_err();
        assert!(matches!(err, InvalidSchedule::Cycle { .. }), "{err}");
    }

    #[test]
    fn odd_crossing_breaks_commutation() {
        let mut s = nz_schedule(3).unwrap();
        // Flip a single X/Z shared-qubit edge in the direction that keeps the
        // order consistent: X1 = {4,5,7,8}, Z0 = {1,2,4,5} share 4 and 5.
        let first = s.graph().first(1, 4, 4).unwrap();
        let other = if first == 1 { 4 } else { 1 };
        s.set_first(other, first, 4);
        match validate_schedule(&s) {
            Err(InvalidSchedule::Commutation { .. }) => {
                assert!(!noiseless_detectors_deterministic(&s, 2).unwrap());
            }
            Err(e) => assert!(matches!(e, InvalidSchedule::Cycle { .. }), "{e}"),
            Ok(()) => panic!("single flip must break validity"),
        }
    }

    #[test]
    fn coloration_depth_bounds() {
        let code = surface(3);
        for seed in 0..20 {
            let s = coloration_schedule(code.clone(), seed);
            assert_eq!(validate_schedule(&s), Ok(()));
            let d = depth(&s).unwrap();
            assert!((4..=8).contains(&d), "depth {d}");
        }
        let a = coloration_schedule(code.clone(), 0);
        assert!((1..10).any(|seed| coloration_schedule(code.clone(), seed) != a));
    }

    #[test]
    fn coloration_on_weight_two_z_checks() {
        let hz = BitMatrix::from_sparse_rows(4, &[vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap();
        let hx = BitMatrix::zeros(0, 4);
        let code = Arc::new(CssCode::new("rep4", hx, hz, None).unwrap());
        let s = coloration_schedule(code, 3);
        assert_eq!(depth(&s).unwrap(), 2);
    }

    #[test]
    fn single_check_serial_depth() {
        let hz = BitMatrix::from_sparse_rows(4, &[vec![0, 1, 2, 3]]).unwrap();
        let code = Arc::new(CssCode::new("one", BitMatrix::zeros(0, 4), hz, None).unwrap());
        let s = SmSchedule::from_keys(code, |_, q| q);
        assert_eq!(depth(&s).unwrap(), 4);
    }

    #[test]
    fn extract_layers_rejects_invalid() {
        let mut s = nz_schedule(3).unwrap();
        s.set_order(6, vec![1, 0]);
        s.set_first(6, 0, 0);
        assert!(matches!(extract_layers(&s), Err(Error::Precondition(_))));
    }

    #[test]
    fn layers_respect_constraints_and_exclusivity() {
        let code = surface(5);
        let mut rng = crate::rng(7);
        for _ in 0..20 {
            let s = random_valid_schedule(code.clone(), 6, &mut rng);
            let layers = extract_layers(&s).unwrap();
            let mut when: HashMap<(usize, usize), usize> = HashMap::new();
            for (l, layer) in layers.layers.iter().enumerate() {
                let mut used = std::collections::HashSet::new();
                for c in layer {
                    assert!(used.insert(c.control) && used.insert(c.target));
                    when.insert((c.stab, c.qubit), l);
                }
            }
            assert_eq!(when.len(), s.orders().iter().map(Vec::len).sum::<usize>());
            for (st, o) in s.orders().iter().enumerate() {
                for w in o.windows(2) {
                    assert!(when[&(st, w[0])] < when[&(st, w[1])]);
                }
            }
            for (from, to, q) in s.graph().edges() {
                assert!(when[&(from, q)] < when[&(to, q)]);
            }
        }
    }

    #[test]
    fn schedule_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = coloration_schedule(surface(3), 5);
        let path = dir.path().join("s.json");
        s.write(&path).unwrap();
        let back = load_schedule(&path, s.code().clone()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn measurement_counts() {
        let s = nz_schedule(3).unwrap();
        let c = memory_circuit(&s, 1, CheckType::Z).unwrap();
        assert_eq!(c.num_records, 8 + 9);
        let c = memory_circuit(&s, 3, CheckType::Z).unwrap();
        assert_eq!(c.num_records, 24 + 9);
        // 4 first-round + 2·8 + 4 final detectors.
        assert_eq!(c.num_detectors(), 24);
        assert_eq!(c.num_observables(), 1);
        assert!(matches!(
            memory_circuit(&s, 0, CheckType::Z),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn stim_text_has_expected_counts() {
        let s = nz_schedule(3).unwrap();
        let c = memory_circuit(&s, 2, CheckType::X).unwrap();
        let text = c.to_stim(Some(&NoiseModel::new(0.001)));
        assert_eq!(text.matches("DETECTOR").count(), c.num_detectors());
        assert_eq!(text.lines().filter(|l| l.starts_with("CX ")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("DEPOLARIZE2")).count(), 8);
        assert!(text.contains("OBSERVABLE_INCLUDE(0)"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn time_reversal_preserves_depth(seed in any::<u64>()) {
            let code = surface(3);
            let mut rng = crate::rng(seed);
            let s = random_valid_schedule(code, 4, &mut rng);
            let r = s.reversed();
            prop_assert_eq!(validate_schedule(&r), Ok(()));
            prop_assert_eq!(depth(&s).unwrap(), depth(&r).unwrap());
        }
    }
}
