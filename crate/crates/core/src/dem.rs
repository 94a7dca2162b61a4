//! Circuit-level detector error models: fault enumeration under a
//! depolarizing noise model, signature propagation, mechanism merging, and
//! hook classification.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{GateId, MemoryCircuit, MomentKind, OpKind};
use crate::code::CheckType;
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
    /// X/Y/Z channel at p/3 after every reset and before every measurement.
    pub include_spam: bool,
    pub include_idle: bool,
    /// Gate-layer duration over coherence time.
    pub idle_strength: f64,
}

impl NoiseModel {
    pub fn new(p: f64) -> Self {
        NoiseModel {
            p,
            include_spam: true,
            include_idle: false,
            idle_strength: 0.0,
        }
    }

    pub fn with_idle(mut self, strength: f64) -> Self {
        self.include_idle = strength > 0.0;
        self.idle_strength = strength;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Argument(format!("p = {} is not a probability", self.p)));
        }
        if !(self.idle_strength >= 0.0) {
            return Err(Error::Argument("idle strength must be non-negative".into()));
        }
        Ok(())
    }

    /// Total depolarizing probability on an idle qubit per CNOT layer.
    pub fn idle_probability(&self) -> f64 {
        if self.include_idle {
            (1.0 - (-self.idle_strength).exp()) * 0.75
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }
    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }
    fn all() -> [Pauli; 3] {
        [Pauli::X, Pauli::Y, Pauli::Z]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Timing {
    Before,
    After,
}

/// One elementary fault: a Pauli applied right before or after a gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultMechanism {
    pub paulis: Vec<(usize, Pauli)>,
    pub round: usize,
    /// Index into the circuit's moments.
    pub moment: usize,
    /// CNOT layer within the round, when the fault sits in a CNOT layer.
    pub layer: Option<usize>,
    pub gate: GateId,
    pub timing: Timing,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct DetectorErrorModel {
    pub basis: CheckType,
    pub circuit: Arc<MemoryCircuit>,
    pub h: BitMatrix,
    pub l: BitMatrix,
    pub priors: Vec<f64>,
    pub provenance: Vec<Vec<FaultMechanism>>,
    /// (stabilizer, round) per detector.
    pub detector_meta: Vec<(usize, usize)>,
    /// Mechanisms enumerated before dropping empty signatures and merging.
    pub num_raw_mechanisms: usize,
    col_dets: Vec<Vec<u32>>,
    col_obs: Vec<u64>,
    det_cols: Vec<Vec<u32>>,
}

impl DetectorErrorModel {
    pub fn num_detectors(&self) -> usize {
        self.h.rows()
    }
    pub fn num_mechanisms(&self) -> usize {
        self.h.cols()
    }
    pub fn num_observables(&self) -> usize {
        self.l.rows()
    }
    /// Detectors flipped by mechanism `j`, ascending.
    pub fn column_detectors(&self, j: usize) -> &[u32] {
        &self.col_dets[j]
    }
    /// Observables flipped by mechanism `j` as a bit mask.
    pub fn column_observables(&self, j: usize) -> u64 {
        self.col_obs[j]
    }
    /// Mechanisms touching detector `d`, ascending.
    pub fn detector_columns(&self, d: usize) -> &[u32] {
        &self.det_cols[d]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for j in 0..self.num_mechanisms() {
            let _ = write!(out, "error({})", self.priors[j]);
            for d in &self.col_dets[j] {
                let _ = write!(out, " D{d}");
            }
            for k in 0..self.num_observables() {
                if self.col_obs[j] >> k & 1 == 1 {
                    let _ = write!(out, " L{k}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes the text model and a `<path>.provenance.json` sidecar.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))?;
        let mut side = path.as_os_str().to_owned();
        side.push(".provenance.json");
        let side = std::path::PathBuf::from(side);
        let json = serde_json::to_string(&self.provenance).map_err(|e| Error::Internal(e.to_string()))?;
        fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
        Ok(vec![path.to_path_buf(), side])
    }
}

/// Measurement record → detectors (bits 0..D) and observables (bits D..D+K).
fn record_effects(c: &MemoryCircuit) -> Vec<BitVec> {
    let d = c.num_detectors();
    let width = d + c.num_observables();
    let mut eff = vec![BitVec::zeros(width); c.num_records];
    for (i, det) in c.detectors.iter().enumerate() {
        for &r in &det.records {
            eff[r].toggle(i);
        }
    }
    for (k, obs) in c.observables.iter().enumerate() {
        for &r in obs {
            eff[r].toggle(d + k);
        }
    }
    eff
}

fn two_qubit_paulis() -> Vec<(Option<Pauli>, Option<Pauli>)> {
    let one = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    let mut out = Vec::with_capacity(15);
    for a in one {
        for b in one {
            if a.is_some() || b.is_some() {
                out.push((a, b));
            }
        }
    }
    out
}

struct RawMechanism {
    key: (usize, Timing, usize, usize),
    signature: BitVec,
    fault: FaultMechanism,
}

/// Builds the detector error model of a memory circuit.
///
/// Sensitivities are swept backwards: for each qubit, the detectors and
/// observables an X or Z error at the current point would flip. Every fault
/// signature is then a XOR of at most four sensitivity vectors.
pub fn build_dem(circuit: MemoryCircuit, noise: &NoiseModel) -> Result<DetectorErrorModel> {
    noise.validate()?;
    if circuit.num_observables() > 64 {
        return Err(Error::Unsupported(format!(
            "{} observables; at most 64 are supported",
            circuit.num_observables()
        )));
    }
    let c = circuit;
    let nd = c.num_detectors();
    let width = nd + c.num_observables();
    let eff = record_effects(&c);
    let mut sx = vec![BitVec::zeros(width); c.num_qubits];
    let mut sz = vec![BitVec::zeros(width); c.num_qubits];
    let mut raw: Vec<RawMechanism> = Vec::new();
    let p = noise.p;
    let spam = noise.include_spam;
    let p_idle = noise.idle_probability();
    let pairs = two_qubit_paulis();

    let sig1 = |sx: &[BitVec], sz: &[BitVec], q: usize, pa: Pauli| {
        let mut s = BitVec::zeros(width);
        if pa.has_x() {
            s.xor_assign(&sx[q]);
        }
        if pa.has_z() {
            s.xor_assign(&sz[q]);
        }
        s
    };

    for (mi, moment) in c.moments.iter().enumerate().rev() {
        let layer = match moment.kind {
            MomentKind::Cnot(l) => Some(l),
            _ => None,
        };
        let fault = |paulis: Vec<(usize, Pauli)>, gate: GateId, timing: Timing, prob: f64| FaultMechanism {
            paulis,
            round: moment.round,
            moment: mi,
            layer,
            gate,
            timing,
            probability: prob,
        };
        // Faults after the moment's gates.
        for (oi, op) in moment.ops.iter().enumerate() {
            match op.kind {
                OpKind::ResetZ | OpKind::ResetX if spam => {
                    for (pi, pa) in Pauli::all().into_iter().enumerate() {
                        raw.push(RawMechanism {
                            key: (mi, Timing::After, oi, pi),
                            signature: sig1(&sx, &sz, op.q0, pa),
                            fault: fault(vec![(op.q0, pa)], op.gate, Timing::After, p / 3.0),
                        });
                    }
                }
                OpKind::Cx => {
                    for (pi, &(a, b)) in pairs.iter().enumerate() {
                        let mut s = BitVec::zeros(width);
                        let mut paulis = Vec::with_capacity(2);
                        if let Some(a) = a {
                            s.xor_assign(&sig1(&sx, &sz, op.q0, a));
                            paulis.push((op.q0, a));
                        }
                        if let Some(b) = b {
                            s.xor_assign(&sig1(&sx, &sz, op.q1, b));
                            paulis.push((op.q1, b));
                        }
                        raw.push(RawMechanism {
                            key: (mi, Timing::After, oi, pi),
                            signature: s,
                            fault: fault(paulis, op.gate, Timing::After, p / 15.0),
                        });
                    }
                }
                _ => {}
            }
        }
        if layer.is_some() && p_idle > 0.0 {
            let mut busy = vec![false; c.num_qubits];
            for op in &moment.ops {
                busy[op.q0] = true;
                busy[op.q1] = true;
            }
            for q in (0..c.num_qubits).filter(|&q| !busy[q]) {
                for (pi, pa) in Pauli::all().into_iter().enumerate() {
                    raw.push(RawMechanism {
                        key: (mi, Timing::After, moment.ops.len() + q, pi),
                        signature: sig1(&sx, &sz, q, pa),
                        fault: fault(vec![(q, pa)], GateId::Idle(q), Timing::After, p_idle / 3.0),
                    });
                }
            }
        }
        // Step backwards through the gates.
        for op in &moment.ops {
            match op.kind {
                OpKind::ResetZ | OpKind::ResetX => {
                    sx[op.q0].clear();
                    sz[op.q0].clear();
                }
                OpKind::MeasureZ => sx[op.q0].xor_assign(&eff[op.record.expect("record")]),
                OpKind::MeasureX => sz[op.q0].xor_assign(&eff[op.record.expect("record")]),
                OpKind::Cx => {
                    let t = sx[op.q1].clone();
                    sx[op.q0].xor_assign(&t);
                    let ctl = sz[op.q0].clone();
                    sz[op.q1].xor_assign(&ctl);
                }
            }
        }
        // Faults before measurements.
        if spam {
            for (oi, op) in moment.ops.iter().enumerate() {
                if matches!(op.kind, OpKind::MeasureZ | OpKind::MeasureX) {
                    for (pi, pa) in Pauli::all().into_iter().enumerate() {
                        raw.push(RawMechanism {
                            key: (mi, Timing::Before, oi, pi),
                            signature: sig1(&sx, &sz, op.q0, pa),
                            fault: fault(vec![(op.q0, pa)], op.gate, Timing::Before, p / 3.0),
                        });
                    }
                }
            }
        }
    }
    raw.sort_by_key(|a| a.key);
    let num_raw = raw.len();

    let mut index: HashMap<BitVec, usize> = HashMap::new();
    let mut signatures: Vec<BitVec> = Vec::new();
    let mut priors: Vec<f64> = Vec::new();
    let mut provenance: Vec<Vec<FaultMechanism>> = Vec::new();
    for m in raw {
        if m.signature.is_zero() {
            continue;
        }
        match index.get(&m.signature) {
            Some(&j) => {
                let (a, b) = (priors[j], m.fault.probability);
                priors[j] = a + b - 2.0 * a * b;
                provenance[j].push(m.fault);
            }
            None => {
                index.insert(m.signature.clone(), signatures.len());
                priors.push(m.fault.probability);
                provenance.push(vec![m.fault]);
                signatures.push(m.signature);
            }
        }
    }
    let cols = signatures.len();
    let mut h = BitMatrix::zeros(nd, cols);
    let mut l = BitMatrix::zeros(c.num_observables(), cols);
    let mut col_dets = Vec::with_capacity(cols);
    let mut col_obs = Vec::with_capacity(cols);
    let mut det_cols = vec![Vec::new(); nd];
    for (j, sig) in signatures.iter().enumerate() {
        let mut dets = Vec::new();
        let mut obs = 0u64;
        for b in sig.iter_ones() {
            if b < nd {
                h.set(b, j, true);
                dets.push(b as u32);
                det_cols[b].push(j as u32);
            } else {
                l.set(b - nd, j, true);
                obs |= 1 << (b - nd);
            }
        }
        col_dets.push(dets);
        col_obs.push(obs);
    }
    let detector_meta = c.detectors.iter().map(|d| (d.stab, d.round)).collect();
    Ok(DetectorErrorModel {
        basis: c.basis,
        circuit: Arc::new(c),
        h,
        l,
        priors,
        provenance,
        detector_meta,
        num_raw_mechanisms: num_raw,
        col_dets,
        col_obs,
        det_cols,
    })
}

/// Forward Pauli-frame propagation of one fault to the end of the circuit.
/// Returns flipped detector ids and observable ids, ascending.
pub fn propagate_fault(c: &MemoryCircuit, fault: &FaultMechanism) -> (Vec<usize>, Vec<usize>) {
    let mut x = vec![false; c.num_qubits];
    let mut z = vec![false; c.num_qubits];
    let mut flipped = vec![false; c.num_records];
    let inject = |x: &mut [bool], z: &mut [bool]| {
        for &(q, pa) in &fault.paulis {
            x[q] ^= pa.has_x();
            z[q] ^= pa.has_z();
        }
    };
    let start = match fault.timing {
        Timing::Before => fault.moment,
        Timing::After => fault.moment + 1,
    };
    if fault.timing == Timing::After {
        inject(&mut x, &mut z);
    }
    for (mi, moment) in c.moments.iter().enumerate().skip(start) {
        if mi == fault.moment && fault.timing == Timing::Before {
            inject(&mut x, &mut z);
        }
        for op in &moment.ops {
            match op.kind {
                OpKind::ResetZ | OpKind::ResetX => {
                    x[op.q0] = false;
                    z[op.q0] = false;
                }
                OpKind::MeasureZ => flipped[op.record.expect("record")] = x[op.q0],
                OpKind::MeasureX => flipped[op.record.expect("record")] = z[op.q0],
                OpKind::Cx => {
                    x[op.q1] ^= x[op.q0];
                    z[op.q0] ^= z[op.q1];
                }
            }
        }
    }
    let parity = |recs: &[usize]| recs.iter().filter(|&&r| flipped[r]).count() % 2 == 1;
    let dets = (0..c.num_detectors())
        .filter(|&i| parity(&c.detectors[i].records))
        .collect();
    let obs = (0..c.num_observables())
        .filter(|&k| parity(&c.observables[k]))
        .collect();
    (dets, obs)
}

/// Data-qubit footprint of the ancilla component of a fault placed inside a
/// round's CNOT layers, after reduction by the measured stabilizer. None when
/// the fault does not act on that ancilla mid-extraction.
pub fn hook_footprint(c: &MemoryCircuit, fault: &FaultMechanism) -> Option<usize> {
    let stab = match fault.gate {
        GateId::Cnot { stab, .. } => stab,
        _ => return None,
    };
    fault.layer?;
    let n = c.code.n();
    let ancilla = n + stab;
    let &(_, pa) = fault.paulis.iter().find(|(q, _)| *q == ancilla)?;
    let kind = c.code.stabilizer_kind(stab);
    let relevant = match kind {
        CheckType::X => pa.has_x(),
        CheckType::Z => pa.has_z(),
    };
    if !relevant {
        return Some(0);
    }
    // The relevant component spreads from the ancilla to the data qubits it
    // still has to touch this round.
    let mut x = vec![false; c.num_qubits];
    let mut z = vec![false; c.num_qubits];
    match kind {
        CheckType::X => x[ancilla] = true,
        CheckType::Z => z[ancilla] = true,
    }
    for moment in c.moments.iter().skip(fault.moment + 1) {
        if moment.round != fault.round || !matches!(moment.kind, MomentKind::Cnot(_)) {
            break;
        }
        for op in &moment.ops {
            x[op.q1] ^= x[op.q0];
            z[op.q0] ^= z[op.q1];
        }
    }
    let support = c.code.stabilizer_support(stab);
    let f = support
        .iter()
        .filter(|&&q| match kind {
            CheckType::X => x[q],
            CheckType::Z => z[q],
        })
        .count();
    Some(f.min(support.len() - f))
}

/// True iff the fault sits on an ancilla mid-extraction and spreads to at
/// least two data qubits that no stabilizer multiplication removes.
pub fn is_hook(c: &MemoryCircuit, fault: &FaultMechanism) -> bool {
    hook_footprint(c, fault).is_some_and(|f| f >= 2)
}
