//! Stabilizer-tableau simulation with symbolic measurement outcomes.
//!
//! Random measurement outcomes become fresh symbols; every phase is tracked as
//! a GF(2) expression over a constant bit and those symbols. A detector is
//! deterministically zero iff its expression vanishes.

use crate::circuit::{MemoryCircuit, OpKind, SmSchedule};
use crate::code::CheckType;
use crate::error::Result;
use crate::gf2::BitVec;

pub struct SymbolicTableau {
    n: usize,
    /// Rows 0..n are destabilizers, n..2n stabilizers.
    x: Vec<BitVec>,
    z: Vec<BitVec>,
    /// Bit 0 is the constant term; bit k ≥ 1 is symbol k.
    phase: Vec<BitVec>,
    next_symbol: usize,
    width: usize,
}

impl SymbolicTableau {
    /// |0…0⟩ on `n` qubits with room for `max_symbols` random outcomes.
    pub fn new(n: usize, max_symbols: usize) -> Self {
        let width = max_symbols + 1;
        let mut x = vec![BitVec::zeros(n); 2 * n];
        let mut z = vec![BitVec::zeros(n); 2 * n];
        for q in 0..n {
            x[q].set(q, true);
            z[n + q].set(q, true);
        }
        SymbolicTableau {
            n,
            x,
            z,
            phase: vec![BitVec::zeros(width); 2 * n],
            next_symbol: 1,
            width,
        }
    }

    pub fn h(&mut self, q: usize) {
        for i in 0..2 * self.n {
            let (xb, zb) = (self.x[i].get(q), self.z[i].get(q));
            if xb && zb {
                self.phase[i].toggle(0);
            }
            self.x[i].set(q, zb);
            self.z[i].set(q, xb);
        }
    }

    pub fn cx(&mut self, c: usize, t: usize) {
        for i in 0..2 * self.n {
            let (xc, zc) = (self.x[i].get(c), self.z[i].get(c));
            let (xt, zt) = (self.x[i].get(t), self.z[i].get(t));
            if xc && zt && (xt == zc) {
                self.phase[i].toggle(0);
            }
            self.x[i].set(t, xt ^ xc);
            self.z[i].set(c, zc ^ zt);
        }
    }

    /// Phase exponent (mod 4) contributed by multiplying row `i` into (x, z).
    fn product_phase(x1: &BitVec, z1: &BitVec, x2: &BitVec, z2: &BitVec) -> bool {
        let mut sum: i64 = 0;
        let n = x1.len();
        for j in 0..n {
            let (a, b, c, d) = (x1.get(j), z1.get(j), x2.get(j), z2.get(j));
            sum += match (a, b) {
                (false, false) => 0,
                (true, true) => d as i64 - c as i64,
                (true, false) => d as i64 * (2 * c as i64 - 1),
                (false, true) => c as i64 * (1 - 2 * d as i64),
            };
        }
        sum.rem_euclid(4) == 2
    }

    /// Row h ← row i · row h.
    fn rowsum(&mut self, h: usize, i: usize) {
        let flip = Self::product_phase(&self.x[i], &self.z[i], &self.x[h], &self.z[h]);
        let pi = self.phase[i].clone();
        self.phase[h].xor_assign(&pi);
        if flip {
            self.phase[h].toggle(0);
        }
        let (xi, zi) = (self.x[i].clone(), self.z[i].clone());
        self.x[h].xor_assign(&xi);
        self.z[h].xor_assign(&zi);
    }

    /// Measures Z on `q`; returns the outcome expression.
    pub fn measure_z(&mut self, q: usize) -> BitVec {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&p| self.x[p].get(q)) {
            for i in 0..2 * n {
                if i != p && self.x[i].get(q) {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p].clone();
            self.z[p - n] = self.z[p].clone();
            self.phase[p - n] = self.phase[p].clone();
            self.x[p] = BitVec::zeros(n);
            self.z[p] = BitVec::zeros(n);
            self.z[p].set(q, true);
            assert!(self.next_symbol < self.width, "symbol budget exhausted");
            let mut e = BitVec::zeros(self.width);
            e.set(self.next_symbol, true);
            self.next_symbol += 1;
            self.phase[p] = e.clone();
            e
        } else {
            let mut sx = BitVec::zeros(n);
            let mut sz = BitVec::zeros(n);
            let mut sp = BitVec::zeros(self.width);
            for i in 0..n {
                if self.x[i].get(q) {
                    let r = i + n;
                    if Self::product_phase(&self.x[r], &self.z[r], &sx, &sz) {
                        sp.toggle(0);
                    }
                    sp.xor_assign(&self.phase[r]);
                    sx.xor_assign(&self.x[r]);
                    sz.xor_assign(&self.z[r]);
                }
            }
            sp
        }
    }

    pub fn measure_x(&mut self, q: usize) -> BitVec {
        self.h(q);
        let e = self.measure_z(q);
        self.h(q);
        e
    }

    pub fn reset_z(&mut self, q: usize) {
        let e = self.measure_z(q);
        if !e.is_zero() {
            for i in 0..2 * self.n {
                if self.z[i].get(q) {
                    self.phase[i].xor_assign(&e);
                }
            }
        }
    }

    pub fn reset_x(&mut self, q: usize) {
        self.reset_z(q);
        self.h(q);
    }
}

/// Outcome expressions of every detector and observable of a noiseless run.
pub fn noiseless_outcomes(c: &MemoryCircuit) -> (Vec<BitVec>, Vec<BitVec>) {
    let symbols = c
        .moments
        .iter()
        .flat_map(|m| m.ops.iter())
        .filter(|op| op.kind != OpKind::Cx)
        .count();
    let mut t = SymbolicTableau::new(c.num_qubits, symbols);
    let mut records = vec![BitVec::zeros(symbols + 1); c.num_records];
    for m in &c.moments {
        for op in &m.ops {
            match op.kind {
                OpKind::ResetZ => t.reset_z(op.q0),
                OpKind::ResetX => t.reset_x(op.q0),
                OpKind::Cx => t.cx(op.q0, op.q1),
                OpKind::MeasureZ => records[op.record.expect("record")] = t.measure_z(op.q0),
                OpKind::MeasureX => records[op.record.expect("record")] = t.measure_x(op.q0),
            }
        }
    }
    let combine = |recs: &[usize]| {
        let mut e = BitVec::zeros(symbols + 1);
        for &r in recs {
            e.xor_assign(&records[r]);
        }
        e
    };
    let dets = c.detectors.iter().map(|d| combine(&d.records)).collect();
    let obs = c.observables.iter().map(|o| combine(o)).collect();
    (dets, obs)
}

/// True iff every detector and observable of the memory experiment built from
/// `s` is deterministically zero without noise, in both bases.
pub fn noiseless_detectors_deterministic(s: &SmSchedule, rounds: usize) -> Result<bool> {
    for basis in [CheckType::Z, CheckType::X] {
        let c = memory_circuit_unchecked(s, rounds, basis)?;
        let (dets, obs) = noiseless_outcomes(&c);
        if dets.iter().chain(obs.iter()).any(|e| !e.is_zero()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Memory circuit for a schedule that may break commutation but is acyclic.
fn memory_circuit_unchecked(s: &SmSchedule, rounds: usize, basis: CheckType) -> Result<MemoryCircuit> {
    crate::circuit::memory_circuit_with(s, rounds, basis, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::nz_schedule;

    #[test]
    fn bell_pair_correlations() {
        let mut t = SymbolicTableau::new(2, 4);
        t.h(0);
        t.cx(0, 1);
        let a = t.measure_z(0);
        let b = t.measure_z(1);
        assert!(!a.is_zero());
        assert_eq!(a, b);
    }

    #[test]
    fn reset_gives_deterministic_zero() {
        let mut t = SymbolicTableau::new(1, 4);
        t.h(0);
        t.reset_z(0);
        assert!(t.measure_z(0).is_zero());
        t.reset_x(0);
        assert!(t.measure_x(0).is_zero());
        assert!(!t.measure_z(0).is_zero());
    }

    #[test]
    fn nz_memory_is_deterministic() {
        for d in [3, 5] {
            let s = nz_schedule(d).unwrap();
            assert!(noiseless_detectors_deterministic(&s, 2).unwrap());
        }
    }
}
