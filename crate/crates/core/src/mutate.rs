//! Candidate schedule edits derived from minimum-weight logical errors,
//! pruning by validity and ambiguity removal, and conflict-aware application.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{is_ambiguous, Subgraph};
use crate::circuit::{depth, memory_circuit, validate_schedule, GateId, MemoryCircuit, SmSchedule};
use crate::dem::{build_dem, is_hook, propagate_fault, DetectorErrorModel, FaultMechanism, NoiseModel};
use crate::error::{Error, Result};

/// Sets `first` to touch `qubit` before `second`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Flip {
    pub first: usize,
    pub second: usize,
    pub qubit: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChangeKind {
    /// Move `moved` to sit immediately before `before` in `stab`'s order.
    Reorder { stab: usize, moved: usize, before: usize },
    /// One flip for same-type pairs; two for X/Z pairs.
    Reschedule { flips: Vec<Flip> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeStatus {
    Candidate,
    Invalid,
    Verified,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateChange {
    pub kind: ChangeKind,
    /// (subgraph id, mechanism id).
    pub origin: (usize, usize),
    pub status: ChangeStatus,
    /// Other choices for the paired flip of an X/Z reschedule, tried in order
    /// when the primary choice fails pruning.
    pub fallbacks: Vec<Flip>,
}

impl CandidateChange {
    pub fn describe(&self) -> String {
        match &self.kind {
            ChangeKind::Reorder { stab, moved, before } => {
                format!("reorder s{stab}: q{moved} before q{before}")
            }
            ChangeKind::Reschedule { flips } => flips
                .iter()
                .map(|f| format!("s{} before s{} on q{}", f.first, f.second, f.qubit))
                .collect::<Vec<_>>()
                .join("; "),
        }
    }
}

/// The schedule with `kind` applied.
pub fn apply_kind(s: &SmSchedule, kind: &ChangeKind) -> SmSchedule {
    let mut out = s.clone();
    match kind {
        ChangeKind::Reorder { stab, moved, before } => {
            let mut order: Vec<usize> = s.order(*stab).iter().copied().filter(|q| q != moved).collect();
            let at = order.iter().position(|q| q == before).unwrap_or(order.len());
            order.insert(at, *moved);
            out.set_order(*stab, order);
        }
        ChangeKind::Reschedule { flips } => {
            for f in flips {
                out.set_first(f.first, f.second, f.qubit);
            }
        }
    }
    out
}

/// Candidate changes for the mechanisms of a logical error.
pub fn enumerate_changes<R: Rng>(
    dem: &DetectorErrorModel,
    schedule: &SmSchedule,
    err: &[usize],
    subgraph_id: usize,
    rng: &mut R,
) -> Result<Vec<CandidateChange>> {
    let code = schedule.code();
    let circuit = &dem.circuit;
    let mut seen: HashSet<ChangeKind> = HashSet::new();
    let mut out = Vec::new();
    let mut push = |kind: ChangeKind, mech: usize, fallbacks: Vec<Flip>, out: &mut Vec<CandidateChange>| {
        if seen.insert(kind.clone()) {
            out.push(CandidateChange {
                kind,
                origin: (subgraph_id, mech),
                status: ChangeStatus::Candidate,
                fallbacks,
            });
        }
    };
    for &mech in err {
        let faults = dem
            .provenance
            .get(mech)
            .filter(|f| !f.is_empty())
            .ok_or_else(|| Error::Internal(format!("mechanism {mech} has no provenance")))?;
        for fault in faults {
            let (s_j, q_i) = match fault.gate {
                GateId::Cnot { stab, qubit } => (stab, qubit),
                _ => continue,
            };
            if is_hook(circuit, fault) {
                for &q_j in schedule.order(s_j) {
                    if q_j != q_i {
                        push(
                            ChangeKind::Reorder {
                                stab: s_j,
                                moved: q_j,
                                before: q_i,
                            },
                            mech,
                            vec![],
                            &mut out,
                        );
                    }
                }
            }
            // Stabilizers flipped by this fault that share q_i with s_j.
            let flipped: Vec<usize> = dem
                .column_detectors(mech)
                .iter()
                .map(|&d| dem.detector_meta[d as usize].0)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .filter(|&s| s != s_j && schedule.graph().first(s, s_j, q_i).is_some())
                .collect();
            for s_i in flipped {
                let first = schedule.graph().first(s_i, s_j, q_i).expect("shared qubit");
                let (a, b) = if first == s_i { (s_j, s_i) } else { (s_i, s_j) };
                let primary = Flip {
                    first: a,
                    second: b,
                    qubit: q_i,
                };
                if code.stabilizer_kind(s_i) == code.stabilizer_kind(s_j) {
                    push(ChangeKind::Reschedule { flips: vec![primary] }, mech, vec![], &mut out);
                    continue;
                }
                let sup_j = code.stabilizer_support(s_j);
                let mut others: Vec<usize> = code
                    .stabilizer_support(s_i)
                    .into_iter()
                    .filter(|q| *q != q_i && sup_j.contains(q))
                    .collect();
                if others.is_empty() {
                    continue;
                }
                if others.len() > 1 {
                    others.shuffle(rng);
                }
                let paired: Vec<Flip> = others
                    .iter()
                    .map(|&q_k| {
                        let f = schedule.graph().first(s_i, s_j, q_k).expect("shared qubit");
                        let (a, b) = if f == s_i { (s_j, s_i) } else { (s_i, s_j) };
                        Flip {
                            first: a,
                            second: b,
                            qubit: q_k,
                        }
                    })
                    .collect();
                push(
                    ChangeKind::Reschedule {
                        flips: vec![primary, paired[0]],
                    },
                    mech,
                    paired[1..].to_vec(),
                    &mut out,
                );
            }
        }
    }
    Ok(out)
}

/// Parameters for rebuilding detector error models of edited schedules.
#[derive(Clone, Copy, Debug)]
pub struct RebuildConfig {
    pub rounds: usize,
    pub noise: NoiseModel,
}

/// A change that passed pruning, with the depth of the edited schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedChange {
    pub change: CandidateChange,
    pub depth: usize,
}

/// Re-locates a fault in another circuit built from the same code and rounds.
fn relocate(fault: &FaultMechanism, c: &MemoryCircuit) -> Option<FaultMechanism> {
    if matches!(fault.gate, GateId::Idle(_)) {
        return None;
    }
    let moment = c.moment_of(fault.round, fault.gate)?;
    let layer = match c.moments[moment].kind {
        crate::circuit::MomentKind::Cnot(l) => Some(l),
        _ => None,
    };
    Some(FaultMechanism {
        moment,
        layer,
        ..fault.clone()
    })
}

/// Checks one edited schedule against the ambiguity it must remove.
fn verify_edit(
    edited: &SmSchedule,
    dem: &DetectorErrorModel,
    sub: &Subgraph,
    err: &[usize],
    cfg: &RebuildConfig,
) -> Result<Option<usize>> {
    if validate_schedule(edited).is_err() {
        return Ok(None);
    }
    let circuit = memory_circuit(edited, cfg.rounds, dem.basis)?;
    let new_dem = build_dem(circuit, &cfg.noise)?;
    let mut mapped = Vec::with_capacity(sub.syndrome_nodes.len());
    for &d in &sub.syndrome_nodes {
        let (stab, round) = dem.detector_meta[d];
        match new_dem.circuit.detector_id(stab, round) {
            Some(x) => mapped.push(x),
            None => return Ok(None),
        }
    }
    if is_ambiguous(&new_dem, &mapped) {
        return Ok(None);
    }
    // The original error set must no longer be an undetected logical error.
    let mut dets = vec![false; new_dem.num_detectors()];
    let mut obs = vec![false; new_dem.num_observables()];
    for &mech in err {
        let Some(fault) = dem.provenance[mech]
            .iter()
            .find_map(|f| relocate(f, &new_dem.circuit))
        else {
            continue;
        };
        let (fd, fo) = propagate_fault(&new_dem.circuit, &fault);
        for d in fd {
            dets[d] ^= true;
        }
        for k in fo {
            obs[k] ^= true;
        }
    }
    let detected = dets.iter().any(|&b| b);
    let logical = obs.iter().any(|&b| b);
    if !(detected || !logical) {
        return Ok(None);
    }
    Ok(Some(depth(edited)?))
}

/// Keeps the candidates that yield a valid schedule, remove the subgraph's
/// ambiguity, and stop the original error set from being an undetected
/// logical error.
pub fn prune_changes(
    schedule: &SmSchedule,
    dem: &DetectorErrorModel,
    sub: &Subgraph,
    err: &[usize],
    cands: Vec<CandidateChange>,
    cfg: &RebuildConfig,
) -> Result<Vec<VerifiedChange>> {
    let mut out = Vec::new();
    for mut cand in cands {
        let mut options: Vec<ChangeKind> = vec![cand.kind.clone()];
        if let ChangeKind::Reschedule { flips } = &cand.kind {
            for alt in &cand.fallbacks {
                options.push(ChangeKind::Reschedule {
                    flips: vec![flips[0], *alt],
                });
            }
        }
        let mut verified = None;
        for kind in options {
            let edited = apply_kind(schedule, &kind);
            if let Some(d) = verify_edit(&edited, dem, sub, err, cfg)? {
                verified = Some((kind, d));
                break;
            }
        }
        match verified {
            Some((kind, d)) => {
                cand.kind = kind;
                cand.status = ChangeStatus::Verified;
                cand.fallbacks.clear();
                out.push(VerifiedChange {
                    change: cand,
                    depth: d,
                });
            }
            None => cand.status = ChangeStatus::Invalid,
        }
    }
    Ok(out)
}

/// Origin subgraph id → (basis, (stabilizer, round) of each syndrome node).
pub type Origins = BTreeMap<usize, (crate::code::CheckType, Vec<(usize, usize)>)>;

#[derive(Clone, Debug)]
pub struct ApplyOutcome {
    pub schedule: SmSchedule,
    pub applied: Vec<VerifiedChange>,
    pub skipped: Vec<VerifiedChange>,
}

/// Applies verified changes: per origin subgraph only the one giving the
/// shallowest schedule, groups in subgraph order, each re-validated against
/// the running schedule and skipped when it no longer yields a valid
/// schedule. With `recheck`, a change is also skipped when, after applying
/// it, the syndrome set of its own or an earlier applied subgraph is
/// ambiguous again.
pub fn apply_changes(
    schedule: &SmSchedule,
    verified: Vec<VerifiedChange>,
    recheck: Option<(&RebuildConfig, &Origins)>,
) -> Result<ApplyOutcome> {
    let mut groups: BTreeMap<usize, Vec<VerifiedChange>> = BTreeMap::new();
    for v in verified {
        groups.entry(v.change.origin.0).or_default().push(v);
    }
    let mut current = schedule.clone();
    let mut applied: Vec<VerifiedChange> = Vec::new();
    let mut skipped = Vec::new();
    for (_, mut group) in groups {
        // Stable: ties keep enumeration order.
        group.sort_by_key(|v| v.depth);
        let mut it = group.into_iter();
        let best = it.next().expect("nonempty group");
        skipped.extend(it);
        let edited = apply_kind(&current, &best.change.kind);
        if edited == current || validate_schedule(&edited).is_err() {
            skipped.push(best);
            continue;
        }
        if let Some((cfg, origins)) = recheck {
            if still_ambiguous(&edited, cfg, origins, applied.iter().chain(std::iter::once(&best)))? {
                skipped.push(best);
                continue;
            }
        }
        current = edited;
        applied.push(best);
    }
    Ok(ApplyOutcome {
        schedule: current,
        applied,
        skipped,
    })
}

fn still_ambiguous<'a>(
    s: &SmSchedule,
    cfg: &RebuildConfig,
    origins: &Origins,
    changes: impl Iterator<Item = &'a VerifiedChange>,
) -> Result<bool> {
    let mut dems: BTreeMap<crate::code::CheckType, DetectorErrorModel> = BTreeMap::new();
    for v in changes {
        let Some((basis, dets)) = origins.get(&v.change.origin.0) else {
            continue;
        };
        if !dems.contains_key(basis) {
            let c = memory_circuit(s, cfg.rounds, *basis)?;
            dems.insert(*basis, build_dem(c, &cfg.noise)?);
        }
        let dem = &dems[basis];
        let ids: Option<Vec<usize>> = dets
            .iter()
            .map(|&(stab, round)| dem.circuit.detector_id(stab, round))
            .collect();
        if ids.is_some_and(|ids| is_ambiguous(dem, &ids)) {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::sample_subgraph;
    use crate::circuit::{nz_schedule, nz_transposed_schedule};
    use crate::code::CheckType;
    use crate::minweight::{min_weight_logical, Status};
    use std::time::Duration;

    fn dem(s: &SmSchedule, basis: CheckType) -> DetectorErrorModel {
        build_dem(memory_circuit(s, 3, basis).unwrap(), &NoiseModel::new(0.001)).unwrap()
    }

    fn cfg() -> RebuildConfig {
        RebuildConfig {
            rounds: 3,
            noise: NoiseModel::new(0.001),
        }
    }

    #[test]
    fn reorder_moves_qubit_before_target() {
        let s = nz_schedule(3).unwrap();
        assert_eq!(s.order(0), &[0, 3, 1, 4]);
        let e = apply_kind(
            &s,
            &ChangeKind::Reorder {
                stab: 0,
                moved: 4,
                before: 3,
            },
        );
        assert_eq!(e.order(0), &[0, 4, 3, 1]);
        assert_eq!(e.graph(), s.graph());
    }

    #[test]
    fn hook_on_weight_four_gives_three_reorders() {
        let s = nz_transposed_schedule(3).unwrap();
        let d = dem(&s, CheckType::Z);
        let hook = (0..d.num_mechanisms())
            .find(|&j| d.provenance[j].iter().any(|f| is_hook(&d.circuit, f)))
            .expect("a hook mechanism");
        let fault = d.provenance[hook]
            .iter()
            .find(|f| is_hook(&d.circuit, f))
            .unwrap()
            .clone();
        let GateId::Cnot { stab, qubit } = fault.gate else {
            panic!("hook on a CNOT")
        };
        let mut rng = crate::rng(0);
        let cands = enumerate_changes(&d, &s, &[hook], 0, &mut rng).unwrap();
        let reorders = cands
            .iter()
            .filter(|c| matches!(c.kind, ChangeKind::Reorder { stab: st, before, .. } if st == stab && before == qubit))
            .count();
        assert_eq!(reorders, 3);
        for c in &cands {
            match &c.kind {
                ChangeKind::Reschedule { flips } => {
                    let same = s.code().stabilizer_kind(flips[0].first)
                        == s.code().stabilizer_kind(flips[0].second);
                    assert_eq!(flips.len(), if same { 1 } else { 2 });
                    let edited = apply_kind(&s, &c.kind);
                    assert_eq!(edited.orders(), s.orders());
                }
                ChangeKind::Reorder { .. } => {}
            }
        }
    }

    #[test]
    fn undetected_single_fault_gives_no_reschedules() {
        let s = nz_schedule(3).unwrap();
        let d = dem(&s, CheckType::Z);
        let silent = (0..d.num_mechanisms()).find(|&j| d.column_detectors(j).is_empty());
        if let Some(j) = silent {
            let cands = enumerate_changes(&d, &s, &[j], 0, &mut crate::rng(0)).unwrap();
            assert!(cands.iter().all(|c| matches!(c.kind, ChangeKind::Reorder { .. })));
        }
    }

    #[test]
    fn pruning_verifies_and_application_removes_ambiguity() {
        let s = nz_transposed_schedule(3).unwrap();
        let d = dem(&s, CheckType::Z);
        let mut rng = crate::rng(4);
        let mut any_verified = false;
        for id in 0..20 {
            let Some(sub) = sample_subgraph(&d, &mut rng, 200) else {
                continue;
            };
            let r = min_weight_logical(&sub, Duration::from_secs(10));
            assert_eq!(r.status, Status::Found);
            if r.weight >= 3 {
                continue;
            }
            let cands = enumerate_changes(&d, &s, &r.errors, id, &mut rng).unwrap();
            let n = cands.len();
            let verified = prune_changes(&s, &d, &sub, &r.errors, cands, &cfg()).unwrap();
            assert!(verified.len() <= n);
            for v in &verified {
                let edited = apply_kind(&s, &v.change.kind);
                assert_eq!(validate_schedule(&edited), Ok(()));
                let nd = dem(&edited, CheckType::Z);
                assert!(!is_ambiguous(&nd, &sub.syndrome_nodes));
            }
            if !verified.is_empty() {
                any_verified = true;
                let out = apply_changes(&s, verified.clone(), None).unwrap();
                assert_eq!(out.applied.len(), 1);
                assert_eq!(out.applied.len() + out.skipped.len(), verified.len());
                let min_depth = verified.iter().map(|v| v.depth).min().unwrap();
                assert_eq!(out.applied[0].depth, min_depth);
                assert_eq!(validate_schedule(&out.schedule), Ok(()));
            }
        }
        assert!(any_verified);
    }

    #[test]
    fn identity_reorder_is_dropped() {
        let s = nz_transposed_schedule(3).unwrap();
        let d = dem(&s, CheckType::Z);
        let mut rng = crate::rng(1);
        let sub = loop {
            if let Some(sub) = sample_subgraph(&d, &mut rng, 200) {
                break sub;
            }
        };
        let r = min_weight_logical(&sub, Duration::from_secs(10));
        let order = s.order(4).to_vec();
        let identity = CandidateChange {
            kind: ChangeKind::Reorder {
                stab: 4,
                moved: order[0],
                before: order[1],
            },
            origin: (0, 0),
            status: ChangeStatus::Candidate,
            fallbacks: vec![],
        };
        assert_eq!(apply_kind(&s, &identity.kind), s);
        let v = prune_changes(&s, &d, &sub, &r.errors, vec![identity], &cfg()).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn empty_verified_list_is_a_no_op() {
        let s = nz_schedule(3).unwrap();
        let out = apply_changes(&s, vec![], None).unwrap();
        assert_eq!(out.schedule, s);
        assert!(out.applied.is_empty() && out.skipped.is_empty());
    }

    #[test]
    fn colliding_changes_from_different_subgraphs() {
        let s = nz_schedule(3).unwrap();
        // Each flip alone breaks commutation; together they form a valid
        // reschedule but a second copy in another group is then a no-op and
        // is skipped.
        let a = VerifiedChange {
            change: CandidateChange {
                kind: ChangeKind::Reorder {
                    stab: 6,
                    moved: 1,
                    before: 0,
                },
                origin: (0, 0),
                status: ChangeStatus::Verified,
                fallbacks: vec![],
            },
            depth: 4,
        };
        let first_on_0 = s.graph().first(0, 6, 0).unwrap();
        let other = if first_on_0 == 0 { 6 } else { 0 };
        let b = VerifiedChange {
            change: CandidateChange {
                kind: ChangeKind::Reschedule {
                    flips: vec![Flip {
                        first: other,
                        second: first_on_0,
                        qubit: 0,
                    }],
                },
                origin: (1, 0),
                status: ChangeStatus::Verified,
                fallbacks: vec![],
            },
            depth: 4,
        };
        let alone_a = apply_kind(&s, &a.change.kind);
        let out = apply_changes(&s, vec![a.clone(), b.clone()], None).unwrap();
        assert_eq!(validate_schedule(&out.schedule), Ok(()));
        if validate_schedule(&alone_a).is_ok() {
            assert_eq!(out.applied[0], a);
            assert!(out.skipped.contains(&b));
        }
    }
}
