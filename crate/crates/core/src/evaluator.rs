//! Concrete execution of charts and determinants.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::builder::{BranchTrace, BuildConfig, BuildError, Machine, Val};
use crate::expr::{apply, EvalError, ExprArena, ExprId, Interpretation, Node, Value, VarRef};
use crate::flowchart::Flowchart;
use crate::qterm::{Outcome, QDeterminant};

/// Runs `fc` sequentially on concrete inputs.
///
/// A run that reaches End with `empout` set to 0 yields undetermined outputs.
pub fn run_flowchart(
    fc: &Flowchart,
    cfg: &BuildConfig,
    inputs: &Interpretation,
) -> Result<BTreeMap<VarRef, Outcome>, BuildError> {
    let mut scratch = ExprArena::new();
    let mut m = Machine::new(fc, &mut scratch, cfg, Some(inputs))?;
    let mut trace = BranchTrace::default();
    let r = m.run_pass(&mut trace)?;
    Ok(r.outputs
        .into_iter()
        .map(|(v, x)| {
            let o = match x {
                _ if !r.emit => Outcome::Undetermined { causes: Vec::new() },
                Val::Num(x) => Outcome::Value(Value::Num(x)),
                Val::Bool(b) => Outcome::Value(Value::Bool(b)),
                // unreachable with every input bound
                Val::Sym(_) => Outcome::Undetermined { causes: Vec::new() },
            };
            (v, o)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    GuardFalse,
    /// A pair of the same output delivered the result first.
    SiblingCompleted,
    Error(EvalError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerminatedPair {
    pub output: VarRef,
    pub pair: usize,
    /// Step after which the pair stopped.
    pub level: u32,
    pub reason: Termination,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub outputs: BTreeMap<VarRef, Outcome>,
    /// Operations executed at each step.
    pub executed: Vec<u64>,
    pub terminated: Vec<TerminatedPair>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PairState {
    Live,
    Dead,
    Done,
}

struct PairRun {
    output: usize,
    index: usize,
    guard: Option<ExprId>,
    value: ExprId,
    state: PairState,
}

/// Executes the determinant step by step, as soon as operands are ready.
///
/// Guards that come out false stop their pair; a pair whose guard holds and
/// whose value is known settles its output and stops the other pairs of that
/// output. The lowest-index settled pair supplies the output.
pub fn run_q_effective(q: &QDeterminant, inputs: &Interpretation, doubling: bool) -> RunResult {
    let mut arena = q.arena.clone();
    let names: Vec<VarRef> = q.outputs().keys().cloned().collect();
    let mut pairs = Vec::new();
    for (o, t) in q.outputs().values().enumerate() {
        if t.pairs().is_empty() {
            if let crate::qterm::QTerm::Unconditional(w) = t {
                pairs.push(PairRun { output: o, index: 0, guard: None, value: *w, state: PairState::Live });
            }
        }
        for (j, p) in t.pairs().iter().enumerate() {
            pairs.push(PairRun {
                output: o,
                index: j,
                guard: Some(p.guard),
                value: p.value,
                state: PairState::Live,
            });
        }
    }
    if doubling {
        let mut roots = Vec::new();
        for p in &pairs {
            roots.extend(p.guard);
            roots.push(p.value);
        }
        let mapped = arena.rebalance_all(&roots);
        let mut it = mapped.into_iter();
        for p in &mut pairs {
            if p.guard.is_some() {
                p.guard = it.next();
            }
            p.value = it.next().expect("one id per root");
        }
    }

    // per node, the pairs whose guard or value needs it
    let mut users: Vec<Vec<u32>> = vec![Vec::new(); arena.len()];
    let mut stamp = vec![u32::MAX; arena.len()];
    let mut stack = Vec::new();
    for (k, p) in pairs.iter().enumerate() {
        stack.extend(p.guard);
        stack.push(p.value);
        while let Some(n) = stack.pop() {
            if stamp[n.index()] == k as u32 {
                continue;
            }
            stamp[n.index()] = k as u32;
            users[n.index()].push(k as u32);
            stack.extend(arena.node(n).operands());
        }
    }
    let top = pairs
        .iter()
        .flat_map(|p| p.guard.into_iter().chain([p.value]))
        .map(|r| arena.level(r))
        .max()
        .unwrap_or(0);
    let mut by_level: Vec<Vec<ExprId>> = vec![Vec::new(); top as usize + 1];
    for (i, u) in users.iter().enumerate() {
        if !u.is_empty() {
            let n = ExprId(i as u32);
            by_level[arena.level(n) as usize].push(n);
        }
    }

    let mut values: Vec<Option<Result<Value, EvalError>>> = vec![None; arena.len()];
    for &n in &by_level[0] {
        values[n.index()] = Some(leaf_value(&arena, n, inputs));
    }
    let mut executed = vec![0u64; top as usize];
    let mut terminated = Vec::new();
    let mut settled: Vec<Option<Outcome>> = vec![None; names.len()];
    let mut guard_causes: Vec<Vec<(usize, EvalError)>> = vec![Vec::new(); names.len()];

    for level in 0..=top {
        if level > 0 {
            for &n in &by_level[level as usize] {
                if !users[n.index()].iter().any(|&k| pairs[k as usize].state == PairState::Live) {
                    continue;
                }
                let node = arena.node(n);
                let mut args = Vec::with_capacity(2);
                let mut err = None;
                for o in node.operands() {
                    match values[o.index()].as_ref().expect("operands run at lower levels") {
                        Ok(v) => args.push(*v),
                        Err(e) => {
                            err = Some(e.clone());
                            break;
                        }
                    }
                }
                let v = match err {
                    Some(e) => Err(e),
                    None => apply(node.op().expect("operation node"), &args),
                };
                values[n.index()] = Some(v);
                executed[level as usize - 1] += 1;
            }
        }
        for p in pairs.iter_mut() {
            if p.state != PairState::Live {
                continue;
            }
            let guard = match p.guard {
                None => Some(Ok(true)),
                Some(g) => values[g.index()].as_ref().map(|v| match v {
                    Ok(Value::Bool(b)) => Ok(*b),
                    Ok(_) => Err(EvalError::TypeMismatch("guard")),
                    Err(e) => Err(e.clone()),
                }),
            };
            let stop = match guard.clone() {
                Some(Ok(false)) => Some(Termination::GuardFalse),
                Some(Err(e)) => {
                    guard_causes[p.output].push((p.index, e.clone()));
                    Some(Termination::Error(e))
                }
                _ => match &values[p.value.index()] {
                    Some(Err(e)) => Some(Termination::Error(e.clone())),
                    _ => None,
                },
            };
            if let Some(reason) = stop {
                terminated.push(TerminatedPair {
                    output: names[p.output].clone(),
                    pair: p.index,
                    level,
                    reason,
                });
                p.state = PairState::Dead;
            } else if guard == Some(Ok(true)) && values[p.value.index()].is_some() {
                p.state = PairState::Done;
            }
        }
        // settle outputs whose lowest open pair is done
        for (o, slot) in settled.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            let first_open = pairs
                .iter()
                .filter(|p| p.output == o && p.state != PairState::Dead)
                .min_by_key(|p| p.index);
            let Some(first) = first_open else { continue };
            if first.state != PairState::Done {
                continue;
            }
            let v = match &values[first.value.index()] {
                Some(Ok(v)) => *v,
                _ => unreachable!("done pairs have values"),
            };
            *slot = Some(Outcome::Value(v));
            for p in pairs.iter_mut().filter(|p| p.output == o && p.state == PairState::Live) {
                p.state = PairState::Dead;
                terminated.push(TerminatedPair {
                    output: names[o].clone(),
                    pair: p.index,
                    level,
                    reason: Termination::SiblingCompleted,
                });
            }
        }
        if settled.iter().all(Option::is_some) {
            break;
        }
    }

    let outputs = names
        .into_iter()
        .zip(settled)
        .zip(guard_causes)
        .map(|((v, s), causes)| (v, s.unwrap_or(Outcome::Undetermined { causes })))
        .collect();
    RunResult { outputs, executed, terminated }
}

fn leaf_value(arena: &ExprArena, n: ExprId, inputs: &Interpretation) -> Result<Value, EvalError> {
    match arena.node(n) {
        Node::Const(c) => Ok(c.value()),
        Node::Var(v) => inputs.get(v).copied().ok_or_else(|| EvalError::UnboundVariable(v.to_string())),
        _ => unreachable!("level-0 nodes are leaves"),
    }
}
