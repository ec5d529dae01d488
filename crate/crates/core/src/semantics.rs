//! Concrete reference interpreters and ground formula evaluation.
//!
//! Valuations give every variable a value; absent entries read as 0 and are
//! never stored, so equal states compare equal.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::expr::{EvalError, Expr, Int};
use crate::formula::Formula;
use crate::label::{split_heap, Label, StoreHeap};
use crate::program::{InstKind, Instantiation, Program};
use crate::sequent::{LFormula, Sequent};

pub type Valuation = BTreeMap<String, Int>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum World {
    Plain(Valuation),
    /// Nonempty sequence of states; programs run on the last one and
    /// assignments append.
    Path(Vec<Valuation>),
    Heap(StoreHeap),
}

fn canonical(mut v: Valuation) -> Valuation {
    v.retain(|_, n| *n != 0);
    v
}

fn lookup(v: &Valuation, x: &str) -> Int {
    v.get(x).copied().unwrap_or(0)
}

fn eval_in(v: &Valuation, e: &Expr) -> Result<Int, EvalError> {
    e.eval_with(&|x| Some(lookup(v, x)))
}

fn assign_in(v: &Valuation, x: &str, n: Int) -> Valuation {
    let mut v = v.clone();
    if n == 0 {
        v.remove(x);
    } else {
        v.insert(x.to_string(), n);
    }
    v
}

impl World {
    /// The initial world of an instantiation for a ground valuation.
    pub fn initial(kind: InstKind, v: Valuation) -> World {
        let v = canonical(v);
        match kind {
            InstKind::Wp | InstKind::Fodl => World::Plain(v),
            InstKind::Pl => World::Path(vec![v]),
            InstKind::Sl => World::Heap(StoreHeap {
                store: v,
                heap: BTreeMap::new(),
            }),
        }
    }

    /// The state programs read and write.
    pub fn current(&self) -> &Valuation {
        match self {
            World::Plain(v) => v,
            World::Path(p) => p.last().expect("paths are nonempty"),
            World::Heap(sh) => &sh.store,
        }
    }

    /// The state atomic formulas are evaluated in.
    pub fn head(&self) -> &Valuation {
        match self {
            World::Path(p) => &p[0],
            _ => self.current(),
        }
    }

    pub fn lookup(&self, x: &str) -> Int {
        lookup(self.current(), x)
    }

    fn assign(&self, x: &str, n: Int) -> World {
        match self {
            World::Plain(v) => World::Plain(assign_in(v, x, n)),
            World::Path(p) => {
                let mut p = p.clone();
                let next = assign_in(p.last().unwrap(), x, n);
                p.push(next);
                World::Path(p)
            }
            World::Heap(sh) => World::Heap(StoreHeap {
                store: assign_in(&sh.store, x, n),
                heap: sh.heap.clone(),
            }),
        }
    }

    fn eval(&self, e: &Expr) -> Result<Int, EvalError> {
        eval_in(self.current(), e)
    }
}

fn write_valuation(f: &mut fmt::Formatter<'_>, v: &Valuation) -> fmt::Result {
    write!(f, "{{")?;
    for (i, (x, n)) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x} = {n}")?;
    }
    write!(f, "}}")
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            World::Plain(v) => write_valuation(f, v),
            World::Path(p) => {
                for (i, v) in p.iter().enumerate() {
                    if i > 0 {
                        write!(f, ".")?;
                    }
                    write_valuation(f, v)?;
                }
                Ok(())
            }
            World::Heap(sh) => {
                write_valuation(f, &sh.store)?;
                write!(f, " @ {{")?;
                for (i, (a, n)) in sh.heap.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a} -> {n}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// The world a label denotes under a ground assignment of its free variables.
/// Unmapped variables take their value from `g` directly.
pub fn label_world(label: &Label, g: &Valuation) -> Result<World, EvalError> {
    let store_val = |s: &crate::label::Store| -> Result<Valuation, EvalError> {
        let mut v = g.clone();
        for (x, e) in s.entries() {
            v.insert(x.clone(), e.eval(g)?);
        }
        Ok(canonical(v))
    };
    Ok(match label {
        Label::Store(s) => World::Plain(store_val(s)?),
        Label::Seq(seq) => World::Path(seq.iter().map(store_val).collect::<Result<_, _>>()?),
        Label::Heap(sh) => {
            let mut v = g.clone();
            v.extend(sh.store.iter().map(|(x, n)| (x.clone(), *n)));
            World::Heap(StoreHeap {
                store: canonical(v),
                heap: sh.heap.clone(),
            })
        }
    })
}

/// The label describing a ground world.
pub fn world_label(w: &World) -> Label {
    use crate::label::Store;
    let store = |v: &Valuation| {
        Store::from_map(v.iter().map(|(x, n)| (x.clone(), Expr::Int(*n))).collect())
    };
    match w {
        World::Plain(v) => Label::Store(store(v)),
        World::Path(p) => Label::Seq(p.iter().map(store).collect()),
        World::Heap(sh) => Label::Heap(sh.clone()),
    }
}

/// Truth value of a plain arithmetic condition in a state.
pub fn holds(v: &Valuation, f: &Formula) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Cmp(a, op, b) => op.holds(&eval_in(v, a)?, &eval_in(v, b)?),
        Formula::Not(a) => !holds(v, a)?,
        Formula::And(a, b) => holds(v, a)? && holds(v, b)?,
        Formula::Or(a, b) => holds(v, a)? || holds(v, b)?,
        Formula::Imp(a, b) => !holds(v, a)? || holds(v, b)?,
        _ => panic!("`{f}` is not a plain arithmetic condition"),
    })
}

/// Smallest address at or above `base` not allocated in `heap`.
pub fn next_address(heap: &BTreeMap<Int, Int>, base: Int) -> Int {
    let mut n = base.max(1);
    while heap.contains_key(&n) {
        n += 1;
    }
    n
}

/// All one-step successors of `p` in `w` under the instantiation's rules.
pub fn concrete_successors(
    inst: &Instantiation,
    p: &Program,
    w: &World,
) -> Result<Vec<(Program, World)>, EvalError> {
    let mut out = Vec::new();
    successors_into(inst, p, w, &mut out)?;
    Ok(out)
}

fn successors_into(
    inst: &Instantiation,
    p: &Program,
    w: &World,
    out: &mut Vec<(Program, World)>,
) -> Result<(), EvalError> {
    match p {
        Program::Ter => {}
        Program::Assign(x, e) => out.push((Program::Ter, w.assign(x, w.eval(e)?))),
        Program::Seq(a, b) => {
            let mut inner = Vec::new();
            successors_into(inst, a, w, &mut inner)?;
            for (a2, w2) in inner {
                let next = if a2.is_ter() {
                    (**b).clone()
                } else {
                    Program::Seq(Box::new(a2), b.clone())
                };
                out.push((next, w2));
            }
        }
        Program::If(c, a, b) => {
            let branch = if holds(w.current(), c)? { a } else { b };
            successors_into(inst, branch, w, out)?;
        }
        Program::While(c, body) => {
            if holds(w.current(), c)? {
                let mut inner = Vec::new();
                successors_into(inst, body, w, &mut inner)?;
                for (b2, w2) in inner {
                    let next = if b2.is_ter() {
                        p.clone()
                    } else {
                        Program::seq(b2, p.clone())
                    };
                    out.push((next, w2));
                }
            } else {
                out.push((Program::Ter, w.clone()));
            }
        }
        Program::Test(c) => {
            if holds(w.current(), c)? {
                out.push((Program::Ter, w.clone()));
            }
        }
        Program::Choice(a, b) => {
            out.push(((**a).clone(), w.clone()));
            out.push(((**b).clone(), w.clone()));
        }
        Program::Star(a) => out.push((star_unfolding(a), w.clone())),
        Program::Alloc(x, e) => {
            let World::Heap(sh) = w else { return Ok(()) };
            let v = eval_in(&sh.store, e)?;
            let n = next_address(&sh.heap, inst.alloc_base);
            let mut heap = sh.heap.clone();
            heap.insert(n, v);
            out.push((
                Program::Ter,
                World::Heap(StoreHeap {
                    store: assign_in(&sh.store, x, n),
                    heap,
                }),
            ));
        }
        Program::Load(x, e) => {
            let World::Heap(sh) = w else { return Ok(()) };
            let a = eval_in(&sh.store, e)?;
            if let Some(v) = sh.heap.get(&a) {
                out.push((
                    Program::Ter,
                    World::Heap(StoreHeap {
                        store: assign_in(&sh.store, x, *v),
                        heap: sh.heap.clone(),
                    }),
                ));
            }
        }
        Program::Store(a, e) => {
            let World::Heap(sh) = w else { return Ok(()) };
            let addr = eval_in(&sh.store, a)?;
            let v = eval_in(&sh.store, e)?;
            if addr > 0 {
                let mut heap = sh.heap.clone();
                heap.insert(addr, v);
                out.push((
                    Program::Ter,
                    World::Heap(StoreHeap {
                        store: sh.store.clone(),
                        heap,
                    }),
                ));
            }
        }
        Program::Dispose(e) => {
            let World::Heap(sh) = w else { return Ok(()) };
            let addr = eval_in(&sh.store, e)?;
            let mut heap = sh.heap.clone();
            heap.remove(&addr);
            out.push((
                Program::Ter,
                World::Heap(StoreHeap {
                    store: sh.store.clone(),
                    heap,
                }),
            ));
        }
    }
    Ok(())
}

/// `a*` steps to `(a; a*) + true?`.
pub fn star_unfolding(a: &Program) -> Program {
    Program::choice(
        Program::seq(a.clone(), Program::star(a.clone())),
        Program::Test(Formula::True),
    )
}

/// Result of a bounded breadth-first exploration of all executions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exploration {
    pub finals: BTreeSet<World>,
    /// Every reachable configuration was expanded.
    pub complete: bool,
    pub expanded: usize,
}

pub fn explore(inst: &Instantiation, p: &Program, w: &World, budget: usize) -> Result<Exploration, EvalError> {
    let mut finals = BTreeSet::new();
    let mut seen: BTreeSet<(Program, World)> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert((p.clone(), w.clone()));
    queue.push_back((p.clone(), w.clone()));
    let mut expanded = 0;
    while let Some((q, v)) = queue.pop_front() {
        if q.is_ter() {
            finals.insert(v);
            continue;
        }
        if expanded >= budget {
            return Ok(Exploration {
                finals,
                complete: false,
                expanded,
            });
        }
        expanded += 1;
        for next in concrete_successors(inst, &q, &v)? {
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(Exploration {
        finals,
        complete: true,
        expanded,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("step budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Every final world of every execution, when exploration completes within `budget` steps.
pub fn run_to_completion(
    inst: &Instantiation,
    p: &Program,
    w: &World,
    budget: usize,
) -> Result<BTreeSet<World>, RunError> {
    let ex = explore(inst, p, w, budget)?;
    if ex.complete {
        Ok(ex.finals)
    } else {
        Err(RunError::BudgetExceeded(budget))
    }
}

/// The single execution trace of a deterministic run, one world per step.
pub fn trace(inst: &Instantiation, p: &Program, w: &World, budget: usize) -> Result<Vec<World>, RunError> {
    let mut out = vec![w.clone()];
    let (mut q, mut v) = (p.clone(), w.clone());
    while !q.is_ter() {
        if out.len() > budget {
            return Err(RunError::BudgetExceeded(budget));
        }
        let mut next = concrete_successors(inst, &q, &v)?;
        if next.is_empty() {
            break;
        }
        let (q2, v2) = next.swap_remove(0);
        q = q2;
        v = v2;
        out.push(v.clone());
    }
    Ok(out)
}

/// Counts execution paths to termination that never revisit a configuration.
pub fn validate_termination_finiteness(
    inst: &Instantiation,
    p: &Program,
    w: &World,
    budget: usize,
) -> Result<usize, RunError> {
    fn go(
        inst: &Instantiation,
        q: &Program,
        v: &World,
        on_path: &mut BTreeSet<(Program, World)>,
        fuel: &mut usize,
        budget: usize,
    ) -> Result<usize, RunError> {
        if q.is_ter() {
            return Ok(1);
        }
        if *fuel == 0 {
            return Err(RunError::BudgetExceeded(budget));
        }
        *fuel -= 1;
        let mut count = 0;
        for next in concrete_successors(inst, q, v)? {
            if on_path.contains(&next) {
                continue;
            }
            on_path.insert(next.clone());
            count += go(inst, &next.0, &next.1, on_path, fuel, budget)?;
            on_path.remove(&next);
        }
        Ok(count)
    }
    let mut on_path = BTreeSet::from([(p.clone(), w.clone())]);
    let mut fuel = budget;
    go(inst, p, w, &mut on_path, &mut fuel, budget)
}

/// Three-valued truth for bounded evaluation of modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    pub fn from_bool(b: bool) -> Truth {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    pub fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    pub fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    pub fn or(self, other: Truth) -> Truth {
        self.not().and(other.not()).not()
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Truth::True => Some(true),
            Truth::False => Some(false),
            Truth::Unknown => None,
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::True => "true",
            Truth::False => "false",
            Truth::Unknown => "unknown",
        })
    }
}

/// Evaluates a formula in a ground world; modalities explore at most `budget`
/// configurations and yield `Unknown` when that is not enough to decide.
pub fn eval_formula(inst: &Instantiation, w: &World, f: &Formula, budget: usize) -> Result<Truth, EvalError> {
    Ok(match f {
        Formula::True => Truth::True,
        Formula::False => Truth::False,
        Formula::Cmp(a, op, b) => {
            let v = w.head();
            Truth::from_bool(op.holds(&eval_in(v, a)?, &eval_in(v, b)?))
        }
        Formula::PointsTo(a, b) => match w {
            World::Heap(sh) => Truth::from_bool(points_to(&sh.store, &sh.heap, a, b)?),
            _ => Truth::False,
        },
        Formula::Sep(a, b) => match w {
            World::Heap(sh) => {
                let cells: Vec<(Int, Int)> = sh.heap.iter().map(|(k, v)| (*k, *v)).collect();
                let mut acc = Truth::False;
                for mask in 0u64..(1u64 << cells.len()) {
                    let (h1, h2) = split_heap(&cells, mask);
                    let part = |h: BTreeMap<Int, Int>| {
                        World::Heap(StoreHeap {
                            store: sh.store.clone(),
                            heap: h,
                        })
                    };
                    let l = eval_formula(inst, &part(h1), a, budget)?;
                    let r = eval_formula(inst, &part(h2), b, budget)?;
                    acc = acc.or(l.and(r));
                    if acc == Truth::True {
                        break;
                    }
                }
                acc
            }
            _ => Truth::False,
        },
        Formula::Not(a) => eval_formula(inst, w, a, budget)?.not(),
        Formula::And(a, b) => eval_formula(inst, w, a, budget)?.and(eval_formula(inst, w, b, budget)?),
        Formula::Or(a, b) => eval_formula(inst, w, a, budget)?.or(eval_formula(inst, w, b, budget)?),
        Formula::Imp(a, b) => eval_formula(inst, w, a, budget)?
            .not()
            .or(eval_formula(inst, w, b, budget)?),
        Formula::First(a) => match w {
            World::Path(p) => eval_formula(inst, &World::Path(p[..1].to_vec()), a, budget)?,
            _ => eval_formula(inst, w, a, budget)?,
        },
        Formula::Suf(a, b) => match w {
            World::Path(p) => {
                let mut acc = Truth::False;
                // all suffixes strictly before j satisfy a
                let mut prefix_ok = Truth::True;
                for j in 1..p.len() {
                    let here = World::Path(p[j..].to_vec());
                    acc = acc.or(prefix_ok.and(eval_formula(inst, &here, b, budget)?));
                    prefix_ok = prefix_ok.and(eval_formula(inst, &here, a, budget)?);
                }
                acc
            }
            _ => Truth::False,
        },
        Formula::Box(p, a) => {
            let ex = explore(inst, p, w, budget)?;
            let mut acc = Truth::True;
            for fin in &ex.finals {
                acc = acc.and(eval_formula(inst, fin, a, budget)?);
            }
            if !ex.complete && acc == Truth::True {
                acc = Truth::Unknown;
            }
            acc
        }
        Formula::Dia(p, a) => {
            let ex = explore(inst, p, w, budget)?;
            let mut acc = Truth::False;
            for fin in &ex.finals {
                acc = acc.or(eval_formula(inst, fin, a, budget)?);
            }
            if !ex.complete && acc == Truth::False {
                acc = Truth::Unknown;
            }
            acc
        }
    })
}

fn points_to(store: &Valuation, heap: &BTreeMap<Int, Int>, a: &Expr, b: &Expr) -> Result<bool, EvalError> {
    let addr = eval_in(store, a)?;
    let val = eval_in(store, b)?;
    Ok(heap.get(&addr) == Some(&val))
}

/// Temporal evaluation along a path of states.
pub fn eval_temporal(path: &[Valuation], f: &Formula) -> Result<bool, EvalError> {
    let w = World::Path(path.iter().cloned().map(canonical).collect());
    let t = eval_formula(&Instantiation::pl(), &w, f, 0)?;
    Ok(t == Truth::True)
}

/// Separation-logic evaluation in a ground store-heap state.
pub fn eval_sl_formula(state: &StoreHeap, f: &Formula) -> Result<bool, EvalError> {
    let w = World::Heap(StoreHeap {
        store: canonical(state.store.clone()),
        heap: state.heap.clone(),
    });
    Ok(eval_formula(&Instantiation::sl(), &w, f, 0)? == Truth::True)
}

/// Truth of a labeled formula under a ground assignment of its free variables.
pub fn eval_lformula(inst: &Instantiation, lf: &LFormula, g: &Valuation, budget: usize) -> Result<Truth, EvalError> {
    match lf {
        LFormula::Labeled(l, f) => eval_formula(inst, &label_world(l, g)?, f, budget),
        LFormula::Transition { from, src, to, dst } => {
            let w = label_world(src, g)?;
            let target = (to.clone(), label_world(dst, g)?);
            let succ = concrete_successors(inst, from, &w)?;
            Ok(Truth::from_bool(succ.contains(&target)))
        }
        LFormula::Termination(l, p) => {
            let ex = explore(inst, p, &label_world(l, g)?, budget)?;
            Ok(if !ex.finals.is_empty() {
                Truth::True
            } else if ex.complete {
                Truth::False
            } else {
                Truth::Unknown
            })
        }
    }
}

/// Truth of `/\ left -> \/ right` under a ground assignment.
pub fn eval_sequent(inst: &Instantiation, s: &Sequent, g: &Valuation, budget: usize) -> Result<Truth, EvalError> {
    let mut lhs = Truth::True;
    for f in &s.left {
        lhs = lhs.and(eval_lformula(inst, f, g, budget)?);
        if lhs == Truth::False {
            return Ok(Truth::True);
        }
    }
    let mut rhs = Truth::False;
    for f in &s.right {
        rhs = rhs.or(eval_lformula(inst, f, g, budget)?);
        if rhs == Truth::True {
            return Ok(Truth::True);
        }
    }
    Ok(lhs.not().or(rhs))
}
