//! Symbolic program transitions over labels, with guard discharge through the
//! oracle, and termination certificates.

use std::fmt;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::formula::{CmpOp, Formula};
use crate::label::{Label, Store};
use crate::oracle::{Oracle, OracleError, Verdict};
use crate::program::{InstKind, Instantiation, Program};
use crate::semantics::{concrete_successors, label_world, star_unfolding, world_label, Valuation};
use crate::sequent::{LFormula, Sequent};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("label `{label}` does not fit the {kind} instantiation")]
    KindMismatch { label: String, kind: InstKind },
    #[error("the terminated program has no transitions")]
    Terminated,
    #[error("heap label must be ground: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// One syntactically possible transition and the conditions it needs at the source label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub program: Program,
    pub label: Label,
    pub guards: Vec<LFormula>,
    pub rules: Vec<&'static str>,
}

fn guard_label(l: &Label) -> Label {
    match l {
        // programs read the last store of a path
        Label::Seq(seq) => Label::Seq(vec![seq.last().cloned().unwrap_or_default()]),
        other => other.clone(),
    }
}

/// All transitions the rule tables allow from `(p, l)`, each with its guards.
pub fn candidates(inst: &Instantiation, p: &Program, l: &Label) -> Result<Vec<Candidate>, StepError> {
    if !l.kind_matches(inst.kind) {
        return Err(StepError::KindMismatch {
            label: l.to_string(),
            kind: inst.kind,
        });
    }
    if p.is_ter() {
        return Err(StepError::Terminated);
    }
    if let Label::Heap(_) = l {
        let w = label_world(l, &Valuation::new())?;
        return Ok(concrete_successors(inst, p, &w)?
            .into_iter()
            .map(|(q, w2)| Candidate {
                program: q,
                label: world_label(&w2),
                guards: Vec::new(),
                rules: vec![heap_rule(p)],
            })
            .collect());
    }
    let mut out = Vec::new();
    symbolic(p, l, &mut out);
    Ok(out)
}

fn heap_rule(p: &Program) -> &'static str {
    match p {
        Program::Seq(a, _) => heap_rule(a),
        Program::Alloc(..) => "cons",
        Program::Load(..) => "load",
        Program::Store(..) => "store",
        Program::Dispose(_) => "dispose",
        _ => "x:=e",
    }
}

fn assign(l: &Label, x: &str, e: &Expr) -> Label {
    match l {
        Label::Store(s) => Label::Store(s.update(x, e)),
        Label::Seq(seq) => {
            let mut seq = seq.clone();
            let next = seq.last().cloned().unwrap_or_default().update(x, e);
            seq.push(next);
            Label::Seq(seq)
        }
        Label::Heap(_) => unreachable!("heap labels step concretely"),
    }
}

fn symbolic(p: &Program, l: &Label, out: &mut Vec<Candidate>) {
    let here = |c: &Formula| LFormula::Labeled(guard_label(l), c.clone());
    match p {
        Program::Ter => {}
        Program::Assign(x, e) => out.push(Candidate {
            program: Program::Ter,
            label: assign(l, x, e),
            guards: Vec::new(),
            rules: vec!["x:=e"],
        }),
        Program::Seq(a, b) => {
            let mut inner = Vec::new();
            symbolic(a, l, &mut inner);
            for mut c in inner {
                if c.program.is_ter() {
                    c.program = (**b).clone();
                    c.rules.insert(0, ";ter");
                } else {
                    c.program = Program::Seq(Box::new(c.program), b.clone());
                    c.rules.insert(0, ";");
                }
                out.push(c);
            }
        }
        Program::If(c, a, b) => {
            for (branch, guard, tag) in [(a, (*c).clone(), "ite1"), (b, Formula::not(c.clone()), "ite2")] {
                let mut inner = Vec::new();
                symbolic(branch, l, &mut inner);
                for mut cand in inner {
                    cand.guards.insert(0, here(&guard));
                    cand.rules.insert(0, tag);
                    out.push(cand);
                }
            }
        }
        Program::While(c, body) => {
            let mut inner = Vec::new();
            symbolic(body, l, &mut inner);
            for mut cand in inner {
                cand.guards.insert(0, here(c));
                if cand.program.is_ter() {
                    cand.program = p.clone();
                    cand.rules.insert(0, "wh1ter");
                } else {
                    cand.program = Program::seq(cand.program, p.clone());
                    cand.rules.insert(0, "wh1");
                }
                out.push(cand);
            }
            out.push(Candidate {
                program: Program::Ter,
                label: l.clone(),
                guards: vec![here(&Formula::not(c.clone()))],
                rules: vec!["wh2"],
            });
        }
        Program::Test(c) => out.push(Candidate {
            program: Program::Ter,
            label: l.clone(),
            guards: vec![here(c)],
            rules: vec!["test"],
        }),
        Program::Choice(a, b) => {
            out.push(Candidate {
                program: (**a).clone(),
                label: l.clone(),
                guards: Vec::new(),
                rules: vec!["cho1"],
            });
            out.push(Candidate {
                program: (**b).clone(),
                label: l.clone(),
                guards: Vec::new(),
                rules: vec!["cho2"],
            });
        }
        Program::Star(a) => out.push(Candidate {
            program: star_unfolding(a),
            label: l.clone(),
            guards: Vec::new(),
            rules: vec!["*"],
        }),
        Program::Alloc(..) | Program::Load(..) | Program::Store(..) | Program::Dispose(_) => {}
    }
}

/// Non-dynamic labeled formulas of a sequent, which guards may rely on.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Context {
    pub hyps: Vec<LFormula>,
    pub alts: Vec<LFormula>,
}

impl Context {
    pub fn of(s: &Sequent) -> Context {
        let keep = |v: &[LFormula]| v.iter().filter(|f| f.is_non_dynamic()).cloned().collect();
        Context {
            hyps: keep(&s.left),
            alts: keep(&s.right),
        }
    }

    /// `hyps |- goal, alts`
    pub fn entails(&self, goal: LFormula) -> Sequent {
        let mut right = vec![goal];
        right.extend(self.alts.iter().cloned());
        Sequent::new(self.hyps.clone(), right)
    }

    /// `hyps, extra |- alts`
    pub fn refutes(&self, extra: LFormula) -> Sequent {
        let mut left = self.hyps.clone();
        left.push(extra);
        Sequent::new(left, self.alts.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GuardStatus {
    Holds,
    Refuted,
    /// The first guard the context does not decide.
    Undecided(LFormula),
}

fn conj_guard(guards: &[LFormula]) -> Option<LFormula> {
    let label = guards.first()?.as_labeled()?.0.clone();
    let f = Formula::conj(guards.iter().filter_map(|g| g.as_labeled().map(|(_, f)| f.clone())));
    Some(LFormula::Labeled(label, f))
}

pub fn guard_status(oracle: &Oracle, ctx: &Context, guards: &[LFormula]) -> Result<GuardStatus, StepError> {
    let Some(all) = conj_guard(guards) else {
        return Ok(GuardStatus::Holds);
    };
    if oracle.check_sequent(&ctx.entails(all.clone()))?.is_valid() {
        return Ok(GuardStatus::Holds);
    }
    if oracle.check_sequent(&ctx.refutes(all))?.is_valid() {
        return Ok(GuardStatus::Refuted);
    }
    for g in guards {
        if !oracle.check_sequent(&ctx.entails(g.clone()))?.is_valid() {
            return Ok(GuardStatus::Undecided(g.clone()));
        }
    }
    Ok(GuardStatus::Undecided(guards[0].clone()))
}

/// A transition whose guards the context discharges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Successor {
    pub program: Program,
    pub label: Label,
    pub guards: Vec<LFormula>,
    pub rules: Vec<&'static str>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepResult {
    pub successors: Vec<Successor>,
    /// Guards the context could neither establish nor refute.
    pub undecided: Vec<LFormula>,
}

impl StepResult {
    /// True when every candidate was classified, so `successors` is the complete set.
    pub fn exhaustive(&self) -> bool {
        self.undecided.is_empty()
    }
}

pub fn step(
    inst: &Instantiation,
    oracle: &Oracle,
    ctx: &Context,
    p: &Program,
    l: &Label,
) -> Result<StepResult, StepError> {
    let mut successors = Vec::new();
    let mut undecided = Vec::new();
    for c in candidates(inst, p, l)? {
        match guard_status(oracle, ctx, &c.guards)? {
            GuardStatus::Holds => successors.push(Successor {
                program: c.program,
                label: c.label,
                guards: c.guards,
                rules: c.rules,
            }),
            GuardStatus::Refuted => {}
            GuardStatus::Undecided(g) => {
                if !undecided.contains(&g) {
                    undecided.push(g)
                }
            }
        }
    }
    Ok(StepResult { successors, undecided })
}

/// Evidence offered for `l halts (p)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TerminationCert {
    /// A terminating run of at most this many steps exists.
    Unroll(usize),
    /// The loop at the head of the program decreases `variant`, which stays
    /// non-negative whenever the loop guard holds under `invariant`.
    Variant {
        variant: Expr,
        invariant: Option<Formula>,
    },
}

impl fmt::Display for TerminationCert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationCert::Unroll(k) => write!(f, "unroll {k}"),
            TerminationCert::Variant { variant, invariant: None } => write!(f, "variant {variant}"),
            TerminationCert::Variant {
                variant,
                invariant: Some(inv),
            } => write!(f, "variant {variant} invariant ({inv})"),
        }
    }
}

/// A checked termination argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminationProof {
    pub cert: TerminationCert,
    /// Transitions taken before reaching the terminated program or the loop.
    pub prefix: usize,
    pub obligations: Vec<Sequent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TerminationError {
    #[error("termination could not be established: {0}")]
    Unknown(String),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Upper bound on symbolic transitions explored for a loop-free body or prefix.
const PREFIX_LIMIT: usize = 256;

/// Checks `l halts (p)` in context `ctx` with the given certificate.
pub fn terminates(
    inst: &Instantiation,
    oracle: &Oracle,
    ctx: &Context,
    p: &Program,
    l: &Label,
    cert: &TerminationCert,
) -> Result<TerminationProof, TerminationError> {
    match cert {
        TerminationCert::Unroll(k) => {
            if *k == 0 {
                return Err(TerminationError::Unknown("unroll bound must be at least 1".into()));
            }
            match unroll(inst, oracle, ctx, p, l, *k)? {
                Some(n) => Ok(TerminationProof {
                    cert: cert.clone(),
                    prefix: n,
                    obligations: Vec::new(),
                }),
                None => Err(TerminationError::Unknown(format!("no terminating run within {k} steps"))),
            }
        }
        TerminationCert::Variant { variant, invariant } => {
            variant_proof(inst, oracle, ctx, p, l, cert, variant, invariant.as_ref())
        }
    }
}

/// Length of some fully discharged run to `ter` within `k` steps.
fn unroll(
    inst: &Instantiation,
    oracle: &Oracle,
    ctx: &Context,
    p: &Program,
    l: &Label,
    k: usize,
) -> Result<Option<usize>, StepError> {
    if p.is_ter() {
        return Ok(Some(0));
    }
    if k == 0 {
        return Ok(None);
    }
    for s in step(inst, oracle, ctx, p, l)?.successors {
        if let Some(n) = unroll(inst, oracle, ctx, &s.program, &s.label, k - 1)? {
            return Ok(Some(n + 1));
        }
    }
    Ok(None)
}

/// The label every variable maps to itself in.
fn generic_label(kind: InstKind) -> Label {
    match kind {
        InstKind::Pl => Label::Seq(vec![Store::empty()]),
        _ => Label::Store(Store::empty()),
    }
}

fn last_store_label(l: &Label) -> Label {
    guard_label(l)
}

/// Every symbolic execution of a loop-free program with its accumulated path condition.
fn symbolic_runs(
    inst: &Instantiation,
    p: &Program,
    l: &Label,
    path: Vec<LFormula>,
    fuel: &mut usize,
    out: &mut Vec<(Label, Vec<LFormula>)>,
) -> Result<bool, StepError> {
    if p.is_ter() {
        out.push((l.clone(), path));
        return Ok(true);
    }
    if *fuel == 0 || p.has_loops() {
        return Ok(false);
    }
    *fuel -= 1;
    for c in candidates(inst, p, l)? {
        let mut next = path.clone();
        next.extend(c.guards);
        if !symbolic_runs(inst, &c.program, &c.label, next, fuel, out)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn variant_proof(
    inst: &Instantiation,
    oracle: &Oracle,
    ctx: &Context,
    p: &Program,
    l: &Label,
    cert: &TerminationCert,
    v: &Expr,
    inv: Option<&Formula>,
) -> Result<TerminationProof, TerminationError> {
    // Walk discharged loop-free steps until the program is a single loop.
    let mut prefix = 0;
    let (mut q, mut at) = (p.clone(), l.clone());
    while !matches!(q, Program::While(..)) {
        if q.is_ter() {
            return Ok(TerminationProof {
                cert: cert.clone(),
                prefix,
                obligations: Vec::new(),
            });
        }
        if prefix >= PREFIX_LIMIT {
            return Err(TerminationError::Unknown("no loop reached".into()));
        }
        let res = step(inst, oracle, ctx, &q, &at)?;
        let Some(s) = res.successors.into_iter().next() else {
            return Err(TerminationError::Unknown(format!("`{q}` has no discharged transition")));
        };
        q = s.program;
        at = s.label;
        prefix += 1;
    }
    let Program::While(guard, body) = &q else { unreachable!() };
    let mut obligations = Vec::new();
    if let Some(inv) = inv {
        obligations.push(ctx.entails(LFormula::Labeled(last_store_label(&at), inv.clone())));
    }
    let generic = generic_label(inst.kind);
    let mut assume = vec![LFormula::Labeled(generic.clone(), guard.clone())];
    if let Some(inv) = inv {
        assume.push(LFormula::Labeled(generic.clone(), inv.clone()));
    }
    let zero = Expr::Int(0);
    obligations.push(Sequent::new(
        assume.clone(),
        vec![LFormula::Labeled(generic.clone(), Formula::cmp(v.clone(), CmpOp::Ge, zero))],
    ));
    let mut runs = Vec::new();
    let mut fuel = PREFIX_LIMIT;
    if !symbolic_runs(inst, body, &generic, Vec::new(), &mut fuel, &mut runs)? {
        return Err(TerminationError::Unknown("loop body must be loop-free".into()));
    }
    for (end, path) in runs {
        let end = last_store_label(&end);
        let after = match &end {
            Label::Store(s) => s.apply_expr(v),
            Label::Seq(seq) => seq[0].apply_expr(v),
            Label::Heap(_) => return Err(TerminationError::Unknown("heap programs have no loops".into())),
        };
        let mut left = assume.clone();
        left.extend(path);
        obligations.push(Sequent::new(
            left.clone(),
            vec![LFormula::Labeled(generic.clone(), Formula::cmp(after, CmpOp::Lt, v.clone()))],
        ));
        if let Some(inv) = inv {
            obligations.push(Sequent::new(left, vec![LFormula::Labeled(end.clone(), inv.clone())]));
        }
    }
    for ob in &obligations {
        match oracle.check_sequent(ob).map_err(StepError::from)? {
            Verdict::Valid(_) => {}
            other => return Err(TerminationError::Unknown(format!("obligation `{ob}` is {other}"))),
        }
    }
    Ok(TerminationProof {
        cert: cert.clone(),
        prefix,
        obligations,
    })
}
