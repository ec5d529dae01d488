//! Random generators and independent reference evaluators for the test suites.
//!
//! The reference functions here are written directly against the syntax and
//! share no code with the evaluator in `dlp-core`.

use std::collections::BTreeMap;

use dlp_core::expr::{Expr, Int};
use dlp_core::formula::{CmpOp, Formula};
use dlp_core::label::{Label, Store};
use dlp_core::program::{InstKind, Program};
use rand::seq::SliceRandom;
use rand::Rng;

pub const VARS: [&str; 3] = ["x", "y", "z"];

pub type State = BTreeMap<String, Int>;

// ---------------------------------------------------------------------------
// reference evaluation

pub fn ref_expr(e: &Expr, s: &State) -> Option<Int> {
    Some(match e {
        Expr::Int(n) => *n,
        Expr::Var(x) => s.get(x).copied().unwrap_or(0),
        Expr::Neg(a) => -ref_expr(a, s)?,
        Expr::Add(a, b) => ref_expr(a, s)?.checked_add(ref_expr(b, s)?)?,
        Expr::Sub(a, b) => ref_expr(a, s)?.checked_sub(ref_expr(b, s)?)?,
        Expr::Mul(a, b) => ref_expr(a, s)?.checked_mul(ref_expr(b, s)?)?,
        Expr::Div(a, d) => {
            let n = ref_expr(a, s)?;
            if *d == 0 || n % d != 0 {
                return None;
            }
            n / d
        }
    })
}

pub fn ref_cond(f: &Formula, s: &State) -> Option<bool> {
    Some(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Cmp(a, op, b) => {
            let (a, b) = (ref_expr(a, s)?, ref_expr(b, s)?);
            match op {
                CmpOp::Eq => a == b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            }
        }
        Formula::Not(a) => !ref_cond(a, s)?,
        Formula::And(a, b) => ref_cond(a, s)? && ref_cond(b, s)?,
        Formula::Or(a, b) => ref_cond(a, s)? || ref_cond(b, s)?,
        Formula::Imp(a, b) => !ref_cond(a, s)? || ref_cond(b, s)?,
        _ => return None,
    })
}

fn set(s: &State, x: &str, n: Int) -> State {
    let mut s = s.clone();
    s.insert(x.to_string(), n);
    s
}

/// Drops zero entries so states compare as total functions defaulting to 0.
pub fn canon(s: &State) -> State {
    s.iter().filter(|(_, n)| **n != 0).map(|(x, n)| (x.clone(), *n)).collect()
}

/// One-step successors of a store-only program.
pub fn ref_step(p: &Program, s: &State) -> Option<Vec<(Program, State)>> {
    let mut out = Vec::new();
    match p {
        Program::Ter => {}
        Program::Assign(x, e) => out.push((Program::Ter, set(s, x, ref_expr(e, s)?))),
        Program::Seq(a, b) => {
            for (a2, s2) in ref_step(a, s)? {
                let rest = match a2 {
                    Program::Ter => (**b).clone(),
                    other => Program::Seq(Box::new(other), b.clone()),
                };
                out.push((rest, s2));
            }
        }
        Program::If(c, a, b) => {
            let branch = if ref_cond(c, s)? { a } else { b };
            out = ref_step(branch, s)?;
        }
        Program::While(c, body) => {
            if ref_cond(c, s)? {
                for (b2, s2) in ref_step(body, s)? {
                    let rest = match b2 {
                        Program::Ter => p.clone(),
                        other => Program::Seq(Box::new(other), Box::new(p.clone())),
                    };
                    out.push((rest, s2));
                }
            } else {
                out.push((Program::Ter, s.clone()));
            }
        }
        Program::Test(c) => {
            if ref_cond(c, s)? {
                out.push((Program::Ter, s.clone()));
            }
        }
        Program::Choice(a, b) => {
            out.push(((**a).clone(), s.clone()));
            out.push(((**b).clone(), s.clone()));
        }
        Program::Star(a) => {
            let again = Program::Seq(a.clone(), Box::new(p.clone()));
            out.push((Program::Choice(Box::new(again), Box::new(Program::Test(Formula::True))), s.clone()));
        }
        _ => return None,
    }
    Some(out)
}

/// All final states of all executions, exploring at most `budget` configurations.
pub fn ref_finals(p: &Program, s: &State, budget: usize) -> Option<Vec<State>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![(p.clone(), canon(s))];
    let mut finals = std::collections::BTreeSet::new();
    while let Some((q, v)) = stack.pop() {
        if !seen.insert((q.clone(), v.clone())) {
            continue;
        }
        if seen.len() > budget {
            return None;
        }
        if q == Program::Ter {
            finals.insert(v);
            continue;
        }
        for (q2, v2) in ref_step(&q, &v)? {
            stack.push((q2, canon(&v2)));
        }
    }
    Some(finals.into_iter().collect())
}

// ---------------------------------------------------------------------------
// generators

pub fn var<R: Rng>(rng: &mut R) -> &'static str {
    VARS.choose(rng).unwrap()
}

pub fn expr<R: Rng>(rng: &mut R, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.5) {
            Expr::var(var(rng))
        } else {
            Expr::int(rng.gen_range(-3..=3))
        };
    }
    let a = Box::new(expr(rng, depth - 1));
    let b = Box::new(expr(rng, depth - 1));
    match rng.gen_range(0..4) {
        0 => Expr::Add(a, b),
        1 => Expr::Sub(a, b),
        2 => Expr::Mul(a, Box::new(Expr::int(rng.gen_range(-2..=2)))),
        _ => Expr::Neg(a),
    }
}

pub fn cmp_op<R: Rng>(rng: &mut R) -> CmpOp {
    *[CmpOp::Eq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge].choose(rng).unwrap()
}

/// Quantifier- and modality-free condition.
pub fn cond<R: Rng>(rng: &mut R, depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.5) {
        return Formula::cmp(expr(rng, 1), cmp_op(rng), expr(rng, 1));
    }
    let a = cond(rng, depth - 1);
    match rng.gen_range(0..4) {
        0 => Formula::not(a),
        1 => Formula::and(a, cond(rng, depth - 1)),
        2 => Formula::or(a, cond(rng, depth - 1)),
        _ => Formula::imp(a, cond(rng, depth - 1)),
    }
}

/// A random program of the given instantiation with nesting depth at most `depth`.
pub fn program<R: Rng>(rng: &mut R, kind: InstKind, depth: usize) -> Program {
    let assign = |rng: &mut R| Program::assign(var(rng), expr(rng, 2));
    if depth <= 1 || rng.gen_bool(0.25) {
        return assign(rng);
    }
    let sub = |rng: &mut R| program(rng, kind, depth - 1);
    match kind {
        InstKind::Fodl => match rng.gen_range(0..4) {
            0 => Program::seq(sub(rng), sub(rng)),
            1 => Program::choice(sub(rng), sub(rng)),
            2 => Program::star(sub(rng)),
            _ => Program::seq(Program::test(cond(rng, 1)), sub(rng)),
        },
        _ => match rng.gen_range(0..3) {
            0 => Program::seq(sub(rng), sub(rng)),
            1 => Program::ite(cond(rng, 1), sub(rng), sub(rng)),
            _ => {
                // a loop with a decreasing counter so most runs terminate
                let body = Program::seq(sub(rng), Program::assign("z", Expr::var("z") - Expr::int(1)));
                Program::while_do(Formula::cmp(Expr::var("z"), CmpOp::Gt, Expr::int(0)), body)
            }
        },
    }
}

pub fn state<R: Rng>(rng: &mut R, range: i64) -> State {
    VARS.iter()
        .map(|x| (x.to_string(), rng.gen_range(-range..=range) as Int))
        .collect()
}

/// A store over the program variables whose values mention the given symbols.
pub fn symbolic_store<R: Rng>(rng: &mut R, symbols: &[&str]) -> Store {
    let mut entries = Vec::new();
    for x in VARS {
        if rng.gen_bool(0.7) {
            let base = Expr::var(*symbols.choose(rng).unwrap());
            let e = match rng.gen_range(0..3) {
                0 => base,
                1 => base + Expr::int(rng.gen_range(-2..=2)),
                _ => Expr::int(rng.gen_range(-3..=3)),
            };
            entries.push((x.to_string(), e));
        }
    }
    Store::new(entries).unwrap()
}

pub fn ground_label(s: &State) -> Label {
    Label::Store(Store::new(canon(s).into_iter().map(|(x, n)| (x, Expr::int(n))).collect()).unwrap())
}
