//! Programs of the four instantiations and the instantiation selector.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::expr::Expr;
use crate::formula::Formula;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Program {
    /// The terminated program; it has no transitions.
    Ter,
    Assign(String, Expr),
    Seq(Box<Program>, Box<Program>),
    If(Formula, Box<Program>, Box<Program>),
    While(Formula, Box<Program>),
    Test(Formula),
    Choice(Box<Program>, Box<Program>),
    Star(Box<Program>),
    /// `x := cons(e)`
    Alloc(String, Expr),
    /// `x := [e]`
    Load(String, Expr),
    /// `[e] := e'`
    Store(Expr, Expr),
    Dispose(Expr),
}

impl Program {
    pub fn assign(x: &str, e: Expr) -> Program {
        Program::Assign(x.to_string(), e)
    }

    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    pub fn ite(c: Formula, a: Program, b: Program) -> Program {
        Program::If(c, Box::new(a), Box::new(b))
    }

    pub fn while_do(c: Formula, body: Program) -> Program {
        Program::While(c, Box::new(body))
    }

    pub fn choice(a: Program, b: Program) -> Program {
        Program::Choice(Box::new(a), Box::new(b))
    }

    pub fn star(a: Program) -> Program {
        Program::Star(Box::new(a))
    }

    pub fn test(c: Formula) -> Program {
        Program::Test(c)
    }

    pub fn is_ter(&self) -> bool {
        matches!(self, Program::Ter)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Program::Ter => {}
            Program::Assign(x, e) | Program::Alloc(x, e) | Program::Load(x, e) => {
                out.insert(x.clone());
                e.collect_vars(out);
            }
            Program::Store(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Program::Dispose(e) => e.collect_vars(out),
            Program::Seq(a, b) | Program::Choice(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Program::If(c, a, b) => {
                c.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Program::While(c, a) => {
                c.collect_vars(out);
                a.collect_vars(out);
            }
            Program::Test(c) => c.collect_vars(out),
            Program::Star(a) => a.collect_vars(out),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn assigned_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |p| {
            if let Program::Assign(x, _) | Program::Alloc(x, _) | Program::Load(x, _) = p {
                out.insert(x.clone());
            }
        });
        out
    }

    /// Pre-order traversal over sub-programs.
    pub fn visit(&self, f: &mut impl FnMut(&Program)) {
        f(self);
        match self {
            Program::Seq(a, b) | Program::Choice(a, b) | Program::If(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Program::While(_, a) | Program::Star(a) => a.visit(f),
            _ => {}
        }
    }

    pub fn has_loops(&self) -> bool {
        let mut found = false;
        self.visit(&mut |p| found |= matches!(p, Program::While(..) | Program::Star(_)));
        found
    }

    pub fn map_exprs(&self, f: &mut impl FnMut(&Expr) -> Expr) -> Program {
        match self {
            Program::Ter => Program::Ter,
            Program::Assign(x, e) => Program::Assign(x.clone(), f(e)),
            Program::Alloc(x, e) => Program::Alloc(x.clone(), f(e)),
            Program::Load(x, e) => Program::Load(x.clone(), f(e)),
            Program::Store(a, b) => Program::Store(f(a), f(b)),
            Program::Dispose(e) => Program::Dispose(f(e)),
            Program::Seq(a, b) => Program::seq(a.map_exprs(f), b.map_exprs(f)),
            Program::Choice(a, b) => Program::choice(a.map_exprs(f), b.map_exprs(f)),
            Program::If(c, a, b) => Program::ite(c.map_exprs(f), a.map_exprs(f), b.map_exprs(f)),
            Program::While(c, a) => Program::while_do(c.map_exprs(f), a.map_exprs(f)),
            Program::Test(c) => Program::Test(c.map_exprs(f)),
            Program::Star(a) => Program::star(a.map_exprs(f)),
        }
    }

    /// Number of nodes, used to bound symbolic unrolling of loop-free code.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    fn precedence(&self) -> u8 {
        match self {
            Program::Choice(..) => 1,
            Program::Seq(..) => 2,
            Program::Star(_) => 3,
            _ => 4,
        }
    }
}

fn operand(f: &mut fmt::Formatter<'_>, p: &Program, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({p})")
    } else {
        write!(f, "{p}")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Ter => write!(f, "ter"),
            Program::Assign(x, e) => write!(f, "{x} := {e}"),
            Program::Alloc(x, e) => write!(f, "{x} := cons({e})"),
            Program::Load(x, e) => write!(f, "{x} := [{e}]"),
            Program::Store(a, b) => write!(f, "[{a}] := {b}"),
            Program::Dispose(e) => write!(f, "dispose({e})"),
            Program::Test(c) => write!(f, "({c})?"),
            Program::If(c, a, b) => write!(f, "if {c} then {a} else {b} end"),
            Program::While(c, a) => write!(f, "while {c} do {a} end"),
            Program::Seq(a, b) => {
                operand(f, a, a.precedence() <= 2)?;
                write!(f, "; ")?;
                operand(f, b, b.precedence() < 2)
            }
            Program::Choice(a, b) => {
                operand(f, a, a.precedence() <= 1)?;
                write!(f, " + ")?;
                operand(f, b, b.precedence() < 1)
            }
            Program::Star(a) => {
                let bare = matches!(
                    **a,
                    Program::Test(_) | Program::If(..) | Program::While(..)
                );
                // `**` would lex as separating conjunction
                operand(f, a, !bare)?;
                write!(f, "*")
            }
        }
    }
}

/// Which program language, transition rules and label shape are in force.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstKind {
    /// While programs.
    Wp,
    /// Regular programs (first-order dynamic logic).
    Fodl,
    /// Regular programs over store sequences with temporal formulas.
    Pl,
    /// Heap-manipulating statements over ground store-heap pairs.
    Sl,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown instantiation `{0}` (expected wp, fodl, pl or sl)")]
pub struct UnknownInstantiation(pub String);

impl FromStr for InstKind {
    type Err = UnknownInstantiation;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wp" => Ok(InstKind::Wp),
            "fodl" => Ok(InstKind::Fodl),
            "pl" => Ok(InstKind::Pl),
            "sl" => Ok(InstKind::Sl),
            other => Err(UnknownInstantiation(other.to_string())),
        }
    }
}

impl fmt::Display for InstKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstKind::Wp => "wp",
            InstKind::Fodl => "fodl",
            InstKind::Pl => "pl",
            InstKind::Sl => "sl",
        })
    }
}

pub const DEFAULT_ALLOC_BASE: i128 = 37;

/// An instantiation together with its tunables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Instantiation {
    pub kind: InstKind,
    /// Smallest address considered by `cons` (separation logic only).
    pub alloc_base: i128,
}

impl Instantiation {
    pub fn new(kind: InstKind) -> Instantiation {
        Instantiation {
            kind,
            alloc_base: DEFAULT_ALLOC_BASE,
        }
    }

    pub fn wp() -> Instantiation {
        Instantiation::new(InstKind::Wp)
    }

    pub fn fodl() -> Instantiation {
        Instantiation::new(InstKind::Fodl)
    }

    pub fn pl() -> Instantiation {
        Instantiation::new(InstKind::Pl)
    }

    pub fn sl() -> Instantiation {
        Instantiation::new(InstKind::Sl)
    }

    pub fn check_program(&self, p: &Program) -> Result<(), String> {
        let mut err = None;
        p.visit(&mut |q| {
            if err.is_some() {
                return;
            }
            let ok = match (self.kind, q) {
                (_, Program::Ter | Program::Assign(..) | Program::Seq(..)) => true,
                (InstKind::Wp, Program::If(..) | Program::While(..)) => true,
                (InstKind::Fodl | InstKind::Pl, Program::Test(_) | Program::Choice(..) | Program::Star(_)) => {
                    true
                }
                (
                    InstKind::Sl,
                    Program::Alloc(..) | Program::Load(..) | Program::Store(..) | Program::Dispose(_),
                ) => true,
                _ => false,
            };
            if !ok {
                err = Some(format!("`{q}` is not a {} program", self.kind));
                return;
            }
            if let Program::If(c, ..) | Program::While(c, _) | Program::Test(c) = q {
                if c.is_dynamic() || c.is_temporal() || c.is_spatial() {
                    err = Some(format!("condition `{c}` must be a plain arithmetic formula"));
                }
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn check_formula(&self, f: &Formula) -> Result<(), String> {
        let temporal = f.any_node(&|g| matches!(g, Formula::First(_) | Formula::Suf(..)));
        if temporal && self.kind != InstKind::Pl {
            return Err(format!("temporal connectives are only available in pl: `{f}`"));
        }
        let spatial = f.any_node(&|g| matches!(g, Formula::PointsTo(..) | Formula::Sep(..)));
        if spatial && self.kind != InstKind::Sl {
            return Err(format!("heap connectives are only available in sl: `{f}`"));
        }
        let mut msg = String::new();
        collect_program_error(self, f, &mut msg);
        if msg.is_empty() {
            Ok(())
        } else {
            Err(msg)
        }
    }
}

fn collect_program_error(inst: &Instantiation, f: &Formula, msg: &mut String) {
    if !msg.is_empty() {
        return;
    }
    match f {
        Formula::Box(p, a) | Formula::Dia(p, a) => {
            if let Err(e) = inst.check_program(p) {
                *msg = e;
                return;
            }
            collect_program_error(inst, a, msg);
        }
        Formula::Not(a) | Formula::First(a) => collect_program_error(inst, a, msg),
        Formula::And(a, b)
        | Formula::Or(a, b)
        | Formula::Imp(a, b)
        | Formula::Suf(a, b)
        | Formula::Sep(a, b) => {
            collect_program_error(inst, a, msg);
            collect_program_error(inst, b, msg);
        }
        _ => {}
    }
}
