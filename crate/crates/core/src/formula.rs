//! Formulas: arithmetic atoms, boolean structure, modalities, temporal and
//! spatial connectives.

use std::collections::BTreeSet;
use std::fmt;

use crate::expr::Expr;
use crate::program::Program;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds<T: Ord>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Cmp(Expr, CmpOp, Expr),
    /// `e |-> e'`: the heap cell at address `e` holds `e'`.
    PointsTo(Expr, Expr),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    Box(Box<Program>, Box<Formula>),
    Dia(Box<Program>, Box<Formula>),
    /// Holds of a path when the argument holds of its first world alone.
    First(Box<Formula>),
    /// `φ Suf ψ`: some proper suffix satisfies ψ and every suffix strictly between satisfies φ.
    Suf(Box<Formula>, Box<Formula>),
    /// Separating conjunction.
    Sep(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn cmp(a: Expr, op: CmpOp, b: Expr) -> Formula {
        Formula::Cmp(a, op, b)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::Imp(Box::new(a), Box::new(b))
    }

    pub fn boxed(p: Program, f: Formula) -> Formula {
        Formula::Box(Box::new(p), Box::new(f))
    }

    pub fn dia(p: Program, f: Formula) -> Formula {
        Formula::Dia(Box::new(p), Box::new(f))
    }

    pub fn first(f: Formula) -> Formula {
        Formula::First(Box::new(f))
    }

    pub fn suf(a: Formula, b: Formula) -> Formula {
        Formula::Suf(Box::new(a), Box::new(b))
    }

    pub fn sep(a: Formula, b: Formula) -> Formula {
        Formula::Sep(Box::new(a), Box::new(b))
    }

    /// `eventually φ` is `φ || (true Suf φ)`.
    pub fn eventually(f: Formula) -> Formula {
        Formula::or(f.clone(), Formula::suf(Formula::True, f))
    }

    /// `next φ` is `false Suf φ`.
    pub fn next(f: Formula) -> Formula {
        Formula::suf(Formula::False, f)
    }

    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Formula {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Formula {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or(Formula::False)
    }

    pub fn is_dynamic(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) | Formula::PointsTo(..) => false,
            Formula::Box(..) | Formula::Dia(..) => true,
            Formula::Not(a) | Formula::First(a) => a.is_dynamic(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Imp(a, b)
            | Formula::Suf(a, b)
            | Formula::Sep(a, b) => a.is_dynamic() || b.is_dynamic(),
        }
    }

    pub fn is_temporal(&self) -> bool {
        self.any_node(&|f| matches!(f, Formula::First(_) | Formula::Suf(..)))
    }

    pub fn is_spatial(&self) -> bool {
        self.any_node(&|f| matches!(f, Formula::PointsTo(..) | Formula::Sep(..)))
    }

    /// True if `pred` holds at some node, without descending into programs.
    pub fn any_node(&self, pred: &dyn Fn(&Formula) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) | Formula::PointsTo(..) => false,
            Formula::Not(a) | Formula::First(a) | Formula::Box(_, a) | Formula::Dia(_, a) => {
                a.any_node(pred)
            }
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Imp(a, b)
            | Formula::Suf(a, b)
            | Formula::Sep(a, b) => a.any_node(pred) || b.any_node(pred),
        }
    }

    /// Every variable mentioned, including those read or written by embedded programs.
    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(a, _, b) | Formula::PointsTo(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::Not(a) | Formula::First(a) => a.collect_vars(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Imp(a, b)
            | Formula::Suf(a, b)
            | Formula::Sep(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::Box(p, a) | Formula::Dia(p, a) => {
                p.collect_vars(out);
                a.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Rewrites every expression, including those inside programs.
    pub fn map_exprs(&self, f: &mut impl FnMut(&Expr) -> Expr) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Cmp(a, op, b) => Formula::Cmp(f(a), *op, f(b)),
            Formula::PointsTo(a, b) => Formula::PointsTo(f(a), f(b)),
            Formula::Not(a) => Formula::not(a.map_exprs(f)),
            Formula::First(a) => Formula::first(a.map_exprs(f)),
            Formula::And(a, b) => Formula::and(a.map_exprs(f), b.map_exprs(f)),
            Formula::Or(a, b) => Formula::or(a.map_exprs(f), b.map_exprs(f)),
            Formula::Imp(a, b) => Formula::imp(a.map_exprs(f), b.map_exprs(f)),
            Formula::Suf(a, b) => Formula::suf(a.map_exprs(f), b.map_exprs(f)),
            Formula::Sep(a, b) => Formula::sep(a.map_exprs(f), b.map_exprs(f)),
            Formula::Box(p, a) => Formula::boxed(p.map_exprs(f), a.map_exprs(f)),
            Formula::Dia(p, a) => Formula::dia(p.map_exprs(f), a.map_exprs(f)),
        }
    }

    /// Normalizes every expression in place of the original syntax.
    pub fn normalized(&self) -> Formula {
        self.map_exprs(&mut |e| e.normalize())
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Imp(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Sep(..) => 4,
            Formula::Suf(..) => 5,
            Formula::Not(_) | Formula::Box(..) | Formula::Dia(..) | Formula::First(_) => 6,
            Formula::Cmp(..) | Formula::PointsTo(..) => 7,
            Formula::True | Formula::False => 8,
        }
    }
}

fn operand(f: &mut fmt::Formatter<'_>, x: &Formula, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({x})")
    } else {
        write!(f, "{x}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Formula::PointsTo(a, b) => write!(f, "{a} |-> {b}"),
            Formula::Not(a) => {
                write!(f, "!")?;
                operand(f, a, a.precedence() < 8)
            }
            Formula::First(a) => {
                write!(f, "first ")?;
                operand(f, a, a.precedence() < 8)
            }
            Formula::Box(prog, a) => {
                write!(f, "[{prog}]")?;
                operand(f, a, a.precedence() < 8)
            }
            Formula::Dia(prog, a) => {
                write!(f, "<{prog}>")?;
                operand(f, a, a.precedence() < 8)
            }
            Formula::Imp(a, b) => {
                operand(f, a, a.precedence() <= p)?;
                write!(f, " -> ")?;
                operand(f, b, b.precedence() < p)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Suf(a, b) | Formula::Sep(a, b) => {
                let sym = match self {
                    Formula::And(..) => "&&",
                    Formula::Or(..) => "||",
                    Formula::Suf(..) => "Suf",
                    _ => "**",
                };
                operand(f, a, a.precedence() < p)?;
                write!(f, " {sym} ")?;
                operand(f, b, b.precedence() <= p)
            }
        }
    }
}
