//! Labeled formulas and two-sided sequents.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::formula::Formula;
use crate::label::Label;
use crate::program::Program;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LFormula {
    Labeled(Label, Formula),
    /// `(from, src) => (to, dst)`: one step of `from` in `src` leads to `to` in `dst`.
    Transition {
        from: Program,
        src: Label,
        to: Program,
        dst: Label,
    },
    /// `src halts p`: some execution of `p` from `src` terminates.
    Termination(Label, Program),
}

impl LFormula {
    pub fn labeled(l: Label, f: Formula) -> LFormula {
        LFormula::Labeled(l, f)
    }

    /// True for labeled formulas without modalities.
    pub fn is_non_dynamic(&self) -> bool {
        matches!(self, LFormula::Labeled(_, f) if !f.is_dynamic())
    }

    pub fn as_labeled(&self) -> Option<(&Label, &Formula)> {
        match self {
            LFormula::Labeled(l, f) => Some((l, f)),
            _ => None,
        }
    }

    /// Variables in stored values and in the formula or programs.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match self {
            LFormula::Labeled(l, f) => {
                out.extend(l.value_vars());
                out.extend(l.mapped_vars());
                f.collect_vars(&mut out);
            }
            LFormula::Transition { from, src, to, dst } => {
                out.extend(src.value_vars());
                out.extend(src.mapped_vars());
                out.extend(dst.value_vars());
                out.extend(dst.mapped_vars());
                from.collect_vars(&mut out);
                to.collect_vars(&mut out);
            }
            LFormula::Termination(l, p) => {
                out.extend(l.value_vars());
                out.extend(l.mapped_vars());
                p.collect_vars(&mut out);
            }
        }
        out
    }

    /// Normalizes the expressions inside formulas and programs.
    pub fn normalized(&self) -> LFormula {
        let norm = |p: &Program| p.map_exprs(&mut |e| e.normalize());
        match self {
            LFormula::Labeled(l, f) => LFormula::Labeled(l.clone(), f.normalized()),
            LFormula::Transition { from, src, to, dst } => LFormula::Transition {
                from: norm(from),
                src: src.clone(),
                to: norm(to),
                dst: dst.clone(),
            },
            LFormula::Termination(l, p) => LFormula::Termination(l.clone(), norm(p)),
        }
    }

    pub fn equiv(&self, other: &LFormula) -> bool {
        self == other || self.normalized() == other.normalized()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// A formula position inside a sequent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occ {
    pub side: Side,
    pub index: usize,
}

impl Occ {
    pub fn left(index: usize) -> Occ {
        Occ { side: Side::Left, index }
    }

    pub fn right(index: usize) -> Occ {
        Occ { side: Side::Right, index }
    }
}

impl fmt::Display for Occ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.side == Side::Left { "L" } else { "R" }, self.index)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequent {
    pub left: Vec<LFormula>,
    pub right: Vec<LFormula>,
}

impl Sequent {
    pub fn new(left: Vec<LFormula>, right: Vec<LFormula>) -> Sequent {
        Sequent { left, right }
    }

    pub fn side(&self, side: Side) -> &Vec<LFormula> {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<LFormula> {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn get(&self, occ: Occ) -> Option<&LFormula> {
        self.side(occ.side).get(occ.index)
    }

    pub fn occurrences(&self) -> impl Iterator<Item = (Occ, &LFormula)> {
        self.left
            .iter()
            .enumerate()
            .map(|(i, f)| (Occ::left(i), f))
            .chain(self.right.iter().enumerate().map(|(i, f)| (Occ::right(i), f)))
    }

    pub fn len(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty() && self.right.is_empty()
    }

    pub fn is_non_dynamic(&self) -> bool {
        self.left.iter().chain(&self.right).all(LFormula::is_non_dynamic)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.left.iter().chain(&self.right).flat_map(|f| f.vars()).collect()
    }

    pub fn normalized(&self) -> Sequent {
        Sequent {
            left: self.left.iter().map(LFormula::normalized).collect(),
            right: self.right.iter().map(LFormula::normalized).collect(),
        }
    }

    /// Multiset equality after normalization.
    pub fn equiv(&self, other: &Sequent) -> bool {
        if self.left.len() != other.left.len() || self.right.len() != other.right.len() {
            return false;
        }
        let sorted = |v: &[LFormula]| {
            let mut v: Vec<LFormula> = v.iter().map(LFormula::normalized).collect();
            v.sort();
            v
        };
        sorted(&self.left) == sorted(&other.left) && sorted(&self.right) == sorted(&other.right)
    }

    /// Positionwise equality after normalization.
    pub fn same_layout(&self, other: &Sequent) -> bool {
        self.left.len() == other.left.len()
            && self.right.len() == other.right.len()
            && self.left.iter().zip(&other.left).all(|(a, b)| a.equiv(b))
            && self.right.iter().zip(&other.right).all(|(a, b)| a.equiv(b))
    }
}

impl fmt::Display for LFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LFormula::Labeled(l, phi) => write!(f, "{l} : {phi}"),
            LFormula::Transition { from, src, to, dst } => {
                write!(f, "({from}, {src}) => ({to}, {dst})")
            }
            LFormula::Termination(l, p) => write!(f, "{l} halts ({p})"),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[LFormula]) -> fmt::Result {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_list(f, &self.left)?;
        if self.left.is_empty() {
            write!(f, "|-")?;
        } else {
            write!(f, " |-")?;
        }
        if !self.right.is_empty() {
            write!(f, " ")?;
        }
        write_list(f, &self.right)
    }
}
