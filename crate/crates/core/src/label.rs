//! Labels: explicit program configurations attached to formulas.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{Expr, Int};
use crate::formula::Formula;
use crate::program::InstKind;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("variable `{var}` is mapped by the store but occurs in `{expr}`")]
    VariableCapture { var: String, expr: Expr },
    #[error("variable `{0}` is mapped twice")]
    DuplicateVariable(String),
    #[error("heap address {0} is not positive")]
    BadAddress(Int),
    #[error("store sequence is empty")]
    EmptySequence,
    #[error("`{0}` is not supported under this label")]
    UnsupportedConnective(String),
    #[error("formula contains a modality: `{0}`")]
    Dynamic(String),
}

/// Finite map from variables to (normalized) expressions.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Store(BTreeMap<String, Expr>);

impl Store {
    pub fn empty() -> Store {
        Store::default()
    }

    /// Checked construction from user input: no duplicates, no mapped variable inside a value.
    pub fn new(entries: Vec<(String, Expr)>) -> Result<Store, LabelError> {
        let mut map = BTreeMap::new();
        for (x, e) in &entries {
            if map.insert(x.clone(), e.normalize()).is_some() {
                return Err(LabelError::DuplicateVariable(x.clone()));
            }
        }
        for e in map.values() {
            if let Some(x) = e.vars().into_iter().find(|v| map.contains_key(v)) {
                return Err(LabelError::VariableCapture { var: x, expr: e.clone() });
            }
        }
        Ok(Store(map))
    }

    /// Construction without the capture check; values are normalized and identity
    /// entries `x -> x` are dropped since they denote the unmapped variable.
    pub fn from_map(map: BTreeMap<String, Expr>) -> Store {
        Store(
            map.into_iter()
                .map(|(x, e)| (x, e.normalize()))
                .filter(|(x, e)| !matches!(e, Expr::Var(y) if y == x))
                .collect(),
        )
    }

    pub fn get(&self, x: &str) -> Option<&Expr> {
        self.0.get(x)
    }

    pub fn contains(&self, x: &str) -> bool {
        self.0.contains_key(x)
    }

    pub fn entries(&self) -> &BTreeMap<String, Expr> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `σ(e)`: mapped variables replaced by their values.
    pub fn apply_expr(&self, e: &Expr) -> Expr {
        e.subst(&self.0)
    }

    /// The store after `x := e`: `x` maps to `σ(e)`, everything else unchanged.
    pub fn update(&self, x: &str, e: &Expr) -> Store {
        let value = self.apply_expr(e).normalize();
        let mut map = self.0.clone();
        map.insert(x.to_string(), value);
        Store::from_map(map)
    }

    /// Variables occurring in stored values.
    pub fn value_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in self.0.values() {
            e.collect_vars(&mut out);
        }
        out
    }

    pub fn map_values(&self, f: &mut impl FnMut(&Expr) -> Expr) -> Store {
        Store::from_map(self.0.iter().map(|(x, e)| (x.clone(), f(e))).collect())
    }

    /// The ground valuation if every value is a literal.
    pub fn as_ground(&self) -> Option<BTreeMap<String, Int>> {
        self.0
            .iter()
            .map(|(x, e)| e.as_literal().map(|n| (x.clone(), n)))
            .collect()
    }
}

/// `config_update`: the store after assigning `e` to `x`.
pub fn config_update(sigma: &Store, x: &str, e: &Expr) -> Store {
    sigma.update(x, e)
}

/// Ground store and heap of the separation-logic instantiation.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StoreHeap {
    pub store: BTreeMap<String, Int>,
    pub heap: BTreeMap<Int, Int>,
}

impl StoreHeap {
    pub fn new(store: BTreeMap<String, Int>, heap: BTreeMap<Int, Int>) -> Result<StoreHeap, LabelError> {
        if let Some(a) = heap.keys().find(|a| **a <= 0) {
            return Err(LabelError::BadAddress(*a));
        }
        Ok(StoreHeap { store, heap })
    }

    pub fn subst_map(&self) -> BTreeMap<String, Expr> {
        self.store
            .iter()
            .map(|(x, n)| (x.clone(), Expr::Int(*n)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Store(Store),
    /// Nonempty store sequence; the first element is the head of the path.
    Seq(Vec<Store>),
    Heap(StoreHeap),
}

impl Label {
    pub fn kind_matches(&self, kind: InstKind) -> bool {
        matches!(
            (self, kind),
            (Label::Store(_), InstKind::Wp | InstKind::Fodl)
                | (Label::Seq(_), InstKind::Pl)
                | (Label::Heap(_), InstKind::Sl)
        )
    }

    pub fn as_store(&self) -> Option<&Store> {
        match self {
            Label::Store(s) => Some(s),
            _ => None,
        }
    }

    /// Variables occurring in stored values (not the mapped names).
    pub fn value_vars(&self) -> BTreeSet<String> {
        match self {
            Label::Store(s) => s.value_vars(),
            Label::Seq(v) => v.iter().flat_map(|s| s.value_vars()).collect(),
            Label::Heap(_) => BTreeSet::new(),
        }
    }

    /// Variables mapped somewhere in the label.
    pub fn mapped_vars(&self) -> BTreeSet<String> {
        match self {
            Label::Store(s) => s.0.keys().cloned().collect(),
            Label::Seq(v) => v.iter().flat_map(|s| s.0.keys().cloned()).collect(),
            Label::Heap(h) => h.store.keys().cloned().collect(),
        }
    }
}

/// Replaces mapped variables in a non-dynamic formula by the label's values.
///
/// Store sequences evaluate atoms at their first store and resolve temporal
/// connectives over the suffixes of the sequence. Store-heap pairs resolve
/// points-to atoms and separating conjunctions against the ground heap.
pub fn apply_label(label: &Label, f: &Formula) -> Result<Formula, LabelError> {
    if f.is_dynamic() {
        return Err(LabelError::Dynamic(f.to_string()));
    }
    match label {
        Label::Store(s) => {
            if f.is_temporal() || f.is_spatial() {
                return Err(LabelError::UnsupportedConnective(f.to_string()));
            }
            Ok(f.map_exprs(&mut |e| s.apply_expr(e)))
        }
        Label::Seq(seq) => {
            if seq.is_empty() {
                return Err(LabelError::EmptySequence);
            }
            if f.is_spatial() {
                return Err(LabelError::UnsupportedConnective(f.to_string()));
            }
            Ok(resolve_path(seq, f))
        }
        Label::Heap(sh) => {
            if f.is_temporal() {
                return Err(LabelError::UnsupportedConnective(f.to_string()));
            }
            Ok(resolve_heap(&sh.subst_map(), &sh.heap, f))
        }
    }
}

fn resolve_path(seq: &[Store], f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Cmp(..) => f.map_exprs(&mut |e| seq[0].apply_expr(e)),
        Formula::Not(a) => Formula::not(resolve_path(seq, a)),
        Formula::And(a, b) => Formula::and(resolve_path(seq, a), resolve_path(seq, b)),
        Formula::Or(a, b) => Formula::or(resolve_path(seq, a), resolve_path(seq, b)),
        Formula::Imp(a, b) => Formula::imp(resolve_path(seq, a), resolve_path(seq, b)),
        Formula::First(a) => resolve_path(&seq[..1], a),
        Formula::Suf(a, b) => {
            // some proper suffix j satisfies b, all suffixes strictly between satisfy a
            let mut options = Vec::new();
            for j in 1..seq.len() {
                let mut parts: Vec<Formula> = (1..j).map(|k| resolve_path(&seq[k..], a)).collect();
                parts.push(resolve_path(&seq[j..], b));
                options.push(Formula::conj(parts));
            }
            Formula::disj(options)
        }
        Formula::PointsTo(..) | Formula::Sep(..) | Formula::Box(..) | Formula::Dia(..) => {
            unreachable!("checked by apply_label")
        }
    }
}

fn resolve_heap(store: &BTreeMap<String, Expr>, heap: &BTreeMap<Int, Int>, f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Cmp(..) => f.map_exprs(&mut |e| e.subst(store)),
        Formula::PointsTo(a, b) => {
            let a = a.subst(store);
            let b = b.subst(store);
            match (a.normalize().as_literal(), b.normalize().as_literal()) {
                (Some(addr), Some(val)) => {
                    if heap.get(&addr) == Some(&val) {
                        Formula::True
                    } else {
                        Formula::False
                    }
                }
                _ => Formula::disj(heap.iter().map(|(addr, val)| {
                    Formula::and(
                        Formula::cmp(a.clone(), crate::formula::CmpOp::Eq, Expr::Int(*addr)),
                        Formula::cmp(b.clone(), crate::formula::CmpOp::Eq, Expr::Int(*val)),
                    )
                })),
            }
        }
        Formula::Sep(a, b) => {
            let cells: Vec<(Int, Int)> = heap.iter().map(|(k, v)| (*k, *v)).collect();
            let mut options = Vec::new();
            for mask in 0u64..(1u64 << cells.len()) {
                let (h1, h2) = split_heap(&cells, mask);
                options.push(Formula::and(
                    resolve_heap(store, &h1, a),
                    resolve_heap(store, &h2, b),
                ));
            }
            Formula::disj(options)
        }
        Formula::Not(a) => Formula::not(resolve_heap(store, heap, a)),
        Formula::And(a, b) => Formula::and(resolve_heap(store, heap, a), resolve_heap(store, heap, b)),
        Formula::Or(a, b) => Formula::or(resolve_heap(store, heap, a), resolve_heap(store, heap, b)),
        Formula::Imp(a, b) => Formula::imp(resolve_heap(store, heap, a), resolve_heap(store, heap, b)),
        Formula::First(_) | Formula::Suf(..) | Formula::Box(..) | Formula::Dia(..) => {
            unreachable!("checked by apply_label")
        }
    }
}

/// Splits heap cells by a bit mask: set bits go left.
pub fn split_heap(cells: &[(Int, Int)], mask: u64) -> (BTreeMap<Int, Int>, BTreeMap<Int, Int>) {
    let mut h1 = BTreeMap::new();
    let mut h2 = BTreeMap::new();
    for (i, (k, v)) in cells.iter().enumerate() {
        if mask & (1 << i) != 0 {
            h1.insert(*k, *v);
        } else {
            h2.insert(*k, *v);
        }
    }
    (h1, h2)
}

/// Sufficient syntactic test that a store constrains nothing about `formulas`:
/// every value is `±t + b` for a distinct variable `t` absent from the formulas.
pub fn is_free_label(sigma: &Store, formulas: &[Formula]) -> bool {
    let mut used = BTreeSet::new();
    for f in formulas {
        f.collect_vars(&mut used);
    }
    let mut seen = BTreeSet::new();
    for e in sigma.entries().values() {
        let poly = e.to_poly();
        let vars = poly.vars();
        if vars.len() != 1 {
            return false;
        }
        let t = vars.into_iter().next().unwrap();
        if used.contains(&t) || sigma.contains(&t) || !seen.insert(t.clone()) {
            return false;
        }
        let Some((coeff, rest)) = poly.split_linear(&t) else {
            return false;
        };
        let unit = coeff.as_constant().map(|c| {
            let one = num_rational::BigRational::from_integer(1.into());
            c == one || c == -one
        });
        let integral = rest.as_constant().map(|c| c.is_integer());
        if unit != Some(true) || integral != Some(true) {
            return false;
        }
    }
    true
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (x, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x} -> {e}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for StoreHeap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (x, n)) in self.store.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x} -> {n}")?;
        }
        write!(f, "}} @ {{")?;
        for (i, (a, n)) in self.heap.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a} -> {n}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Store(s) => write!(f, "{s}"),
            Label::Seq(v) => {
                for (i, s) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ".")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            Label::Heap(h) => write!(f, "{h}"),
        }
    }
}
