//! Substitutions, one-sided matching of labeled sequents, anti-unification of
//! stores, and fresh-name supply.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::expr::{Expr, Poly};
use crate::formula::Formula;
use crate::label::{Label, Store};
use crate::program::Program;
use crate::sequent::{LFormula, Sequent, Side};

/// Finite map from variables to expressions, applied simultaneously.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subst(BTreeMap<String, Expr>);

impl Subst {
    pub fn identity() -> Subst {
        Subst::default()
    }

    /// Builds a substitution, normalizing values and dropping `x -> x`.
    pub fn new(map: BTreeMap<String, Expr>) -> Subst {
        Subst(
            map.into_iter()
                .map(|(x, e)| (x, e.normalize()))
                .filter(|(x, e)| !matches!(e, Expr::Var(y) if y == x))
                .collect(),
        )
    }

    pub fn single(x: &str, e: Expr) -> Subst {
        Subst::new([(x.to_string(), e)].into())
    }

    pub fn map(&self) -> &BTreeMap<String, Expr> {
        &self.0
    }

    pub fn get(&self, x: &str) -> Option<&Expr> {
        self.0.get(x)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn domain(&self) -> BTreeSet<String> {
        self.0.keys().cloned().collect()
    }

    /// `self` followed by `then`.
    pub fn compose(&self, then: &Subst) -> Subst {
        let mut map: BTreeMap<String, Expr> = self
            .0
            .iter()
            .map(|(x, e)| (x.clone(), e.subst(&then.0)))
            .collect();
        for (x, e) in &then.0 {
            map.entry(x.clone()).or_insert_with(|| e.clone());
        }
        Subst::new(map)
    }

    pub fn restrict(&self, vars: &BTreeSet<String>) -> Subst {
        Subst(
            self.0
                .iter()
                .filter(|(x, _)| vars.contains(*x))
                .map(|(x, e)| (x.clone(), e.clone()))
                .collect(),
        )
    }

    pub fn apply_expr(&self, e: &Expr) -> Expr {
        e.subst(&self.0)
    }

    /// Replaces free variables of a plain formula, including the expressions read
    /// by embedded programs; assignment targets are left alone.
    pub fn apply_formula(&self, f: &Formula) -> Formula {
        f.map_exprs(&mut |e| e.subst(&self.0))
    }

    pub fn apply_program(&self, p: &Program) -> Program {
        p.map_exprs(&mut |e| e.subst(&self.0))
    }

    pub fn apply_store(&self, s: &Store) -> Store {
        s.map_values(&mut |e| e.subst(&self.0))
    }

    pub fn apply_label(&self, l: &Label) -> Label {
        match l {
            Label::Store(s) => Label::Store(self.apply_store(s)),
            Label::Seq(v) => Label::Seq(v.iter().map(|s| self.apply_store(s)).collect()),
            Label::Heap(h) => Label::Heap(h.clone()),
        }
    }

    /// Applies the substitution to the label and records, for variables of
    /// `relevant` that the store leaves unmapped, their substituted value, so
    /// that the labeled formula denotes the same thing as under the shifted
    /// assignment.
    fn apply_store_extended(&self, s: &Store, relevant: &BTreeSet<String>) -> Store {
        let mut map = s.entries().clone();
        for e in map.values_mut() {
            *e = e.subst(&self.0);
        }
        for (x, e) in &self.0 {
            if relevant.contains(x) && !s.contains(x) {
                map.insert(x.clone(), e.clone());
            }
        }
        Store::from_map(map)
    }

    fn apply_label_extended(&self, l: &Label, relevant: &BTreeSet<String>) -> Label {
        match l {
            Label::Store(s) => Label::Store(self.apply_store_extended(s, relevant)),
            Label::Seq(v) => Label::Seq(v.iter().map(|s| self.apply_store_extended(s, relevant)).collect()),
            Label::Heap(h) => Label::Heap(h.clone()),
        }
    }

    pub fn apply_lformula(&self, lf: &LFormula) -> LFormula {
        if self.is_identity() {
            return lf.clone();
        }
        match lf {
            LFormula::Labeled(Label::Heap(h), f) => {
                // ground store: only the unmapped (logical) variables can be replaced
                let free: BTreeMap<String, Expr> = self
                    .0
                    .iter()
                    .filter(|(x, _)| !h.store.contains_key(*x))
                    .map(|(x, e)| (x.clone(), e.clone()))
                    .collect();
                LFormula::Labeled(Label::Heap(h.clone()), f.map_exprs(&mut |e| e.subst(&free)))
            }
            LFormula::Labeled(l, f) => {
                let relevant = f.vars();
                LFormula::Labeled(self.apply_label_extended(l, &relevant), f.clone())
            }
            LFormula::Transition { from, src, to, dst } => {
                let mut relevant = from.vars();
                to.collect_vars(&mut relevant);
                LFormula::Transition {
                    from: from.clone(),
                    src: self.apply_label_extended(src, &relevant),
                    to: to.clone(),
                    dst: self.apply_label_extended(dst, &relevant),
                }
            }
            LFormula::Termination(l, p) => {
                LFormula::Termination(self.apply_label_extended(l, &p.vars()), p.clone())
            }
        }
    }

    pub fn apply_sequent(&self, s: &Sequent) -> Sequent {
        Sequent {
            left: s.left.iter().map(|f| self.apply_lformula(f)).collect(),
            right: s.right.iter().map(|f| self.apply_lformula(f)).collect(),
        }
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (x, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}/{x}")?;
        }
        write!(f, "]")
    }
}

/// Generic entry point mirroring the three target kinds.
pub fn substitute_label(l: &Label, theta: &Subst) -> Label {
    theta.apply_label(l)
}

pub fn substitute_formula(f: &Formula, theta: &Subst) -> Formula {
    theta.apply_formula(f)
}

pub fn substitute_sequent(s: &Sequent, theta: &Subst) -> Sequent {
    theta.apply_sequent(s)
}

/// Result of matching a template into a target that may carry extra formulas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub subst: Subst,
    /// For each template formula (left then right), its index in the target side.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// One-sided matching: finds `θ` with `θ(template) = target` up to normalization.
pub fn match_label(template: &Sequent, target: &Sequent) -> Option<Subst> {
    if template.left.len() != target.left.len() || template.right.len() != target.right.len() {
        return None;
    }
    embed(template, target).map(|e| e.subst)
}

/// Like [`match_label`] but the target may contain formulas beyond the image of
/// the template (to be removed by weakening).
pub fn embed(template: &Sequent, target: &Sequent) -> Option<Embedding> {
    if template.left.len() > target.left.len() || template.right.len() > target.right.len() {
        return None;
    }
    let tmpl: Vec<(Side, LFormula)> = template
        .left
        .iter()
        .map(|f| (Side::Left, f.normalized()))
        .chain(template.right.iter().map(|f| (Side::Right, f.normalized())))
        .collect();
    let tgt_left: Vec<LFormula> = target.left.iter().map(LFormula::normalized).collect();
    let tgt_right: Vec<LFormula> = target.right.iter().map(LFormula::normalized).collect();
    let mut search = EmbedSearch {
        template,
        target,
        tmpl: &tmpl,
        tgt_left: &tgt_left,
        tgt_right: &tgt_right,
        used_left: vec![false; tgt_left.len()],
        used_right: vec![false; tgt_right.len()],
        chosen: Vec::new(),
        budget: 10_000,
    };
    search.run(0)
}

struct EmbedSearch<'a> {
    template: &'a Sequent,
    target: &'a Sequent,
    tmpl: &'a [(Side, LFormula)],
    tgt_left: &'a [LFormula],
    tgt_right: &'a [LFormula],
    used_left: Vec<bool>,
    used_right: Vec<bool>,
    chosen: Vec<usize>,
    budget: usize,
}

impl EmbedSearch<'_> {
    fn run(&mut self, k: usize) -> Option<Embedding> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        if k == self.tmpl.len() {
            return self.finish();
        }
        let (side, tf) = &self.tmpl[k];
        let targets = if *side == Side::Left { self.tgt_left } else { self.tgt_right };
        for j in 0..targets.len() {
            let used = if *side == Side::Left { &self.used_left } else { &self.used_right };
            if used[j] || !same_skeleton(tf, &targets[j]) {
                continue;
            }
            self.set_used(*side, j, true);
            self.chosen.push(j);
            if let Some(r) = self.run(k + 1) {
                return Some(r);
            }
            self.chosen.pop();
            self.set_used(*side, j, false);
        }
        None
    }

    fn set_used(&mut self, side: Side, j: usize, v: bool) {
        match side {
            Side::Left => self.used_left[j] = v,
            Side::Right => self.used_right[j] = v,
        }
    }

    fn finish(&self) -> Option<Embedding> {
        let mut eqs = Vec::new();
        for ((side, tf), j) in self.tmpl.iter().zip(&self.chosen) {
            let target = if *side == Side::Left { &self.tgt_left[*j] } else { &self.tgt_right[*j] };
            label_equations(tf, target, &mut eqs)?;
        }
        let unknowns: BTreeSet<String> = self.template.vars();
        let target_vars: BTreeSet<String> = self.target.vars();
        let theta = solve(&eqs, &unknowns, &target_vars)?;
        // verify
        let nl = self.template.left.len();
        for (k, ((side, _), j)) in self.tmpl.iter().zip(&self.chosen).enumerate() {
            let orig = if k < nl {
                &self.template.left[k]
            } else {
                &self.template.right[k - nl]
            };
            let target = if *side == Side::Left { &self.target.left[*j] } else { &self.target.right[*j] };
            if !theta.apply_lformula(orig).equiv(target) {
                return None;
            }
        }
        Some(Embedding {
            subst: theta,
            left: self.chosen[..nl].to_vec(),
            right: self.chosen[nl..].to_vec(),
        })
    }
}

/// Same formula and programs, labels aside.
fn same_skeleton(a: &LFormula, b: &LFormula) -> bool {
    match (a, b) {
        (LFormula::Labeled(la, fa), LFormula::Labeled(lb, fb)) => {
            std::mem::discriminant(la) == std::mem::discriminant(lb)
                && (fa == fb || matches!(la, Label::Heap(_)))
        }
        (
            LFormula::Transition { from: f1, to: t1, .. },
            LFormula::Transition { from: f2, to: t2, .. },
        ) => f1 == f2 && t1 == t2,
        (LFormula::Termination(_, p1), LFormula::Termination(_, p2)) => p1 == p2,
        _ => false,
    }
}

type Equation = (Poly, Poly);

fn label_equations(a: &LFormula, b: &LFormula, eqs: &mut Vec<Equation>) -> Option<()> {
    match (a, b) {
        (LFormula::Labeled(la, fa), LFormula::Labeled(lb, fb)) => {
            if let (Label::Heap(ha), Label::Heap(hb)) = (la, lb) {
                if ha != hb {
                    return None;
                }
                return formula_equations(fa, fb, eqs);
            }
            let relevant = fa.vars();
            pair_labels(la, lb, &relevant, eqs)
        }
        (LFormula::Transition { from, src, to, dst }, LFormula::Transition { src: s2, dst: d2, .. }) => {
            let mut relevant = from.vars();
            to.collect_vars(&mut relevant);
            pair_labels(src, s2, &relevant, eqs)?;
            pair_labels(dst, d2, &relevant, eqs)
        }
        (LFormula::Termination(l1, p), LFormula::Termination(l2, _)) => pair_labels(l1, l2, &p.vars(), eqs),
        _ => None,
    }
}

/// Atom-by-atom equations for formulas under ground heap labels.
fn formula_equations(a: &Formula, b: &Formula, eqs: &mut Vec<Equation>) -> Option<()> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let sa = a.map_exprs(&mut |e| {
        xs.push(e.clone());
        Expr::Int(0)
    });
    let sb = b.map_exprs(&mut |e| {
        ys.push(e.clone());
        Expr::Int(0)
    });
    if sa != sb || xs.len() != ys.len() {
        return None;
    }
    for (x, y) in xs.into_iter().zip(ys) {
        eqs.push((x.to_poly(), y.to_poly()));
    }
    Some(())
}

fn pair_labels(a: &Label, b: &Label, relevant: &BTreeSet<String>, eqs: &mut Vec<Equation>) -> Option<()> {
    match (a, b) {
        (Label::Store(x), Label::Store(y)) => pair_stores(x, y, relevant, eqs),
        (Label::Seq(xs), Label::Seq(ys)) if xs.len() == ys.len() => {
            for (x, y) in xs.iter().zip(ys) {
                pair_stores(x, y, relevant, eqs)?;
            }
            Some(())
        }
        (Label::Heap(x), Label::Heap(y)) if x == y => Some(()),
        _ => None,
    }
}

fn pair_stores(a: &Store, b: &Store, relevant: &BTreeSet<String>, eqs: &mut Vec<Equation>) -> Option<()> {
    let keys: BTreeSet<&String> = a.entries().keys().chain(b.entries().keys()).collect();
    for x in keys {
        let lhs = match a.get(x) {
            Some(e) => e.to_poly(),
            None if relevant.contains(x) => Poly::var(x),
            // an unmapped, irrelevant variable cannot be introduced by substitution
            None => return None,
        };
        let rhs = match b.get(x) {
            Some(e) => e.to_poly(),
            None => Poly::var(x),
        };
        eqs.push((lhs, rhs));
    }
    Some(())
}

fn solve(
    eqs: &[Equation],
    unknowns: &BTreeSet<String>,
    target_vars: &BTreeSet<String>,
) -> Option<Subst> {
    // target variables live in their own namespace while solving, so a name
    // shared with the template is never re-bound
    let apart = |x: &str| format!("'{x}");
    let to_apart: BTreeMap<String, Poly> = target_vars.iter().map(|x| (x.clone(), Poly::var(&apart(x)))).collect();
    let back: BTreeMap<String, Poly> = target_vars.iter().map(|x| (apart(x), Poly::var(x))).collect();
    let renamed: Vec<Equation> = eqs.iter().map(|(l, r)| (l.clone(), r.compose(&to_apart))).collect();
    let renamed_targets: BTreeSet<String> = target_vars.iter().map(|x| apart(x)).collect();
    let mut budget = 2_000usize;
    let solution = solve_rec(&renamed, unknowns, &renamed_targets, BTreeMap::new(), &mut budget)?;
    Some(Subst::new(
        solution.into_iter().map(|(x, p)| (x, p.compose(&back).to_expr())).collect(),
    ))
}

fn solve_rec(
    eqs: &[Equation],
    unknowns: &BTreeSet<String>,
    target_vars: &BTreeSet<String>,
    mut bound: BTreeMap<String, Poly>,
    budget: &mut usize,
) -> Option<BTreeMap<String, Poly>> {
    loop {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        let mut progress = false;
        let mut open: Vec<(Poly, &Poly, Vec<String>)> = Vec::new();
        for (lhs, rhs) in eqs {
            let l = lhs.compose(&bound);
            let free: Vec<String> = l
                .vars()
                .into_iter()
                .filter(|v| unknowns.contains(v) && !bound.contains_key(v))
                .collect();
            if free.is_empty() {
                if (l - rhs.clone()).is_zero() {
                    continue;
                }
                return None;
            }
            open.push((l, rhs, free));
        }
        if open.is_empty() {
            return Some(bound);
        }
        // isolate an unknown that is alone and linear with a constant coefficient
        for (l, rhs, free) in &open {
            if free.len() != 1 {
                continue;
            }
            let u = &free[0];
            if let Some((c, rest)) = l.split_linear(u) {
                if let Some(c) = c.as_constant() {
                    if !num_traits::Zero::is_zero(&c) {
                        let inv = num_traits::Inv::inv(c);
                        let value = ((*rhs).clone() - rest).scale(&inv);
                        bound.insert(u.clone(), value);
                        progress = true;
                        break;
                    }
                }
            }
        }
        if progress {
            continue;
        }
        // guess: one shared unknown keeps its own name, or is solved from a multi-unknown equation
        let mut candidates: Vec<String> = Vec::new();
        for (_, _, free) in &open {
            for u in free {
                if !candidates.contains(u) {
                    candidates.push(u.clone());
                }
            }
        }
        candidates.sort_by_key(|u| !target_vars.contains(&format!("'{u}")));
        for u in &candidates {
            let mut attempt = bound.clone();
            attempt.insert(u.clone(), Poly::var(&format!("'{u}")));
            if let Some(sol) = solve_rec(eqs, unknowns, target_vars, attempt, budget) {
                return Some(sol);
            }
        }
        for (l, rhs, free) in &open {
            for u in free {
                if let Some((c, rest)) = l.split_linear(u) {
                    if let Some(c) = c.as_constant() {
                        if num_traits::Zero::is_zero(&c) {
                            continue;
                        }
                        let mut attempt = bound.clone();
                        let value = ((*rhs).clone() - rest).scale(&num_traits::Inv::inv(c));
                        attempt.insert(u.clone(), value);
                        if let Some(sol) = solve_rec(eqs, unknowns, target_vars, attempt, budget) {
                            return Some(sol);
                        }
                    }
                }
            }
        }
        return None;
    }
}

/// Reserved prefix for generated variables.
pub const FRESH_PREFIX: &str = "_u";

/// Monotone supply of variable names absent from an avoid-set.
#[derive(Clone, Debug, Default)]
pub struct FreshSupply {
    next: usize,
    avoid: BTreeSet<String>,
}

impl FreshSupply {
    pub fn new(avoid: BTreeSet<String>) -> FreshSupply {
        FreshSupply { next: 0, avoid }
    }

    pub fn avoid(&mut self, names: impl IntoIterator<Item = String>) {
        self.avoid.extend(names);
    }

    pub fn fresh(&mut self) -> String {
        loop {
            self.next += 1;
            let name = format!("{FRESH_PREFIX}{}", self.next);
            if self.avoid.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// Most specific common template of two stores: equal entries are kept and
/// differing entries become fresh variables.
pub fn anti_unify(a: &Store, b: &Store, fresh: &mut FreshSupply) -> (Store, Subst, Subst) {
    fresh.avoid(a.value_vars());
    fresh.avoid(b.value_vars());
    fresh.avoid(a.entries().keys().cloned());
    fresh.avoid(b.entries().keys().cloned());
    let keys: BTreeSet<&String> = a.entries().keys().chain(b.entries().keys()).collect();
    let mut template = BTreeMap::new();
    let mut t1 = BTreeMap::new();
    let mut t2 = BTreeMap::new();
    for x in keys {
        let ea = a.get(x).cloned().unwrap_or_else(|| Expr::var(x.as_str()));
        let eb = b.get(x).cloned().unwrap_or_else(|| Expr::var(x.as_str()));
        if ea == eb {
            template.insert(x.clone(), ea);
        } else {
            let u = fresh.fresh();
            template.insert(x.clone(), Expr::var(u.as_str()));
            t1.insert(u.clone(), ea);
            t2.insert(u, eb);
        }
    }
    (Store::from_map(template), Subst::new(t1), Subst::new(t2))
}
