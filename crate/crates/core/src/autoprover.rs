//! Heuristic proof search: symbolic execution of the target modality, guard
//! case splits, revisit detection on program terms, generalization by
//! anti-unification and back-link formation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::cyclic::{check_proof, NodeId, ProofGraph};
use crate::document::VariantHint;
use crate::formula::Formula;
use crate::kernel::{apply_rule, guard_case_split, Rule};
use crate::label::Label;
use crate::oracle::{Oracle, Verdict};
use crate::program::{Instantiation, Program};
use crate::script::apply_with_split;
use crate::sequent::{LFormula, Occ, Sequent, Side};
use crate::step::{step, Context, TerminationCert};
use crate::subst::{anti_unify, embed, FreshSupply};

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub max_depth: usize,
    pub max_nodes: usize,
    /// Termination certificates offered for loops of the goal.
    pub variants: Vec<VariantHint>,
    pub generalize: bool,
    /// Bound for the fallback `unroll` certificate.
    pub unroll: usize,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            max_depth: 200,
            max_nodes: 500,
            variants: Vec::new(),
            generalize: true,
            unroll: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FailureReason {
    BudgetExceeded,
    OracleUnknown(String),
    NoBacklink(String),
    TerminationUnknown(String),
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::BudgetExceeded => write!(f, "search budget exceeded"),
            FailureReason::OracleUnknown(m) => write!(f, "oracle could not close a goal: {m}"),
            FailureReason::NoBacklink(m) => write!(f, "no valid cycle: {m}"),
            FailureReason::TerminationUnknown(m) => write!(f, "termination unknown: {m}"),
        }
    }
}

/// A failed search with the partial graph built so far.
#[derive(Clone, Debug)]
pub struct Failure {
    pub graph: ProofGraph,
    pub reason: FailureReason,
}

/// A node where the search executed the program `key` at `label`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchTraceEntry {
    pub node: NodeId,
    pub key: Program,
    pub label: Label,
}

pub fn auto_prove(inst: Instantiation, goal: Sequent, oracle: &Oracle, cfg: &SearchConfig) -> Result<ProofGraph, Failure> {
    let loops = goal_loops(&goal);
    let mut search = Search {
        inst,
        oracle,
        cfg,
        loops,
        graph: ProofGraph::new(inst, goal),
        trace: HashMap::new(),
        generalized_at: HashMap::new(),
        fresh: FreshSupply::default(),
    };
    let vars = search.graph.node(1).unwrap().sequent.vars();
    search.fresh.avoid(vars);
    match search.run() {
        Ok(()) => {}
        Err(reason) => {
            return Err(Failure {
                graph: search.graph,
                reason,
            })
        }
    }
    match check_proof(&search.graph, oracle) {
        Ok(_) => Ok(search.graph),
        Err(e) => Err(Failure {
            graph: search.graph,
            reason: FailureReason::NoBacklink(e.to_string()),
        }),
    }
}

/// Loops of the goal in preorder; variant hint sites index into this list.
pub fn goal_loops(goal: &Sequent) -> Vec<Program> {
    fn formula(f: &Formula, out: &mut Vec<Program>) {
        match f {
            Formula::Box(p, g) | Formula::Dia(p, g) => {
                p.visit(&mut |q| {
                    if matches!(q, Program::While(..) | Program::Star(_)) {
                        out.push(q.clone());
                    }
                });
                formula(g, out);
            }
            Formula::Not(a) | Formula::First(a) => formula(a, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) | Formula::Suf(a, b) | Formula::Sep(a, b) => {
                formula(a, out);
                formula(b, out);
            }
            Formula::True | Formula::False | Formula::Cmp(..) | Formula::PointsTo(..) => {}
        }
    }
    let mut out = Vec::new();
    for lf in goal.left.iter().chain(&goal.right) {
        if let Some((_, f)) = lf.as_labeled() {
            formula(f, &mut out);
        }
    }
    out
}

struct Search<'a> {
    inst: Instantiation,
    oracle: &'a Oracle,
    cfg: &'a SearchConfig,
    loops: Vec<Program>,
    graph: ProofGraph,
    trace: HashMap<NodeId, SearchTraceEntry>,
    /// Template nodes introduced by generalization, with the key they generalize.
    generalized_at: HashMap<NodeId, Program>,
    fresh: FreshSupply,
}

type Outcome = Result<(), FailureReason>;

fn kernel_failure(e: impl fmt::Display) -> FailureReason {
    FailureReason::OracleUnknown(e.to_string())
}

fn is_step_target(f: &Formula) -> bool {
    matches!(f, Formula::Box(p, _) | Formula::Dia(p, _) if !p.is_ter())
}

impl<'a> Search<'a> {
    fn run(&mut self) -> Outcome {
        while let Some(&node) = self.graph.open_goals_dfs().first() {
            if self.graph.len() > self.cfg.max_nodes || self.graph.ancestors(node).len() >= self.cfg.max_depth {
                return Err(FailureReason::BudgetExceeded);
            }
            self.expand(node)?;
        }
        Ok(())
    }

    fn apply(&mut self, node: NodeId, rule: Rule) -> Result<Vec<NodeId>, FailureReason> {
        self.graph.apply(self.oracle, node, &rule).map_err(kernel_failure)
    }

    fn expand(&mut self, node: NodeId) -> Outcome {
        let s = self.graph.node(node).unwrap().sequent.clone();
        if let Some(rule) = propositional(&s) {
            self.apply(node, rule)?;
            return Ok(());
        }
        if let Some((i, j)) = axiom(&s) {
            self.apply(node, Rule::Ax { left: i, right: j })?;
            return Ok(());
        }
        if self.try_close(node, &s)? {
            return Ok(());
        }
        let Some(occ) = target(&s) else {
            return Err(FailureReason::OracleUnknown(format!("nothing left to execute in {s}")));
        };
        let (label, f) = s.get(occ).unwrap().as_labeled().unwrap();
        let (label, key) = match f {
            Formula::Box(p, _) | Formula::Dia(p, _) => (label.clone(), (**p).clone()),
            _ => unreachable!(),
        };
        let history: Vec<SearchTraceEntry> = self
            .graph
            .ancestors(node)
            .into_iter()
            .filter_map(|a| self.trace.get(&a))
            .filter(|e| e.key == key)
            .cloned()
            .collect();
        for entry in &history {
            if self.try_backlink(node, &s, entry.node)? {
                return Ok(());
            }
        }
        if self.cfg.generalize && loop_headed(&key) && !is_ground(&label) && !self.generalized_on_branch(node, &key) {
            if let Some(old) = history.iter().find(|e| e.label != label) {
                if let Some(template) = self.generalize(node, &s, occ, &old.label, &label)? {
                    self.generalized_at.insert(template, key);
                    return Ok(());
                }
            }
        }
        self.trace.insert(
            node,
            SearchTraceEntry {
                node,
                key: key.clone(),
                label: label.clone(),
            },
        );
        self.execute(node, &s, occ, &label, &key)
    }

    fn generalized_on_branch(&self, node: NodeId, key: &Program) -> bool {
        std::iter::once(node)
            .chain(self.graph.ancestors(node))
            .any(|a| self.generalized_at.get(&a) == Some(key))
    }

    /// Closes by the oracle after weakening every dynamic formula.
    fn try_close(&mut self, node: NodeId, s: &Sequent) -> Result<bool, FailureReason> {
        let core = Sequent::new(
            s.left.iter().filter(|f| f.is_non_dynamic()).cloned().collect(),
            s.right.iter().filter(|f| f.is_non_dynamic()).cloned().collect(),
        );
        let verdict = self.oracle.check_sequent(&core).map_err(kernel_failure)?;
        if !verdict.is_valid() {
            if s.is_non_dynamic() {
                return Err(FailureReason::OracleUnknown(match verdict {
                    Verdict::Counterexample(_) => format!("{s} has a counterexample"),
                    _ => format!("{s} is undecided"),
                }));
            }
            return Ok(false);
        }
        let mut cur = node;
        for rule in weakenings(s, |_, f| !f.is_non_dynamic()) {
            cur = self.apply(cur, rule)?[0];
        }
        self.apply(cur, Rule::TerClose)?;
        Ok(true)
    }

    /// Whether some step on the tree path from `companion` down to `node` is progressive.
    fn path_progresses(&self, node: NodeId, companion: NodeId) -> bool {
        let mut child = node;
        while child != companion {
            let Some(parent) = self.graph.node(child).and_then(|n| n.parent) else {
                return false;
            };
            let p = self.graph.node(parent).unwrap();
            if let Some(app) = p.rule() {
                let k = p.children.iter().position(|&c| c == child).unwrap();
                if app.premises[k].pairs.iter().any(|pair| pair.progressive) {
                    return true;
                }
            }
            child = parent;
        }
        false
    }

    fn try_backlink(&mut self, node: NodeId, s: &Sequent, companion: NodeId) -> Result<bool, FailureReason> {
        let comp = self.graph.node(companion).unwrap().sequent.clone();
        let Some(emb) = embed(&comp, s) else {
            return Ok(false);
        };
        if !self.path_progresses(node, companion) {
            return Ok(false);
        }
        let keep_left: BTreeSet<usize> = emb.left.iter().copied().collect();
        let keep_right: BTreeSet<usize> = emb.right.iter().copied().collect();
        let mut cur = node;
        for rule in weakenings(s, |occ, _| match occ.side {
            Side::Left => !keep_left.contains(&occ.index),
            Side::Right => !keep_right.contains(&occ.index),
        }) {
            cur = self.apply(cur, rule)?[0];
        }
        match self.graph.add_backlink(cur, companion, Some(emb.subst)) {
            Ok(()) => Ok(true),
            Err(_) if cur == node => Ok(false),
            Err(e) => Err(FailureReason::NoBacklink(e.to_string())),
        }
    }

    /// Inserts a substitution step from `node` to a template in which the
    /// target's label is replaced by the anti-unifier of `old` and `new`.
    fn generalize(&mut self, node: NodeId, s: &Sequent, occ: Occ, old: &Label, new: &Label) -> Result<Option<NodeId>, FailureReason> {
        let (Label::Store(a), Label::Store(b)) = (old, new) else {
            return Ok(None);
        };
        let (template_store, _, theta) = anti_unify(a, b, &mut self.fresh);
        if theta.is_identity() {
            return Ok(None);
        }
        let template_label = Label::Store(template_store);
        let relabel = |lf: &LFormula| match lf {
            LFormula::Labeled(l, f) if l == new => LFormula::Labeled(template_label.clone(), f.clone()),
            other => other.clone(),
        };
        let fits = |lf: &LFormula| theta.apply_lformula(&relabel(lf)).equiv(lf);
        if !fits(s.get(occ).unwrap()) {
            return Ok(None);
        }
        let mut cur = node;
        for rule in weakenings(s, |_, f| !fits(f)) {
            cur = self.apply(cur, rule)?[0];
        }
        let here = self.graph.node(cur).unwrap().sequent.clone();
        let template = Sequent::new(here.left.iter().map(relabel).collect(), here.right.iter().map(relabel).collect());
        let kids = self.apply(cur, Rule::Sub { template, subst: theta })?;
        Ok(Some(kids[0]))
    }

    fn execute(&mut self, node: NodeId, s: &Sequent, occ: Occ, label: &Label, p: &Program) -> Outcome {
        let boxed = matches!(s.get(occ).unwrap().as_labeled(), Some((_, Formula::Box(..))));
        let all = (occ.side == Side::Right) == boxed;
        if all {
            let rule = if boxed {
                Rule::BoxR { index: occ.index }
            } else {
                Rule::DiaStep {
                    occ,
                    to: None,
                    termination: None,
                }
            };
            apply_with_split(&mut self.graph, self.oracle, node, &rule).map_err(kernel_failure)?;
            return Ok(());
        }
        let ctx = Context::of(s);
        let res = step(&self.inst, self.oracle, &ctx, p, label).map_err(kernel_failure)?;
        if res.successors.is_empty() {
            if let Some(guard) = res.undecided.first() {
                let split = guard_case_split(s, guard).expect("guards are labeled");
                let kids = self.apply(node, split.cut)?;
                let mut lemma = kids[0];
                for r in split.lemma {
                    if let Some(&k) = self.apply(lemma, r)?.first() {
                        lemma = k;
                    }
                }
                self.apply(kids[1], split.split)?;
                return Ok(());
            }
            let wk = match occ.side {
                Side::Left => Rule::WkL(occ.index),
                Side::Right => Rule::WkR(occ.index),
            };
            self.apply(node, wk)?;
            return Ok(());
        }
        let certs = self.certificates(p);
        let mut last = String::from("no certificate applies");
        for succ in &res.successors {
            for cert in &certs {
                let to = Some((succ.program.clone(), succ.label.clone()));
                let rule = if boxed {
                    Rule::BoxL {
                        index: occ.index,
                        to,
                        termination: Some(cert.clone()),
                    }
                } else {
                    Rule::DiaStep {
                        occ,
                        to,
                        termination: Some(cert.clone()),
                    }
                };
                match apply_rule(&self.inst, self.oracle, s, &rule) {
                    Ok(app) => {
                        self.graph.attach(node, app).map_err(kernel_failure)?;
                        return Ok(());
                    }
                    Err(e) => last = e.to_string(),
                }
            }
        }
        Err(FailureReason::TerminationUnknown(format!("{label} halts ({p}): {last}")))
    }

    /// Hints whose loop occurs in `p`, then the bounded unrolling.
    fn certificates(&self, p: &Program) -> Vec<TerminationCert> {
        let mut out = Vec::new();
        for hint in &self.cfg.variants {
            let applies = match hint.site.and_then(|k| self.loops.get(k.wrapping_sub(1))) {
                None => hint.site.is_none(),
                Some(lp) => {
                    let mut found = false;
                    p.visit(&mut |q| found |= q == lp);
                    found
                }
            };
            if applies && !out.contains(&hint.cert) {
                out.push(hint.cert.clone());
            }
        }
        out.push(TerminationCert::Unroll(self.cfg.unroll));
        out
    }
}

/// Whether the next step of `p` enters or re-enters a loop.
fn loop_headed(p: &Program) -> bool {
    match p {
        Program::Seq(a, _) => loop_headed(a),
        Program::While(..) | Program::Star(_) => true,
        _ => false,
    }
}

fn is_ground(l: &Label) -> bool {
    match l {
        Label::Store(s) => s.as_ground().is_some(),
        Label::Seq(seq) => seq.iter().all(|s| s.as_ground().is_some()),
        Label::Heap(_) => true,
    }
}

/// Weakening rules removing the selected occurrences, highest index first per side.
fn weakenings(s: &Sequent, drop: impl Fn(Occ, &LFormula) -> bool) -> Vec<Rule> {
    let mut out = Vec::new();
    for i in (0..s.right.len()).rev() {
        if drop(Occ::right(i), &s.right[i]) {
            out.push(Rule::WkR(i));
        }
    }
    for i in (0..s.left.len()).rev() {
        if drop(Occ::left(i), &s.left[i]) {
            out.push(Rule::WkL(i));
        }
    }
    out
}

/// Unwraps a terminated modality or decomposes a connective above a modality.
fn propositional(s: &Sequent) -> Option<Rule> {
    for (occ, lf) in s.occurrences() {
        let Some((_, f)) = lf.as_labeled() else { continue };
        let left = occ.side == Side::Left;
        match f {
            Formula::Box(p, _) if p.is_ter() => return Some(Rule::BoxTer { occ, wrap: false }),
            Formula::Dia(p, _) if p.is_ter() => return Some(Rule::DiaTer { occ, wrap: false }),
            _ if !f.is_dynamic() => {}
            Formula::Not(_) => return Some(if left { Rule::NegL(occ.index) } else { Rule::NegR(occ.index) }),
            Formula::And(..) => return Some(if left { Rule::AndL(occ.index) } else { Rule::AndR(occ.index) }),
            Formula::Or(..) => return Some(if left { Rule::OrL(occ.index) } else { Rule::OrR(occ.index) }),
            Formula::Imp(..) => return Some(if left { Rule::ImpL(occ.index) } else { Rule::ImpR(occ.index) }),
            _ => {}
        }
    }
    None
}

fn axiom(s: &Sequent) -> Option<(usize, usize)> {
    s.left
        .iter()
        .enumerate()
        .find_map(|(i, a)| s.right.iter().position(|b| a.equiv(b)).map(|j| (i, j)))
}

/// The modality to execute next: the first on the right, else the first on the left.
fn target(s: &Sequent) -> Option<Occ> {
    [Side::Right, Side::Left].into_iter().find_map(|side| {
        s.side(side)
            .iter()
            .position(|lf| lf.as_labeled().is_some_and(|(_, f)| is_step_target(f)))
            .map(|index| Occ { side, index })
    })
}
