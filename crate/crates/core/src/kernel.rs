//! The trusted rule layer. Every rule application computes its premises, the
//! correspondence between conclusion and premise formula occurrences, and the
//! side obligations it discharged.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::Int;
use crate::formula::Formula;
use crate::label::{is_free_label, Label, Store, StoreHeap};
use crate::oracle::{Oracle, OracleError, Verdict};
use crate::program::{Instantiation, Program};
use crate::sequent::{LFormula, Occ, Sequent, Side};
use crate::step::{step, terminates, Context, StepError, TerminationCert, TerminationError, TerminationProof};
use crate::subst::Subst;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    BoxR,
    BoxL,
    BoxTer,
    TerClose,
    Sub,
    Ax,
    Cut,
    WkR,
    WkL,
    Con,
    NegR,
    NegL,
    AndR,
    AndL,
    OrL,
    OrR,
    ImpR,
    ImpL,
    DiaStep,
    DiaTer,
    LE,
    LiftedSeq,
    LiftedGen,
    SLStar,
    SLFrame,
    TempFirst,
    TempSufR1,
    TempSufR2,
    TempSufL,
}

impl RuleId {
    pub const ALL: [RuleId; 29] = [
        RuleId::BoxR,
        RuleId::BoxL,
        RuleId::BoxTer,
        RuleId::TerClose,
        RuleId::Sub,
        RuleId::Ax,
        RuleId::Cut,
        RuleId::WkR,
        RuleId::WkL,
        RuleId::Con,
        RuleId::NegR,
        RuleId::NegL,
        RuleId::AndR,
        RuleId::AndL,
        RuleId::OrL,
        RuleId::OrR,
        RuleId::ImpR,
        RuleId::ImpL,
        RuleId::DiaStep,
        RuleId::DiaTer,
        RuleId::LE,
        RuleId::LiftedSeq,
        RuleId::LiftedGen,
        RuleId::SLStar,
        RuleId::SLFrame,
        RuleId::TempFirst,
        RuleId::TempSufR1,
        RuleId::TempSufR2,
        RuleId::TempSufL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::BoxR => "BoxR",
            RuleId::BoxL => "BoxL",
            RuleId::BoxTer => "BoxTer",
            RuleId::TerClose => "TerClose",
            RuleId::Sub => "Sub",
            RuleId::Ax => "Ax",
            RuleId::Cut => "Cut",
            RuleId::WkR => "WkR",
            RuleId::WkL => "WkL",
            RuleId::Con => "Con",
            RuleId::NegR => "NegR",
            RuleId::NegL => "NegL",
            RuleId::AndR => "AndR",
            RuleId::AndL => "AndL",
            RuleId::OrL => "OrL",
            RuleId::OrR => "OrR",
            RuleId::ImpR => "ImpR",
            RuleId::ImpL => "ImpL",
            RuleId::DiaStep => "DiaStep",
            RuleId::DiaTer => "DiaTer",
            RuleId::LE => "LE",
            RuleId::LiftedSeq => "LiftedSeq",
            RuleId::LiftedGen => "LiftedGen",
            RuleId::SLStar => "SLStar",
            RuleId::SLFrame => "SLFrame",
            RuleId::TempFirst => "TempFirst",
            RuleId::TempSufR1 => "TempSufR1",
            RuleId::TempSufR2 => "TempSufR2",
            RuleId::TempSufL => "TempSufL",
        }
    }

    pub fn from_name(s: &str) -> Option<RuleId> {
        RuleId::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A rule together with its parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Steps the box formula on the right through every transition.
    BoxR { index: usize },
    /// Steps the box formula on the left through one chosen transition.
    BoxL {
        index: usize,
        to: Option<(Program, Label)>,
        termination: Option<TerminationCert>,
    },
    /// `l : [ter]phi` and `l : phi` replace each other, on either side.
    BoxTer { occ: Occ, wrap: bool },
    TerClose,
    /// The premise is the template; the goal must be its instance under `subst`.
    Sub { template: Sequent, subst: Subst },
    Ax { left: usize, right: usize },
    Cut { formula: LFormula },
    WkL(usize),
    WkR(usize),
    /// Duplicates an occurrence, or with `merge` removes the second of two equal occurrences.
    Con {
        side: Side,
        index: usize,
        merge: Option<usize>,
    },
    NegR(usize),
    NegL(usize),
    AndR(usize),
    AndL(usize),
    OrL(usize),
    OrR(usize),
    ImpR(usize),
    ImpL(usize),
    /// On the right: one chosen transition. On the left: every transition.
    DiaStep {
        occ: Occ,
        to: Option<(Program, Label)>,
        termination: Option<TerminationCert>,
    },
    DiaTer { occ: Occ, wrap: bool },
    /// Replaces a left formula by a consequence of it.
    LE { index: usize, formula: Formula },
    LiftedSeq { occ: Occ },
    LiftedGen,
    /// Splits the heap of a right separating conjunction; `part` goes to the left conjunct.
    SLStar { index: usize, part: BTreeMap<Int, Int> },
    SLFrame { index: usize },
    TempFirst { occ: Occ },
    TempSufR1(usize),
    TempSufR2(usize),
    TempSufL(usize),
}

impl Rule {
    pub fn id(&self) -> RuleId {
        match self {
            Rule::BoxR { .. } => RuleId::BoxR,
            Rule::BoxL { .. } => RuleId::BoxL,
            Rule::BoxTer { .. } => RuleId::BoxTer,
            Rule::TerClose => RuleId::TerClose,
            Rule::Sub { .. } => RuleId::Sub,
            Rule::Ax { .. } => RuleId::Ax,
            Rule::Cut { .. } => RuleId::Cut,
            Rule::WkL(_) => RuleId::WkL,
            Rule::WkR(_) => RuleId::WkR,
            Rule::Con { .. } => RuleId::Con,
            Rule::NegR(_) => RuleId::NegR,
            Rule::NegL(_) => RuleId::NegL,
            Rule::AndR(_) => RuleId::AndR,
            Rule::AndL(_) => RuleId::AndL,
            Rule::OrL(_) => RuleId::OrL,
            Rule::OrR(_) => RuleId::OrR,
            Rule::ImpR(_) => RuleId::ImpR,
            Rule::ImpL(_) => RuleId::ImpL,
            Rule::DiaStep { .. } => RuleId::DiaStep,
            Rule::DiaTer { .. } => RuleId::DiaTer,
            Rule::LE { .. } => RuleId::LE,
            Rule::LiftedSeq { .. } => RuleId::LiftedSeq,
            Rule::LiftedGen => RuleId::LiftedGen,
            Rule::SLStar { .. } => RuleId::SLStar,
            Rule::SLFrame { .. } => RuleId::SLFrame,
            Rule::TempFirst { .. } => RuleId::TempFirst,
            Rule::TempSufR1(_) => RuleId::TempSufR1,
            Rule::TempSufR2(_) => RuleId::TempSufR2,
            Rule::TempSufL(_) => RuleId::TempSufL,
        }
    }
}

/// Links a conclusion occurrence to a premise occurrence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CpPair {
    pub from: Occ,
    pub to: Occ,
    pub progressive: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Premise {
    pub sequent: Sequent,
    pub pairs: Vec<CpPair>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub sequent: Sequent,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleApplication {
    pub rule: Rule,
    pub premises: Vec<Premise>,
    pub obligations: Vec<Obligation>,
    pub termination: Option<TerminationProof>,
    /// Step rule tags of the transitions used, per premise.
    pub transitions: Vec<Vec<&'static str>>,
}

impl RuleApplication {
    fn new(rule: Rule, premises: Vec<Premise>) -> RuleApplication {
        RuleApplication {
            rule,
            premises,
            obligations: Vec::new(),
            termination: None,
            transitions: Vec::new(),
        }
    }

    pub fn is_progressive(&self) -> bool {
        self.premises.iter().any(|p| p.pairs.iter().any(|c| c.progressive))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("rule {rule} is not applicable: {reason}")]
    NotApplicable { rule: RuleId, reason: String },
    #[error("guard {0} is not decided by the context; split on it first")]
    MissingExhaustiveness(LFormula),
    #[error("label {label} is not free for the rule's formulas")]
    FreenessViolation { label: String },
    #[error("side condition {sequent} is not valid: {verdict}")]
    ObligationFailed { sequent: Sequent, verdict: Verdict },
    #[error(transparent)]
    Termination(#[from] TerminationError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn not_applicable(rule: RuleId, reason: impl Into<String>) -> KernelError {
    KernelError::NotApplicable {
        rule,
        reason: reason.into(),
    }
}

/// Builds a premise from the goal: the target is replaced by `adds`. The first
/// addition on the target's side takes the target's place; the rest are
/// appended to their sides.
fn rewrite(goal: &Sequent, target: Option<Occ>, adds: Vec<(Side, LFormula)>, progressive: bool) -> Premise {
    let mut left: Vec<(Option<Occ>, LFormula)> =
        goal.left.iter().enumerate().map(|(i, f)| (Some(Occ::left(i)), f.clone())).collect();
    let mut right: Vec<(Option<Occ>, LFormula)> =
        goal.right.iter().enumerate().map(|(i, f)| (Some(Occ::right(i)), f.clone())).collect();
    let mut fresh = Vec::new();
    let mut in_place = None;
    if let Some(t) = target {
        let side = if t.side == Side::Left { &mut left } else { &mut right };
        if let Some(pos) = adds.iter().position(|(s, _)| *s == t.side) {
            side[t.index] = (None, adds[pos].1.clone());
            in_place = Some(pos);
        } else {
            side.remove(t.index);
        }
    }
    for (k, (s, f)) in adds.into_iter().enumerate() {
        if Some(k) == in_place {
            fresh.push(Occ { side: s, index: target.unwrap().index });
            continue;
        }
        let side = if s == Side::Left { &mut left } else { &mut right };
        side.push((None, f));
        fresh.push(Occ { side: s, index: side.len() - 1 });
    }
    let mut pairs = Vec::new();
    for (side, items) in [(Side::Left, &left), (Side::Right, &right)] {
        for (i, (orig, _)) in items.iter().enumerate() {
            if let Some(o) = orig {
                pairs.push(CpPair {
                    from: *o,
                    to: Occ { side, index: i },
                    progressive: false,
                });
            }
        }
    }
    if let Some(t) = target {
        for to in fresh {
            pairs.push(CpPair { from: t, to, progressive });
        }
    }
    pairs.sort();
    Premise {
        sequent: Sequent::new(
            left.into_iter().map(|(_, f)| f).collect(),
            right.into_iter().map(|(_, f)| f).collect(),
        ),
        pairs,
    }
}

fn target(goal: &Sequent, rule: RuleId, occ: Occ) -> Result<&LFormula, KernelError> {
    goal.get(occ)
        .ok_or_else(|| not_applicable(rule, format!("no formula at {occ}")))
}

fn labeled(goal: &Sequent, rule: RuleId, occ: Occ) -> Result<(&Label, &Formula), KernelError> {
    target(goal, rule, occ)?
        .as_labeled()
        .ok_or_else(|| not_applicable(rule, format!("{occ} is not a labeled formula")))
}

fn discharge(oracle: &Oracle, sequent: Sequent) -> Result<Obligation, KernelError> {
    let verdict = oracle.check_sequent(&sequent)?;
    if !verdict.is_valid() {
        return Err(KernelError::ObligationFailed { sequent, verdict });
    }
    Ok(Obligation { sequent, verdict })
}

fn lf(l: &Label, f: Formula) -> LFormula {
    LFormula::Labeled(l.clone(), f)
}

/// Applies one rule to `goal`.
pub fn apply_rule(inst: &Instantiation, oracle: &Oracle, goal: &Sequent, rule: &Rule) -> Result<RuleApplication, KernelError> {
    let id = rule.id();
    let app = |premises| RuleApplication::new(rule.clone(), premises);
    match rule {
        Rule::BoxR { index } => {
            let occ = Occ::right(*index);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::Box(p, post) = f else {
                return Err(not_applicable(id, "target is not a box formula"));
            };
            all_successors(inst, oracle, goal, rule, occ, l, p, post, true)
        }
        Rule::DiaStep { occ, .. } if occ.side == Side::Left => {
            let (l, f) = labeled(goal, id, *occ)?;
            let Formula::Dia(p, post) = f else {
                return Err(not_applicable(id, "target is not a diamond formula"));
            };
            all_successors(inst, oracle, goal, rule, *occ, l, p, post, false)
        }
        Rule::BoxL { index, to, termination } => {
            let occ = Occ::left(*index);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::Box(p, post) = f else {
                return Err(not_applicable(id, "target is not a box formula"));
            };
            one_successor(inst, oracle, goal, rule, occ, l, p, post, to.as_ref(), termination.as_ref(), true)
        }
        Rule::DiaStep { occ, to, termination } => {
            let (l, f) = labeled(goal, id, *occ)?;
            let Formula::Dia(p, post) = f else {
                return Err(not_applicable(id, "target is not a diamond formula"));
            };
            one_successor(inst, oracle, goal, rule, *occ, l, p, post, to.as_ref(), termination.as_ref(), false)
        }
        Rule::BoxTer { occ, wrap } | Rule::DiaTer { occ, wrap } => {
            let (l, f) = labeled(goal, id, *occ)?;
            let boxed = id == RuleId::BoxTer;
            let new = if *wrap {
                if boxed {
                    Formula::boxed(Program::Ter, f.clone())
                } else {
                    Formula::dia(Program::Ter, f.clone())
                }
            } else {
                match f {
                    Formula::Box(p, post) if boxed && p.is_ter() => (**post).clone(),
                    Formula::Dia(p, post) if !boxed && p.is_ter() => (**post).clone(),
                    _ => return Err(not_applicable(id, "target is not a modality over the terminated program")),
                }
            };
            Ok(app(vec![rewrite(goal, Some(*occ), vec![(occ.side, lf(l, new))], false)]))
        }
        Rule::TerClose => {
            if !goal.is_non_dynamic() {
                return Err(not_applicable(id, "every formula must be a labeled formula without modalities"));
            }
            let mut a = app(Vec::new());
            a.obligations.push(discharge(oracle, goal.clone())?);
            Ok(a)
        }
        Rule::Sub { template, subst } => {
            let image = subst.apply_sequent(template);
            let pairs = correspondence(&image, goal)
                .ok_or_else(|| not_applicable(id, format!("the template instance {image} differs from the goal")))?;
            let pairs = pairs
                .into_iter()
                .map(|(t, g)| CpPair {
                    from: g,
                    to: t,
                    progressive: false,
                })
                .collect();
            Ok(app(vec![Premise {
                sequent: template.clone(),
                pairs,
            }]))
        }
        Rule::Ax { left, right } => {
            let a = target(goal, id, Occ::left(*left))?;
            let b = target(goal, id, Occ::right(*right))?;
            if !a.equiv(b) {
                return Err(not_applicable(id, format!("{a} and {b} differ")));
            }
            Ok(app(Vec::new()))
        }
        Rule::Cut { formula } => {
            if let Err(e) = inst_check(inst, formula) {
                return Err(not_applicable(id, e));
            }
            Ok(app(vec![
                rewrite(goal, None, vec![(Side::Right, formula.clone())], false),
                rewrite(goal, None, vec![(Side::Left, formula.clone())], false),
            ]))
        }
        Rule::WkL(i) | Rule::WkR(i) => {
            let occ = if id == RuleId::WkL { Occ::left(*i) } else { Occ::right(*i) };
            target(goal, id, occ)?;
            Ok(app(vec![rewrite(goal, Some(occ), Vec::new(), false)]))
        }
        Rule::Con { side, index, merge } => {
            let occ = Occ { side: *side, index: *index };
            let f = target(goal, id, occ)?.clone();
            match merge {
                None => {
                    let mut p = rewrite(goal, None, vec![(*side, f)], false);
                    let copy = Occ {
                        side: *side,
                        index: goal.side(*side).len(),
                    };
                    p.pairs.push(CpPair {
                        from: occ,
                        to: copy,
                        progressive: false,
                    });
                    p.pairs.sort();
                    Ok(app(vec![p]))
                }
                Some(j) => {
                    let other = Occ { side: *side, index: *j };
                    let g = target(goal, id, other)?;
                    if *j == *index || !f.equiv(g) {
                        return Err(not_applicable(id, "merged occurrences must be distinct and equal"));
                    }
                    let mut p = rewrite(goal, Some(other), Vec::new(), false);
                    let kept = p.pairs.iter().find(|c| c.from == occ).map(|c| c.to).unwrap();
                    p.pairs.push(CpPair {
                        from: other,
                        to: kept,
                        progressive: false,
                    });
                    p.pairs.sort();
                    Ok(app(vec![p]))
                }
            }
        }
        Rule::NegR(i) | Rule::NegL(i) => {
            let side = if id == RuleId::NegL { Side::Left } else { Side::Right };
            let occ = Occ { side, index: *i };
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::Not(g) = f else {
                return Err(not_applicable(id, "target is not a negation"));
            };
            Ok(app(vec![rewrite(goal, Some(occ), vec![(side.other(), lf(l, (**g).clone()))], false)]))
        }
        Rule::AndL(i) => {
            let occ = Occ::left(*i);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::And(a, b) = f else {
                return Err(not_applicable(id, "target is not a conjunction"));
            };
            Ok(app(vec![rewrite(
                goal,
                Some(occ),
                vec![(Side::Left, lf(l, (**a).clone())), (Side::Left, lf(l, (**b).clone()))],
                false,
            )]))
        }
        Rule::AndR(i) => {
            let occ = Occ::right(*i);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::And(a, b) = f else {
                return Err(not_applicable(id, "target is not a conjunction"));
            };
            Ok(app(vec![
                rewrite(goal, Some(occ), vec![(Side::Right, lf(l, (**a).clone()))], false),
                rewrite(goal, Some(occ), vec![(Side::Right, lf(l, (**b).clone()))], false),
            ]))
        }
        Rule::OrL(i) => {
            let occ = Occ::left(*i);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::Or(a, b) = f else {
                return Err(not_applicable(id, "target is not a disjunction"));
            };
            Ok(app(vec![
                rewrite(goal, Some(occ), vec![(Side::Left, lf(l, (**a).clone()))], false),
                rewrite(goal, Some(occ), vec![(Side::Left, lf(l, (**b).clone()))], false),
            ]))
        }
        Rule::OrR(i) => {
            let occ = Occ::right(*i);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::Or(a, b) = f else {
                return Err(not_applicable(id, "target is not a disjunction"));
            };
            Ok(app(vec![rewrite(
                goal,
                Some(occ),
                vec![(Side::Right, lf(l, (**a).clone())), (Side::Right, lf(l, (**b).clone()))],
                false,
            )]))
        }
        Rule::ImpR(i) => {
            let occ = Occ::right(*i);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::Imp(a, b) = f else {
                return Err(not_applicable(id, "target is not an implication"));
            };
            Ok(app(vec![rewrite(
                goal,
                Some(occ),
                vec![(Side::Right, lf(l, (**b).clone())), (Side::Left, lf(l, (**a).clone()))],
                false,
            )]))
        }
        Rule::ImpL(i) => {
            let occ = Occ::left(*i);
            let (l, f) = labeled(goal, id, occ)?;
            let Formula::Imp(a, b) = f else {
                return Err(not_applicable(id, "target is not an implication"));
            };
            Ok(app(vec![
                rewrite(goal, Some(occ), vec![(Side::Right, lf(l, (**a).clone()))], false),
                rewrite(goal, Some(occ), vec![(Side::Left, lf(l, (**b).clone()))], false),
            ]))
        }
        Rule::LE { index, formula } => {
            let occ = Occ::left(*index);
            let (l, f) = labeled(goal, id, occ)?;
            if f.is_dynamic() || formula.is_dynamic() {
                return Err(not_applicable(id, "both formulas must be free of modalities"));
            }
            if let Err(e) = inst.check_formula(formula) {
                return Err(not_applicable(id, e));
            }
            let ob = Sequent::new(vec![lf(l, f.clone())], vec![lf(l, formula.clone())]);
            let mut a = app(vec![rewrite(goal, Some(occ), vec![(Side::Left, lf(l, formula.clone()))], false)]);
            a.obligations.push(discharge(oracle, ob)?);
            Ok(a)
        }
        Rule::LiftedSeq { occ } => {
            let (l, f) = labeled(goal, id, *occ)?;
            let Formula::Box(p, post) = f else {
                return Err(not_applicable(id, "target is not a box formula"));
            };
            let Program::Seq(a, b) = &**p else {
                return Err(not_applicable(id, "target program is not a sequence"));
            };
            let sigma = store_label(l, id)?;
            let split = Formula::boxed((**a).clone(), Formula::boxed((**b).clone(), (**post).clone()));
            // formulas labeled with the same store belong to the lifted rule instance
            let mut formulas = vec![f.clone(), split.clone()];
            for (o, g) in goal.occurrences() {
                if let Some((l2, g)) = g.as_labeled() {
                    if o != *occ && l2 == l {
                        formulas.push(g.clone());
                    }
                }
            }
            if !is_free_label(sigma, &formulas) {
                return Err(KernelError::FreenessViolation { label: l.to_string() });
            }
            Ok(app(vec![rewrite(goal, Some(*occ), vec![(occ.side, lf(l, split))], false)]))
        }
        Rule::LiftedGen => {
            let ([a], [b]) = (&goal.left[..], &goal.right[..]) else {
                return Err(not_applicable(id, "the goal must be a single formula on each side"));
            };
            let (Some((la, fa)), Some((lb, fb))) = (a.as_labeled(), b.as_labeled()) else {
                return Err(not_applicable(id, "both formulas must be labeled"));
            };
            let (Formula::Box(p, phi), Formula::Box(q, psi)) = (fa, fb) else {
                return Err(not_applicable(id, "both formulas must be box formulas"));
            };
            if la != lb || p != q {
                return Err(not_applicable(id, "labels and programs must agree"));
            }
            let sigma = store_label(la, id)?;
            let plain = PlainRule {
                conclusion: (vec![fa.clone()], vec![fb.clone()]),
                premises: vec![(vec![(**phi).clone()], vec![(**psi).clone()])],
            };
            let lifted = lift_rule(&plain, sigma)?;
            Ok(app(vec![Premise {
                sequent: lifted.premises[0].clone(),
                pairs: vec![
                    CpPair {
                        from: Occ::left(0),
                        to: Occ::left(0),
                        progressive: false,
                    },
                    CpPair {
                        from: Occ::right(0),
                        to: Occ::right(0),
                        progressive: false,
                    },
                ],
            }]))
        }
        Rule::SLStar { index, part } => {
            let occ = Occ::right(*index);
            let (l, f) = labeled(goal, id, occ)?;
            let (Label::Heap(sh), Formula::Sep(a, b)) = (l, f) else {
                return Err(not_applicable(id, "target must be a separating conjunction under a store-heap label"));
            };
            let mut rest = sh.heap.clone();
            for (k, v) in part {
                if rest.remove(k) != Some(*v) {
                    return Err(not_applicable(id, format!("cell {k} |-> {v} is not part of the heap")));
                }
            }
            // the two parts partition the heap, so they are disjoint by construction
            let h1 = Label::Heap(StoreHeap {
                store: sh.store.clone(),
                heap: part.clone(),
            });
            let h2 = Label::Heap(StoreHeap {
                store: sh.store.clone(),
                heap: rest,
            });
            Ok(app(vec![
                rewrite(goal, Some(occ), vec![(Side::Right, lf(&h1, (**a).clone()))], false),
                rewrite(goal, Some(occ), vec![(Side::Right, lf(&h2, (**b).clone()))], false),
            ]))
        }
        Rule::SLFrame { index } => {
            let occ = Occ::right(*index);
            let (l, f) = labeled(goal, id, occ)?;
            let (Label::Heap(sh), Formula::Sep(a, b)) = (l, f) else {
                return Err(not_applicable(id, "target must be a separating conjunction under a store-heap label"));
            };
            if b.is_dynamic() {
                return Err(not_applicable(id, "the framed conjunct must be free of modalities"));
            }
            // the whole heap goes to the kept conjunct, so the dropped one must hold of the empty heap
            let empty = Label::Heap(StoreHeap {
                store: sh.store.clone(),
                heap: BTreeMap::new(),
            });
            let mut a_app = app(vec![rewrite(goal, Some(occ), vec![(Side::Right, lf(l, (**a).clone()))], false)]);
            a_app
                .obligations
                .push(discharge(oracle, Sequent::new(Vec::new(), vec![lf(&empty, (**b).clone())]))?);
            Ok(a_app)
        }
        Rule::TempFirst { occ } => {
            let (l, f) = labeled(goal, id, *occ)?;
            let (Label::Seq(seq), Formula::First(g)) = (l, f) else {
                return Err(not_applicable(id, "target must be a first-state formula under a store sequence"));
            };
            let head = Label::Seq(vec![seq[0].clone()]);
            Ok(app(vec![rewrite(goal, Some(*occ), vec![(occ.side, lf(&head, (**g).clone()))], false)]))
        }
        Rule::TempSufR1(i) | Rule::TempSufR2(i) | Rule::TempSufL(i) => {
            let side = if id == RuleId::TempSufL { Side::Left } else { Side::Right };
            let occ = Occ { side, index: *i };
            let (l, f) = labeled(goal, id, occ)?;
            let (Label::Seq(seq), Formula::Suf(a, b)) = (l, f) else {
                return Err(not_applicable(id, "target must be a suffix formula under a store sequence"));
            };
            if seq.len() < 2 {
                return Err(not_applicable(id, "the store sequence has no proper suffix"));
            }
            let tail = Label::Seq(seq[1..].to_vec());
            let phi = lf(&tail, (**a).clone());
            let psi = lf(&tail, (**b).clone());
            let again = lf(&tail, f.clone());
            Ok(app(match id {
                RuleId::TempSufR1 => vec![
                    rewrite(goal, Some(occ), vec![(side, phi)], false),
                    rewrite(goal, Some(occ), vec![(side, again)], false),
                ],
                RuleId::TempSufR2 => vec![rewrite(goal, Some(occ), vec![(side, psi)], false)],
                _ => vec![
                    rewrite(goal, Some(occ), vec![(side, phi), (side, again)], false),
                    rewrite(goal, Some(occ), vec![(side, psi)], false),
                ],
            }))
        }
    }
}

fn inst_check(inst: &Instantiation, f: &LFormula) -> Result<(), String> {
    match f {
        LFormula::Labeled(l, g) => {
            if !l.kind_matches(inst.kind) {
                return Err(format!("label {l} does not fit the {} instantiation", inst.kind));
            }
            inst.check_formula(g)
        }
        _ => Err("only labeled formulas can be cut".into()),
    }
}

fn store_label(l: &Label, id: RuleId) -> Result<&Store, KernelError> {
    l.as_store()
        .ok_or_else(|| not_applicable(id, "lifting needs a plain store label"))
}

#[allow(clippy::too_many_arguments)]
fn all_successors(
    inst: &Instantiation,
    oracle: &Oracle,
    goal: &Sequent,
    rule: &Rule,
    occ: Occ,
    l: &Label,
    p: &Program,
    post: &Formula,
    boxed: bool,
) -> Result<RuleApplication, KernelError> {
    if p.is_ter() {
        return Err(not_applicable(rule.id(), "the program has terminated"));
    }
    let ctx = Context::of(goal);
    let res = step(inst, oracle, &ctx, p, l)?;
    if let Some(g) = res.undecided.first() {
        return Err(KernelError::MissingExhaustiveness(g.clone()));
    }
    let mut a = RuleApplication::new(rule.clone(), Vec::new());
    for s in res.successors {
        let f = if boxed {
            Formula::boxed(s.program, post.clone())
        } else {
            Formula::dia(s.program, post.clone())
        };
        a.premises.push(rewrite(goal, Some(occ), vec![(occ.side, LFormula::Labeled(s.label, f))], true));
        a.transitions.push(s.rules);
    }
    Ok(a)
}

#[allow(clippy::too_many_arguments)]
fn one_successor(
    inst: &Instantiation,
    oracle: &Oracle,
    goal: &Sequent,
    rule: &Rule,
    occ: Occ,
    l: &Label,
    p: &Program,
    post: &Formula,
    to: Option<&(Program, Label)>,
    cert: Option<&TerminationCert>,
    boxed: bool,
) -> Result<RuleApplication, KernelError> {
    let id = rule.id();
    if p.is_ter() {
        return Err(not_applicable(id, "the program has terminated"));
    }
    let ctx = Context::of(goal);
    let res = step(inst, oracle, &ctx, p, l)?;
    let undecided = res.undecided.clone();
    let chosen = match to {
        Some((q, m)) => {
            let want = LFormula::Transition {
                from: p.clone(),
                src: l.clone(),
                to: q.clone(),
                dst: m.clone(),
            };
            res.successors.into_iter().find(|s| {
                LFormula::Transition {
                    from: p.clone(),
                    src: l.clone(),
                    to: s.program.clone(),
                    dst: s.label.clone(),
                }
                .equiv(&want)
            })
        }
        None if res.successors.len() == 1 => res.successors.into_iter().next(),
        None if res.successors.is_empty() => None,
        None => {
            return Err(not_applicable(
                id,
                format!("{} derivable transitions; name the one to take", res.successors.len()),
            ))
        }
    };
    let Some(s) = chosen else {
        if let Some(g) = undecided.first() {
            return Err(KernelError::MissingExhaustiveness(g.clone()));
        }
        return Err(not_applicable(id, "the requested transition is not derivable"));
    };
    let termination = match cert {
        Some(c) => Some(terminates(inst, oracle, &ctx, p, l, c)?),
        None => None,
    };
    let f = if boxed {
        Formula::boxed(s.program, post.clone())
    } else {
        Formula::dia(s.program, post.clone())
    };
    let progressive = termination.is_some();
    let mut a = RuleApplication::new(
        rule.clone(),
        vec![rewrite(goal, Some(occ), vec![(occ.side, LFormula::Labeled(s.label, f))], progressive)],
    );
    a.transitions.push(s.rules);
    a.termination = termination;
    Ok(a)
}

/// Pairs each occurrence of `a` with an equal occurrence of `b` on the same
/// side, matching identical positions first.
pub fn correspondence(a: &Sequent, b: &Sequent) -> Option<Vec<(Occ, Occ)>> {
    let mut out = Vec::new();
    for side in [Side::Left, Side::Right] {
        let xs: Vec<LFormula> = a.side(side).iter().map(LFormula::normalized).collect();
        let ys: Vec<LFormula> = b.side(side).iter().map(LFormula::normalized).collect();
        if xs.len() != ys.len() {
            return None;
        }
        let mut used = vec![false; ys.len()];
        let mut assigned = vec![None; xs.len()];
        for i in 0..xs.len() {
            if xs[i] == ys[i] {
                used[i] = true;
                assigned[i] = Some(i);
            }
        }
        for i in 0..xs.len() {
            if assigned[i].is_some() {
                continue;
            }
            let j = (0..ys.len()).find(|&j| !used[j] && xs[i] == ys[j])?;
            used[j] = true;
            assigned[i] = Some(j);
        }
        for (i, j) in assigned.into_iter().enumerate() {
            out.push((Occ { side, index: i }, Occ { side, index: j.unwrap() }));
        }
    }
    Some(out)
}

/// Rule whose formulas carry no labels: conclusion and premises as `(left, right)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlainRule {
    pub conclusion: (Vec<Formula>, Vec<Formula>),
    pub premises: Vec<(Vec<Formula>, Vec<Formula>)>,
}

impl PlainRule {
    pub fn formulas(&self) -> Vec<Formula> {
        let mut out: Vec<Formula> = self.conclusion.0.iter().chain(&self.conclusion.1).cloned().collect();
        for (l, r) in &self.premises {
            out.extend(l.iter().chain(r).cloned());
        }
        out
    }

    /// `[a;b]phi` on the right from `[a][b]phi`, with context.
    pub fn seq_composition(a: Program, b: Program, phi: Formula, gamma: Vec<Formula>, delta: Vec<Formula>) -> PlainRule {
        let whole = Formula::boxed(Program::seq(a.clone(), b.clone()), phi.clone());
        let split = Formula::boxed(a, Formula::boxed(b, phi));
        let mut right = vec![whole];
        right.extend(delta.iter().cloned());
        let mut prem = vec![split];
        prem.extend(delta);
        PlainRule {
            conclusion: (gamma.clone(), right),
            premises: vec![(gamma, prem)],
        }
    }

    /// `[a]phi |- [a]psi` from `phi |- psi`.
    pub fn generalization(a: Program, phi: Formula, psi: Formula) -> PlainRule {
        PlainRule {
            conclusion: (vec![Formula::boxed(a.clone(), phi.clone())], vec![Formula::boxed(a, psi.clone())]),
            premises: vec![(vec![phi], vec![psi])],
        }
    }
}

/// A plain rule with every formula labeled by the same store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedRule {
    pub label: Label,
    pub conclusion: Sequent,
    pub premises: Vec<Sequent>,
}

/// Labels every formula of a sound plain rule with `sigma`, provided `sigma`
/// is free for all of them.
pub fn lift_rule(rule: &PlainRule, sigma: &Store) -> Result<LiftedRule, KernelError> {
    let label = Label::Store(sigma.clone());
    if !is_free_label(sigma, &rule.formulas()) {
        return Err(KernelError::FreenessViolation { label: label.to_string() });
    }
    let side = |fs: &[Formula]| fs.iter().map(|f| lf(&label, f.clone())).collect::<Vec<_>>();
    let seq = |(l, r): &(Vec<Formula>, Vec<Formula>)| Sequent::new(side(l), side(r));
    Ok(LiftedRule {
        conclusion: seq(&rule.conclusion),
        premises: rule.premises.iter().map(seq).collect(),
        label: label.clone(),
    })
}

/// The rules that split a goal on an undecided guard `l : g`: a cut on
/// `l : g || !g`, the weakenings and close that discharge the lemma, and the
/// disjunction split on the cut formula in the second premise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseSplit {
    pub cut: Rule,
    /// Applied in order to the first premise of the cut.
    pub lemma: Vec<Rule>,
    /// Applied to the second premise of the cut.
    pub split: Rule,
}

pub fn guard_case_split(goal: &Sequent, guard: &LFormula) -> Option<CaseSplit> {
    let (l, g) = guard.as_labeled()?;
    let cut = LFormula::Labeled(l.clone(), Formula::or(g.clone(), Formula::not(g.clone())));
    let mut lemma = Vec::new();
    for i in (0..goal.left.len()).rev() {
        if !goal.left[i].is_non_dynamic() {
            lemma.push(Rule::WkL(i));
        }
    }
    for i in (0..goal.right.len()).rev() {
        if !goal.right[i].is_non_dynamic() {
            lemma.push(Rule::WkR(i));
        }
    }
    lemma.push(Rule::TerClose);
    Some(CaseSplit {
        cut: Rule::Cut { formula: cut },
        lemma,
        split: Rule::OrL(goal.left.len()),
    })
}

/// Unfolds disjunction and implication into negation and conjunction.
fn definitional(f: &Formula) -> Formula {
    match f {
        Formula::Or(a, b) => Formula::not(Formula::and(Formula::not((**a).clone()), Formula::not((**b).clone()))),
        Formula::Imp(a, b) => Formula::not(Formula::and((**a).clone(), Formula::not((**b).clone()))),
        other => other.clone(),
    }
}

/// Replays a derived propositional rule through the primitive negation and
/// conjunction rules, after unfolding the target by definition. Returns the
/// resulting open premises.
pub fn expand_derived(inst: &Instantiation, oracle: &Oracle, goal: &Sequent, rule: &Rule) -> Result<Vec<Sequent>, KernelError> {
    let occ = match rule {
        Rule::OrL(i) | Rule::ImpL(i) => Occ::left(*i),
        Rule::OrR(i) | Rule::ImpR(i) => Occ::right(*i),
        _ => return Err(not_applicable(rule.id(), "not a derived propositional rule")),
    };
    let (l, f) = labeled(goal, rule.id(), occ)?;
    let mut start = goal.clone();
    start.side_mut(occ.side)[occ.index] = lf(l, definitional(f));
    let ap = |s: &Sequent, r: Rule| -> Result<Vec<Sequent>, KernelError> {
        Ok(apply_rule(inst, oracle, s, &r)?.premises.into_iter().map(|p| p.sequent).collect())
    };
    let one = |mut v: Vec<Sequent>| v.remove(0);
    let (j, k) = (goal.right.len() - usize::from(occ.side == Side::Right), goal.left.len() - usize::from(occ.side == Side::Left));
    match rule {
        Rule::OrL(i) => {
            // !(!a & !b) on the left
            let p = one(ap(&start, Rule::NegL(*i))?);
            let mut out = Vec::new();
            for q in ap(&p, Rule::AndR(j))? {
                out.push(one(ap(&q, Rule::NegR(j))?));
            }
            Ok(out)
        }
        Rule::ImpL(i) => {
            // !(a & !b) on the left
            let p = one(ap(&start, Rule::NegL(*i))?);
            let mut branches = ap(&p, Rule::AndR(j))?;
            let second = branches.pop().unwrap();
            branches.push(one(ap(&second, Rule::NegR(j))?));
            Ok(branches)
        }
        Rule::ImpR(i) => {
            // !(a & !b) on the right
            let p = one(ap(&start, Rule::NegR(*i))?);
            let q = one(ap(&p, Rule::AndL(k))?);
            Ok(vec![one(ap(&q, Rule::NegL(k + 1))?)])
        }
        Rule::OrR(i) => {
            // !(!a & !b) on the right
            let p = one(ap(&start, Rule::NegR(*i))?);
            let q = one(ap(&p, Rule::AndL(k))?);
            let r = one(ap(&q, Rule::NegL(k + 1))?);
            Ok(vec![one(ap(&r, Rule::NegL(k))?)])
        }
        _ => unreachable!(),
    }
}
