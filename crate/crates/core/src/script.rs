//! Proof scripts: one command per line, each applied to the current open goal.

use thiserror::Error;

use crate::cert::parse_termination;
use crate::cyclic::{GraphError, NodeId, ProofGraph};
use crate::formula::Formula;
use crate::kernel::{apply_rule, guard_case_split, KernelError, Rule};
use crate::label::Label;
use crate::oracle::Oracle;
use crate::parse::{Env, PResult, Parser};
use crate::program::Program;
use crate::sequent::{LFormula, Occ, Sequent, Side};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("script line {line} (`{command}`): {message}")]
pub struct ScriptError {
    pub line: usize,
    pub command: String,
    pub message: String,
}

/// Applies `rule` at `node`; whenever a guard is undecided, splits on it first
/// and retries in both branches. Returns the open goals created.
pub fn apply_with_split(g: &mut ProofGraph, oracle: &Oracle, node: NodeId, rule: &Rule) -> Result<Vec<NodeId>, GraphError> {
    let seq = g.node(node).ok_or(GraphError::NoSuchNode(node))?.sequent.clone();
    match apply_rule(&g.inst, oracle, &seq, rule) {
        Ok(app) => g.attach(node, app),
        Err(KernelError::MissingExhaustiveness(guard)) => {
            let split = guard_case_split(&seq, &guard).ok_or_else(|| GraphError::Kernel {
                node,
                source: KernelError::MissingExhaustiveness(guard.clone()),
            })?;
            let kids = g.apply(oracle, node, &split.cut)?;
            let mut lemma = kids[0];
            for r in &split.lemma {
                let next = g.apply(oracle, lemma, r)?;
                if let Some(&k) = next.first() {
                    lemma = k;
                }
            }
            let branches = g.apply(oracle, kids[1], &split.split)?;
            let mut open = Vec::new();
            for b in branches {
                open.extend(apply_with_split(g, oracle, b, rule)?);
            }
            Ok(open)
        }
        Err(source) => Err(GraphError::Kernel { node, source }),
    }
}

fn first_occ(s: &Sequent, sides: &[Side], pred: impl Fn(&LFormula) -> bool) -> Option<Occ> {
    for &side in sides {
        if let Some(i) = s.side(side).iter().position(&pred) {
            return Some(Occ { side, index: i });
        }
    }
    None
}

fn formula_is(pred: impl Fn(&Formula) -> bool) -> impl Fn(&LFormula) -> bool {
    move |lf| lf.as_labeled().is_some_and(|(_, f)| pred(f))
}

fn is_box_step(f: &Formula) -> bool {
    matches!(f, Formula::Box(p, _) if !p.is_ter())
}

fn is_dia_step(f: &Formula) -> bool {
    matches!(f, Formula::Dia(p, _) if !p.is_ter())
}

/// Executes scripts against a proof graph.
pub struct ScriptRunner<'a> {
    env: &'a Env,
    oracle: &'a Oracle,
    pub graph: ProofGraph,
    focus: Option<NodeId>,
}

type Fail = String;

impl<'a> ScriptRunner<'a> {
    pub fn new(env: &'a Env, oracle: &'a Oracle, root: Sequent) -> ScriptRunner<'a> {
        ScriptRunner {
            env,
            oracle,
            graph: ProofGraph::new(env.inst, root),
            focus: None,
        }
    }

    /// The goal the next command applies to.
    pub fn current(&self) -> Option<NodeId> {
        if let Some(f) = self.focus {
            if let Some(k) = self.open_below(f) {
                return Some(k);
            }
        }
        self.graph.open_goals_dfs().first().copied()
    }

    fn open_below(&self, id: NodeId) -> Option<NodeId> {
        let mut stack = vec![id];
        while let Some(k) = stack.pop() {
            let n = self.graph.node(k)?;
            if matches!(n.state, crate::cyclic::NodeState::Open) {
                return Some(k);
            }
            stack.extend(n.children.iter().rev());
        }
        None
    }

    /// Runs commands given as `(line number, text)`.
    pub fn run(&mut self, commands: &[(usize, String)]) -> Result<(), ScriptError> {
        for (line, text) in commands {
            let text = text.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            self.command(text).map_err(|message| ScriptError {
                line: *line,
                command: text.to_string(),
                message,
            })?;
        }
        Ok(())
    }

    pub fn command(&mut self, text: &str) -> Result<(), Fail> {
        let env = self.env;
        let mut p = Parser::new(text, env).map_err(|e| e.to_string())?;
        let word = p.word().map_err(|e| e.to_string())?;
        if word == "goal" {
            let id = p.number().map_err(|e| e.to_string())?;
            p.expect_end().map_err(|e| e.to_string())?;
            match self.graph.node(id) {
                Some(n) if matches!(n.state, crate::cyclic::NodeState::Open) => {
                    self.focus = Some(id);
                    return Ok(());
                }
                Some(_) => return Err(format!("node {id} is not open")),
                None => return Err(format!("no node {id}")),
            }
        }
        let node = self.current().ok_or("no open goals remain")?;
        let seq = self.graph.node(node).unwrap().sequent.clone();
        self.focus = Some(node);
        let pe = |e: crate::parse::ParseError| e.to_string();
        let ge = |e: GraphError| e.to_string();
        let need = |o: Option<Occ>, what: &str| o.ok_or_else(|| format!("the goal has no {what}"));
        match word.as_str() {
            "boxR" => {
                let split = p.eat_word("split");
                let occ = match at(&mut p).map_err(pe)? {
                    Some(o) => o,
                    None => need(first_occ(&seq, &[Side::Right], formula_is(is_box_step)), "box formula on the right")?,
                };
                p.expect_end().map_err(pe)?;
                let rule = Rule::BoxR { index: occ.index };
                if split {
                    apply_with_split(&mut self.graph, self.oracle, node, &rule).map_err(ge)?;
                } else {
                    self.graph.apply(self.oracle, node, &rule).map_err(ge)?;
                }
            }
            "boxL" | "dia" => {
                let via = if p.eat_word("via") { Some(transition(&mut p).map_err(pe)?) } else { None };
                let termination = if p.peek_word().is_some_and(|w| w == "variant" || w == "unroll") {
                    Some(parse_termination(&mut p).map_err(pe)?)
                } else {
                    None
                };
                let explicit = at(&mut p).map_err(pe)?;
                p.expect_end().map_err(pe)?;
                let matches_src = |lf: &LFormula, boxed: bool| match (lf.as_labeled(), &via) {
                    (Some((l, f)), Some(((src_p, src_l), _))) => {
                        let prog = match f {
                            Formula::Box(q, _) if boxed => q,
                            Formula::Dia(q, _) if !boxed => q,
                            _ => return false,
                        };
                        **prog == *src_p && l == src_l
                    }
                    (Some((_, f)), None) => {
                        if boxed {
                            is_box_step(f)
                        } else {
                            is_dia_step(f)
                        }
                    }
                    _ => false,
                };
                let to = via.as_ref().map(|(_, t)| t.clone());
                let rule = if word == "boxL" {
                    let occ = match explicit {
                        Some(o) => o,
                        None => need(first_occ(&seq, &[Side::Left], |lf| matches_src(lf, true)), "matching box formula on the left")?,
                    };
                    Rule::BoxL {
                        index: occ.index,
                        to,
                        termination,
                    }
                } else {
                    let occ = match explicit {
                        Some(o) => o,
                        None => need(
                            first_occ(&seq, &[Side::Right, Side::Left], |lf| matches_src(lf, false)),
                            "matching diamond formula",
                        )?,
                    };
                    Rule::DiaStep { occ, to, termination }
                };
                apply_with_split(&mut self.graph, self.oracle, node, &rule).map_err(ge)?;
            }
            "boxTer" | "diaTer" => {
                let boxed = word == "boxTer";
                let occ = match at(&mut p).map_err(pe)? {
                    Some(o) => o,
                    None => need(
                        first_occ(&seq, &[Side::Right, Side::Left], formula_is(|f| match f {
                            Formula::Box(q, _) => boxed && q.is_ter(),
                            Formula::Dia(q, _) => !boxed && q.is_ter(),
                            _ => false,
                        })),
                        "modality over the terminated program",
                    )?,
                };
                p.expect_end().map_err(pe)?;
                let rule = if boxed {
                    Rule::BoxTer { occ, wrap: false }
                } else {
                    Rule::DiaTer { occ, wrap: false }
                };
                self.graph.apply(self.oracle, node, &rule).map_err(ge)?;
            }
            "close" => {
                p.expect_end().map_err(pe)?;
                self.graph.apply(self.oracle, node, &Rule::TerClose).map_err(ge)?;
            }
            "ax" => {
                p.expect_end().map_err(pe)?;
                let pair = seq
                    .left
                    .iter()
                    .enumerate()
                    .find_map(|(i, a)| seq.right.iter().position(|b| a.equiv(b)).map(|j| (i, j)))
                    .ok_or("no formula occurs on both sides")?;
                self.graph
                    .apply(self.oracle, node, &Rule::Ax { left: pair.0, right: pair.1 })
                    .map_err(ge)?;
            }
            "cut" => {
                let formula = p.lformula().map_err(pe)?;
                p.expect_end().map_err(pe)?;
                self.graph.apply(self.oracle, node, &Rule::Cut { formula }).map_err(ge)?;
            }
            "sub" => {
                if !p.eat_word("template") {
                    return Err("expected `sub template <sequent> under [..]`".into());
                }
                let template = sequent_until(&mut p, "under").map_err(pe)?;
                let subst = p.subst().map_err(pe)?;
                p.expect_end().map_err(pe)?;
                self.graph
                    .apply(self.oracle, node, &Rule::Sub { template, subst })
                    .map_err(ge)?;
            }
            "backlink" => {
                if !p.eat_word("to") {
                    return Err("expected `backlink to <node> [via [..]]`".into());
                }
                let companion = p.number().map_err(pe)?;
                let subst = if p.eat_word("via") { Some(p.subst().map_err(pe)?) } else { None };
                p.expect_end().map_err(pe)?;
                self.graph.add_backlink(node, companion, subst).map_err(ge)?;
            }
            "wkL" | "wkR" => {
                let i = p.number().map_err(pe)?;
                p.expect_end().map_err(pe)?;
                let rule = if word == "wkL" { Rule::WkL(i) } else { Rule::WkR(i) };
                self.graph.apply(self.oracle, node, &rule).map_err(ge)?;
            }
            "con" => {
                let side = match p.word().map_err(pe)?.as_str() {
                    "left" | "L" => Side::Left,
                    "right" | "R" => Side::Right,
                    s => return Err(format!("unknown side `{s}`")),
                };
                let index = p.number().map_err(pe)?;
                let merge = if p.at_end() { None } else { Some(p.number().map_err(pe)?) };
                p.expect_end().map_err(pe)?;
                self.graph
                    .apply(self.oracle, node, &Rule::Con { side, index, merge })
                    .map_err(ge)?;
            }
            "negR" | "negL" | "andR" | "andL" | "orL" | "orR" | "impR" | "impL" | "tsufR1" | "tsufR2" | "tsufL"
            | "slframe" => {
                let side = if matches!(word.as_str(), "negL" | "andL" | "orL" | "impL" | "tsufL") {
                    Side::Left
                } else {
                    Side::Right
                };
                let shape: fn(&Formula) -> bool = match word.as_str() {
                    "negR" | "negL" => |f| matches!(f, Formula::Not(_)),
                    "andR" | "andL" => |f| matches!(f, Formula::And(..)),
                    "orL" | "orR" => |f| matches!(f, Formula::Or(..)),
                    "impR" | "impL" => |f| matches!(f, Formula::Imp(..)),
                    "slframe" => |f| matches!(f, Formula::Sep(..)),
                    _ => |f| matches!(f, Formula::Suf(..)),
                };
                let i = if p.at_end() {
                    need(first_occ(&seq, &[side], formula_is(shape)), "formula of that shape")?.index
                } else {
                    p.number().map_err(pe)?
                };
                p.expect_end().map_err(pe)?;
                let rule = match word.as_str() {
                    "negR" => Rule::NegR(i),
                    "negL" => Rule::NegL(i),
                    "andR" => Rule::AndR(i),
                    "andL" => Rule::AndL(i),
                    "orL" => Rule::OrL(i),
                    "orR" => Rule::OrR(i),
                    "impR" => Rule::ImpR(i),
                    "impL" => Rule::ImpL(i),
                    "tsufR1" => Rule::TempSufR1(i),
                    "tsufR2" => Rule::TempSufR2(i),
                    "tsufL" => Rule::TempSufL(i),
                    _ => Rule::SLFrame { index: i },
                };
                self.graph.apply(self.oracle, node, &rule).map_err(ge)?;
            }
            "le" => {
                let index = p.number().map_err(pe)?;
                let formula = p.formula().map_err(pe)?;
                p.expect_end().map_err(pe)?;
                self.graph.apply(self.oracle, node, &Rule::LE { index, formula }).map_err(ge)?;
            }
            "lift" => {
                let kind = p.word().map_err(pe)?;
                let label = if p.at_end() { None } else { Some(p.label().map_err(pe)?) };
                p.expect_end().map_err(pe)?;
                let labeled = |lf: &LFormula| label.as_ref().map_or(true, |l| lf.as_labeled().is_some_and(|(m, _)| m == l));
                let rule = match kind.as_str() {
                    "seq" => {
                        let occ = need(
                            first_occ(&seq, &[Side::Right, Side::Left], |lf| {
                                labeled(lf) && formula_is(|f| matches!(f, Formula::Box(q, _) if matches!(**q, Program::Seq(..))))(lf)
                            }),
                            "box formula over a sequence",
                        )?;
                        Rule::LiftedSeq { occ }
                    }
                    "gen" => {
                        if !seq.left.iter().chain(&seq.right).all(labeled) {
                            return Err("the goal's formulas carry a different label".into());
                        }
                        Rule::LiftedGen
                    }
                    other => return Err(format!("unknown lifted rule `{other}`")),
                };
                self.graph.apply(self.oracle, node, &rule).map_err(ge)?;
            }
            "slstar" => {
                let part = p.heap().map_err(pe)?;
                let explicit = at(&mut p).map_err(pe)?;
                p.expect_end().map_err(pe)?;
                let index = match explicit {
                    Some(o) => o.index,
                    None => need(first_occ(&seq, &[Side::Right], formula_is(|f| matches!(f, Formula::Sep(..)))), "separating conjunction on the right")?.index,
                };
                self.graph
                    .apply(self.oracle, node, &Rule::SLStar { index, part })
                    .map_err(ge)?;
            }
            "tfirst" => {
                let occ = match at(&mut p).map_err(pe)? {
                    Some(o) => o,
                    None => need(
                        first_occ(&seq, &[Side::Right, Side::Left], formula_is(|f| matches!(f, Formula::First(_)))),
                        "first-state formula",
                    )?,
                };
                p.expect_end().map_err(pe)?;
                self.graph.apply(self.oracle, node, &Rule::TempFirst { occ }).map_err(ge)?;
            }
            other => return Err(format!("unknown command `{other}`")),
        }
        Ok(())
    }
}

/// Optional `at L<i>` / `at R<i>`.
fn at(p: &mut Parser) -> PResult<Option<Occ>> {
    if !p.eat_word("at") {
        return Ok(None);
    }
    let w = p.word()?;
    let (side, rest) = w.split_at(1);
    let index = rest.parse().ok();
    match (side, index) {
        ("L", Some(i)) => Ok(Some(Occ::left(i))),
        ("R", Some(i)) => Ok(Some(Occ::right(i))),
        _ => p.fail(format!("expected an occurrence like L0 or R1, found `{w}`")),
    }
}

/// `(<prog>, <label>) -> (<prog>, <label>)`
fn transition(p: &mut Parser) -> PResult<((Program, Label), (Program, Label))> {
    let pair = |p: &mut Parser| -> PResult<(Program, Label)> {
        p.expect_symbol("(")?;
        let prog = p.program()?;
        p.expect_symbol(",")?;
        let label = p.label()?;
        p.expect_symbol(")")?;
        Ok((prog, label))
    };
    let from = pair(p)?;
    p.expect_symbol("->")?;
    let to = pair(p)?;
    Ok((from, to))
}

/// Parses a sequent that is followed by the keyword `stop`.
fn sequent_until(p: &mut Parser, stop: &str) -> PResult<Sequent> {
    let mut left = Vec::new();
    while !p.eat_symbol("|-") {
        left.push(p.lformula()?);
        if !p.eat_symbol(",") {
            p.expect_symbol("|-")?;
            break;
        }
    }
    let mut right = Vec::new();
    if !p.eat_word(stop) {
        loop {
            right.push(p.lformula()?);
            if p.eat_word(stop) {
                break;
            }
            p.expect_symbol(",")?;
        }
    }
    Ok(Sequent::new(left, right))
}
