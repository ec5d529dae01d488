//! Proof certificates: a JSON rendering of a proof graph that `check_proof`
//! replays without trusting anything recorded in it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cyclic::{Backlink, Node, NodeState, ProofGraph};
use crate::kernel::{Obligation, Premise, Rule, RuleApplication, RuleId, CpPair};
use crate::oracle::{Backend, Verdict};
use crate::parse::{Env, Parser};
use crate::program::{InstKind, Instantiation, Program};
use crate::sequent::{Occ, Sequent, Side};
use crate::step::TerminationCert;
use crate::label::Label;
use crate::subst::Subst;

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub version: u32,
    pub instantiation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alloc_base: Option<i128>,
    pub nodes: Vec<CertNode>,
    pub backlinks: Vec<CertBacklink>,
    pub obligations: Vec<CertObligation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertNode {
    pub id: usize,
    pub sequent: String,
    pub rule: Option<String>,
    #[serde(default)]
    pub params: Value,
    pub children: Vec<usize>,
    /// `[from, to]` flat occurrence indices (left side first) of progressive pairs.
    #[serde(default)]
    pub progressive: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertBacklink {
    pub bud: usize,
    pub companion: usize,
    pub subst: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertObligation {
    pub node: usize,
    pub sequent: String,
    pub verdict: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("malformed certificate: {0}")]
    Json(String),
    #[error("unsupported certificate version {0}")]
    Version(u32),
    #[error("node {node}: {message}")]
    Node { node: usize, message: String },
    #[error("{0}")]
    Structure(String),
}

fn flat(s: &Sequent, o: Occ) -> usize {
    match o.side {
        Side::Left => o.index,
        Side::Right => s.left.len() + o.index,
    }
}

fn unflat(s: &Sequent, i: usize) -> Occ {
    if i < s.left.len() {
        Occ::left(i)
    } else {
        Occ::right(i - s.left.len())
    }
}

fn occ_text(o: Occ) -> String {
    o.to_string()
}

fn parse_occ(s: &str) -> Option<Occ> {
    let (side, rest) = s.split_at(1.min(s.len()));
    let index = rest.parse().ok()?;
    match side {
        "L" => Some(Occ::left(index)),
        "R" => Some(Occ::right(index)),
        _ => None,
    }
}

fn transition_json(to: &Option<(Program, Label)>) -> Value {
    match to {
        Some((p, l)) => json!({"program": p.to_string(), "label": l.to_string()}),
        None => Value::Null,
    }
}

fn termination_json(t: &Option<TerminationCert>) -> Value {
    match t {
        Some(c) => Value::String(c.to_string()),
        None => Value::Null,
    }
}

fn heap_text(h: &BTreeMap<i128, i128>) -> String {
    let cells: Vec<String> = h.iter().map(|(a, v)| format!("{a} -> {v}")).collect();
    format!("{{{}}}", cells.join(", "))
}

pub fn rule_params(rule: &Rule) -> Value {
    match rule {
        Rule::BoxR { index } => json!({ "index": index }),
        Rule::BoxL { index, to, termination } => {
            json!({ "index": index, "to": transition_json(to), "termination": termination_json(termination) })
        }
        Rule::BoxTer { occ, wrap } | Rule::DiaTer { occ, wrap } => json!({ "occ": occ_text(*occ), "wrap": wrap }),
        Rule::TerClose | Rule::LiftedGen => json!({}),
        Rule::Sub { template, subst } => {
            let map: BTreeMap<String, String> = subst.map().iter().map(|(x, e)| (x.clone(), e.to_string())).collect();
            json!({ "template": template.to_string(), "subst": map })
        }
        Rule::Ax { left, right } => json!({ "left": left, "right": right }),
        Rule::Cut { formula } => json!({ "formula": formula.to_string() }),
        Rule::WkL(i)
        | Rule::WkR(i)
        | Rule::NegR(i)
        | Rule::NegL(i)
        | Rule::AndR(i)
        | Rule::AndL(i)
        | Rule::OrL(i)
        | Rule::OrR(i)
        | Rule::ImpR(i)
        | Rule::ImpL(i)
        | Rule::TempSufR1(i)
        | Rule::TempSufR2(i)
        | Rule::TempSufL(i)
        | Rule::SLFrame { index: i } => json!({ "index": i }),
        Rule::Con { side, index, merge } => json!({ "side": side.to_string(), "index": index, "merge": merge }),
        Rule::DiaStep { occ, to, termination } => {
            json!({ "occ": occ_text(*occ), "to": transition_json(to), "termination": termination_json(termination) })
        }
        Rule::LE { index, formula } => json!({ "index": index, "formula": formula.to_string() }),
        Rule::LiftedSeq { occ } | Rule::TempFirst { occ } => json!({ "occ": occ_text(*occ) }),
        Rule::SLStar { index, part } => json!({ "index": index, "part": heap_text(part) }),
    }
}

struct Params<'a> {
    map: &'a Map<String, Value>,
    env: &'a Env,
}

impl Params<'_> {
    fn get(&self, k: &str) -> Result<&Value, String> {
        self.map.get(k).ok_or_else(|| format!("missing parameter `{k}`"))
    }

    fn usize(&self, k: &str) -> Result<usize, String> {
        self.get(k)?
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| format!("parameter `{k}` must be a non-negative integer"))
    }

    fn str(&self, k: &str) -> Result<&str, String> {
        self.get(k)?.as_str().ok_or_else(|| format!("parameter `{k}` must be a string"))
    }

    fn bool(&self, k: &str) -> Result<bool, String> {
        self.get(k)?.as_bool().ok_or_else(|| format!("parameter `{k}` must be a boolean"))
    }

    fn occ(&self, k: &str) -> Result<Occ, String> {
        let s = self.str(k)?;
        parse_occ(s).ok_or_else(|| format!("bad occurrence `{s}`"))
    }

    fn parse<T>(&self, text: &str, f: impl FnOnce(&mut Parser) -> crate::parse::PResult<T>) -> Result<T, String> {
        let mut p = Parser::new(text, self.env).map_err(|e| e.to_string())?;
        let v = f(&mut p).map_err(|e| e.to_string())?;
        p.expect_end().map_err(|e| e.to_string())?;
        Ok(v)
    }

    fn transition(&self, k: &str) -> Result<Option<(Program, Label)>, String> {
        match self.map.get(k) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Object(o)) => {
                let prog = o.get("program").and_then(Value::as_str).ok_or("transition needs `program`")?;
                let label = o.get("label").and_then(Value::as_str).ok_or("transition needs `label`")?;
                Ok(Some((self.parse(prog, |p| p.program())?, self.parse(label, |p| p.label())?)))
            }
            Some(_) => Err(format!("parameter `{k}` must be an object")),
        }
    }

    fn termination(&self, k: &str) -> Result<Option<TerminationCert>, String> {
        match self.map.get(k) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => self.parse(s, parse_termination).map(Some),
            Some(_) => Err(format!("parameter `{k}` must be a string")),
        }
    }
}

/// `unroll <k>` or `variant <expr> [invariant <formula>]`.
pub fn parse_termination(p: &mut Parser) -> crate::parse::PResult<TerminationCert> {
    if p.eat_word("unroll") {
        let k = p.number()?;
        return Ok(TerminationCert::Unroll(k as usize));
    }
    if !p.eat_word("variant") {
        return p.fail("expected `unroll` or `variant`");
    }
    let variant = p.expr()?;
    let invariant = if p.eat_word("invariant") { Some(p.formula()?) } else { None };
    Ok(TerminationCert::Variant { variant, invariant })
}

pub fn parse_rule(id: RuleId, params: &Value, env: &Env) -> Result<Rule, String> {
    let empty = Map::new();
    let map = match params {
        Value::Object(m) => m,
        Value::Null => &empty,
        _ => return Err("params must be an object".into()),
    };
    let p = Params { map, env };
    Ok(match id {
        RuleId::BoxR => Rule::BoxR { index: p.usize("index")? },
        RuleId::BoxL => Rule::BoxL {
            index: p.usize("index")?,
            to: p.transition("to")?,
            termination: p.termination("termination")?,
        },
        RuleId::BoxTer => Rule::BoxTer {
            occ: p.occ("occ")?,
            wrap: p.bool("wrap")?,
        },
        RuleId::DiaTer => Rule::DiaTer {
            occ: p.occ("occ")?,
            wrap: p.bool("wrap")?,
        },
        RuleId::TerClose => Rule::TerClose,
        RuleId::LiftedGen => Rule::LiftedGen,
        RuleId::Sub => {
            let template = p.parse(p.str("template")?, |q| q.sequent())?;
            let Value::Object(m) = p.get("subst")? else {
                return Err("`subst` must be an object".into());
            };
            let mut map = BTreeMap::new();
            for (x, e) in m {
                let e = e.as_str().ok_or("substitution values must be strings")?;
                map.insert(x.clone(), p.parse(e, |q| q.expr())?);
            }
            Rule::Sub {
                template,
                subst: Subst::new(map),
            }
        }
        RuleId::Ax => Rule::Ax {
            left: p.usize("left")?,
            right: p.usize("right")?,
        },
        RuleId::Cut => Rule::Cut {
            formula: p.parse(p.str("formula")?, |q| q.lformula())?,
        },
        RuleId::WkL => Rule::WkL(p.usize("index")?),
        RuleId::WkR => Rule::WkR(p.usize("index")?),
        RuleId::NegR => Rule::NegR(p.usize("index")?),
        RuleId::NegL => Rule::NegL(p.usize("index")?),
        RuleId::AndR => Rule::AndR(p.usize("index")?),
        RuleId::AndL => Rule::AndL(p.usize("index")?),
        RuleId::OrL => Rule::OrL(p.usize("index")?),
        RuleId::OrR => Rule::OrR(p.usize("index")?),
        RuleId::ImpR => Rule::ImpR(p.usize("index")?),
        RuleId::ImpL => Rule::ImpL(p.usize("index")?),
        RuleId::TempSufR1 => Rule::TempSufR1(p.usize("index")?),
        RuleId::TempSufR2 => Rule::TempSufR2(p.usize("index")?),
        RuleId::TempSufL => Rule::TempSufL(p.usize("index")?),
        RuleId::SLFrame => Rule::SLFrame { index: p.usize("index")? },
        RuleId::Con => Rule::Con {
            side: match p.str("side")? {
                "left" => Side::Left,
                "right" => Side::Right,
                s => return Err(format!("bad side `{s}`")),
            },
            index: p.usize("index")?,
            merge: match map.get("merge") {
                None | Some(Value::Null) => None,
                Some(_) => Some(p.usize("merge")?),
            },
        },
        RuleId::DiaStep => Rule::DiaStep {
            occ: p.occ("occ")?,
            to: p.transition("to")?,
            termination: p.termination("termination")?,
        },
        RuleId::LE => Rule::LE {
            index: p.usize("index")?,
            formula: p.parse(p.str("formula")?, |q| q.formula())?,
        },
        RuleId::LiftedSeq => Rule::LiftedSeq { occ: p.occ("occ")? },
        RuleId::TempFirst => Rule::TempFirst { occ: p.occ("occ")? },
        RuleId::SLStar => Rule::SLStar {
            index: p.usize("index")?,
            part: p.parse(p.str("part")?, |q| q.heap())?,
        },
    })
}

pub fn to_certificate(g: &ProofGraph) -> Certificate {
    let mut nodes = Vec::new();
    let mut backlinks = Vec::new();
    let mut obligations = Vec::new();
    for n in g.nodes() {
        let (rule, params, progressive) = match &n.state {
            NodeState::Rule(app) => {
                let mut prog: Vec<[usize; 2]> = Vec::new();
                for (p, &c) in app.premises.iter().zip(&n.children) {
                    let child = &g.node(c).unwrap().sequent;
                    for pair in p.pairs.iter().filter(|x| x.progressive) {
                        let e = [flat(&n.sequent, pair.from), flat(child, pair.to)];
                        if !prog.contains(&e) {
                            prog.push(e);
                        }
                    }
                }
                for o in &app.obligations {
                    obligations.push(CertObligation {
                        node: n.id,
                        sequent: o.sequent.to_string(),
                        verdict: o.verdict.to_string(),
                    });
                }
                (Some(app.rule.id().name().to_string()), rule_params(&app.rule), prog)
            }
            NodeState::Bud(link) => {
                backlinks.push(CertBacklink {
                    bud: n.id,
                    companion: link.companion,
                    subst: link.subst.map().iter().map(|(x, e)| (x.clone(), e.to_string())).collect(),
                });
                (None, Value::Null, Vec::new())
            }
            NodeState::Open => (None, Value::Null, Vec::new()),
        };
        nodes.push(CertNode {
            id: n.id,
            sequent: n.sequent.to_string(),
            rule,
            params,
            children: n.children.clone(),
            progressive,
        });
    }
    Certificate {
        version: VERSION,
        instantiation: g.inst.kind.to_string(),
        alloc_base: (g.inst.kind == InstKind::Sl).then_some(g.inst.alloc_base),
        nodes,
        backlinks,
        obligations,
    }
}

pub fn to_json(g: &ProofGraph) -> String {
    serde_json::to_string_pretty(&to_certificate(g)).expect("certificates serialize")
}

fn recorded_verdict(text: &str) -> Verdict {
    if text.starts_with("valid") {
        Verdict::Valid(Backend::Syntactic)
    } else {
        Verdict::Unknown(text.to_string())
    }
}

/// Rebuilds the graph recorded in a certificate. Rules are parsed but not
/// replayed; premises are taken from the recorded child sequents.
pub fn from_certificate(c: &Certificate) -> Result<ProofGraph, CertError> {
    if c.version != VERSION {
        return Err(CertError::Version(c.version));
    }
    let kind: InstKind = c.instantiation.parse().map_err(|e: crate::program::UnknownInstantiation| CertError::Structure(e.to_string()))?;
    let mut inst = Instantiation::new(kind);
    if let Some(b) = c.alloc_base {
        inst.alloc_base = b;
    }
    let env = Env::new(inst);
    let node_err = |node: usize, message: String| CertError::Node { node, message };
    let mut sequents = BTreeMap::new();
    for n in &c.nodes {
        let mut p = Parser::new(&n.sequent, &env).map_err(|e| node_err(n.id, e.to_string()))?;
        let s = p.sequent().and_then(|s| p.expect_end().map(|_| s)).map_err(|e| node_err(n.id, e.to_string()))?;
        if sequents.insert(n.id, s).is_some() {
            return Err(CertError::Structure(format!("node {} listed twice", n.id)));
        }
    }
    let buds: BTreeMap<usize, &CertBacklink> = c.backlinks.iter().map(|b| (b.bud, b)).collect();
    if buds.len() != c.backlinks.len() {
        return Err(CertError::Structure("a bud has two back-links".into()));
    }
    let mut nodes = Vec::new();
    for n in &c.nodes {
        let seq = sequents[&n.id].clone();
        let state = match (&n.rule, buds.get(&n.id)) {
            (Some(_), Some(_)) => return Err(node_err(n.id, "a bud cannot carry a rule".into())),
            (None, Some(b)) => {
                if !n.children.is_empty() {
                    return Err(node_err(n.id, "a bud has no children".into()));
                }
                let mut map = BTreeMap::new();
                for (x, e) in &b.subst {
                    let mut p = Parser::new(e, &env).map_err(|e| node_err(n.id, e.to_string()))?;
                    let e = p.expr().and_then(|e| p.expect_end().map(|_| e)).map_err(|e| node_err(n.id, e.to_string()))?;
                    map.insert(x.clone(), e);
                }
                NodeState::Bud(Backlink {
                    companion: b.companion,
                    subst: Subst::new(map),
                    pairs: Vec::new(),
                })
            }
            (None, None) => NodeState::Open,
            (Some(name), None) => {
                let id = RuleId::from_name(name).ok_or_else(|| node_err(n.id, format!("unknown rule `{name}`")))?;
                let rule = parse_rule(id, &n.params, &env).map_err(|m| node_err(n.id, m))?;
                let mut premises = Vec::new();
                for &k in &n.children {
                    let child = sequents
                        .get(&k)
                        .ok_or_else(|| node_err(n.id, format!("unknown child {k}")))?;
                    let mut pairs = Vec::new();
                    for [a, b] in &n.progressive {
                        if *a >= seq.len() || *b >= child.len() {
                            return Err(node_err(n.id, format!("progressive pair [{a}, {b}] out of range")));
                        }
                        pairs.push(CpPair {
                            from: unflat(&seq, *a),
                            to: unflat(child, *b),
                            progressive: true,
                        });
                    }
                    premises.push(Premise {
                        sequent: child.clone(),
                        pairs,
                    });
                }
                let mut app = RuleApplication {
                    rule,
                    premises,
                    obligations: Vec::new(),
                    termination: None,
                    transitions: Vec::new(),
                };
                for o in c.obligations.iter().filter(|o| o.node == n.id) {
                    let mut p = Parser::new(&o.sequent, &env).map_err(|e| node_err(n.id, e.to_string()))?;
                    let s = p.sequent().and_then(|s| p.expect_end().map(|_| s)).map_err(|e| node_err(n.id, e.to_string()))?;
                    app.obligations.push(Obligation {
                        sequent: s,
                        verdict: recorded_verdict(&o.verdict),
                    });
                }
                NodeState::Rule(app)
            }
        };
        nodes.push(Node {
            id: n.id,
            sequent: seq,
            parent: None,
            children: n.children.clone(),
            state,
        });
    }
    for o in &c.obligations {
        if !sequents.contains_key(&o.node) {
            return Err(CertError::Structure(format!("obligation for unknown node {}", o.node)));
        }
    }
    ProofGraph::from_nodes(inst, nodes).map_err(CertError::Structure)
}

pub fn from_json(text: &str) -> Result<ProofGraph, CertError> {
    let c: Certificate = serde_json::from_str(text).map_err(|e| CertError::Json(e.to_string()))?;
    from_certificate(&c)
}
