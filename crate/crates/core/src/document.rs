//! Input documents: an instantiation header, named definitions, goals, proof
//! scripts and execution directives.
//!
//! ```text
//! instantiation: wp
//! program W = while n > 0 do s := s + n; n := n - 1 end
//! label s1 = {n -> N, s -> 0}
//! goal g: s1 : n >= 0 |- s1 : [W](s = ((N + 1)*N)/2)
//! script g:
//!   boxR split
//!   ...
//! end
//! ```
//!
//! Lines starting with whitespace continue the previous definition. A script
//! block runs until a line holding only `end`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cert::parse_termination;
use crate::formula::Formula;
use crate::parse::{Env, ParseError, Parser};
use crate::program::{InstKind, Instantiation, Program};
use crate::sequent::Sequent;
use crate::step::TerminationCert;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct DocError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct Goal {
    pub name: String,
    pub sequent: Sequent,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct Script {
    pub goal: String,
    pub line: usize,
    pub commands: Vec<(usize, String)>,
}

/// A termination certificate offered for a loop; `site` is the loop's 1-based
/// position among the loops of the goal, or any loop when absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariantHint {
    pub site: Option<usize>,
    pub cert: TerminationCert,
}

#[derive(Clone, Debug)]
pub struct Document {
    pub env: Env,
    pub options: BTreeMap<String, String>,
    pub goals: Vec<Goal>,
    pub scripts: Vec<Script>,
    /// Program executed by `exec`.
    pub run: Option<Program>,
    /// Formulas evaluated on the execution path by `exec`.
    pub observe: Vec<Formula>,
    pub variants: Vec<VariantHint>,
}

impl Document {
    pub fn inst(&self) -> Instantiation {
        self.env.inst
    }

    pub fn script_for(&self, goal: &str) -> Option<&Script> {
        self.scripts.iter().find(|s| s.goal == goal)
    }
}

/// Joins continuation lines; returns `(first line number, text)` items.
fn logical_lines(src: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    let mut in_script = false;
    for (i, raw) in src.lines().enumerate() {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let indented = line.starts_with(' ') || line.starts_with('\t');
        if in_script {
            out.push((i + 1, line.trim().to_string()));
            if line.trim() == "end" {
                in_script = false;
            }
            continue;
        }
        if indented && !out.is_empty() {
            let last = out.last_mut().unwrap();
            last.1.push(' ');
            last.1.push_str(line.trim());
            continue;
        }
        if line.trim_start().starts_with("script ") {
            in_script = true;
        }
        out.push((i + 1, line.trim().to_string()));
    }
    out
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(k) => &line[..k],
        None => line,
    }
}

fn err(line: usize, message: impl Into<String>) -> DocError {
    DocError {
        line,
        message: message.into(),
    }
}

fn perr(line: usize, e: ParseError) -> DocError {
    err(line, e.to_string())
}

fn whole<T>(src: &str, env: &Env, line: usize, f: impl FnOnce(&mut Parser) -> crate::parse::PResult<T>) -> Result<T, DocError> {
    let mut p = Parser::new(src, env).map_err(|e| perr(line, e))?;
    let v = f(&mut p).map_err(|e| perr(line, e))?;
    p.expect_end().map_err(|e| perr(line, e))?;
    Ok(v)
}

fn split_name(rest: &str, sep: char, line: usize) -> Result<(String, String), DocError> {
    let k = rest.find(sep).ok_or_else(|| err(line, format!("expected `{sep}`")))?;
    let name = rest[..k].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'') {
        return Err(err(line, format!("bad name `{name}`")));
    }
    Ok((name.to_string(), rest[k + 1..].trim().to_string()))
}

pub fn parse_document(src: &str) -> Result<Document, DocError> {
    let lines = logical_lines(src);
    let mut iter = lines.into_iter().peekable();
    let (hline, header) = iter.next().ok_or_else(|| err(1, "empty document"))?;
    let kind_text = header
        .strip_prefix("instantiation:")
        .ok_or_else(|| err(hline, "the document must start with `instantiation: <wp|fodl|pl|sl>`"))?;
    let kind: InstKind = kind_text.trim().parse().map_err(|e: crate::program::UnknownInstantiation| err(hline, e.to_string()))?;
    let mut doc = Document {
        env: Env::new(Instantiation::new(kind)),
        options: BTreeMap::new(),
        goals: Vec::new(),
        scripts: Vec::new(),
        run: None,
        observe: Vec::new(),
        variants: Vec::new(),
    };
    let mut names = std::collections::BTreeSet::new();
    while let Some((line, text)) = iter.next() {
        let (kw, rest) = match text.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (text.as_str(), ""),
        };
        match kw {
            "option" => {
                let (k, v) = rest.split_once(char::is_whitespace).ok_or_else(|| err(line, "expected `option <name> <value>`"))?;
                let v = v.trim();
                if k == "alloc_base" {
                    doc.env.inst.alloc_base = v.parse().map_err(|_| err(line, "alloc_base must be an integer"))?;
                }
                doc.options.insert(k.to_string(), v.to_string());
            }
            "program" | "formula" | "label" => {
                let (name, body) = split_name(rest, '=', line)?;
                if !names.insert(name.clone()) {
                    return Err(err(line, format!("`{name}` is defined twice")));
                }
                match kw {
                    "program" => {
                        let p = whole(&body, &doc.env, line, |p| p.program())?;
                        doc.env.inst.check_program(&p).map_err(|m| err(line, m))?;
                        doc.env.programs.insert(name, p);
                    }
                    "formula" => {
                        let f = whole(&body, &doc.env, line, |p| p.formula())?;
                        doc.env.inst.check_formula(&f).map_err(|m| err(line, m))?;
                        doc.env.formulas.insert(name, f);
                    }
                    _ => {
                        let l = whole(&body, &doc.env, line, |p| p.label())?;
                        doc.env.labels.insert(name, l);
                    }
                }
            }
            "goal" => {
                let (name, body) = split_name(rest, ':', line)?;
                if doc.goals.iter().any(|g| g.name == name) {
                    return Err(err(line, format!("goal `{name}` is defined twice")));
                }
                let sequent = crate::parse::parse_sequent(&body, &doc.env).map_err(|e| perr(line, e))?;
                doc.goals.push(Goal { name, sequent, line });
            }
            "script" => {
                let (name, tail) = split_name(rest, ':', line)?;
                if !tail.is_empty() {
                    return Err(err(line, "script commands start on the next line"));
                }
                let mut commands = Vec::new();
                let mut closed = false;
                for (l, t) in iter.by_ref() {
                    if t == "end" {
                        closed = true;
                        break;
                    }
                    commands.push((l, t));
                }
                if !closed {
                    return Err(err(line, "script block is not closed by `end`"));
                }
                if doc.scripts.iter().any(|s| s.goal == name) {
                    return Err(err(line, format!("goal `{name}` has two scripts")));
                }
                doc.scripts.push(Script {
                    goal: name,
                    line,
                    commands,
                });
            }
            "run" => {
                let p = whole(rest, &doc.env, line, |p| p.program())?;
                doc.env.inst.check_program(&p).map_err(|m| err(line, m))?;
                doc.run = Some(p);
            }
            "observe" => {
                let f = whole(rest, &doc.env, line, |p| p.formula())?;
                doc.env.inst.check_formula(&f).map_err(|m| err(line, m))?;
                doc.observe.push(f);
            }
            "variant" => doc.variants.push(parse_variant_hint(rest, &doc.env).map_err(|m| err(line, m))?),
            other => return Err(err(line, format!("unknown directive `{other}`"))),
        }
    }
    for s in &doc.scripts {
        if !doc.goals.iter().any(|g| g.name == s.goal) {
            return Err(err(s.line, format!("script for unknown goal `{}`", s.goal)));
        }
    }
    Ok(doc)
}

/// `[<site>:] <expr> [invariant <formula>]` or `[<site>:] unroll <k>`.
pub fn parse_variant_hint(text: &str, env: &Env) -> Result<VariantHint, String> {
    let (site, body) = match text.split_once(':') {
        Some((s, b)) if s.trim().chars().all(|c| c.is_ascii_digit()) && !s.trim().is_empty() => {
            (Some(s.trim().parse::<usize>().map_err(|e| e.to_string())?), b.trim())
        }
        _ => (None, text.trim()),
    };
    let mut p = Parser::new(body, env).map_err(|e| e.to_string())?;
    let cert = if p.peek_word().as_deref() == Some("unroll") {
        parse_termination(&mut p).map_err(|e| e.to_string())?
    } else {
        let variant = p.expr().map_err(|e| e.to_string())?;
        let invariant = if p.eat_word("invariant") {
            Some(p.formula().map_err(|e| e.to_string())?)
        } else {
            None
        };
        TerminationCert::Variant { variant, invariant }
    };
    p.expect_end().map_err(|e| e.to_string())?;
    Ok(VariantHint { site, cert })
}
