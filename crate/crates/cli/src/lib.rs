//! Batch front end shared by the `dlp` binary and its tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dlp_core::autoprover::{auto_prove, FailureReason, SearchConfig};
use dlp_core::cert::to_json;
use dlp_core::cyclic::{check_proof, NodeState, ProofGraph};
use dlp_core::document::{Document, Goal};
use dlp_core::expr::Int;
use dlp_core::oracle::{Oracle, OracleConfig, Verdict, DEFAULT_BOUND};
use dlp_core::program::{InstKind, Program};
use dlp_core::render::render_text;
use dlp_core::script::ScriptRunner;
use dlp_core::semantics::{eval_formula, eval_sequent, eval_temporal, run_to_completion, trace, Truth, Valuation, World};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DISPROVED: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// `bounded`, `bounded:<B>`, `smt` (solver from `DLP_SMT`, default `z3 -in`) or `smt:<command>`.
pub fn parse_oracle(text: &str) -> Result<OracleConfig, String> {
    let (kind, arg) = match text.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (text, None),
    };
    match (kind, arg) {
        ("bounded", None) => Ok(OracleConfig::Bounded(DEFAULT_BOUND)),
        ("bounded", Some(b)) => {
            let b: Int = b.trim().parse().map_err(|_| format!("bad bound `{b}`"))?;
            if b < 0 {
                return Err("the bound must be non-negative".into());
            }
            Ok(OracleConfig::Bounded(b))
        }
        ("smt", Some(cmd)) => Ok(OracleConfig::Smt(cmd.split_whitespace().map(String::from).collect())),
        ("smt", None) => {
            let cmd = std::env::var("DLP_SMT").ok().filter(|c| !c.trim().is_empty()).unwrap_or_else(|| "z3 -in".into());
            Ok(OracleConfig::Smt(cmd.split_whitespace().map(String::from).collect()))
        }
        _ => Err(format!("unknown oracle `{text}`; expected bounded[:B] or smt[:command]")),
    }
}

pub fn describe_oracle(c: &OracleConfig) -> String {
    match c {
        OracleConfig::Bounded(b) => format!("bounded search over [-{b}, {b}]; validity is relative to that box"),
        OracleConfig::Smt(cmd) => format!("smt solver `{}`", cmd.join(" ")),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ProveOptions {
    pub auto: bool,
    pub search: SearchConfig,
    pub render: bool,
    /// Directory for certificates; nothing is written when absent.
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoalVerdict {
    Proved,
    Disproved(String),
    Unknown(String),
}

impl GoalVerdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            GoalVerdict::Proved => EXIT_OK,
            GoalVerdict::Disproved(_) => EXIT_DISPROVED,
            GoalVerdict::Unknown(_) => EXIT_UNKNOWN,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GoalReport {
    pub name: String,
    pub verdict: GoalVerdict,
    pub millis: u128,
    pub graph: Option<ProofGraph>,
    pub certificate: Option<PathBuf>,
    /// Oracle backends that discharged obligations.
    pub backends: BTreeSet<String>,
    pub summary: String,
}

impl fmt::Display for GoalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "goal {}: ", self.name)?;
        match &self.verdict {
            GoalVerdict::Proved => write!(f, "proved ({})", self.summary)?,
            GoalVerdict::Disproved(why) => write!(f, "disproved ({why})")?,
            GoalVerdict::Unknown(why) => write!(f, "unknown ({why})")?,
        }
        write!(f, " [{} ms]", self.millis)?;
        if !self.backends.is_empty() {
            let tags: Vec<&str> = self.backends.iter().map(String::as_str).collect();
            write!(f, " oracle: {}", tags.join("; "))?;
        }
        if let Some(p) = &self.certificate {
            write!(f, " certificate: {}", p.display())?;
        }
        Ok(())
    }
}

/// Worst exit code over all goals: disproved, then unknown, then proved.
pub fn exit_code(reports: &[GoalReport]) -> i32 {
    let codes: Vec<i32> = reports.iter().map(|r| r.verdict.exit_code()).collect();
    if codes.contains(&EXIT_DISPROVED) {
        EXIT_DISPROVED
    } else if codes.contains(&EXIT_UNKNOWN) {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    }
}

fn backends(g: &ProofGraph) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for n in g.nodes() {
        if let NodeState::Rule(app) = &n.state {
            for o in &app.obligations {
                if let Verdict::Valid(b) = &o.verdict {
                    out.insert(b.to_string());
                }
            }
        }
    }
    out
}

/// Looks for a small ground counterexample to the goal itself.
pub fn refute(doc: &Document, goal: &Goal) -> Option<Valuation> {
    let vars: Vec<String> = goal.sequent.vars().into_iter().collect();
    if vars.len() > 4 {
        return None;
    }
    let values: Vec<Int> = (-3..=3).collect();
    let total = values.len().pow(vars.len() as u32);
    for k in 0..total {
        let mut g = Valuation::new();
        let mut rest = k;
        for x in &vars {
            g.insert(x.clone(), values[rest % values.len()]);
            rest /= values.len();
        }
        if let Ok(Truth::False) = eval_sequent(&doc.inst(), &goal.sequent, &g, 2_000) {
            return Some(g);
        }
    }
    None
}

fn show_valuation(g: &Valuation) -> String {
    g.iter().map(|(x, n)| format!("{x} = {n}")).collect::<Vec<_>>().join(", ")
}

fn attempt(doc: &Document, goal: &Goal, oracle: &Oracle, opts: &ProveOptions) -> Result<ProofGraph, String> {
    match doc.script_for(&goal.name) {
        Some(script) => {
            let mut runner = ScriptRunner::new(&doc.env, oracle, goal.sequent.clone());
            runner.run(&script.commands).map_err(|e| e.to_string())?;
            if !runner.graph.is_closed() {
                let open: Vec<String> = runner.graph.open_goals().iter().map(|n| n.to_string()).collect();
                return Err(format!("script leaves open goals at nodes {}", open.join(", ")));
            }
            Ok(runner.graph)
        }
        None if opts.auto => {
            let mut search = opts.search.clone();
            search.variants.extend(doc.variants.iter().cloned());
            auto_prove(doc.inst(), goal.sequent.clone(), oracle, &search).map_err(|f| match f.reason {
                FailureReason::BudgetExceeded => "search budget exceeded".to_string(),
                FailureReason::OracleUnknown(m) => format!("oracle: {m}"),
                FailureReason::NoBacklink(m) => format!("no back-link: {m}"),
                FailureReason::TerminationUnknown(m) => format!("termination unknown: {m}"),
            })
        }
        None => Err("no proof script; rerun with --auto to search".into()),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "proof".into())
}

pub fn prove_goal(doc: &Document, source: &Path, goal: &Goal, oracle: &Oracle, opts: &ProveOptions) -> GoalReport {
    let start = Instant::now();
    let outcome = attempt(doc, goal, oracle, opts).and_then(|g| match check_proof(&g, oracle) {
        Ok(report) => Ok((g, report)),
        Err(e) => Err(format!("the kernel rejected the proof: {e}")),
    });
    let mut report = GoalReport {
        name: goal.name.clone(),
        verdict: GoalVerdict::Proved,
        millis: 0,
        graph: None,
        certificate: None,
        backends: BTreeSet::new(),
        summary: String::new(),
    };
    match outcome {
        Ok((g, checked)) => {
            report.summary = format!(
                "{} nodes, {} back-links, {} obligations",
                checked.nodes,
                g.backlinks().len(),
                checked.obligations
            );
            report.backends = backends(&g);
            report.graph = Some(g);
        }
        Err(why) => {
            report.verdict = match refute(doc, goal) {
                Some(cex) => GoalVerdict::Disproved(format!("counterexample {}", show_valuation(&cex))),
                None => GoalVerdict::Unknown(why),
            };
        }
    }
    report.millis = start.elapsed().as_millis();
    if let (Some(dir), Some(g)) = (&opts.out, &report.graph) {
        let path = dir.join(format!("{}.{}.cert.json", file_stem(source), goal.name));
        match std::fs::write(&path, to_json(g)) {
            Ok(()) => report.certificate = Some(path),
            Err(e) => report.verdict = GoalVerdict::Unknown(format!("could not write {}: {e}", path.display())),
        }
    }
    report
}

/// Proves every goal of a document, each on its own worker thread.
pub fn prove_document(doc: &Document, source: &Path, oracle: &Oracle, opts: &ProveOptions) -> Vec<GoalReport> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = doc
            .goals
            .iter()
            .map(|goal| scope.spawn(move || prove_goal(doc, source, goal, oracle, opts)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("prover thread panicked")).collect()
    })
}

pub fn render_report(r: &GoalReport) -> Option<String> {
    r.graph.as_ref().map(render_text)
}

/// `n=5,s=0` or `n = 5, s = -1`.
pub fn parse_world(text: &str) -> Result<Valuation, String> {
    let mut out = Valuation::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (x, v) = item.split_once('=').ok_or_else(|| format!("expected `name=value`, got `{item}`"))?;
        let x = x.trim();
        if x.is_empty() || !x.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'') {
            return Err(format!("bad variable name `{x}`"));
        }
        let v: Int = v.trim().parse().map_err(|_| format!("bad value for `{x}`"))?;
        if out.insert(x.to_string(), v).is_some() {
            return Err(format!("`{x}` is given twice"));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecError {
    Input(String),
    Budget(String),
}

impl ExecError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExecError::Input(_) => EXIT_INPUT,
            ExecError::Budget(_) => EXIT_UNKNOWN,
        }
    }
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::Input(m) | ExecError::Budget(m) => f.write_str(m),
        }
    }
}

fn fmt_state(v: &Valuation, vars: &BTreeSet<String>) -> String {
    vars.iter()
        .map(|x| format!("{x}: {}", v.get(x).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_heap(h: &BTreeMap<Int, Int>) -> String {
    if h.is_empty() {
        return "empty".into();
    }
    h.iter().map(|(a, v)| format!("{a}: {v}")).collect::<Vec<_>>().join(", ")
}

/// One row per step of a store-heap execution: `s<i> | store | h<i> | heap`.
pub fn heap_table(worlds: &[World], vars: &BTreeSet<String>) -> Vec<String> {
    worlds
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let suffix = if i == 0 { String::new() } else { i.to_string() };
            match w {
                World::Heap(sh) => format!("s{suffix} | {} | h{suffix} | {}", fmt_state(&sh.store, vars), fmt_heap(&sh.heap)),
                other => format!("s{suffix} | {}", fmt_state(other.current(), vars)),
            }
        })
        .collect()
}

fn truth(t: Truth) -> &'static str {
    match t {
        Truth::True => "true",
        Truth::False => "false",
        Truth::Unknown => "unknown",
    }
}

/// Runs the document's `run` program from a ground world and describes the result.
pub fn exec_document(doc: &Document, world: &Valuation, budget: usize, alloc_base: Option<Int>) -> Result<String, ExecError> {
    let program: &Program = doc.run.as_ref().ok_or_else(|| ExecError::Input("the document has no `run` directive".into()))?;
    let mut inst = doc.inst();
    if let Some(b) = alloc_base {
        inst.alloc_base = b;
    }
    let mut needed = program.vars();
    for f in &doc.observe {
        needed.extend(f.vars());
    }
    let missing: Vec<&String> = needed.iter().filter(|x| !world.contains_key(*x)).collect();
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
        return Err(ExecError::Input(format!("the world does not assign {}", names.join(", "))));
    }
    let vars: BTreeSet<String> = program.vars().into_iter().chain(world.keys().cloned()).collect();
    let start = World::initial(inst.kind, world.clone());
    let mut out = String::new();
    let budget_err = |e: dlp_core::semantics::RunError| match e {
        dlp_core::semantics::RunError::BudgetExceeded(b) => ExecError::Budget(format!("step budget of {b} exceeded")),
        dlp_core::semantics::RunError::Eval(e) => ExecError::Input(e.to_string()),
    };
    match inst.kind {
        InstKind::Sl => {
            let worlds = trace(&inst, program, &start, budget).map_err(budget_err)?;
            for row in heap_table(&worlds, &vars) {
                let _ = writeln!(out, "{row}");
            }
            let last = worlds.last().unwrap();
            observe(&mut out, doc, &inst, last, budget)?;
        }
        InstKind::Pl => {
            let worlds = trace(&inst, program, &start, budget).map_err(budget_err)?;
            let World::Path(path) = worlds.last().unwrap().clone() else { unreachable!() };
            let states: Vec<String> = path.iter().map(|v| format!("{{{}}}", fmt_state(v, &vars))).collect();
            let _ = writeln!(out, "path: {}", states.join(" "));
            for f in &doc.observe {
                let v = eval_temporal(&path, f).map_err(|e| ExecError::Input(e.to_string()))?;
                let _ = writeln!(out, "{f}: {v}");
            }
        }
        InstKind::Wp | InstKind::Fodl => {
            let finals = run_to_completion(&inst, program, &start, budget).map_err(budget_err)?;
            let _ = writeln!(out, "{} final world{}", finals.len(), if finals.len() == 1 { "" } else { "s" });
            for w in &finals {
                let _ = writeln!(out, "final: {}", fmt_state(w.current(), &vars));
                observe(&mut out, doc, &inst, w, budget)?;
            }
        }
    }
    Ok(out)
}

fn observe(out: &mut String, doc: &Document, inst: &dlp_core::program::Instantiation, w: &World, budget: usize) -> Result<(), ExecError> {
    for f in &doc.observe {
        let t = eval_formula(inst, w, f, budget).map_err(|e| ExecError::Input(e.to_string()))?;
        let _ = writeln!(out, "  {f}: {}", truth(t));
    }
    Ok(())
}

/// Final worlds of a program, for comparisons across instantiations.
pub fn final_states(doc: &Document, program: &Program, world: &Valuation, budget: usize) -> Result<BTreeSet<Valuation>, ExecError> {
    let start = World::initial(doc.inst().kind, world.clone());
    let finals = run_to_completion(&doc.inst(), program, &start, budget).map_err(|e| ExecError::Budget(e.to_string()))?;
    Ok(finals.iter().map(|w| w.current().clone()).collect())
}
