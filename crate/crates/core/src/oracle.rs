//! Validity of non-dynamic labeled sequents over the integers.
//!
//! Atoms are compared with rational semantics: `a op b` holds iff
//! `D*(a - b) op 0` for the positive common denominator `D`, which agrees with
//! exact integer evaluation whenever every division is exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::expr::{Expr, Int};
use crate::formula::{CmpOp, Formula};
use crate::label::{apply_label, LabelError};
use crate::semantics::Valuation;
use crate::sequent::{LFormula, Sequent};

pub const DEFAULT_BOUND: Int = 25;

/// Leaf-and-node visits allowed per bounded query before giving up.
const WORK_LIMIT: u64 = 40_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("`{0}` is not a non-dynamic labeled formula")]
    Unsupported(String),
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// `/\ hyps -> \/ goals`, universally closed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Problem {
    pub hyps: Vec<Formula>,
    pub goals: Vec<Formula>,
}

impl Problem {
    pub fn new(hyps: Vec<Formula>, goals: Vec<Formula>) -> Problem {
        Problem { hyps, goals }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in self.hyps.iter().chain(&self.goals) {
            f.collect_vars(&mut out);
        }
        out
    }

    pub fn formula(&self) -> Formula {
        Formula::imp(
            Formula::conj(self.hyps.iter().cloned()),
            Formula::disj(self.goals.iter().cloned()),
        )
    }

    /// Reference check that `g` falsifies the problem, evaluated directly on the
    /// expression trees.
    pub fn falsified_by(&self, g: &Valuation) -> bool {
        let eval = |f: &Formula| truth_at(f, g);
        self.hyps.iter().all(|h| eval(h) == Some(true)) && self.goals.iter().all(|c| eval(c) == Some(false))
    }
}

fn cmp_at(a: &Expr, op: CmpOp, b: &Expr, g: &Valuation) -> Option<bool> {
    let look = |x: &str| Some(g.get(x).copied().unwrap_or(0));
    match (a.eval_with(&look), b.eval_with(&look)) {
        (Ok(x), Ok(y)) => Some(op.holds(&x, &y)),
        _ => {
            let diff = (a.clone() - b.clone()).to_poly();
            let rat = |x: &str| Some(num_rational::BigRational::from_integer(BigInt::from(*g.get(x).unwrap_or(&0))));
            let v = diff.eval_rational(&rat)?;
            Some(op.holds(&v, &num_rational::BigRational::zero()))
        }
    }
}

fn truth_at(f: &Formula, g: &Valuation) -> Option<bool> {
    Some(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Cmp(a, op, b) => cmp_at(a, *op, b, g)?,
        Formula::Not(a) => !truth_at(a, g)?,
        Formula::And(a, b) => truth_at(a, g)? && truth_at(b, g)?,
        Formula::Or(a, b) => truth_at(a, g)? || truth_at(b, g)?,
        Formula::Imp(a, b) => !truth_at(a, g)? || truth_at(b, g)?,
        _ => return None,
    })
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Formula]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let (l, r) = (join(&self.hyps), join(&self.goals));
        match (l.is_empty(), r.is_empty()) {
            (true, true) => write!(f, "|-"),
            (true, false) => write!(f, "|- {r}"),
            (false, true) => write!(f, "{l} |-"),
            (false, false) => write!(f, "{l} |- {r}"),
        }
    }
}

/// Applies every label, leaving plain arithmetic formulas.
pub fn ground_sequent(s: &Sequent) -> Result<Problem, OracleError> {
    let side = |fs: &[LFormula]| -> Result<Vec<Formula>, OracleError> {
        fs.iter()
            .map(|lf| match lf {
                LFormula::Labeled(l, f) if !f.is_dynamic() => Ok(apply_label(l, f)?),
                other => Err(OracleError::Unsupported(other.to_string())),
            })
            .collect()
    };
    Ok(Problem::new(side(&s.left)?, side(&s.right)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Exhaustive search of the box `[-bound, bound]^k`; only bound-relative.
    Bounded(Int),
    Smt,
    /// Decided without search (constant atoms or a goal repeated among the hypotheses).
    Syntactic,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Bounded(b) => write!(f, "bounded, B={b}"),
            Backend::Smt => write!(f, "smt"),
            Backend::Syntactic => write!(f, "syntactic"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid(Backend),
    Counterexample(Valuation),
    Unknown(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid(_))
    }

    /// Short machine-readable tag: `valid`, `counterexample` or `unknown`.
    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Valid(_) => "valid",
            Verdict::Counterexample(_) => "counterexample",
            Verdict::Unknown(_) => "unknown",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid(b) => write!(f, "valid ({b})"),
            Verdict::Counterexample(g) => {
                write!(f, "counterexample")?;
                for (i, (x, n)) in g.iter().enumerate() {
                    write!(f, "{}{x} = {n}", if i == 0 { " " } else { ", " })?;
                }
                Ok(())
            }
            Verdict::Unknown(why) => write!(f, "unknown ({why})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleConfig {
    Bounded(Int),
    /// Command line of an SMT-LIB v2 solver reading the script from stdin.
    Smt(Vec<String>),
}

impl OracleConfig {
    /// `DLP_SMT` selects an external solver; otherwise bounded search at the default bound.
    pub fn from_env() -> OracleConfig {
        match std::env::var("DLP_SMT") {
            Ok(cmd) if !cmd.trim().is_empty() => OracleConfig::Smt(cmd.split_whitespace().map(String::from).collect()),
            _ => OracleConfig::Bounded(DEFAULT_BOUND),
        }
    }
}

pub struct Oracle {
    config: OracleConfig,
    cache: Mutex<HashMap<Problem, Verdict>>,
}

impl Oracle {
    pub fn new(config: OracleConfig) -> Oracle {
        Oracle {
            config,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn bounded(bound: Int) -> Oracle {
        Oracle::new(OracleConfig::Bounded(bound))
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn check_sequent(&self, s: &Sequent) -> Result<Verdict, OracleError> {
        Ok(self.check(&ground_sequent(s)?))
    }

    pub fn check(&self, p: &Problem) -> Verdict {
        if let Some(v) = self.cache.lock().unwrap().get(p) {
            return v.clone();
        }
        let v = check_validity(p, &self.config);
        self.cache.lock().unwrap().insert(p.clone(), v.clone());
        v
    }
}

/// Decides one problem with the configured backend. Counterexamples are always
/// re-checked against the expression trees before they are reported.
pub fn check_validity(p: &Problem, config: &OracleConfig) -> Verdict {
    if let Some(v) = syntactic(p) {
        return v;
    }
    let verdict = match config {
        OracleConfig::Bounded(b) => bounded_search(p, *b),
        OracleConfig::Smt(cmd) => smt_check(p, cmd),
    };
    match verdict {
        Verdict::Counterexample(g) if !p.falsified_by(&g) => {
            Verdict::Unknown(format!("candidate counterexample {g:?} does not re-evaluate false"))
        }
        v => v,
    }
}

fn syntactic(p: &Problem) -> Option<Verdict> {
    let norm: Vec<Formula> = p.hyps.iter().map(Formula::normalized).collect();
    let hit = p
        .goals
        .iter()
        .any(|g| matches!(g, Formula::True) || norm.contains(&g.normalized()))
        || norm.contains(&Formula::False);
    hit.then_some(Verdict::Valid(Backend::Syntactic))
}

// ---- compiled arithmetic

#[derive(Clone, Debug)]
struct Term {
    coeff: BigInt,
    small: Option<i128>,
    factors: Vec<(usize, u32)>,
}

#[derive(Clone, Debug)]
struct Atom {
    terms: Vec<Term>,
    op: CmpOp,
    /// One past the largest variable index used; 0 for constants.
    needs: usize,
}

#[derive(Clone, Debug)]
enum Prop {
    Const(bool),
    Atom(Atom),
    Not(Box<Prop>),
    And(Vec<Prop>),
    Or(Vec<Prop>),
}

fn compile_atom(a: &Expr, op: CmpOp, b: &Expr, index: &BTreeMap<String, usize>) -> Prop {
    let diff = (a.clone() - b.clone()).to_poly();
    if let Some(c) = diff.as_constant() {
        return Prop::Const(op.holds(&c, &num_rational::BigRational::zero()));
    }
    let d = diff.denominator_lcm();
    let scaled = diff.scale(&num_rational::BigRational::from_integer(d));
    let mut needs = 0;
    let terms = scaled
        .integer_terms()
        .into_iter()
        .map(|(coeff, mono)| {
            let factors: Vec<(usize, u32)> = mono
                .factors()
                .iter()
                .map(|(x, k)| {
                    let i = index[x];
                    needs = needs.max(i + 1);
                    (i, *k)
                })
                .collect();
            Term {
                small: coeff.to_i128(),
                coeff,
                factors,
            }
        })
        .collect();
    Prop::Atom(Atom { terms, op, needs })
}

fn compile(f: &Formula, index: &BTreeMap<String, usize>) -> Prop {
    match f {
        Formula::True => Prop::Const(true),
        Formula::False => Prop::Const(false),
        Formula::Cmp(a, op, b) => compile_atom(a, *op, b, index),
        Formula::Not(a) => Prop::Not(Box::new(compile(a, index))),
        Formula::And(a, b) => Prop::And(vec![compile(a, index), compile(b, index)]),
        Formula::Or(a, b) => Prop::Or(vec![compile(a, index), compile(b, index)]),
        Formula::Imp(a, b) => Prop::Or(vec![Prop::Not(Box::new(compile(a, index))), compile(b, index)]),
        other => panic!("oracle received a non-arithmetic formula `{other}`"),
    }
}

fn eval_small(terms: &[Term], point: &[i128]) -> Option<i128> {
    let mut acc: i128 = 0;
    for t in terms {
        let mut v = t.small?;
        for (i, k) in &t.factors {
            for _ in 0..*k {
                v = v.checked_mul(point[*i])?;
            }
        }
        acc = acc.checked_add(v)?;
    }
    Some(acc)
}

fn eval_big(terms: &[Term], point: &[i128]) -> BigInt {
    let mut acc = BigInt::zero();
    for t in terms {
        let mut v = t.coeff.clone();
        for (i, k) in &t.factors {
            v *= BigInt::from(point[*i]).pow(*k);
        }
        acc += v;
    }
    acc
}

impl Atom {
    fn eval(&self, point: &[i128]) -> bool {
        match eval_small(&self.terms, point) {
            Some(v) => self.op.holds(&v, &0),
            None => {
                let v = eval_big(&self.terms, point);
                let sign: i128 = if v.is_zero() {
                    0
                } else if v.is_positive() {
                    1
                } else {
                    -1
                };
                self.op.holds(&sign, &0)
            }
        }
    }
}

impl Prop {
    /// Three-valued evaluation when only the first `assigned` variables are fixed.
    fn partial(&self, point: &[i128], assigned: usize) -> Option<bool> {
        match self {
            Prop::Const(b) => Some(*b),
            Prop::Atom(a) => (a.needs <= assigned).then(|| a.eval(point)),
            Prop::Not(a) => a.partial(point, assigned).map(|b| !b),
            Prop::And(items) => {
                let mut all = Some(true);
                for p in items {
                    match p.partial(point, assigned) {
                        Some(false) => return Some(false),
                        None => all = None,
                        Some(true) => {}
                    }
                }
                all
            }
            Prop::Or(items) => {
                let mut any = Some(false);
                for p in items {
                    match p.partial(point, assigned) {
                        Some(true) => return Some(true),
                        None => any = None,
                        Some(false) => {}
                    }
                }
                any
            }
        }
    }
}

/// Variables ordered so that frequently constrained ones are fixed first.
fn variable_order(p: &Problem) -> Vec<String> {
    let mut count: BTreeMap<String, usize> = BTreeMap::new();
    for f in p.hyps.iter().chain(&p.goals) {
        let mut atoms = Vec::new();
        collect_atom_vars(f, &mut atoms);
        for vars in atoms {
            for v in vars {
                *count.entry(v).or_default() += 1;
            }
        }
    }
    let mut vars: Vec<(String, usize)> = count.into_iter().collect();
    vars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    vars.into_iter().map(|(v, _)| v).collect()
}

fn collect_atom_vars(f: &Formula, out: &mut Vec<BTreeSet<String>>) {
    match f {
        Formula::Cmp(..) => out.push(f.vars()),
        Formula::Not(a) => collect_atom_vars(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
            collect_atom_vars(a, out);
            collect_atom_vars(b, out);
        }
        _ => {}
    }
}

struct Search<'a> {
    prop: &'a Prop,
    values: Vec<i128>,
    point: Vec<i128>,
    work: u64,
}

enum Outcome {
    Valid,
    Refuted,
    Exhausted,
}

impl Search<'_> {
    /// Looks for a point making the validity formula false.
    fn go(&mut self, depth: usize) -> Outcome {
        self.work += 1;
        if self.work > WORK_LIMIT {
            return Outcome::Exhausted;
        }
        match self.prop.partial(&self.point, depth) {
            Some(true) => return Outcome::Valid,
            Some(false) => {
                for v in &mut self.point[depth..] {
                    *v = 0;
                }
                return Outcome::Refuted;
            }
            None => {}
        }
        for k in 0..self.values.len() {
            self.point[depth] = self.values[k];
            match self.go(depth + 1) {
                Outcome::Valid => {}
                other => return other,
            }
        }
        Outcome::Valid
    }
}

fn small_first(bound: Int) -> Vec<i128> {
    let mut out = vec![0];
    for k in 1..=bound.max(0) {
        out.push(k);
        out.push(-k);
    }
    out
}

/// Exhaustive search for a falsifying point in `[-bound, bound]^k`.
pub fn bounded_search(p: &Problem, bound: Int) -> Verdict {
    let order = variable_order(p);
    let index: BTreeMap<String, usize> = order.iter().enumerate().map(|(i, x)| (x.clone(), i)).collect();
    let prop = compile(&p.formula(), &index);
    for b in [bound.min(2), bound] {
        let mut s = Search {
            prop: &prop,
            values: small_first(b),
            point: vec![0; order.len()],
            work: 0,
        };
        match s.go(0) {
            Outcome::Refuted => {
                let g = order.iter().cloned().zip(s.point.iter().copied()).collect();
                return Verdict::Counterexample(g);
            }
            Outcome::Exhausted => {
                return Verdict::Unknown(format!("search box [-{b}, {b}]^{} too large", order.len()))
            }
            Outcome::Valid if b == bound => return Verdict::Valid(Backend::Bounded(bound)),
            Outcome::Valid => {}
        }
    }
    Verdict::Valid(Backend::Bounded(bound))
}

// ---- SMT-LIB

fn smt_term(poly_terms: &[(BigInt, Vec<(String, u32)>)]) -> String {
    let lit = |n: &BigInt| {
        if n.is_negative() {
            format!("(- {})", -n)
        } else {
            n.to_string()
        }
    };
    let parts: Vec<String> = poly_terms
        .iter()
        .map(|(c, factors)| {
            let mut items = Vec::new();
            if factors.is_empty() || *c != BigInt::from(1) {
                items.push(lit(c));
            }
            for (x, k) in factors {
                for _ in 0..*k {
                    items.push(smt_symbol(x));
                }
            }
            if items.len() == 1 {
                items.pop().unwrap()
            } else {
                format!("(* {})", items.join(" "))
            }
        })
        .collect();
    match parts.len() {
        0 => "0".to_string(),
        1 => parts[0].clone(),
        _ => format!("(+ {})", parts.join(" ")),
    }
}

fn smt_symbol(x: &str) -> String {
    format!("|{x}|")
}

fn smt_formula(f: &Formula) -> String {
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Cmp(a, op, b) => {
            let diff = (a.clone() - b.clone()).to_poly();
            let d = diff.denominator_lcm();
            let scaled = diff.scale(&num_rational::BigRational::from_integer(d));
            let terms: Vec<(BigInt, Vec<(String, u32)>)> = scaled
                .integer_terms()
                .into_iter()
                .rev()
                .map(|(c, m)| (c, m.factors().to_vec()))
                .collect();
            let sym = match op {
                CmpOp::Eq => "=",
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
            };
            format!("({sym} {} 0)", smt_term(&terms))
        }
        Formula::Not(a) => format!("(not {})", smt_formula(a)),
        Formula::And(a, b) => format!("(and {} {})", smt_formula(a), smt_formula(b)),
        Formula::Or(a, b) => format!("(or {} {})", smt_formula(a), smt_formula(b)),
        Formula::Imp(a, b) => format!("(=> {} {})", smt_formula(a), smt_formula(b)),
        other => panic!("oracle received a non-arithmetic formula `{other}`"),
    }
}

/// The SMT-LIB v2 script asking for a falsifying assignment.
pub fn smt_script(p: &Problem) -> String {
    let vars = p.vars();
    let mut s = String::from("(set-logic QF_NIA)\n");
    for x in &vars {
        s.push_str(&format!("(declare-const {} Int)\n", smt_symbol(x)));
    }
    s.push_str(&format!("(assert (not {}))\n(check-sat)\n", smt_formula(&p.formula())));
    if !vars.is_empty() {
        let names: Vec<String> = vars.iter().map(|x| smt_symbol(x)).collect();
        s.push_str(&format!("(get-value ({}))\n", names.join(" ")));
    }
    s.push_str("(exit)\n");
    s
}

const SMT_TIMEOUT: Duration = Duration::from_secs(30);

fn smt_check(p: &Problem, cmd: &[String]) -> Verdict {
    let Some((prog, args)) = cmd.split_first() else {
        return Verdict::Unknown("empty solver command".into());
    };
    let child = Command::new(prog)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return Verdict::Unknown(format!("cannot start solver `{prog}`: {e}")),
    };
    if let Some(mut stdin) = child.stdin.take() {
        if let Err(e) = stdin.write_all(smt_script(p).as_bytes()) {
            let _ = child.kill();
            return Verdict::Unknown(format!("solver input error: {e}"));
        }
    }
    let start = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if start.elapsed() > SMT_TIMEOUT => {
                let _ = child.kill();
                let _ = child.wait();
                return Verdict::Unknown("solver timed out".into());
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => return Verdict::Unknown(format!("solver process error: {e}")),
        }
    }
    let mut out = String::new();
    if let Some(mut stdout) = child.stdout.take() {
        let _ = stdout.read_to_string(&mut out);
    }
    parse_smt_response(&out)
}

/// Interprets solver output for the script built by [`smt_script`].
pub fn parse_smt_response(out: &str) -> Verdict {
    let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("unsat") => Verdict::Valid(Backend::Smt),
        Some("sat") => {
            let rest: String = lines.collect::<Vec<_>>().join(" ");
            match parse_model(&rest) {
                Some(g) => Verdict::Counterexample(g),
                None => Verdict::Unknown("unreadable solver model".into()),
            }
        }
        Some("unknown") => Verdict::Unknown("solver returned unknown".into()),
        Some(other) => Verdict::Unknown(format!("unexpected solver output `{other}`")),
        None => Verdict::Unknown("solver produced no output".into()),
    }
}

#[derive(Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(src: &str) -> Option<Vec<Sexp>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' || c == ')' {
            tokens.push(c.to_string());
            i += 1;
        } else if c == '|' {
            let start = i + 1;
            i = start;
            while i < chars.len() && chars[i] != '|' {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '(' && chars[i] != ')' {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        }
    }
    fn parse(tokens: &[String], pos: &mut usize) -> Option<Sexp> {
        let t = tokens.get(*pos)?;
        *pos += 1;
        if t == "(" {
            let mut items = Vec::new();
            while tokens.get(*pos)? != ")" {
                items.push(parse(tokens, pos)?);
            }
            *pos += 1;
            Some(Sexp::List(items))
        } else if t == ")" {
            None
        } else {
            Some(Sexp::Atom(t.clone()))
        }
    }
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < tokens.len() {
        out.push(parse(&tokens, &mut pos)?);
    }
    Some(out)
}

fn sexp_int(s: &Sexp) -> Option<Int> {
    match s {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(m), x] if m == "-" => sexp_int(x).map(|n| -n),
            _ => None,
        },
    }
}

fn parse_model(src: &str) -> Option<Valuation> {
    let sexps = parse_sexps(src)?;
    let mut g = Valuation::new();
    if let Some(Sexp::List(pairs)) = sexps.first() {
        for pair in pairs {
            let Sexp::List(kv) = pair else { return None };
            let [Sexp::Atom(name), value] = kv.as_slice() else { return None };
            g.insert(name.clone(), sexp_int(value)?);
        }
    }
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_sequent, Env};
    use crate::program::Instantiation;

    fn problem(src: &str) -> Problem {
        ground_sequent(&parse_sequent(src, &Env::new(Instantiation::wp())).unwrap()).unwrap()
    }

    #[test]
    fn successor_is_positive() {
        let p = problem("{x -> t} : t >= 0 |- {x -> t} : x + 1 > 0");
        assert_eq!(bounded_search(&p, 25), Verdict::Valid(Backend::Bounded(25)));
    }

    #[test]
    fn smallest_counterexample_first() {
        let p = problem("|- {} : x > 0");
        assert_eq!(check_validity(&p, &OracleConfig::Bounded(25)), Verdict::Counterexample(Valuation::from([("x".into(), 0)])));
    }

    #[test]
    fn partial_sums_close() {
        let p = problem(
            "{n -> N - m, s -> (2*N - m + 1)*m/2} : n >= 0, {n -> N - m, s -> (2*N - m + 1)*m/2} : n <= 0 \
             |- {n -> N - m, s -> (2*N - m + 1)*m/2} : s = ((N + 1)*N)/2",
        );
        assert_eq!(bounded_search(&p, 25), Verdict::Valid(Backend::Bounded(25)));
    }

    #[test]
    fn rational_comparison_for_inexact_division() {
        let p = problem("|- {} : x/2 * 2 = x");
        assert!(check_validity(&p, &OracleConfig::Bounded(5)).is_valid());
        let q = problem("{} : x > 0 |- {} : x/2 >= 1");
        assert_eq!(
            check_validity(&q, &OracleConfig::Bounded(5)),
            Verdict::Counterexample(Valuation::from([("x".into(), 1)]))
        );
    }

    #[test]
    fn smt_script_and_response() {
        let p = problem("{} : x > 0 |- {} : x >= 1");
        let s = smt_script(&p);
        assert!(s.contains("(declare-const |x| Int)"));
        assert!(s.contains("(assert (not (=> (> |x| 0) (>= (+ |x| (- 1)) 0))))"), "{s}");
        assert_eq!(parse_smt_response("unsat\n"), Verdict::Valid(Backend::Smt));
        assert_eq!(
            parse_smt_response("sat\n((|x| (- 3)) (|y| 0))\n"),
            Verdict::Counterexample(Valuation::from([("x".into(), -3), ("y".into(), 0)]))
        );
        assert!(matches!(parse_smt_response("unknown"), Verdict::Unknown(_)));
    }
}
