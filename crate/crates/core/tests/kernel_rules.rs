use dlp_core::cyclic::{check_cyclic, check_proof, CyclicError, GraphError, ProofGraph};
use dlp_core::kernel::{apply_rule, expand_derived, guard_case_split, lift_rule, KernelError, PlainRule, Rule};
use dlp_core::label::{is_free_label, Label};
use dlp_core::oracle::Oracle;
use dlp_core::parse::{parse_formula, parse_label, parse_lformula, parse_program, parse_sequent, parse_subst, Env};
use dlp_core::program::Instantiation;
use dlp_core::sequent::Occ;
use dlp_core::step::TerminationCert;

fn wp() -> Env {
    Env::new(Instantiation::wp())
}

fn seq(src: &str, env: &Env) -> dlp_core::sequent::Sequent {
    parse_sequent(src, env).unwrap()
}

fn premises(env: &Env, goal: &str, rule: &Rule) -> Vec<String> {
    let app = apply_rule(&env.inst, &Oracle::bounded(25), &seq(goal, env), rule).unwrap();
    app.premises.iter().map(|p| p.sequent.to_string()).collect()
}

#[test]
fn box_step_executes_one_assignment() {
    let env = wp();
    let got = premises(&env, "|- {x -> t} : [x := x + 1] x > 0", &Rule::BoxR { index: 0 });
    assert_eq!(got, ["|- {x -> t + 1} : [ter](x > 0)"]);
}

#[test]
fn loop_step_needs_a_decided_guard() {
    let env = wp();
    let goal = seq("|- {n -> N} : [while n > 0 do n := n - 1 end] n = 0", &env);
    let err = apply_rule(&env.inst, &Oracle::bounded(25), &goal, &Rule::BoxR { index: 0 }).unwrap_err();
    assert!(matches!(err, KernelError::MissingExhaustiveness(_)), "{err}");
    let got = premises(&env, "{n -> N} : n > 0 |- {n -> N} : [while n > 0 do n := n - 1 end] n = 0", &Rule::BoxR { index: 0 });
    assert_eq!(got, ["{n -> N} : n > 0 |- {n -> N - 1} : [while n > 0 do n := n - 1 end](n = 0)"]);
}

#[test]
fn case_split_closes_its_lemma() {
    let env = wp();
    let oracle = Oracle::bounded(25);
    let goal = seq("|- {n -> N} : [while n > 0 do n := n - 1 end] n = 0", &env);
    let guard = parse_lformula("{n -> N} : n > 0", &env).unwrap();
    let split = guard_case_split(&goal, &guard).unwrap();
    let mut g = ProofGraph::new(env.inst, goal);
    let kids = g.apply(&oracle, 1, &split.cut).unwrap();
    let mut lemma = kids[0];
    for r in &split.lemma {
        if let Some(&k) = g.apply(&oracle, lemma, r).unwrap().first() {
            lemma = k;
        }
    }
    let branches = g.apply(&oracle, kids[1], &split.split).unwrap();
    assert_eq!(branches.len(), 2);
    assert_eq!(g.open_goals(), branches);
}

#[test]
fn substitution_rule_instantiates_a_template() {
    let env = wp();
    let template = seq("{n -> N - m} : n >= 0 |- {n -> N - m} : n >= 0", &env);
    let subst = parse_subst("[0/m]", &env).unwrap();
    let got = premises(&env, "{n -> N} : n >= 0 |- {n -> N} : n >= 0", &Rule::Sub { template: template.clone(), subst });
    assert_eq!(got, [template.to_string()]);
    let wrong = parse_subst("[1/m]", &env).unwrap();
    let goal = seq("{n -> N} : n >= 0 |- {n -> N} : n >= 0", &env);
    assert!(apply_rule(&env.inst, &Oracle::bounded(25), &goal, &Rule::Sub { template, subst: wrong }).is_err());
}

#[test]
fn derived_rules_match_their_expansion() {
    let env = wp();
    let oracle = Oracle::bounded(25);
    let cases = [
        ("{x -> t} : x > 0 || x < -3, {x -> t} : x = 7 |- {x -> t} : [x := 1] x > 0", Rule::OrL(0)),
        ("{x -> t} : x > 0 -> x > 1 |- {y -> u} : y = 2", Rule::ImpL(0)),
        ("{x -> t} : x = 1 |- {x -> t} : x > 0 -> [x := x - 1] x >= 0", Rule::ImpR(0)),
        ("|- {x -> t} : x > 0 || x <= 0, {x -> t} : x = 3", Rule::OrR(0)),
    ];
    for (src, rule) in cases {
        let goal = seq(src, &env);
        let direct: Vec<_> = apply_rule(&env.inst, &oracle, &goal, &rule).unwrap().premises.into_iter().map(|p| p.sequent).collect();
        let expanded = expand_derived(&env.inst, &oracle, &goal, &rule).unwrap();
        assert_eq!(direct.len(), expanded.len(), "{rule:?}");
        for (a, b) in direct.iter().zip(&expanded) {
            let (mut l1, mut r1): (Vec<String>, Vec<String>) = (a.left.iter().map(|f| f.to_string()).collect(), a.right.iter().map(|f| f.to_string()).collect());
            let (mut l2, mut r2): (Vec<String>, Vec<String>) = (b.left.iter().map(|f| f.to_string()).collect(), b.right.iter().map(|f| f.to_string()).collect());
            l1.sort();
            r1.sort();
            l2.sort();
            r2.sort();
            assert_eq!((l1, r1), (l2, r2), "{rule:?}");
        }
    }
}

#[test]
fn lifting_respects_freeness() {
    let env = wp();
    let store = |s: &str| match parse_label(s, &env).unwrap() {
        Label::Store(s) => s,
        _ => unreachable!(),
    };
    let a = [parse_formula("x + y > 1", &env).unwrap()];
    assert!(is_free_label(&store("{x -> t + 1}"), &a));
    assert!(is_free_label(&store("{x -> 3 - t, y -> u}"), &a));
    assert!(!is_free_label(&store("{x -> 0, y -> 0}"), &a));
    assert!(!is_free_label(&store("{x -> t, y -> t}"), &a));
    assert!(!is_free_label(&store("{x -> 2 * t}"), &a));
    // the value variable must not occur in the formulas
    assert!(!is_free_label(&store("{x -> y}"), &a));

    let alpha = parse_program("x := x + 1", &env).unwrap();
    let phi = parse_formula("x >= 0", &env).unwrap();
    let rule = PlainRule::generalization(alpha, phi.clone(), phi);
    let lifted = lift_rule(&rule, &store("{x -> t + 1}")).unwrap();
    assert_eq!(lifted.conclusion.to_string(), "{x -> t + 1} : [x := x + 1](x >= 0) |- {x -> t + 1} : [x := x + 1](x >= 0)");
    assert!(matches!(lift_rule(&rule, &store("{x -> 0}")), Err(KernelError::FreenessViolation { .. })));
}

#[test]
fn one_successor_steps_progress_only_with_termination() {
    let env = wp();
    let oracle = Oracle::bounded(25);
    let goal = seq("|- {x -> t} : <x := x + 1> x > t", &env);
    let plain = Rule::DiaStep { occ: Occ::right(0), to: None, termination: None };
    assert!(!apply_rule(&env.inst, &oracle, &goal, &plain).unwrap().is_progressive());
    let cert = Rule::DiaStep { occ: Occ::right(0), to: None, termination: Some(TerminationCert::Unroll(4)) };
    let app = apply_rule(&env.inst, &oracle, &goal, &cert).unwrap();
    assert!(app.is_progressive());
    assert!(app.termination.is_some());

    let left = seq("{x -> t} : [x := x + 1] x > t |- {x -> t} : x = x", &env);
    let boxl = Rule::BoxL { index: 0, to: None, termination: None };
    assert!(!apply_rule(&env.inst, &oracle, &left, &boxl).unwrap().is_progressive());
    assert!(apply_rule(&env.inst, &oracle, &left, &Rule::BoxR { index: 0 }).is_err());
}

#[test]
fn terminal_close_requires_validity() {
    let env = wp();
    let oracle = Oracle::bounded(25);
    let good = seq("{x -> t} : t >= 0 |- {x -> t} : x + 1 > 0", &env);
    assert_eq!(apply_rule(&env.inst, &oracle, &good, &Rule::TerClose).unwrap().obligations.len(), 1);
    let bad = seq("{x -> t} : t >= -1 |- {x -> t} : x + 1 > 0", &env);
    assert!(matches!(apply_rule(&env.inst, &oracle, &bad, &Rule::TerClose), Err(KernelError::ObligationFailed { .. })));
    let dynamic = seq("|- {x -> t} : [x := 1] x > 0", &env);
    assert!(apply_rule(&env.inst, &oracle, &dynamic, &Rule::TerClose).is_err());
}

#[test]
fn frame_rule_checks_the_dropped_conjunct() {
    let env = Env::new(Instantiation::sl());
    let oracle = Oracle::bounded(25);
    let ok = seq("|- {x -> 3} @ {3 -> 1} : x |-> 1 ** x > 0", &env);
    let got = apply_rule(&env.inst, &oracle, &ok, &Rule::SLFrame { index: 0 }).unwrap();
    assert_eq!(got.premises[0].sequent.to_string(), "|- {x -> 3} @ {3 -> 1} : x |-> 1");
    let bad = seq("|- {x -> 3} @ {3 -> 1} : x |-> 1 ** x |-> 1", &env);
    assert!(apply_rule(&env.inst, &oracle, &bad, &Rule::SLFrame { index: 0 }).is_err());
}

#[test]
fn backlinks_must_match_an_ancestor() {
    let env = wp();
    let oracle = Oracle::bounded(25);
    let goal = seq("{x -> t} : x > 0 |- {x -> t} : [x := x + 1] x > 0", &env);
    let mut g = ProofGraph::new(env.inst, goal);
    let kids = g.apply(&oracle, 1, &Rule::BoxR { index: 0 }).unwrap();
    let err = g.add_backlink(kids[0], 1, None).unwrap_err();
    assert!(matches!(err, GraphError::SequentMismatch { .. }), "{err}");
    let err = g.add_backlink(1, kids[0], None).unwrap_err();
    assert!(matches!(err, GraphError::NotOpen(1) | GraphError::NotAncestor { .. }), "{err}");
}

#[test]
fn diverging_cycle_is_rejected() {
    let env = wp();
    let oracle = Oracle::bounded(25);
    let root = seq("|- {x -> t} : <while true do x := x + 1 end> true", &env);
    let mut g = ProofGraph::new(env.inst, root);
    let kids = g
        .apply(&oracle, 1, &Rule::DiaStep { occ: Occ::right(0), to: None, termination: None })
        .unwrap();
    g.add_backlink(kids[0], 1, None).unwrap();
    assert!(g.is_closed());
    match check_cyclic(&g) {
        Err(CyclicError::NoProgress { cycle }) => assert_eq!(cycle, vec![1, 2]),
        other => panic!("{other:?}"),
    }
    assert!(check_proof(&g, &oracle).is_err());
}

#[test]
fn box_cycle_over_a_decreasing_loop_is_accepted() {
    let env = wp();
    let oracle = Oracle::bounded(25);
    let root = seq("{x -> t} : x >= 0 |- {x -> t} : [while x > 0 do x := x - 1 end] x = 0", &env);
    let mut g = ProofGraph::new(env.inst, root);
    let guard = parse_lformula("{x -> t} : x > 0", &env).unwrap();
    let split = guard_case_split(&g.node(1).unwrap().sequent, &guard).unwrap();
    let kids = g.apply(&oracle, 1, &split.cut).unwrap();
    let mut lemma = kids[0];
    for r in &split.lemma {
        if let Some(&k) = g.apply(&oracle, lemma, r).unwrap().first() {
            lemma = k;
        }
    }
    let cases = g.apply(&oracle, kids[1], &split.split).unwrap();
    assert_eq!(cases.len(), 2);
    assert!(!g.open_goals().is_empty());
}
