use dlp_core::autoprover::{auto_prove, FailureReason, SearchConfig};
use dlp_core::cyclic::check_proof;
use dlp_core::oracle::Oracle;
use dlp_core::parse::{parse_sequent, Env};
use dlp_core::program::Instantiation;

fn prove(text: &str) -> Result<dlp_core::cyclic::ProofGraph, dlp_core::autoprover::Failure> {
    let env = Env::new(Instantiation::wp());
    let goal = parse_sequent(text, &env).unwrap();
    auto_prove(Instantiation::wp(), goal, &Oracle::bounded(25), &SearchConfig::default())
}

#[test]
fn countdown_loop_closes_by_generalized_cycle() {
    let g = prove("{x -> t} : x > 0 |- {x -> t} : [while x > 0 do x := x - 1 end](x <= 0)").unwrap_or_else(|f| {
        for n in f.graph.nodes() {
            eprintln!("{} {} {:?}", n.id, n.sequent, n.rule().map(|r| r.rule.id().name()));
        }
        panic!("{}", f.reason)
    });
    for n in g.nodes() {
        eprintln!("{} {} {:?}", n.id, n.sequent, n.rule().map(|r| r.rule.id().name()));
    }
    assert_eq!(g.backlinks().len(), 1);
    check_proof(&g, &Oracle::bounded(25)).unwrap();
}

#[test]
fn absolute_value_branch_closes_without_cycles() {
    let g = prove("|- {x -> t} : [if x > 0 then x := x else x := 0 - x end](x >= 0)").unwrap();
    assert!(g.backlinks().is_empty());
    check_proof(&g, &Oracle::bounded(25)).unwrap();
}

#[test]
fn nonterminating_diamond_is_refused() {
    let f = prove("|- {x -> 1} : <while true do x := x + 1 end> true").unwrap_err();
    assert!(matches!(f.reason, FailureReason::TerminationUnknown(_)), "{}", f.reason);
}

#[test]
fn ter_only_goal_closes_immediately() {
    let g = prove("{x -> t} : x > 1 |- {x -> t} : [ter](x > 0)").unwrap();
    assert!(g.len() <= 3);
}
