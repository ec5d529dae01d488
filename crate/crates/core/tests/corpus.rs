use dlp_core::autoprover::{auto_prove, SearchConfig};
use dlp_core::cyclic::{check_proof, ProofGraph};
use dlp_core::document::{parse_document, Document};
use dlp_core::oracle::Oracle;
use dlp_core::render::render_text;
use dlp_core::script::ScriptRunner;

fn load(name: &str) -> Document {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_document(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn prove(doc: &Document, goal: &str) -> Result<ProofGraph, String> {
    let oracle = Oracle::bounded(25);
    let g = doc.goals.iter().find(|g| g.name == goal).unwrap();
    let graph = match doc.script_for(goal) {
        Some(s) => {
            let mut r = ScriptRunner::new(&doc.env, &oracle, g.sequent.clone());
            let res = r.run(&s.commands);
            if let Err(e) = res {
                return Err(format!("{e}\n{}", render_text(&r.graph)));
            }
            r.graph
        }
        None => {
            let cfg = SearchConfig {
                variants: doc.variants.clone(),
                ..SearchConfig::default()
            };
            auto_prove(doc.inst(), g.sequent.clone(), &oracle, &cfg)
                .map_err(|f| format!("{}\n{}", f.reason, render_text(&f.graph)))?
        }
    };
    check_proof(&graph, &oracle).map_err(|e| format!("{e}\n{}", render_text(&graph)))?;
    Ok(graph)
}

#[test]
fn temporal_script_closes() {
    prove(&load("temporal_pl.dlp"), "eventually_positive").unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn heap_goals_close() {
    let doc = load("sl_heap.dlp");
    prove(&doc, "final_state").unwrap_or_else(|e| panic!("{e}"));
    prove(&doc, "after_two").unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn lifting_script_closes() {
    prove(&load("lifting.dlp"), "skip_loop").unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn regular_round_closes() {
    prove(&load("regular_sum.dlp"), "one_round").unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn auto_goals_close() {
    let doc = load("countdown_auto.dlp");
    prove(&doc, "countdown").unwrap_or_else(|e| panic!("{e}"));
    prove(&doc, "absolute").unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn diverging_diamond_is_not_proved() {
    assert!(prove(&load("diverge_diamond.dlp"), "never").is_err());
}
