use std::collections::BTreeMap;

use dlp_core::expr::Expr;
use dlp_core::label::Label;
use dlp_core::parse::{parse_formula, parse_program, Env};
use dlp_core::program::{InstKind, Instantiation};
use dlp_core::semantics::{eval_lformula, holds, Valuation};
use dlp_core::sequent::{LFormula, Sequent};
use dlp_core::subst::{anti_unify, match_label, FreshSupply, Subst};
use dlp_testkit as tk;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SYMBOLS: [&str; 2] = ["t", "u"];

fn valuation(rng: &mut StdRng) -> Valuation {
    tk::VARS
        .iter()
        .chain(SYMBOLS.iter())
        .map(|x| (x.to_string(), rng.gen_range(-4..=4)))
        .collect()
}

fn symbol_subst(rng: &mut StdRng) -> Subst {
    let mut map = BTreeMap::new();
    for s in SYMBOLS {
        if rng.gen_bool(0.7) {
            let e = match rng.gen_range(0..3) {
                0 => Expr::int(rng.gen_range(-3..=3)),
                1 => Expr::var(SYMBOLS[rng.gen_range(0..2)]) + Expr::int(rng.gen_range(-2..=2)),
                _ => Expr::var(SYMBOLS[rng.gen_range(0..2)]) * Expr::int(2),
            };
            map.insert(s.to_string(), e);
        }
    }
    Subst::new(map)
}

fn labeled(rng: &mut StdRng) -> LFormula {
    LFormula::labeled(Label::Store(tk::symbolic_store(rng, &SYMBOLS)), tk::cond(rng, 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn substitution_shifts_the_valuation(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let inst = Instantiation::wp();
        let lf = labeled(&mut rng);
        let theta = symbol_subst(&mut rng);
        let g = valuation(&mut rng);
        let mut shifted = g.clone();
        for (u, e) in theta.map() {
            shifted.insert(u.clone(), e.eval(&g).unwrap());
        }
        let lhs = eval_lformula(&inst, &theta.apply_lformula(&lf), &g, 100).unwrap();
        let rhs = eval_lformula(&inst, &lf, &shifted, 100).unwrap();
        prop_assert_eq!(lhs, rhs, "{} under {:?}", lf, theta);
    }

    #[test]
    fn normalization_is_idempotent_and_sound(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let e = tk::expr(&mut rng, 4);
        let n = e.normalize();
        prop_assert_eq!(n.normalize(), n.clone());
        let g = valuation(&mut rng);
        prop_assert_eq!(e.eval(&g).unwrap(), n.eval(&g).unwrap(), "{} vs {}", e, n);
        let f = tk::cond(&mut rng, 3);
        let s = g.iter().map(|(k, v)| (k.clone(), *v)).collect();
        prop_assert_eq!(holds(&g, &f).unwrap(), tk::ref_cond(&f, &s).unwrap());
    }

    #[test]
    fn matching_recovers_an_instance(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let template = Sequent::new(vec![labeled(&mut rng)], vec![labeled(&mut rng)]);
        let theta = symbol_subst(&mut rng);
        let target = theta.apply_sequent(&template);
        let found = match_label(&template, &target);
        prop_assert!(found.is_some(), "{} onto {}", template, target);
        let found = found.unwrap();
        prop_assert!(found.apply_sequent(&template).equiv(&target));
    }

    #[test]
    fn anti_unification_generalizes_both(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = tk::symbolic_store(&mut rng, &SYMBOLS);
        let b = tk::symbolic_store(&mut rng, &SYMBOLS);
        let mut fresh = FreshSupply::new(Default::default());
        let (gen, t1, t2) = anti_unify(&a, &b, &mut fresh);
        let norm = |s: &dlp_core::label::Store| s.map_values(&mut |e| e.normalize());
        let complete = |s: &dlp_core::label::Store| {
            let keys = gen.entries().keys().map(|k| (k.clone(), s.get(k).cloned().unwrap_or_else(|| Expr::var(k.as_str()))));
            dlp_core::label::Store::from_map(keys.collect())
        };
        prop_assert_eq!(norm(&t1.apply_store(&gen)), norm(&complete(&a)));
        prop_assert_eq!(norm(&t2.apply_store(&gen)), norm(&complete(&b)));
    }

    #[test]
    fn printing_then_parsing_is_identity(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        for kind in [InstKind::Wp, InstKind::Fodl] {
            let env = Env::new(if kind == InstKind::Wp { Instantiation::wp() } else { Instantiation::fodl() });
            let f = tk::cond(&mut rng, 3);
            prop_assert_eq!(parse_formula(&f.to_string(), &env).unwrap(), f);
            let p = tk::program(&mut rng, kind, 4);
            prop_assert_eq!(parse_program(&p.to_string(), &env).unwrap(), p);
        }
    }
}
