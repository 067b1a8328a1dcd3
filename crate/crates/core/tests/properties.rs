mod common;

use std::collections::BTreeSet;

use common::{accepted_grammar, random_grammar, random_input, GrammarShape, Naive, Re, ALPHABET};
use pegll::engine::{complete_extents, parse_with, Outcome, ParseOptions};
use pegll::grammar::desugar::{desugar, is_desugared};
use pegll::grammar::{Expr, ExprKind, Grammar};
use pegll::lexer::literal_token_name;
use pegll::lexer::{LexSession, LexTable, TokenDef};
use pegll::oracle::{eval_start, Oracle};
use pegll::{parse, CompiledGrammar, Forest};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn small_shape() -> GrammarShape {
    GrammarShape {
        max_nonterminals: 3,
        ..GrammarShape::mixed()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn engine_agrees_with_oracle(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = accepted_grammar(&mut rng, GrammarShape::mixed());
        for _ in 0..10 {
            let input = random_input(&mut rng, 12);
            let r = parse(&g, &input);
            let mut oracle = Oracle::for_compiled(&g, &input);
            let expected = oracle.eval_start();
            prop_assert_eq!(&r.extents, &expected.extents, "{} on {:?}", g.source, input);
            // Popped cache entries are sound with respect to the oracle.
            for &(x, j, h) in &r.popped {
                let o = oracle.eval_nt(g.slots.nt_name(x), j);
                match h {
                    Outcome::Match(h) => prop_assert!(o.extents.contains(&h)),
                    Outcome::Fail => prop_assert!(o.failed),
                }
            }
            // Extents read from the BSR set equal the popped entries for the start symbol.
            let popped: BTreeSet<usize> = r.popped_for(g.slots.start, 0)
                .filter_map(|o| match o { Outcome::Match(h) => Some(h), Outcome::Fail => None })
                .collect();
            prop_assert_eq!(&popped, &r.extents);
            let n = input.chars().count();
            prop_assert_eq!(r.stats.reprocessed, 0);
            prop_assert!(r.stats.seen <= g.slots.len() * (n + 1) * (n + 1));
        }
    }

    #[test]
    fn pure_peg_is_deterministic(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = accepted_grammar(&mut rng, GrammarShape::pure_peg());
        for _ in 0..10 {
            let input = random_input(&mut rng, 12);
            let r = parse(&g, &input);
            prop_assert!(r.extents.len() <= 1);
            let mut per_call = std::collections::HashMap::new();
            for &(x, j, _) in &r.popped {
                *per_call.entry((x, j)).or_insert(0) += 1;
            }
            prop_assert!(per_call.values().all(|&c| c == 1), "{}", g.source);
        }
    }

    #[test]
    fn oracle_agrees_with_naive_backtracking(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = accepted_grammar(&mut rng, small_shape());
        for _ in 0..10 {
            let input = random_input(&mut rng, 10);
            let mut naive = Naive::new(&g.core, &input, 200_000);
            let Ok(expected) = naive.run() else { continue };
            let got = eval_start(&g, &input);
            prop_assert_eq!(&got.extents, &expected.extents, "{} on {:?}", g.source, input);
            prop_assert_eq!(got.failed, expected.failed, "{} on {:?}", g.source, input);
        }
    }

    #[test]
    fn trees_tile_their_extent(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = accepted_grammar(&mut rng, GrammarShape::mixed());
        for _ in 0..5 {
            let input = random_input(&mut rng, 10);
            let chars: Vec<char> = input.chars().collect();
            let r = parse(&g, &input);
            let forest = Forest::new(&g.slots, &r.bsr);
            for &k in &r.extents {
                let ex = forest.extract_trees(g.slots.start, 0, k, 8).unwrap();
                prop_assert!(!ex.trees.is_empty(), "{} on {:?} at {}", g.source, input, k);
                for tree in &ex.trees {
                    let mut at = 0;
                    for (token, i, end) in tree.leaves() {
                        prop_assert_eq!(i, at);
                        let id = g.lex.lookup(token).unwrap();
                        prop_assert_eq!(g.lex.scan(&chars, i).get(id), Some(end));
                        at = end;
                    }
                    prop_assert_eq!(at, k);
                }
                let distinct: BTreeSet<String> = ex.trees.iter().map(|t| format!("{:?}", t)).collect();
                prop_assert_eq!(distinct.len(), ex.trees.len());
            }
        }
    }

    #[test]
    fn nullable_matches_oracle_on_empty_input(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let shape = GrammarShape { max_nonterminals: 4, lookahead: false, ..GrammarShape::mixed() };
        let g = accepted_grammar(&mut rng, shape);
        let nullable = g.nullable();
        let mut oracle = Oracle::for_compiled(&g, "");
        for name in g.core.rules.keys() {
            let r = oracle.eval_nt(name, 0);
            prop_assert_eq!(nullable.of(name), r.extents.contains(&0), "{} for {}", g.source, name);
        }
    }

    #[test]
    fn first_covers_every_match(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = accepted_grammar(&mut rng, GrammarShape { max_nonterminals: 4, ..GrammarShape::mixed() });
        let first = g.first();
        let input = random_input(&mut rng, 8);
        let chars: Vec<char> = input.chars().collect();
        let mut oracle = Oracle::for_compiled(&g, &input);
        for (pos, c) in chars.iter().enumerate() {
            for name in g.core.rules.keys() {
                if oracle.eval_nt(name, pos).extents.iter().any(|&k| k > pos) {
                    let token = literal_token_name(&c.to_string());
                    prop_assert!(first.of(name).contains(&token), "{} for {} at {}", g.source, name, pos);
                }
            }
        }
    }

    #[test]
    fn desugaring_is_idempotent(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = sugared_grammar(&mut rng);
        let once = desugar(&g);
        prop_assert!(is_desugared(&once));
        prop_assert_eq!(&desugar(&once), &once);
        for name in g.rules.keys() {
            prop_assert!(once.rules.contains_key(name));
        }
        let fresh = once.rules.keys().filter(|n| !g.rules.contains_key(*n));
        for name in fresh {
            prop_assert!(name.starts_with('#'));
        }
    }

    #[test]
    fn sugared_grammars_agree_with_oracle(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = loop {
            if let Ok(g) = CompiledGrammar::new(sugared_grammar(&mut rng)) {
                break g;
            }
        };
        for _ in 0..10 {
            let input = random_input(&mut rng, 12);
            prop_assert_eq!(parse(&g, &input).extents, eval_start(&g, &input).extents, "{}", g.source);
        }
    }

    #[test]
    fn token_maps_match_naive_regex(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let pick = |rng: &mut StdRng| loop {
            let re = Re::random(rng, 3);
            if !re.accepts_empty() {
                return re;
            }
        };
        let tokens: Vec<Re> = (0..rng.random_range(1..=4)).map(|_| pick(&mut rng)).collect();
        let defs: Vec<TokenDef> = tokens.iter().enumerate().map(|(n, re)| TokenDef::regex(format!("t{n}"), re.pattern())).collect();
        let table = LexTable::compile(&defs).unwrap();
        let input: String = (0..rng.random_range(0..=64)).map(|_| ALPHABET[rng.random_range(0..3)]).collect();
        let chars: Vec<char> = input.chars().collect();
        let mut session = LexSession::new(&table, &input);
        for pos in 0..=chars.len() {
            let map = table.scan(&chars, pos);
            prop_assert_eq!(session.tokens(pos), &map);
            for (n, re) in tokens.iter().enumerate() {
                prop_assert_eq!(map.get(table.lookup(&format!("t{n}")).unwrap()), re.longest(&chars, pos));
            }
        }
    }

    #[test]
    fn skipping_reaches_the_same_fixpoint(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let defs = vec![
            TokenDef::regex("x", "x"),
            TokenDef::skip("spaces", " +"),
            TokenDef::skip("pairs", "( -)+"),
            TokenDef::skip("dash", "-"),
        ];
        let table = LexTable::compile(&defs).unwrap();
        let chars: Vec<char> = (0..rng.random_range(0..=24)).map(|_| [' ', '-', 'x'][rng.random_range(0..3)]).collect();
        for pos in 0..=chars.len() {
            let end = table.skip_from(&chars, pos);
            // Everything between is skippable and the next character is not.
            prop_assert!(chars[pos..end].iter().all(|&c| c != 'x'));
            prop_assert!(end == chars.len() || chars[end] == 'x');
        }
    }

    #[test]
    fn traces_are_reproducible(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = accepted_grammar(&mut rng, GrammarShape::mixed());
        let input = random_input(&mut rng, 8);
        let options = ParseOptions { trace: true };
        let a = parse_with(&g, &input, &options);
        let b = parse_with(&g, &input, &options);
        prop_assert_eq!(&a.trace, &b.trace);
        prop_assert_eq!(&a.bsr, &b.bsr);
        let complete: BTreeSet<usize> = complete_extents(&g.slots, a.bsr.iter(), g.slots.start, 0).collect();
        prop_assert_eq!(complete, a.extents);
    }
}

/// Random grammar with sugar: random atoms of a desugared grammar wrapped
/// in `?`, `*`, `+`, groups or nested choices.
fn sugared_grammar(rng: &mut StdRng) -> Grammar {
    let base = random_grammar(rng, small_shape());
    let rules: Vec<(String, Expr)> = base
        .rules
        .values()
        .map(|r| (r.name.clone(), sugar(rng, &r.body)))
        .collect();
    Grammar::from_rules(rules)
}

fn sugar(rng: &mut StdRng, e: &Expr) -> Expr {
    let rebuilt = match &e.kind {
        ExprKind::Seq(items) => Expr::seq(items.iter().map(|i| sugar(rng, i)).collect()),
        ExprKind::Ordered(alts) => Expr::ordered(alts.iter().map(|a| sugar(rng, a)).collect()),
        ExprKind::Unordered(alts) => Expr::unordered(alts.iter().map(|a| sugar(rng, a)).collect()),
        _ => e.clone(),
    };
    if !matches!(e.kind, ExprKind::Literal(_) | ExprKind::Nonterminal(_)) {
        return rebuilt;
    }
    match rng.random_range(0..10) {
        0 => Expr::opt(rebuilt),
        1 => Expr::star(rebuilt),
        2 => Expr::plus(rebuilt),
        3 => Expr::group(Expr::seq(vec![rebuilt, Expr::lit("a")])),
        4 => Expr::not(Expr::group(Expr::ordered(vec![rebuilt, Expr::lit("b")]))),
        5 => Expr::group(Expr::unordered(vec![rebuilt, Expr::lit("c")])),
        _ => rebuilt,
    }
}
