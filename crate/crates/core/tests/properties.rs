//! Invariants over randomly generated programs and edits.

mod common;

use std::collections::BTreeMap;
use std::fs;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tia::differ::{diff_methods, diff_methods_with, DiffOptions};
use tia::mapstore::SelectionReport;
use tia::minilang::lexer::{tokenize, Token};
use tia::minilang::{build_hierarchy, check_program, parse, print_unit};
use tia::mutator::{evaluate, generate_mutants, EvalOptions, MutateError, MutationOperator};
use tia::pipeline::{cmd_pipeline, cmd_run, load_suite, CorpusLayout, RunManifest};
use tia::runtime::Outcome;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Re-spells `src` token by token with random whitespace and comments.
fn respace(src: &str, rng: &mut ChaCha8Rng) -> String {
    const GAPS: [&str; 6] = [" ", "\n", "\t  ", " /* note */ ", " // aside\n", "\n\n    "];
    let mut out = String::new();
    for t in tokenize(src).unwrap() {
        if t.token == Token::Eof {
            break;
        }
        out.push_str(&t.token.to_string());
        out.push_str(GAPS.choose(rng).unwrap());
    }
    out
}

fn cases() -> ProptestConfig {
    ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn printing_is_a_fixpoint(seed in any::<u64>()) {
        let src = common::gen_program(&mut rng(seed)).render();
        let once = print_unit(&parse(&src, "p.mj").unwrap());
        let twice = print_unit(&parse(&once, "p.mj").unwrap());
        prop_assert_eq!(&once, &twice);
        let tests = common::render_tests(&common::gen_tests(&mut rng(seed), &common::gen_program(&mut rng(seed))));
        let once = print_unit(&parse(&tests, "t.mj").unwrap());
        prop_assert_eq!(print_unit(&parse(&once, "t.mj").unwrap()), once);
    }

    #[test]
    fn reformatting_and_reordering_change_nothing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let prog = common::gen_program(&mut r);
        let old = common::units(&prog.render(), "p.mj").unwrap();

        let mut shuffled = prog.clone();
        for c in &mut shuffled.classes {
            c.methods.shuffle(&mut r);
        }
        let respaced = respace(&shuffled.render(), &mut r);
        let new = vec![parse(&respaced, "p.mj").unwrap()];
        prop_assert!(diff_methods(&old, &new).unwrap().is_empty());
        let safe = DiffOptions { safe_removal: true };
        prop_assert!(diff_methods_with(&old, &new, safe).unwrap().is_empty());
    }

    #[test]
    fn cyclic_hierarchies_are_rejected(seed in any::<u64>(), cycle in 1usize..5, extra in 0usize..4) {
        let mut r = rng(seed);
        let mut src = String::new();
        for i in 0..cycle {
            src.push_str(&format!("class K{i} extends K{} {{ void m() {{}} }}\n", (i + 1) % cycle));
        }
        for i in 0..extra {
            let parent = r.gen_range(0..cycle + i);
            let parent = if parent < cycle { format!("K{parent}") } else { format!("E{}", parent - cycle) };
            src.push_str(&format!("class E{i} extends {parent} {{}}\n"));
        }
        let units = vec![parse(&src, "p.mj").unwrap()];
        prop_assert!(build_hierarchy(&units).is_err());
        prop_assert!(check_program(&units).is_err());
        let fine = vec![parse("class K0 {}", "q.mj").unwrap()];
        prop_assert!(diff_methods(&fine, &units).is_err());
    }

    #[test]
    fn analysis_and_mutants_are_deterministic(seed in any::<u64>()) {
        let case = common::fuzz_case(&mut rng(seed));
        let old = common::units(&case.old_src, "p.mj").unwrap();
        let new = common::units(&case.new_src, "p.mj").unwrap();
        prop_assert_eq!(diff_methods(&old, &new).unwrap(), diff_methods(&old, &new).unwrap());

        let listing = |g: &tia::mutator::Generation| -> Vec<String> {
            g.mutants
                .iter()
                .map(|m| format!("{} {} {} {} {}", m.id, m.operator, m.location, m.description, print_unit(&m.program[0])))
                .collect()
        };
        let a = generate_mutants(&old, &MutationOperator::ALL, None);
        let b = generate_mutants(&old, &MutationOperator::ALL, None);
        prop_assert_eq!(listing(&a), listing(&b));
        prop_assert!(a.mutants.iter().enumerate().all(|(i, m)| m.id == i));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mutation_matrix_is_reproducible(seed in any::<u64>()) {
        let case = common::fuzz_case(&mut rng(seed));
        let program = common::units(&case.old_src, "p.mj").unwrap();
        let suite = common::suite(&case.tests_src);
        let options = EvalOptions { max_step_budget: 20_000, ..EvalOptions::default() };
        let ops = [MutationOperator::MathOperatorReplace, MutationOperator::InlineConstant];
        match evaluate(&program, &suite, &ops, &options) {
            Err(MutateError::RedBaseline(_)) => {}
            Err(e) => prop_assert!(false, "{}", e),
            Ok(first) => {
                let second = evaluate(&program, &suite, &ops, &options).unwrap();
                prop_assert_eq!(first.matrix_tsv(), second.matrix_tsv());
                prop_assert_eq!(first.summary.missed, 0);
            }
        }
    }
}

fn outcomes(m: &RunManifest) -> BTreeMap<String, Outcome> {
    m.executions.iter().map(|e| (e.test.clone(), e.outcome)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    /// The pipeline with safe removal: selected tests behave as in a full run,
    /// and every test whose outcome changes is among them.
    #[test]
    fn pipeline_selection_is_safe(seed in any::<u64>()) {
        let case = common::fuzz_case(&mut rng(seed));
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        for (sub, text) in [("old", &case.old_src), ("new", &case.new_src), ("tests", &case.tests_src)] {
            fs::create_dir_all(root.join(sub)).unwrap();
            fs::write(root.join(sub).join("p.mj"), text).unwrap();
        }
        let cfg = common::fuzz_config();
        let layout = CorpusLayout::new(root).with_src(&root.join("old")).with_map(&root.join("tia.map"));
        let suite = load_suite(&layout.test_dir).unwrap();

        let mut before = RunManifest::new(0);
        cmd_run(&SelectionReport::all(&suite), &layout, &cfg, &mut before).unwrap();
        let safe = DiffOptions { safe_removal: true };
        let run = cmd_pipeline(&root.join("old"), &root.join("new"), &layout, &cfg, safe).unwrap();

        let full_layout = CorpusLayout::new(root).with_src(&root.join("new")).with_map(&root.join("full.map"));
        let mut full = RunManifest::new(0);
        cmd_run(&SelectionReport::all(&suite), &full_layout, &cfg, &mut full).unwrap();

        let (old_out, new_full, selected) = (outcomes(&before), outcomes(&full), outcomes(&run));
        for (test, outcome) in &selected {
            prop_assert_eq!(Some(outcome), new_full.get(test), "{} differs from the full run", test);
        }
        for (test, outcome) in &new_full {
            if old_out.get(test) != Some(outcome) {
                prop_assert!(selected.contains_key(test), "{} changed outcome but was not selected", test);
            }
        }
    }
}
