mod oracle;

use std::collections::BTreeSet;

use mtqe_core::agreement::{agreement_table, ConfusionMatrix, Dimension, Kappa};
use mtqe_core::ingestion::{export_sheet, from_document, import_sheet, to_document, Delimiter};
use mtqe_core::model::{
    validate_annotation, Annotation, ErrorCategory, Project, Score, ScoringConfig, Segment, Severities, Severity,
    SystemOutput,
};
use mtqe_core::protocol::{finalize, DecisionTree, NodeKind, Response};
use mtqe_core::scoring::{bucket, category_totals, segs, Bucket};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn severity() -> impl Strategy<Value = Severity> {
    prop_oneof![Just(Severity::NoError), Just(Severity::Minor), Just(Severity::Major)]
}

fn severities() -> impl Strategy<Value = Severities> {
    prop::array::uniform5(severity()).prop_map(|arr| ErrorCategory::ALL.into_iter().zip(arr).collect())
}

fn one_item_project() -> Project {
    let mut p = Project::new("p");
    p.add_segment(Segment::new("s", "da", "gold")).unwrap();
    p.add_output(SystemOutput {
        segment_id: "s".into(),
        system_id: "x".into(),
        hypothesis: "mt".into(),
    })
    .unwrap();
    p.add_annotator("a".into());
    p
}

fn ratings(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..=50).prop_flat_map(move |n| (prop::collection::vec(0..k, n), prop::collection::vec(0..k, n)))
}

fn kappa_of(a: &[usize], b: &[usize], k: usize) -> Kappa {
    ConfusionMatrix::from_ratings(a, b, k).unwrap().qwk().unwrap()
}

#[test]
fn validator_rejects_random_gating_violations() {
    let p = one_item_project();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rejected = 0;
    for _ in 0..10_000 {
        let mut s = oracle::random_valid_severities(&mut rng);
        // force a meaning-transfer error plus some adaptation judgment
        let mt = ErrorCategory::MEANING_TRANSFER[rng.random_range(0..3)];
        s.set(
            mt,
            if rng.random_bool(0.5) {
                Severity::Minor
            } else {
                Severity::Major
            },
        );
        let mut a = Annotation::new("a", "s", "x", s);
        match rng.random_range(0..3) {
            0 => a.severities.set(ErrorCategory::Adp, Severity::Minor),
            1 => a.severities.set(ErrorCategory::Adp, Severity::Major),
            _ => a.adp_applicable = true,
        }
        let err = validate_annotation(&a, &p).unwrap_err();
        assert!(err.iter().all(|v| v.is_gating()));
        rejected += 1;
    }
    assert_eq!(rejected, 10_000);
}

#[test]
fn random_protocol_walks_agree_with_validator() {
    let tree = DecisionTree::default_tree();
    let p = one_item_project();
    let seg = p.segment(&"s".into()).unwrap();
    let out = p.output(&"s".into(), &"x".into()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let mut state = tree.start_session(seg, out, "a".into()).unwrap();
        while let Some(node) = tree.current_node(&state) {
            let r = match node.kind {
                NodeKind::Question { .. } => {
                    if rng.random_bool(0.4) {
                        Response::Yes
                    } else {
                        Response::No
                    }
                }
                NodeKind::SeverityPrompt { .. } => Response::Severity(if rng.random_bool(0.5) {
                    Severity::Minor
                } else {
                    Severity::Major
                }),
                NodeKind::Terminal { .. } => unreachable!("terminals are settled by the engine"),
            };
            state = tree.answer(state, r).unwrap();
        }
        let a = finalize(&state).unwrap();
        assert!(validate_annotation(&a, &p).is_ok(), "{a:?}");
        let replayed = tree.replay("s".into(), "x".into(), "a".into(), &state.trail).unwrap();
        assert_eq!(replayed, state);
        assert_eq!(finalize(&replayed).unwrap(), a);
    }
}

#[test]
fn engine_exploration_matches_independent_enumeration() {
    let tree = DecisionTree::default_tree();
    let engine: BTreeSet<Vec<(ErrorCategory, u8)>> = tree
        .explore()
        .into_iter()
        .map(|w| {
            let a = w.result.expect("no reachable walk breaks gating");
            ErrorCategory::ALL
                .into_iter()
                .map(|c| (c, a.severity(c).level()))
                .collect()
        })
        .collect();
    let walked = oracle::enumerate_tree(&tree);
    let independent: BTreeSet<Vec<(ErrorCategory, u8)>> = walked
        .iter()
        .map(|m| {
            ErrorCategory::ALL
                .into_iter()
                .map(|c| (c, m.get(&c).copied().unwrap_or(0)))
                .collect()
        })
        .collect();
    assert_eq!(engine, independent);
    assert_eq!(tree.explore().len(), walked.len());
    // every gating-consistent assignment is reachable: 3^4 FLU/PRN/TRM/GSMIS
    // combinations, of which the 3 with clean meaning transfer fan out over ADP
    let clean_mt = 3;
    assert_eq!(independent.len(), 81 - clean_mt + 3 * clean_mt);
}

#[test]
fn bucket_partition_on_grid() {
    let cfg = ScoringConfig::default();
    for step in 0..=32 {
        let s = Score::new(step, 4);
        let zero = Score::from_integer(0);
        let predicates = [s == zero, s > zero && s <= cfg.minor_upper, s > cfg.minor_upper];
        assert_eq!(predicates.iter().filter(|&&p| p).count(), 1, "{s}");
        assert!(predicates[bucket(s, &cfg).ordinal() as usize]);
    }
}

#[test]
fn adp_weight_example_is_exact() {
    let s = Severities::default()
        .with(ErrorCategory::Flu, Severity::Minor)
        .with(ErrorCategory::Adp, Severity::Minor);
    let a = Annotation::new("a", "s", "x", s);
    assert_eq!(segs(&a, &ScoringConfig::default()).unwrap(), Score::new(3, 2));
}

#[test]
fn totals_match_summed_segs_on_random_projects() {
    let cfg = ScoringConfig::default();
    for seed in 0..100 {
        let p = oracle::random_project(seed);
        for sys in p.systems() {
            let t = category_totals(&p, &sys, &cfg).unwrap();
            assert_eq!(
                t.grand_total,
                oracle::summed_segs(&p, &sys, cfg.adp_weight),
                "seed {seed}"
            );
        }
    }
}

#[test]
fn agreement_pipeline_matches_oracle() {
    let cfg = ScoringConfig::default();
    for seed in 0..20 {
        let p = oracle::noisy_pair_project(seed, 50, 0.7);
        let table = agreement_table(&p, &cfg).unwrap();
        let want = oracle::agreement_oracle(&p, cfg.adp_weight, cfg.minor_upper);
        for sys in p.systems() {
            for dim in Dimension::ALL {
                let got = table.row(dim, &sys).unwrap().kappa.value();
                let exp = want[&(dim.label().to_owned(), sys.to_string())];
                match (got, exp) {
                    (Some(g), Some(e)) => assert!((g - e).abs() < 1e-9, "{dim:?} {sys}: {g} vs {e}"),
                    (g, e) => assert_eq!(g, e, "{dim:?} {sys}"),
                }
            }
        }
    }
}

#[test]
fn qwk_independence_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let a: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..3)).collect();
    let b: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..3)).collect();
    let k = kappa_of(&a, &b, 3).value().unwrap();
    assert!(k.abs() < 0.02, "{k}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn qwk_matches_bruteforce(k in 2usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=50);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let got = kappa_of(&a, &b, k).value();
        let want = oracle::qwk_bruteforce(&a, &b, k);
        match (got, want) {
            (Some(g), Some(w)) => prop_assert!((g - w).abs() <= 1e-12, "{} vs {}", g, w),
            (g, w) => prop_assert_eq!(g, w),
        }
    }

    #[test]
    fn perfect_agreement_is_one(a in prop::collection::vec(0usize..3, 2..40)) {
        prop_assume!(a.iter().collect::<BTreeSet<_>>().len() >= 2);
        prop_assert_eq!(kappa_of(&a, &a, 3), Kappa::Value(1.0));
    }

    #[test]
    fn qwk_invariances((a, b) in ratings(3)) {
        let k = kappa_of(&a, &b, 3);
        prop_assert_eq!(kappa_of(&b, &a, 3), k);
        let rev = |v: &[usize]| v.iter().map(|x| 2 - x).collect::<Vec<_>>();
        prop_assert_eq!(kappa_of(&rev(&a), &rev(&b), 3), k);
        let mut pairs: Vec<_> = a.iter().copied().zip(b.iter().copied()).collect();
        pairs.reverse();
        pairs.rotate_left(a.len() / 3);
        let (pa, pb): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        prop_assert_eq!(kappa_of(&pa, &pb, 3), k);
    }

    #[test]
    fn segs_monotone_and_adp_discounted(s in severities(), c in 0usize..5) {
        let cfg = ScoringConfig::default();
        let cat = ErrorCategory::ALL[c];
        let mut base = s;
        if base.meaning_transfer_error().is_some() {
            base.set(ErrorCategory::Adp, Severity::NoError);
        }
        let bumped_sev = match base.get(cat) {
            Severity::NoError => Severity::Minor,
            _ => Severity::Major,
        };
        let bumped = base.with(cat, bumped_sev);
        let (a, b) = (Annotation::new("a", "s", "x", base), Annotation::new("a", "s", "x", bumped));
        prop_assume!(b.gating_violations().is_empty());
        let (sa, sb) = (segs(&a, &cfg).unwrap(), segs(&b, &cfg).unwrap());
        prop_assert!(sb >= sa);
        prop_assert_eq!(sa, oracle::segs_oracle(&a, cfg.adp_weight));
        if cat == ErrorCategory::Adp && base.get(cat) == Severity::NoError {
            prop_assert_eq!(sb - sa, cfg.adp_weight);
        } else if base.get(cat) != bumped_sev {
            prop_assert_eq!(sb - sa, if cat == ErrorCategory::Adp { cfg.adp_weight } else { Score::from_integer(1) });
        }
    }

    #[test]
    fn buckets_are_total(num in 0i64..1000, den in 1i64..50) {
        let cfg = ScoringConfig::default();
        let s = Score::new(num, den);
        let b = bucket(s, &cfg);
        let expected = if num == 0 { Bucket::NoEdit } else if s <= cfg.minor_upper { Bucket::Minor } else { Bucket::Major };
        prop_assert_eq!(b, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sheet_roundtrip(seed in any::<u64>(), comma in any::<bool>()) {
        let p = oracle::random_project(seed);
        let sys = p.systems()[0].clone();
        let ann = p.annotators[0].clone();
        let delim = if comma { Delimiter::Comma } else { Delimiter::Tab };
        let sheet = export_sheet(&p, &sys, &ann, delim).unwrap();

        let mut fresh = p.clone();
        fresh.annotations.clear();
        let outcome = import_sheet(sheet.as_bytes(), sys.clone(), ann.clone(), &fresh).unwrap();
        prop_assert!(outcome.rejected.is_empty(), "{:?}", outcome.rejected);
        prop_assert!(outcome.warnings.is_empty(), "{:?}", outcome.warnings);
        prop_assert!(outcome.new_segments.is_empty());
        let auth = p.authoritative_annotations().unwrap();
        let mine: Vec<_> = auth.values().filter(|a| a.system_id == sys && a.annotator_id == ann).collect();
        prop_assert_eq!(outcome.annotations.len(), mine.len());
        for want in mine {
            let got = outcome.annotations.iter().find(|a| a.key() == want.key()).unwrap();
            prop_assert!(got.same_judgment(want), "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn project_document_roundtrip(seed in any::<u64>()) {
        let p = oracle::random_project(seed);
        let doc = to_document(&p);
        prop_assert_eq!(from_document(&doc).unwrap(), p);
    }
}

#[test]
fn empty_cells_read_as_zero() {
    let p = one_item_project();
    let sheet = "DA\tGOLD\tMT\tFLU\tPRN\tTRM\tGSMIS\tADP\nda\tgold\tmt\t\t\t\t\t\n";
    let o = import_sheet(sheet.as_bytes(), "x".into(), "a".into(), &p).unwrap();
    assert_eq!(o.annotations.len(), 1);
    assert_eq!(o.annotations[0].severities, Severities::default());
}
