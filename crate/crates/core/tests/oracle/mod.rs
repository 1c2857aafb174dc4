//! Independent reference computations for tests. Nothing here calls the
//! library code path it is used to check.
#![allow(dead_code)]

pub mod fixtures;

use std::collections::{BTreeMap, HashMap};

use mtqe_core::model::{
    Annotation, AnnotatorId, ErrorCategory, Project, Score, Segment, SegmentId, Severities, Severity, SystemId,
    SystemOutput,
};
use mtqe_core::protocol::{DecisionTree, Guard, NodeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quadratic weighted kappa written out term by term from the ratings:
/// O = counts / n, E = outer(row marginals, column marginals) / n^2,
/// w = (i - j)^2 / (k - 1)^2, kappa = 1 - sum(wO) / sum(wE).
/// `None` when sum(wE) = 0 but sum(wO) > 0.
pub fn qwk_bruteforce(a: &[usize], b: &[usize], k: usize) -> Option<f64> {
    let n = a.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        observed[x][y] += 1.0 / n;
    }
    let mut hist_a = vec![0.0f64; k];
    let mut hist_b = vec![0.0f64; k];
    for &x in a {
        hist_a[x] += 1.0 / n;
    }
    for &y in b {
        hist_b[y] += 1.0 / n;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        for j in 0..k {
            let d = i as f64 - j as f64;
            let w = d * d / ((k - 1) as f64 * (k - 1) as f64);
            num += w * observed[i][j];
            den += w * hist_a[i] * hist_b[j];
        }
    }
    if den == 0.0 {
        return if num == 0.0 { Some(1.0) } else { None };
    }
    Some(1.0 - num / den)
}

pub fn level(s: Severity) -> i64 {
    match s {
        Severity::NoError => 0,
        Severity::Minor => 1,
        Severity::Major => 2,
    }
}

/// FLU + PRN + TRM + GSMIS + w * ADP.
pub fn segs_oracle(a: &Annotation, adp_weight: Score) -> Score {
    let s = |c| Score::from_integer(level(a.severities.get(c)));
    s(ErrorCategory::Flu)
        + s(ErrorCategory::Prn)
        + s(ErrorCategory::Trm)
        + s(ErrorCategory::Gsmis)
        + adp_weight * s(ErrorCategory::Adp)
}

pub type Triple = (AnnotatorId, SegmentId, SystemId);

/// Latest revision per triple, scanning the raw log.
pub fn latest(log: &[Annotation]) -> HashMap<Triple, Annotation> {
    let mut out: HashMap<Triple, Annotation> = HashMap::new();
    for a in log {
        let key = (a.annotator_id.clone(), a.segment_id.clone(), a.system_id.clone());
        let newer = out.get(&key).is_none_or(|b| a.revision > b.revision);
        if newer {
            out.insert(key, a.clone());
        }
    }
    out
}

/// Sum over segments of the mean SEGS across annotators.
pub fn summed_segs(project: &Project, system: &SystemId, adp_weight: Score) -> Score {
    let latest = latest(&project.annotations);
    let mut total = Score::from_integer(0);
    for seg in &project.segments {
        let vals: Vec<Score> = latest
            .values()
            .filter(|a| a.segment_id == seg.id && &a.system_id == system)
            .map(|a| segs_oracle(a, adp_weight))
            .collect();
        assert!(!vals.is_empty(), "oracle needs full coverage");
        let n = vals.len() as i64;
        total += vals.into_iter().sum::<Score>() / Score::from_integer(n);
    }
    total
}

/// Agreement table recomputed from the raw log with default conventions
/// (max for meaning transfer, SEGS bucket for overall, ADP only where both
/// annotators could assess it). Keys are (dimension label, system).
pub fn agreement_oracle(
    project: &Project,
    adp_weight: Score,
    minor_upper: Score,
) -> BTreeMap<(String, String), Option<f64>> {
    let latest = latest(&project.annotations);
    let mut annotators: Vec<AnnotatorId> = latest.keys().map(|k| k.0.clone()).collect();
    annotators.sort();
    annotators.dedup();
    assert_eq!(annotators.len(), 2);
    let mut systems: Vec<SystemId> = Vec::new();
    for o in &project.outputs {
        if !systems.contains(&o.system_id) {
            systems.push(o.system_id.clone());
        }
    }
    let overall = |a: &Annotation| {
        let s = segs_oracle(a, adp_weight);
        if s == Score::from_integer(0) {
            0
        } else if s <= minor_upper {
            1
        } else {
            2
        }
    };
    let mt = |a: &Annotation| {
        [ErrorCategory::Prn, ErrorCategory::Trm, ErrorCategory::Gsmis]
            .iter()
            .map(|&c| level(a.severities.get(c)) as usize)
            .max()
            .unwrap()
    };
    let mut out = BTreeMap::new();
    for sys in &systems {
        let mut pairs = Vec::new();
        for seg in &project.segments {
            let get = |who: &AnnotatorId| latest.get(&(who.clone(), seg.id.clone(), sys.clone()));
            if let (Some(x), Some(y)) = (get(&annotators[0]), get(&annotators[1])) {
                // table rows follow the project's annotator order
                let first_is_0 = project.annotators.iter().position(|a| a == &annotators[0])
                    < project.annotators.iter().position(|a| a == &annotators[1]);
                pairs.push(if first_is_0 {
                    (x.clone(), y.clone())
                } else {
                    (y.clone(), x.clone())
                });
            }
        }
        let mut put = |label: &str, la: Vec<usize>, lb: Vec<usize>| {
            let k = if la.is_empty() {
                None
            } else {
                qwk_bruteforce(&la, &lb, 3)
            };
            out.insert((label.to_owned(), sys.to_string()), k);
        };
        let fl = |a: &Annotation| level(a.severities.get(ErrorCategory::Flu)) as usize;
        let ad = |a: &Annotation| level(a.severities.get(ErrorCategory::Adp)) as usize;
        put(
            "Fluency",
            pairs.iter().map(|p| fl(&p.0)).collect(),
            pairs.iter().map(|p| fl(&p.1)).collect(),
        );
        put(
            "Meaning Transfer",
            pairs.iter().map(|p| mt(&p.0)).collect(),
            pairs.iter().map(|p| mt(&p.1)).collect(),
        );
        let both: Vec<_> = pairs
            .iter()
            .filter(|p| p.0.adp_applicable && p.1.adp_applicable)
            .collect();
        put(
            "Adaptation",
            both.iter().map(|p| ad(&p.0)).collect(),
            both.iter().map(|p| ad(&p.1)).collect(),
        );
        put(
            "Overall",
            pairs.iter().map(|p| overall(&p.0)).collect(),
            pairs.iter().map(|p| overall(&p.1)).collect(),
        );
    }
    out
}

/// Every severity assignment reachable in `tree`, found by walking the node
/// data directly (not through the session engine).
pub fn enumerate_tree(tree: &DecisionTree) -> Vec<BTreeMap<ErrorCategory, u8>> {
    fn walk(
        tree: &DecisionTree,
        at: Option<&str>,
        partial: BTreeMap<ErrorCategory, u8>,
        out: &mut Vec<BTreeMap<ErrorCategory, u8>>,
    ) {
        let Some(id) = at else {
            out.push(partial);
            return;
        };
        let node = tree.node(id).expect("valid tree");
        match &node.kind {
            NodeKind::Terminal { .. } => out.push(partial),
            NodeKind::Question { guard, yes, no, .. } => {
                let blocked = matches!(guard, Some(Guard::NoMeaningTransferError))
                    && [ErrorCategory::Prn, ErrorCategory::Trm, ErrorCategory::Gsmis]
                        .iter()
                        .any(|c| partial.get(c).copied().unwrap_or(0) > 0);
                if !blocked {
                    walk(tree, Some(yes), partial.clone(), out);
                }
                walk(tree, Some(no), partial, out);
            }
            NodeKind::SeverityPrompt { category, next, .. } => {
                for v in [1u8, 2] {
                    let mut p = partial.clone();
                    let slot = p.entry(*category).or_insert(0);
                    *slot = (*slot).max(v);
                    walk(tree, next.as_deref(), p, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(tree, Some(tree.root()), BTreeMap::new(), &mut out);
    out
}

pub fn random_severity(rng: &mut impl Rng, p_error: f64) -> Severity {
    if rng.random_bool(p_error) {
        if rng.random_bool(0.5) {
            Severity::Minor
        } else {
            Severity::Major
        }
    } else {
        Severity::NoError
    }
}

/// Random severities that satisfy the gating rule.
pub fn random_valid_severities(rng: &mut impl Rng) -> Severities {
    let p = rng.random_range(0.05..0.6);
    let mut s: Severities = ErrorCategory::ALL
        .into_iter()
        .map(|c| (c, random_severity(rng, p)))
        .collect();
    if s.meaning_transfer_error().is_some() {
        s.set(ErrorCategory::Adp, Severity::NoError);
    }
    s
}

/// Random text with characters that stress delimited formats.
pub fn tricky_text(rng: &mut impl Rng, tag: &str) -> String {
    const PIECES: [&str; 10] = ["شو", "قصتك", "ما الخطب", ",", "\t", "\"", "'", "بيجنن", " ", "\n"];
    let mut s = format!("{tag} ");
    for _ in 0..rng.random_range(1..6) {
        s.push_str(PIECES[rng.random_range(0..PIECES.len())]);
    }
    s
}

/// A project where every (segment, system) pair carries an authoritative
/// annotation from every annotator, with occasional older revisions in the log.
pub fn random_project(seed: u64) -> Project {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Project::new(format!("random-{seed}"));
    let segments = rng.random_range(1..12);
    let systems = rng.random_range(1..4);
    let annotators = rng.random_range(1..4);
    for a in 0..annotators {
        p.add_annotator(AnnotatorId::new(format!("ann{a}")));
    }
    for i in 0..segments {
        p.add_segment(Segment::new(
            format!("s{i}"),
            tricky_text(&mut rng, &format!("da{i}")),
            tricky_text(&mut rng, &format!("gold{i}")),
        ))
        .unwrap();
        for s in 0..systems {
            p.add_output(SystemOutput {
                segment_id: SegmentId::new(format!("s{i}")),
                system_id: SystemId::new(format!("sys{s}")),
                hypothesis: tricky_text(&mut rng, "mt"),
            })
            .unwrap();
        }
    }
    for i in 0..segments {
        for s in 0..systems {
            for a in 0..annotators {
                let revisions = if rng.random_bool(0.2) { 2 } else { 1 };
                for r in 1..=revisions {
                    let ann = Annotation::new(
                        format!("ann{a}"),
                        format!("s{i}"),
                        format!("sys{s}"),
                        random_valid_severities(&mut rng),
                    )
                    .with_revision(r);
                    p.append_annotation(ann).unwrap();
                }
            }
        }
    }
    p
}

/// Two-annotator project whose second annotator copies the first with
/// probability `agree` per category.
pub fn noisy_pair_project(seed: u64, segments: usize, agree: f64) -> Project {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Project::new("noisy");
    p.add_annotator("first".into());
    p.add_annotator("second".into());
    for i in 0..segments {
        p.add_segment(Segment::new(format!("s{i}"), format!("da {i}"), format!("gold {i}")))
            .unwrap();
        for sys in ["A", "B"] {
            p.add_output(SystemOutput {
                segment_id: SegmentId::new(format!("s{i}")),
                system_id: sys.into(),
                hypothesis: format!("{sys} {i}"),
            })
            .unwrap();
        }
    }
    for sys in ["A", "B"] {
        for i in 0..segments {
            let a = random_valid_severities(&mut rng);
            let mut b: Severities = a
                .iter()
                .map(|(c, s)| {
                    (
                        c,
                        if rng.random_bool(agree) {
                            s
                        } else {
                            random_severity(&mut rng, 0.4)
                        },
                    )
                })
                .collect();
            if b.meaning_transfer_error().is_some() {
                b.set(ErrorCategory::Adp, Severity::NoError);
            }
            p.append_annotation(Annotation::new("first", format!("s{i}"), sys, a))
                .unwrap();
            p.append_annotation(Annotation::new("second", format!("s{i}"), sys, b))
                .unwrap();
        }
    }
    p
}
