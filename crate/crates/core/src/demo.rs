//! Bundled synthetic demo project: 20 segments, 3 systems, 2 simulated
//! annotators. Texts are placeholders and the judgments are random draws from
//! a fixed seed; none of it is real evaluation data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Annotation, ErrorCategory, Project, Segment, Severities, Severity, SystemId, SystemOutput};

pub const DEMO_SEGMENTS: usize = 20;
pub const DEMO_SYSTEMS: [&str; 3] = ["sys-a", "sys-b", "sys-c"];
pub const DEMO_ANNOTATORS: [&str; 2] = ["ann-1", "ann-2"];
const SEED: u64 = 20_240_705;

/// Per-category error probability of each demo system.
const ERROR_RATE: [f64; 3] = [0.15, 0.22, 0.35];
/// Chance the second annotator copies the first on a category.
const AGREE: f64 = 0.75;

fn draw(rng: &mut impl Rng, p: f64) -> Severity {
    if rng.random_bool(p) {
        if rng.random_bool(0.5) {
            Severity::Minor
        } else {
            Severity::Major
        }
    } else {
        Severity::NoError
    }
}

fn gate(mut s: Severities) -> Severities {
    if s.meaning_transfer_error().is_some() {
        s.set(ErrorCategory::Adp, Severity::NoError);
    }
    s
}

pub fn demo_project() -> Project {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut p = Project::new("demo (synthetic)");
    for a in DEMO_ANNOTATORS {
        p.add_annotator(a.into());
    }
    for i in 1..=DEMO_SEGMENTS {
        let id = format!("seg-{i:04}");
        p.add_segment(Segment::new(
            id.as_str(),
            format!("[synthetic] dialect source {i:02}"),
            format!("[synthetic] MSA reference {i:02}"),
        ))
        .expect("fresh ids");
    }
    for sys in DEMO_SYSTEMS {
        for seg in p.segments.clone() {
            p.add_output(SystemOutput {
                segment_id: seg.id.clone(),
                system_id: SystemId::new(sys),
                hypothesis: format!("[synthetic] {sys} output for {}", seg.id),
            })
            .expect("fresh pair");
        }
    }

    for (sys, rate) in DEMO_SYSTEMS.into_iter().zip(ERROR_RATE) {
        for seg in p.segments.clone() {
            let first: Severities = ErrorCategory::ALL
                .into_iter()
                .map(|c| (c, draw(&mut rng, rate)))
                .collect();
            let first = gate(first);
            let second: Severities = first
                .iter()
                .map(|(c, s)| {
                    (
                        c,
                        if rng.random_bool(AGREE) {
                            s
                        } else {
                            draw(&mut rng, rate)
                        },
                    )
                })
                .collect();
            let second = gate(second);
            for (who, sev) in DEMO_ANNOTATORS.into_iter().zip([first, second]) {
                p.append_annotation(Annotation::new(who, seg.id.clone(), sys, sev))
                    .expect("demo annotations are valid");
            }
        }
    }
    p
}
