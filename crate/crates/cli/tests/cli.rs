#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use mtqe_core::demo::demo_project;
use mtqe_core::model::Score;
use serde_json::Value;

fn mtqe(dir: &Path, args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mtqe"))
        .args(args)
        .env("MTQE_DATA_DIR", dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(text) = stdin {
            pipe.write_all(text.as_bytes()).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_json(o: &Output) -> Value {
    assert!(!o.status.success());
    serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|_| panic!("stderr not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

const HEADER: &str = "DA\tGOLD\tMT\tFLU\tPRN\tTRM\tGSMIS\tADP\n";

#[test]
fn validate_names_gating_row() {
    let dir = tempfile::tempdir().unwrap();
    let sheet = format!("{HEADER}a\tb\tc\t1\t\t\t\t\nd\te\tf\t\t\t2\t\t1\n");
    let o = mtqe(dir.path(), &["validate"], Some(&sheet));
    let err = error_json(&o);
    assert_eq!(err["error"], "RejectedRows");
    assert!(err["message"].as_str().unwrap().contains("row 3"), "{err}");
    assert_eq!(err["details"]["rejected"][0]["row"], 3);

    let clean = format!("{HEADER}a\tb\tc\t1\t\t\t\t\n");
    let o = mtqe(dir.path(), &["validate"], Some(&clean));
    assert_eq!(stdout(&o), "ok: 1 rows\n");
}

#[test]
fn severity_report_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&mtqe(dir.path(), &["init", "demo", "--demo"], None));
    let got = stdout(&mtqe(dir.path(), &["report", "demo", "--kind", "severity"], None));
    let golden = include_str!("golden/severity_demo.txt");
    assert_eq!(got, golden);

    // the golden counts themselves come from an independent recomputation
    let demo = demo_project();
    let latest = oracle::latest(&demo.annotations);
    let half = Score::new(1, 2);
    for sys in demo.systems() {
        let mut counts = [0usize; 3];
        for seg in &demo.segments {
            let vals: Vec<Score> = latest
                .values()
                .filter(|a| a.segment_id == seg.id && a.system_id == sys)
                .map(|a| oracle::segs_oracle(a, half))
                .collect();
            let mean = vals.iter().copied().sum::<Score>() / Score::from_integer(vals.len() as i64);
            let b = if mean == Score::from_integer(0) {
                0
            } else if mean <= Score::from_integer(1) {
                1
            } else {
                2
            };
            counts[b] += 1;
        }
        let row: Vec<&str> = golden
            .lines()
            .find(|l| l.split_whitespace().next() == Some(sys.as_str()))
            .unwrap()
            .split_whitespace()
            .collect();
        assert_eq!(
            [row[2], row[4], row[6]],
            counts.map(|c| c.to_string()).each_ref().map(|s| s.as_str())
        );
    }
}

#[test]
fn tree_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = mtqe(dir.path(), &["tree-check"], None);
    assert!(stdout(&o).starts_with("ok: bundled tree"));

    let cyclic = dir.path().join("loop.toml");
    std::fs::write(
        &cyclic,
        "version = \"x\"\nroot = \"a\"\n[[node]]\nid = \"a\"\nkind = \"question\"\ntext = \"?\"\nyes = \"b\"\nno = \"b\"\n\
         [[node]]\nid = \"b\"\nkind = \"question\"\ntext = \"?\"\nyes = \"a\"\nno = \"a\"\n",
    )
    .unwrap();
    let err = error_json(&mtqe(dir.path(), &["tree-check", cyclic.to_str().unwrap()], None));
    assert_eq!(err["error"], "TreeError");
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&mtqe(dir.path(), &["init", "demo", "--demo"], None));
    for args in [
        ["report", "demo", "--kind", "pattern", "--format", "structured"],
        ["report", "demo", "--kind", "agreement", "--format", "delimited"],
        ["report", "demo", "--kind", "scores", "--format", "text"],
    ] {
        let a = mtqe(dir.path(), &args, None);
        let b = mtqe(dir.path(), &args, None);
        assert_eq!(stdout(&a), stdout(&b));
    }
}

#[test]
fn corpus_and_sheet_workflow() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&mtqe(dir.path(), &["init", "work", "--annotator", "r1"], None));
    let err = error_json(&mtqe(dir.path(), &["init", "work"], None));
    assert_eq!(err["error"], "Conflict");

    let corpus = "DA,GOLD,SYSTEM,MT\nشو قصتك,ما قصتك,A,ما هي قصتك\nوين رايح,إلى أين تذهب,A,أين تذهب\n";
    let o = mtqe(dir.path(), &["import-corpus", "work"], Some(corpus));
    assert_eq!(stdout(&o), "read 2 rows: 2 new segments, 2 new outputs\n");

    let sheet =
        format!("{HEADER}شو قصتك\tما قصتك\tما هي قصتك\t1\t\t\t\t1\nوين رايح\tإلى أين تذهب\tأين تذهب\t\t\t\t\t\n");
    let o = mtqe(
        dir.path(),
        &["import-sheet", "work", "--system", "A", "--annotator", "r1"],
        Some(&sheet),
    );
    assert_eq!(stdout(&o), "imported 2 annotations (0 new segments, 0 new outputs)\n");

    let exported = stdout(&mtqe(
        dir.path(),
        &["export-sheet", "work", "--system", "A", "--annotator", "r1"],
        None,
    ));
    assert!(
        exported.contains("شو قصتك\tما قصتك\tما هي قصتك\t1\t\t\t\t1\t1.50"),
        "{exported}"
    );

    let scores = stdout(&mtqe(dir.path(), &["score", "work"], None));
    assert!(scores.contains("1.50"), "{scores}");

    // agreement needs a second annotator
    let err = error_json(&mtqe(dir.path(), &["agreement", "work"], None));
    assert_eq!(err["error"], "NeedExactlyTwoAnnotators");

    // a bad row aborts the whole import
    let bad = format!("{HEADER}شو قصتك\tما قصتك\tما هي قصتك\t\t\t\t\t7\n");
    let err = error_json(&mtqe(
        dir.path(),
        &["import-sheet", "work", "--system", "A", "--annotator", "r2"],
        Some(&bad),
    ));
    assert_eq!(err["details"]["rejected"][0]["row"], 2);
    let project = mtqe_core::ingestion::load_project(&dir.path().join("work.mtqe")).unwrap();
    assert!(!project.has_annotator(&"r2".into()));
}

#[test]
fn missing_annotations_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&mtqe(dir.path(), &["init", "p"], None));
    mtqe(
        dir.path(),
        &["import-corpus", "p"],
        Some("DA,GOLD,SYSTEM,MT\na,b,S,c\n"),
    );
    let err = error_json(&mtqe(dir.path(), &["report", "p", "--kind", "severity"], None));
    assert_eq!(err["error"], "MissingAnnotations");
    assert_eq!(err["details"]["segments"][0], "seg-0001");
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&mtqe(dir.path(), &["init", "demo", "--demo"], None));
    let err = error_json(&mtqe(dir.path(), &["report", "demo", "--kind", "bogus"], None));
    assert_eq!(err["error"], "Usage");
    let err = error_json(&mtqe(
        dir.path(),
        &["report", "demo", "--kind", "scores", "--format", "xml"],
        None,
    ));
    assert_eq!(err["error"], "Usage");
}
