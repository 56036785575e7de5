//! End-to-end tests of the command-line interface against the fixture
//! corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn mcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn compose_scenario(out_dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "compose".to_owned(),
        "--spec".to_owned(),
        fixture("scenario/compose.mcomp").display().to_string(),
        "--left".to_owned(),
        fixture("scenario/library-system.model.json").display().to_string(),
        "--right".to_owned(),
        fixture("scenario/publishing-vocabulary.model.json").display().to_string(),
        "--mm".to_owned(),
        fixture("scenario/entities.metamodel.json").display().to_string(),
        "--mm".to_owned(),
        fixture("scenario/vocabulary.metamodel.json").display().to_string(),
        "--out".to_owned(),
        out_dir.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    mcomp(&arg_refs)
}

#[test]
fn compose_writes_the_golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let output = compose_scenario(dir.path(), &["--dot", "--match-trace"]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    for (name, golden) in [
        ("composed.json", "scenario/golden/composed.json"),
        ("trace.json", "scenario/golden/trace.json"),
        ("trace.dot", "scenario/golden/trace.dot"),
    ] {
        let produced = fs::read(dir.path().join(name)).unwrap();
        let expected = fs::read(fixture(golden)).unwrap();
        assert_eq!(produced, expected, "{name} differs from its golden copy");
    }
    let log: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("execution-log.json")).unwrap())
            .unwrap();
    assert_eq!(log["activations"].as_array().unwrap().len(), 5);
    assert_eq!(log["implicitCalls"].as_array().unwrap().len(), 1);
    let matches: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("match-trace.json")).unwrap())
            .unwrap();
    assert_eq!(matches.as_array().unwrap().len(), 4);
}

#[test]
fn compose_seeds_generated_ids() {
    let dir = tempfile::tempdir().unwrap();
    let output = compose_scenario(dir.path(), &["--id-seed", "10"]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let composed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("composed.json")).unwrap())
            .unwrap();
    let ids: Vec<&str> =
        composed["elements"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids, vec!["t10", "t11", "t12", "t13", "t14"]);
}

#[test]
fn type_errors_are_reported_with_positions_and_exit_1() {
    let output = mcomp(&[
        "validate",
        "--spec",
        fixture("diagnostics/type-error.mcomp").to_str().unwrap(),
        "--mm",
        fixture("scenario/entities.metamodel.json").to_str().unwrap(),
        "--mm",
        fixture("scenario/vocabulary.metamodel.json").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("error at 13:16"), "{stderr}");
    assert!(stderr.contains("inDomain"), "{stderr}");
}

#[test]
fn clean_spec_validates_quietly() {
    let output = mcomp(&[
        "validate",
        "--spec",
        fixture("scenario/compose.mcomp").to_str().unwrap(),
        "--mm",
        fixture("scenario/entities.metamodel.json").to_str().unwrap(),
        "--mm",
        fixture("scenario/vocabulary.metamodel.json").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout_of(&output).is_empty());
    assert!(stderr_of(&output).is_empty());
}

#[test]
fn parse_errors_exit_1_with_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mcomp");
    fs::write(&bad, "composition Broken\n\nleft L entities\n").unwrap();
    let output = mcomp(&[
        "validate",
        "--spec",
        bad.to_str().unwrap(),
        "--mm",
        fixture("scenario/entities.metamodel.json").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("error at 3:8"), "{}", stderr_of(&output));
}

#[test]
fn ambiguous_merge_rules_exit_2_naming_both() {
    let dir = tempfile::tempdir().unwrap();
    let output = mcomp(&[
        "compose",
        "--spec",
        fixture("diagnostics/ambiguous.mcomp").to_str().unwrap(),
        "--left",
        fixture("scenario/library-system.model.json").to_str().unwrap(),
        "--right",
        fixture("scenario/publishing-vocabulary.model.json").to_str().unwrap(),
        "--mm",
        fixture("scenario/entities.metamodel.json").to_str().unwrap(),
        "--mm",
        fixture("scenario/vocabulary.metamodel.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("MergeAsEntity"), "{stderr}");
    assert!(stderr.contains("MergeAsNamedEntity"), "{stderr}");
}

#[test]
fn missing_input_files_exit_1() {
    let output = mcomp(&[
        "validate",
        "--spec",
        "no-such-file.mcomp",
        "--mm",
        fixture("scenario/entities.metamodel.json").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("cannot read"));
}

#[test]
fn queries_walk_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let output = compose_scenario(dir.path(), &[]);
    assert!(output.status.success());
    let trace = dir.path().join("trace.json");
    let trace = trace.to_str().unwrap();

    let children = mcomp(&["query", "--trace", trace, "children", "l1"]);
    assert_eq!(children.status.code(), Some(0));
    assert_eq!(stdout_of(&children), "l2\nl3\nl4\nl5\n");

    let parents = mcomp(&["query", "--trace", trace, "parents", "l5"]);
    assert_eq!(stdout_of(&parents), "l1\n");

    let leaf = mcomp(&["query", "--trace", trace, "children", "l4"]);
    assert_eq!(leaf.status.code(), Some(0));
    assert!(stdout_of(&leaf).is_empty());

    let element = mcomp(&["query", "--trace", trace, "element", "ent-book", "left"]);
    assert_eq!(stdout_of(&element), "l4\n");

    let by_target = mcomp(&["query", "--trace", trace, "element", "t1", "target"]);
    assert_eq!(stdout_of(&by_target), "l1\n");

    let unknown_element = mcomp(&["query", "--trace", trace, "element", "ghost", "right"]);
    assert_eq!(unknown_element.status.code(), Some(0));
    assert!(stdout_of(&unknown_element).is_empty());

    let unknown_link = mcomp(&["query", "--trace", trace, "children", "l99"]);
    assert_eq!(unknown_link.status.code(), Some(1));
    assert!(stderr_of(&unknown_link).contains("unknown link 'l99'"));
}

#[test]
fn weave_emits_a_spec_that_validates_and_rejects_reweaving() {
    let dir = tempfile::tempdir().unwrap();
    let woven = dir.path().join("woven.mcomp");
    let output = mcomp(&[
        "weave",
        "--spec",
        fixture("scenario/compose.mcomp").to_str().unwrap(),
        "--out",
        woven.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(dir.path().join("weave-report.json").exists());

    let validate = mcomp(&[
        "validate",
        "--spec",
        woven.to_str().unwrap(),
        "--mm",
        fixture("scenario/entities.metamodel.json").to_str().unwrap(),
        "--mm",
        fixture("scenario/vocabulary.metamodel.json").to_str().unwrap(),
    ]);
    assert_eq!(validate.status.code(), Some(0), "{}", stderr_of(&validate));

    let reweave = mcomp(&[
        "weave",
        "--spec",
        woven.to_str().unwrap(),
        "--out",
        dir.path().join("rewoven.mcomp").to_str().unwrap(),
    ]);
    assert_eq!(reweave.status.code(), Some(1));
    assert!(stderr_of(&reweave).contains("exactly one target"));
}

#[test]
fn via_weaver_compose_agrees_with_the_native_trace_shape() {
    let dir = tempfile::tempdir().unwrap();
    let output = compose_scenario(dir.path(), &["--via-weaver"]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert!(dir.path().join("second-target.json").exists());
    let trace = dir.path().join("trace.json");
    let children = mcomp(&["query", "--trace", trace.to_str().unwrap(), "children", "l1"]);
    assert_eq!(stdout_of(&children), "l2\nl3\nl4\nl5\n");
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(parsed["links"].as_array().unwrap().len(), 5);
    assert_eq!(parsed["relationships"].as_array().unwrap().len(), 4);
}

#[test]
fn composing_an_already_woven_spec_reads_its_own_trace() {
    let dir = tempfile::tempdir().unwrap();
    let woven = dir.path().join("woven.mcomp");
    let weave = mcomp(&[
        "weave",
        "--spec",
        fixture("scenario/compose.mcomp").to_str().unwrap(),
        "--out",
        woven.to_str().unwrap(),
    ]);
    assert!(weave.status.success());
    let out = dir.path().join("out");
    let output = mcomp(&[
        "compose",
        "--spec",
        woven.to_str().unwrap(),
        "--left",
        fixture("scenario/library-system.model.json").to_str().unwrap(),
        "--right",
        fixture("scenario/publishing-vocabulary.model.json").to_str().unwrap(),
        "--mm",
        fixture("scenario/entities.metamodel.json").to_str().unwrap(),
        "--mm",
        fixture("scenario/vocabulary.metamodel.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["links"].as_array().unwrap().len(), 5);
    assert_eq!(trace["relationships"].as_array().unwrap().len(), 4);
}
