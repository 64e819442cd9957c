use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use noesis_core::fixtures::{digits_context, digits_script};
use noesis_core::session::trace_from_jsonl;
use noesis_core::{parse_context, replay, serialize_context, ConceptLattice, Format, LabelMode, Phase};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn noesis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noesis")).args(args).env("NO_COLOR", "1").output().expect("binary runs")
}

fn noesis_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_noesis"))
        .args(args)
        .env("NO_COLOR", "1")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_documents_every_flag() {
    let top = noesis(&["--help"]);
    assert!(top.status.success());
    for sub in ["scale", "lattice", "replay", "explore", "serve"] {
        assert!(stdout(&top).contains(sub), "{sub}");
    }
    let cases: [(&str, &[&str]); 5] = [
        ("scale", &["--output"]),
        ("lattice", &["--dot", "--json", "--full-labels"]),
        ("replay", &["--reference", "--script", "--initial", "--trace", "--snapshots"]),
        ("explore", &["--context", "--trace"]),
        ("serve", &["--addr", "--trace-dir", "NOESIS_ADDR"]),
    ];
    for (sub, flags) in cases {
        let out = noesis(&[sub, "--help"]);
        assert!(out.status.success());
        for flag in flags {
            assert!(stdout(&out).contains(flag), "{sub} {flag}");
        }
    }
}

#[test]
fn usage_errors_are_rejected() {
    assert!(!noesis(&[]).status.success());
    assert!(!noesis(&["lattice"]).status.success());
    assert!(!noesis(&["frobnicate"]).status.success());
}

#[test]
fn scale_reproduces_the_shipped_context() {
    let out = noesis(&["scale", p(&fixture("digits_scenario.json"))]);
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(fixture("digits.json")).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("apple.json");
    let out = noesis(&["scale", p(&fixture("apple_scenario.json")), "-o", p(&target)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let apple = parse_context(&std::fs::read(target).unwrap(), Format::Json).unwrap();
    assert_eq!(apple.incidence_matrix(), vec![vec![true, false, true, false]]);
}

#[test]
fn scale_exit_codes() {
    assert_eq!(noesis(&["scale", "/no/such/scenario.json"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let malformed = dir.path().join("bad.json");
    std::fs::write(&malformed, "{\"perspectives\": [").unwrap();
    assert_eq!(noesis(&["scale", p(&malformed)]).status.code(), Some(2));

    let invalid = dir.path().join("invalid.json");
    std::fs::write(
        &invalid,
        r#"{"perspectives":[{"name":"p","propositions":["a","b"]}],"timeline":[{"granule":0,"instance":"x","truth":{"a":true}}]}"#,
    )
    .unwrap();
    let out = noesis(&["scale", p(&invalid)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing_truth"));
}

#[test]
fn lattice_counts_and_exports() {
    for file in ["digits.json", "digits.cxt"] {
        let out = noesis(&["lattice", p(&fixture(file))]);
        assert!(out.status.success());
        assert_eq!(stdout(&out), "14 concepts\n");
    }

    let dir = tempfile::tempdir().unwrap();
    let (dot, json) = (dir.path().join("l.dot"), dir.path().join("l.json"));
    let out = noesis(&["lattice", p(&fixture("digits.json")), "--dot", p(&dot), "--json", p(&json)]);
    assert!(out.status.success());
    let lattice = ConceptLattice::enumerate(&digits_context());
    assert_eq!(std::fs::read_to_string(&dot).unwrap(), lattice.export_dot(LabelMode::Reduced));
    assert_eq!(std::fs::read_to_string(&json).unwrap(), lattice.to_json());

    let out = noesis(&["lattice", p(&fixture("digits.json")), "--dot", p(&dot), "--full-labels"]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&dot).unwrap(), lattice.export_dot(LabelMode::Full));

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, serialize_context(&digits_context().without_objects(), Format::Json).unwrap()).unwrap();
    assert_eq!(stdout(&noesis(&["lattice", p(&empty)])), "1 concepts\n");

    assert_eq!(noesis(&["lattice", "/no/such.cxt"]).status.code(), Some(2));
    let broken = dir.path().join("broken.cxt");
    std::fs::write(&broken, "B\n\n2\n1\n\na\nb\nm\nX\n").unwrap();
    assert_eq!(noesis(&["lattice", p(&broken)]).status.code(), Some(2));
}

#[test]
fn replay_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let snaps = dir.path().join("snaps");
    let out = noesis(&[
        "replay",
        "--reference",
        p(&fixture("digits.json")),
        "--script",
        p(&fixture("digits_script.json")),
        "--trace",
        p(&trace),
        "--snapshots",
        p(&snaps),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = replay(&digits_context(), &digits_script()).unwrap();
    assert_eq!(std::fs::read_to_string(&trace).unwrap(), expected.to_jsonl());
    assert_eq!(
        stdout(&out).lines().map(|l| l.split(' ').nth(1).unwrap()).collect::<Vec<_>>(),
        ["One", "Two", "Four", "Three", "-", "-", "Six", "-", "Nine", "-"]
    );
    for snap in &expected.snapshots {
        let lattice = std::fs::read_to_string(snaps.join(format!("granule-{:03}.lattice.json", snap.granule))).unwrap();
        assert_eq!(lattice, snap.lattice.to_json());
        let ensemble = std::fs::read_to_string(snaps.join(format!("granule-{:03}.ensemble.json", snap.granule))).unwrap();
        assert_eq!(ensemble, snap.ensemble.to_json());
    }
    assert_eq!(std::fs::read_dir(&snaps).unwrap().count(), 2 * expected.snapshots.len());

    let stdout_run = noesis(&["replay", "--reference", p(&fixture("digits.json")), "--script", p(&fixture("digits_script.json"))]);
    assert_eq!(stdout(&stdout_run), expected.to_jsonl());
}

#[test]
fn replay_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let out = noesis(&["replay", "--reference", p(&fixture("digits.json")), "--script", p(&empty)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 1);

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"[{"premise":["Blue"],"conclusion":["Odd"]}]"#).unwrap();
    let out = noesis(&["replay", "--reference", p(&fixture("digits.json")), "--script", p(&unknown)]);
    assert_eq!(out.status.code(), Some(4));

    let out = noesis(&["replay", "--reference", p(&fixture("digits.json")), "--script", "/no/such.json"]);
    assert_eq!(out.status.code(), Some(2));
}

fn digit_learning_answers() -> String {
    [
        "cue -> Composite, Even, Odd, Prime, Square",
        "no One: Odd, Square",
        "cue -> Odd, Square",
        "no Two: Even, Prime",
        "cue Square -> Odd",
        "no Four: Composite, Even, Square",
        "cue Prime -> Even",
        "no Three: Odd, Prime",
        "cue Prime, Square -> Composite, Even, Odd",
        "yes",
        "cue Even, Square -> Composite",
        "yes",
        "cue Composite -> Even, Square",
        "no Six: Composite, Even",
        "cue Even, Odd -> Composite, Prime, Square",
        "yes",
        "cue Composite -> Even",
        "no Nine: Composite, Odd, Square",
        "cue Composite, Odd -> Square",
        "yes",
        "quit",
    ]
    .join("\n")
        + "\n"
}

#[test]
fn explore_by_hand_matches_the_replay() {
    let dir = tempfile::tempdir().unwrap();
    let start = dir.path().join("start.json");
    std::fs::write(&start, serialize_context(&digits_context().without_objects(), Format::Json).unwrap()).unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = noesis_with_stdin(&["explore", "--context", p(&start), "--trace", p(&trace)], &digit_learning_answers());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!stdout(&out).contains('\x1b'));

    let events = trace_from_jsonl(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    let (last, cues) = events.split_last().unwrap();
    assert_eq!(last.resulting_phase, Phase::Terminal);
    let expected = replay(&digits_context(), &digits_script()).unwrap();
    assert_eq!(cues, expected.events.as_slice());

    let final_ctx = expected.final_context();
    for name in final_ctx.objects() {
        let reference = digits_context();
        let row = reference.row(reference.object_position(name).unwrap());
        assert!(stdout(&out).contains(&format!("  {name}: {}", reference.attribute_names(row).join(", "))));
    }
}

#[test]
fn explore_recovers_from_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let start = dir.path().join("start.json");
    std::fs::write(&start, serialize_context(&digits_context().without_objects(), Format::Json).unwrap()).unwrap();
    let script = "\nhello\ncue Blue -> Odd\nno Nine: Composite, Odd, Square\nno One Odd\nno One: Odd, Square\nask\nyes\nquit\n";
    let out = noesis_with_stdin(&["explore", "--context", p(&start)], script);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("rejected"), "{text}");
    assert!(text.contains("One: Odd, Square"), "{text}");
}

#[test]
fn explore_then_quit_is_terminal() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = noesis_with_stdin(&["explore", "--context", p(&fixture("digits.json")), "--trace", p(&trace)], "quit\n");
    assert!(out.status.success());
    let events = trace_from_jsonl(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(events.len(), 2);
    assert_eq!(events.last().unwrap().resulting_phase, Phase::Terminal);

    // closing stdin ends the session the same way
    let out = noesis_with_stdin(&["explore", "--context", p(&fixture("digits.json")), "--trace", p(&trace)], "");
    assert!(out.status.success());
    assert_eq!(trace_from_jsonl(&std::fs::read_to_string(&trace).unwrap()).unwrap().len(), 2);
}

#[test]
fn serve_fails_on_an_occupied_port() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let out = noesis(&["serve", "--addr", &addr]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(&addr));

    let out = Command::new(env!("CARGO_BIN_EXE_noesis")).arg("serve").env("NOESIS_ADDR", &addr).output().unwrap();
    assert!(!out.status.success());
}
