use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use verbatim_core::metrics::{ReproducedSnippet, SampledWindows, SnippetKind};
use verbatim_core::records::{AnalyzedRecord, JsonlWriter, SystemPromptCondition, TextRecord, TextType};

fn verbatim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verbatim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_lines(path: &Path, lines: &[Value]) {
    let body: String = lines.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, body).unwrap();
}

fn passage() -> String {
    (0..100).map(|i| (b'a' + (i * 7 % 26) as u8) as char).collect()
}

fn record(id: &str, text: &str) -> Value {
    json!({
        "record_id": id, "source": "m1", "task": "satire", "text_type": "creative",
        "prompt": "0123", "text": text,
    })
}

/// Index over one document holding the planted passage; returns its path.
fn planted_index(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus.jsonl");
    write_lines(&corpus, &[json!({"doc_id": "d1", "content": format!("<{}>", passage())})]);
    let index = dir.join("corpus.idx");
    let out = verbatim(&["index", "build", "--corpus", s(&corpus), "--out", s(&index)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    index
}

fn planted_text() -> String {
    format!("{}{}{}", "0 ".repeat(25), passage(), " 1".repeat(25))
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&verbatim(&["--help"])), 0);
    assert_eq!(code(&verbatim(&["--version"])), 0);
    assert_eq!(code(&verbatim(&["analyze"])), 1);
    assert_eq!(code(&verbatim(&["frobnicate"])), 1);
    assert_eq!(code(&verbatim(&["analyze", "--index", "x", "--records", "y", "--out", "z", "--threshold", "0"])), 1);
}

#[test]
fn index_build_writes_manifest_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let index = planted_index(dir.path());
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("corpus.idx.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"]["documents"], 1);
    assert_eq!(manifest["inputs"][0]["digest"].as_str().unwrap().len(), 64);

    let out = verbatim(&["index", "verify", "--index", s(&index)]);
    assert_eq!(code(&out), 0);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["status"], "ok");

    let mut bytes = std::fs::read(&index).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    std::fs::write(&index, bytes).unwrap();
    assert_eq!(code(&verbatim(&["index", "verify", "--index", s(&index)])), 2);
}

#[test]
fn skipped_documents_are_record_errors() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    std::fs::write(&corpus, "{\"doc_id\": \"a\", \"content\": \"fine\"}\nnot json\n").unwrap();
    let index = dir.path().join("c.idx");
    let lenient = verbatim(&["index", "build", "--corpus", s(&corpus), "--out", s(&index)]);
    assert_eq!(code(&lenient), 3);
    let strict = verbatim(&["index", "build", "--corpus", s(&corpus), "--out", s(&index), "--strict"]);
    assert_eq!(code(&strict), 2);
}

#[test]
fn planted_copy_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let index = planted_index(dir.path());
    let records = dir.path().join("records.jsonl");
    write_lines(&records, &[record("r1", &planted_text())]);
    let out_dir = dir.path().join("out");
    let out = verbatim(&["analyze", "--index", s(&index), "--records", s(&records), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let analyzed = read_jsonl(&out_dir.join("analyzed.jsonl"));
    assert_eq!(analyzed.len(), 1);
    let a = &analyzed[0];
    assert_eq!(a["overlap_rate"], 0.5);
    assert_eq!(a["max_reproduction_len"], 100);
    assert_eq!(a["snippets"].as_array().unwrap().len(), 1);
    assert_eq!(a["snippets"][0]["start"], 50);
    assert_eq!(a["snippets"][0]["text"], passage());

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_digest"], a["config_digest"]);
    assert_eq!(manifest["config"]["threshold"], 50);
    let roles: Vec<&str> = manifest["inputs"].as_array().unwrap().iter().map(|i| i["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["index", "records"]);
    assert!(read_jsonl(&out_dir.join("dropped.jsonl")).is_empty());
    assert!(read_jsonl(&out_dir.join("errors.jsonl")).is_empty());
}

#[test]
fn all_refusals_mean_nothing_analyzed() {
    let dir = tempfile::tempdir().unwrap();
    let index = planted_index(dir.path());
    let records = dir.path().join("records.jsonl");
    write_lines(
        &records,
        &[
            record("r1", "I'm sorry, but I cannot help with writing that piece."),
            record("r2", "too short"),
        ],
    );
    let out_dir = dir.path().join("out");
    let out = verbatim(&["analyze", "--index", s(&index), "--records", s(&records), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 4);
    assert!(read_jsonl(&out_dir.join("analyzed.jsonl")).is_empty());
    let dropped = read_jsonl(&out_dir.join("dropped.jsonl"));
    let rules: Vec<&str> = dropped.iter().map(|d| d["reason"]["rule"].as_str().unwrap()).collect();
    assert_eq!(rules, ["refusal_prefix", "too_short"]);
}

#[test]
fn malformed_lines_are_record_errors() {
    let dir = tempfile::tempdir().unwrap();
    let index = planted_index(dir.path());
    let records = dir.path().join("records.jsonl");
    let good = record("r1", &planted_text()).to_string();
    let dup = record("r1", &planted_text()).to_string();
    std::fs::write(&records, format!("{good}\n{{broken\n{dup}\n")).unwrap();
    let out_dir = dir.path().join("out");
    let out = verbatim(&["analyze", "--index", s(&index), "--records", s(&records), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 3);
    let errors = read_jsonl(&out_dir.join("errors.jsonl"));
    let lines: Vec<i64> = errors.iter().map(|e| e["line"].as_i64().unwrap()).collect();
    assert_eq!(lines, [2, 3]);
    assert_eq!(read_jsonl(&out_dir.join("analyzed.jsonl")).len(), 1);

    let strict = verbatim(&[
        "analyze", "--index", s(&index), "--records", s(&records), "--out", s(&out_dir), "--strict",
    ]);
    assert_eq!(code(&strict), 2);
}

#[test]
fn missing_inputs_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let index = planted_index(dir.path());
    let records = dir.path().join("records.jsonl");
    write_lines(&records, &[record("r1", &planted_text())]);
    let out_dir = dir.path().join("out");
    let missing = dir.path().join("nope.idx");
    let out = verbatim(&["analyze", "--index", s(&missing), "--records", s(&records), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.idx"));
    let out = verbatim(&["analyze", "--index", s(&index), "--records", s(&missing), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    let out = verbatim(&["report", "--records", s(&missing), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
}

fn many_records(n: usize) -> Vec<Value> {
    let p = passage();
    (0..n)
        .map(|i| {
            let cut = 30 + i % 70;
            let text = format!("{} {} {}", "z y ".repeat(i % 13 + 6), &p[i % 20..cut], "q ".repeat(20));
            record(&format!("r{i:03}"), &text)
        })
        .collect()
}

#[test]
fn reruns_are_byte_identical_across_worker_counts_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let index = planted_index(dir.path());
    let records = dir.path().join("records.jsonl");
    write_lines(&records, &many_records(600));
    let files = ["analyzed.jsonl", "dropped.jsonl", "errors.jsonl", "manifest.json"];
    let run = |out_dir: &Path, workers: &str| {
        let out = verbatim(&[
            "analyze", "--index", s(&index), "--records", s(&records), "--out", s(out_dir), "--workers", workers,
            "--seed", "7",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        files.map(|f| std::fs::read(out_dir.join(f)).unwrap())
    };
    let a = run(&dir.path().join("a"), "1");
    let b = run(&dir.path().join("b"), "4");
    assert_eq!(a, b);
    // same directory again: everything is reused
    let c = run(&dir.path().join("a"), "3");
    assert_eq!(a, c);
    assert!(!dir.path().join("a/analyzed.jsonl.partial").exists());
}

#[test]
fn resume_reuses_matching_results_only() {
    let dir = tempfile::tempdir().unwrap();
    let index = planted_index(dir.path());
    let records = dir.path().join("records.jsonl");
    write_lines(&records, &[record("r1", &planted_text()), record("r2", &format!("{} tail text", passage()))]);
    let out_dir = dir.path().join("out");
    let args = ["analyze", "--index", s(&index), "--records", s(&records), "--out", s(&out_dir)];
    assert_eq!(code(&verbatim(&args)), 0);

    // Simulate an interrupted run that had finished r1 only, with a marker
    // value so reuse is observable.
    let mut first = read_jsonl(&out_dir.join("analyzed.jsonl"))[0].clone();
    first["overlap_rate"] = json!(0.25);
    std::fs::remove_file(out_dir.join("analyzed.jsonl")).unwrap();
    write_lines(&out_dir.join("analyzed.jsonl.partial"), &[first]);
    assert_eq!(code(&verbatim(&args)), 0);
    let after = read_jsonl(&out_dir.join("analyzed.jsonl"));
    assert_eq!(after[0]["overlap_rate"], 0.25);
    assert_eq!(after.len(), 2);

    // A different threshold changes the config digest, so nothing is reused.
    let mut changed = args.to_vec();
    changed.extend(["--threshold", "40"]);
    assert_eq!(code(&verbatim(&changed)), 0);
    assert_eq!(read_jsonl(&out_dir.join("analyzed.jsonl"))[0]["overlap_rate"], 0.5);
}

#[test]
fn nfc_index_normalizes_queries() {
    let dir = tempfile::tempdir().unwrap();
    let composed = "caf\u{e9} ".repeat(20);
    let decomposed = "cafe\u{301} ".repeat(20);
    let corpus = dir.path().join("c.jsonl");
    write_lines(&corpus, &[json!({"doc_id": "d", "content": decomposed})]);
    let index = dir.path().join("c.idx");
    assert_eq!(code(&verbatim(&["index", "build", "--corpus", s(&corpus), "--out", s(&index), "--nfc"])), 0);
    let records = dir.path().join("r.jsonl");
    write_lines(&records, &[record("r1", &composed)]);
    let out_dir = dir.path().join("out");
    assert_eq!(
        code(&verbatim(&["analyze", "--index", s(&index), "--records", s(&records), "--out", s(&out_dir)])),
        0
    );
    let a = &read_jsonl(&out_dir.join("analyzed.jsonl"))[0];
    assert_eq!(a["overlap_rate"], 1.0);
}

fn analyzed(id: &str, source: &str, task: &str, ty: TextType, rate: f64, max_len: usize) -> AnalyzedRecord {
    AnalyzedRecord {
        record: TextRecord {
            record_id: id.into(),
            source: source.into(),
            task: task.into(),
            text_type: ty,
            prompt: "p".into(),
            text: "t".into(),
            seed: Some(1),
            temperature: Some(0.7),
            system_prompt_condition: SystemPromptCondition::None,
            api_refused: false,
            seed_supported: None,
        },
        refused: false,
        analyzed_chars: 1000,
        overlap_rate: rate,
        max_reproduction_len: max_len,
        reproduced_chars: (rate * 1000.0) as usize,
        snippets: (max_len > 0)
            .then(|| ReproducedSnippet {
                start: 3,
                length: max_len,
                text: "x".repeat(max_len),
                kind: SnippetKind::MaximalSpan,
            })
            .into_iter()
            .collect(),
        sampled_windows: SampledWindows::default(),
        config_digest: "cfg".into(),
    }
}

fn report_fixture(path: &Path) {
    use TextType::*;
    let rows: [(&str, &str, TextType, f64, usize); 20] = [
        ("m1", "satire", Creative, 0.10, 60),
        ("m1", "satire", Creative, 0.30, 120),
        ("m1", "fictional letter", Creative, 0.60, 1500),
        ("m1", "tutorial", Expository, 0.00, 20),
        ("m1", "tutorial", Expository, 0.20, 55),
        ("m1", "encyclopedia article", Expository, 0.40, 100),
        ("m1", "encyclopedia article", Expository, 0.00, 0),
        ("m1", "statement of purpose", Argumentative, 0.05, 30),
        ("m1", "statement of purpose", Argumentative, 0.15, 49),
        ("m1", "persuasive essays", Argumentative, 0.00, 10),
        ("human", "satire", Creative, 0.00, 25),
        ("human", "satire", Creative, 0.05, 35),
        ("human", "fictional letter", Creative, 0.00, 0),
        ("human", "tutorial", Expository, 0.10, 50),
        ("human", "tutorial", Expository, 0.00, 29),
        ("human", "encyclopedia article", Expository, 0.25, 99),
        ("human", "encyclopedia article", Expository, 0.00, 31),
        ("human", "statement of purpose", Argumentative, 0.00, 5),
        ("human", "persuasive essays", Argumentative, 0.00, 1000),
        ("human", "persuasive essays", Argumentative, 0.50, 999),
    ];
    let mut w = JsonlWriter::create(path).unwrap();
    for (i, &(m, t, ty, r, l)) in rows.iter().enumerate() {
        w.write(&analyzed(&format!("r{i:02}"), m, t, ty, r, l)).unwrap();
    }
    w.finish().unwrap();
}

#[test]
fn report_matches_golden_summary() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("analyzed.jsonl");
    report_fixture(&records);
    let out_dir = dir.path().join("report");
    let out = verbatim(&["report", "--records", s(&records), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/summary.csv")).unwrap();
    assert_eq!(std::fs::read_to_string(out_dir.join("summary.csv")).unwrap(), golden);
    for f in ["curves.json", "snippets.json", "manifest.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"]["analysis_config_digests"], json!(["cfg"]));
}

#[test]
fn group_by_pairs_match_distinct_keys() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("analyzed.jsonl");
    report_fixture(&records);
    let out_dir = dir.path().join("report");
    let out = verbatim(&["report", "--records", s(&records), "--out", s(&out_dir), "--group-by", "model,text_type"]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("model,text_type,records,"));
    let pairs: BTreeSet<(String, String)> = lines
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect();
    let expected: BTreeSet<(String, String)> = ["human", "m1"]
        .iter()
        .flat_map(|m| ["argumentative", "creative", "expository"].map(|t| (m.to_string(), t.to_string())))
        .collect();
    assert_eq!(pairs, expected);
    assert_eq!(code(&verbatim(&["report", "--records", s(&records), "--out", s(&out_dir), "--group-by", "colour"])), 1);
}

fn stub(fail_seed: Option<u64>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut raw = String::new();
            req.as_reader().read_to_string(&mut raw).unwrap();
            let body: Value = serde_json::from_str(&raw).unwrap();
            let user = body["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap().to_string();
            let (status, reply) = if body["seed"].as_u64() == fail_seed {
                (400, "{}".to_string())
            } else {
                let content = format!("An essay in reply to: {user} (seed {})", body["seed"]);
                (200, json!({"choices": [{"message": {"content": content}, "finish_reason": "stop"}]}).to_string())
            };
            let _ = req.respond(tiny_http::Response::from_string(reply).with_status_code(status));
        }
    });
    format!("http://127.0.0.1:{port}/v1")
}

#[test]
fn generate_against_stub() {
    let dir = tempfile::tempdir().unwrap();
    let prompts = dir.path().join("prompts.jsonl");
    write_lines(
        &prompts,
        &[
            json!({"prompt_id": "p1", "task": "tutorial", "text_type": "expository", "prompt": "Write a tutorial."}),
            json!({"prompt_id": "p2", "task": "satire", "text_type": "creative", "prompt": "Write a satire."}),
        ],
    );
    let out = dir.path().join("gen.jsonl");
    let base = [
        "generate", "--prompts", s(&prompts), "--model", "gpt-4o", "--api-key-env", "VERBATIM_CLI_TEST_KEY",
        "--seeds", "1,2,3", "--rate-limit", "0", "--out", s(&out),
    ];
    let run = |url: &str, extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend(["--base-url", url]);
        args.extend(extra);
        Command::new(env!("CARGO_BIN_EXE_verbatim"))
            .args(&args)
            .env("VERBATIM_CLI_TEST_KEY", "sk-test")
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    };

    let ok = run(&stub(None), &["--condition", "assistant"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let recs = read_jsonl(&out);
    assert_eq!(recs.len(), 6);
    assert_eq!(recs[0]["record_id"], "p1/assistant/seed-1");
    assert_eq!(recs[0]["system_prompt_condition"], "assistant");
    assert!(dir.path().join("gen.jsonl.manifest.json").is_file());
    let manifest = std::fs::read_to_string(dir.path().join("gen.jsonl.manifest.json")).unwrap();
    assert!(manifest.contains("The assistant is GPT, created by OpenAI."));
    assert!(!manifest.contains("sk-test"));

    let partial = run(&stub(Some(2)), &["--max-attempts", "1"]);
    assert_eq!(code(&partial), 3);
    assert_eq!(read_jsonl(&out).len(), 4);
    assert_eq!(read_jsonl(&dir.path().join("gen.jsonl.failures.jsonl")).len(), 2);

    let custom = run(&stub(None), &["--condition", "terse"]);
    assert_eq!(code(&custom), 2);

    let no_key = Command::new(env!("CARGO_BIN_EXE_verbatim"))
        .args(base)
        .env_remove("VERBATIM_CLI_TEST_KEY")
        .output()
        .unwrap();
    assert_eq!(code(&no_key), 2);
}
