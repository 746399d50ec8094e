use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn btkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_btkit"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    btkit().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = btkit()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let input = input.to_owned();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap();
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sentences(n: usize) -> String {
    (0..n)
        .map(|i| format!("w{} a{} b{} c{} d{} e{} f{}\tt{} u{} v{}\n", i, i % 7, i % 11, i % 13, i % 17, i % 19, i % 23, i, i % 5, i % 3))
        .collect()
}

#[test]
fn version_prints_signature() {
    let o = run(&["--version"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "BLEU+case.mixed+numrefs.1+smooth.exp+tok.13a");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["noise"],
        vec!["mix", "--bitext", "a", "--bt", "b"],
        vec!["synthlab", "run"],
        vec!["frobnicate"],
        vec!["filter-bitext", "--no-such-flag"],
        vec!["noise", "--seed", "1", "--dropout", "1.5"],
        vec![],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bleu_of_identical_files() {
    let dir = TempDir::new().unwrap();
    let h = write(&dir, "h.txt", "the cat sat on the mat .\nit was a dark and stormy night\n");
    let o = run(&["bleu", "--hyp", s(&h), "--ref", s(&h), "--score-only"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "100.00");
    let o = run(&["bleu", "--hyp", s(&h), "--ref", s(&h)]);
    let out = stdout(&o);
    assert!(out.starts_with("BLEU = 100.00"), "{out}");
    assert!(out.lines().nth(1).unwrap() == "BLEU+case.mixed+numrefs.1+smooth.exp+tok.13a");
}

#[test]
fn bleu_length_mismatch_is_data_error() {
    let dir = TempDir::new().unwrap();
    let h = write(&dir, "h.txt", "a b c d\n");
    let r = write(&dir, "r.txt", "a b c d\ne f g h\n");
    assert_eq!(run(&["bleu", "--hyp", s(&h), "--ref", s(&r)]).status.code(), Some(1));
}

#[test]
fn filter_bitext_fixture() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let input = fixture("filter_bitext.tsv");
    let o = run(&["filter-bitext", "-i", s(&input), "--report", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), fs::read_to_string(fixture("filter_bitext.kept.tsv")).unwrap());
    assert_eq!(stdout(&o).lines().count(), 7);
    let got: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let want: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("filter_bitext.report.json")).unwrap()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn filter_bitext_aligned_files_match_tsv() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("filter_bitext.tsv")).unwrap();
    let (mut src, mut tgt) = (String::new(), String::new());
    for line in text.lines() {
        let mut f = line.split('\t');
        src.push_str(f.next().unwrap());
        src.push('\n');
        tgt.push_str(f.next().unwrap());
        tgt.push('\n');
    }
    let sp = write(&dir, "src.txt", &src);
    let tp = write(&dir, "tgt.txt", &tgt);
    let aligned = run(&["filter-bitext", "--source", s(&sp), "--target", s(&tp)]);
    assert!(aligned.status.success());
    // The aligned path has no origin column, so compare only the two sides.
    let strip = |t: String| -> Vec<String> {
        t.lines().map(|l| l.split('\t').take(2).collect::<Vec<_>>().join("\t")).collect()
    };
    let tsv = run(&["filter-bitext", "-i", s(&fixture("filter_bitext.tsv"))]);
    assert_eq!(strip(stdout(&aligned)), strip(stdout(&tsv)));

    let short = write(&dir, "short.txt", "a\n");
    let o = run(&["filter-bitext", "--source", s(&sp), "--target", s(&short)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn filter_bitext_counts_malformed_lines() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let o = run_stdin(
        &["filter-bitext", "--report", s(&report)],
        "a b\tc d\nno tab here\na\tb\tnot-an-origin\n",
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o), "a b\tc d\n");
    assert!(stderr(&o).contains("line 2: dropped"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["dropped_malformed"], 2);
    assert_eq!(r["kept"], 1);
}

#[test]
fn filter_mono_dedups_and_limits() {
    let long = vec!["x"; 71].join(" ");
    let input = format!("b a\n{long}\nb  a\n\nc\nb a\n");
    let o = run_stdin(&["filter-mono"], &input);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "b a\nc\n");
    let o = run_stdin(&["filter-mono", "--no-dedup"], &input);
    assert_eq!(stdout(&o), "b a\nb a\nc\nb a\n");
}

#[test]
fn filter_bt_rejects_wrong_origin_with_line_number() {
    let o = run_stdin(&["filter-bt"], "a b\tc\nx\ty\tbitext\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2:"), "{}", stderr(&o));

    let long = vec!["x"; 76].join(" ");
    let o = run_stdin(&["filter-bt"], &format!("{long}\tt\nok\tt\n"));
    assert!(o.status.success());
    assert_eq!(stdout(&o), "ok\tt\n");
}

#[test]
fn noise_is_reproducible_across_worker_counts() {
    // More lines than one chunk so the pool actually splits work.
    let input = sentences(40_000);
    let base = run_stdin(&["noise", "--seed", "9"], &input);
    assert!(base.status.success());
    for workers in ["2", "5"] {
        let o = run_stdin(&["noise", "--seed", "9", "--workers", workers], &input);
        assert!(o.stdout == base.stdout, "workers {workers}");
    }
    let other = run_stdin(&["noise", "--seed", "10"], &input);
    assert!(other.stdout != base.stdout);
    // Targets are untouched by default.
    for (a, b) in stdout(&base).lines().zip(input.lines()) {
        assert_eq!(a.split('\t').nth(1), b.split('\t').nth(1));
    }
}

#[test]
fn noise_sentence_prob_zero_is_identity() {
    let input = sentences(500);
    let o = run_stdin(&["noise", "--seed", "1", "--sentence-prob", "0"], &input);
    assert_eq!(stdout(&o), input);
}

#[test]
fn noise_text_format_and_report() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("noise.json");
    let input: String = (0..1000).map(|i| format!("a{i} b c d e f g h\n")).collect();
    let o = run_stdin(
        &["noise", "--seed", "4", "--format", "text", "--ops", "blank", "--blank", "1", "--report", s(&report)],
        &input,
    );
    assert!(o.status.success());
    assert!(stdout(&o).lines().all(|l| l.split(' ').all(|t| t == "⟨BLANK⟩")));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["noised"], 1000);
}

#[test]
fn tag_constant_and_bitext_passthrough() {
    let o = run_stdin(&["tag"], "Raise the child, love the child.\tx\ny\tz\tbitext\n");
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "⟨BT⟩ Raise the child, love the child.\tx\ny\tz\tbitext\n"
    );
    let o = run_stdin(&["tag", "--tag-bitext"], "y\tz\tbitext\n");
    assert_eq!(stdout(&o), "⟨BT⟩ y\tz\tbitext\n");
}

#[test]
fn tag_twice_is_a_data_error() {
    let o = run_stdin(&["tag", "--format", "text"], "a b\n⟨BT⟩ c\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2:"), "{}", stderr(&o));
}

#[test]
fn tag_per_metadata() {
    let dir = TempDir::new().unwrap();
    let meta = write(&dir, "meta.tsv", "year\tsource\n2012\tnews\n2017\tweb\n");
    let o = run_stdin(
        &["tag", "--mode", "per-metadata", "--metadata-file", s(&meta), "--format", "text"],
        "a b\nc\n",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "⟨BT_2012⟩ a b\n⟨BT_2017⟩ c\n");
    // Missing file flag is a usage error.
    assert_eq!(run(&["tag", "--mode", "per-metadata"]).status.code(), Some(2));
    // Fewer metadata rows than lines.
    let o = run_stdin(
        &["tag", "--mode", "per-metadata", "--metadata-file", s(&meta), "--format", "text"],
        "a\nb\nc\n",
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_reports_reserved_tokens() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("v.json");
    let o = run_stdin(&["validate"], "a clean line\nanother one\n");
    assert!(o.status.success());
    let o = run_stdin(
        &["validate", "--report", s(&report)],
        "clean\nhas ⟨BT⟩ inside\nand ⟨BLANK⟩\nyear ⟨BT_2012⟩\n",
    );
    assert_eq!(o.status.code(), Some(1));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let lines: Vec<u64> = r["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["line"].as_u64().unwrap())
        .collect();
    assert_eq!(lines, vec![2, 3, 4]);
}

#[test]
fn mix_is_deterministic_and_labels_origin() {
    let dir = TempDir::new().unwrap();
    let bitext: String = (0..50).map(|i| format!("b{i}\tB{i}\n")).collect();
    let bt: String = (0..400).map(|i| format!("s{i}\tS{i}\n")).collect();
    let bp = write(&dir, "bitext.tsv", &bitext);
    let tp = write(&dir, "bt.tsv", &bt);
    let args = ["mix", "--bitext", s(&bp), "--bt", s(&tp), "--seed", "3"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    for line in out.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 3);
        let expect = if f[0].starts_with('b') { "bitext" } else { "bt" };
        assert_eq!(f[2], expect);
    }
    // Every BT pair appears at least once.
    for i in 0..400 {
        assert!(out.contains(&format!("s{i}\tS{i}\tbt\n")));
    }

    let c = run(&["mix", "--bitext", s(&bp), "--bt", s(&tp), "--seed", "3", "--concat"]);
    assert_eq!(stdout(&c).lines().count(), 450);
    let empty = write(&dir, "empty.tsv", "");
    let e = run(&["mix", "--bitext", s(&empty), "--bt", s(&tp), "--seed", "3"]);
    assert_eq!(e.status.code(), Some(1));
}

#[test]
fn staged_files_equal_pipes() {
    let dir = TempDir::new().unwrap();
    let input = sentences(3000);
    let raw = write(&dir, "raw.tsv", &input);
    let bitext = write(&dir, "bitext.tsv", &sentences(200).replace('w', "q"));
    let f = dir.path().join("f.tsv");
    let n = dir.path().join("n.tsv");
    let t = dir.path().join("t.tsv");
    let m = dir.path().join("m.tsv");
    assert!(run(&["filter-bt", "-i", s(&raw), "-o", s(&f)]).status.success());
    assert!(run(&["noise", "--seed", "2", "-i", s(&f), "-o", s(&n)]).status.success());
    assert!(run(&["tag", "-i", s(&n), "-o", s(&t)]).status.success());
    assert!(run(&["mix", "--bitext", s(&bitext), "--bt", s(&t), "--seed", "2", "--out", s(&m)]).status.success());

    let filtered = run_stdin(&["filter-bt"], &input);
    let noised = run_stdin(&["noise", "--seed", "2", "--workers", "3"], &stdout(&filtered));
    let tagged = run_stdin(&["tag"], &stdout(&noised));
    assert_eq!(stdout(&tagged), fs::read_to_string(&t).unwrap());
    let piped_t = write(&dir, "piped.tsv", &stdout(&tagged));
    let mixed = run(&["mix", "--bitext", s(&bitext), "--bt", s(&piped_t), "--seed", "2"]);
    assert_eq!(stdout(&mixed), fs::read_to_string(&m).unwrap());
}

#[test]
fn attn_report_and_copy_rate() {
    let lines = "{\"src_len\":4,\"tgt_len\":2,\"rows\":[[0.25,0.25,0.25,0.25],[0.25,0.25,0.25,0.25]]}\n";
    let o = run_stdin(&["attn-report", "--mode", "as-bt"], lines);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("1.00"), "{out}");

    let o = run_stdin(&["attn-report"], "{\"src_len\":2,\"tgt_len\":1,\"rows\":[[0.5,0.6]]}\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"));

    let o = run_stdin(&["copy-rate"], "the cat sat on the mat\tthe dog ran to a mat\n");
    assert_eq!(stdout(&o).trim(), "33.33");
    let o = run_stdin(&["copy-rate"], "a b\ta b\n");
    assert_eq!(stdout(&o).trim(), "100.00");
    let o = run_stdin(&["copy-rate"], "a b\tc d\n");
    assert_eq!(stdout(&o).trim(), "0.00");
}

#[test]
fn synthlab_small_run_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let r1 = dir.path().join("a.json");
    let r2 = dir.path().join("b.json");
    let args = |r: &Path| {
        vec![
            "synthlab".to_owned(), "run".into(), "--seed".into(), "3".into(),
            "--bitext-n".into(), "300".into(), "--mono-n".into(), "2000".into(),
            "--test-n".into(), "100".into(), "--iters".into(), "3".into(),
            "--conditions".into(), "bitext,taggedbt".into(),
            "--report".into(), r.to_str().unwrap().into(),
        ]
    };
    let a = btkit().args(args(&r1)).output().unwrap();
    let b = btkit().args(args(&r2)).output().unwrap();
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let out = stdout(&a);
    assert!(out.contains("| TaggedBT |") && !out.contains("| NoisedBT |"), "{out}");
    assert_eq!(run(&["synthlab", "run", "--seed", "1", "--conditions", "nope"]).status.code(), Some(2));
}
