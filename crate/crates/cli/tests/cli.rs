//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcfg-induce"))
}

fn ok(output: &Output) -> (String, String) {
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    assert!(
        output.status.success(),
        "command failed\nstdout:\n{stdout}\nstderr:\n{stderr}"
    );
    (stdout, stderr)
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

const CORPUS: &str = "the dog barks\nthe cat sleeps\nthe dog sleeps\na cat barks\na dog naps\n";

fn induce(corpus: &Path, out: &Path, seed: u64, iterations: usize, resume: bool) -> Output {
    let mut cmd = bin();
    cmd.arg("induce")
        .arg(corpus)
        .arg("--out")
        .arg(out)
        .args(["--depth", "1", "--categories", "2", "--beta", "0.2"])
        .args(["--iterations", &iterations.to_string()])
        .args(["--burn-in", "2", "--sample-every", "2", "--workers", "1"])
        .args(["--seed", &seed.to_string()]);
    if resume {
        cmd.arg("--resume");
    }
    cmd.output().unwrap()
}

#[test]
fn induce_writes_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let run1 = dir.path().join("run1");
    let run2 = dir.path().join("run2");
    ok(&induce(&corpus, &run1, 7, 6, false));
    ok(&induce(&corpus, &run2, 7, 6, false));

    // The manifest differs between directories (it embeds the run path);
    // everything else must be byte-identical.
    assert!(run1.join("manifest.json").exists());
    for name in [
        "trace.tsv",
        "checkpoint",
        "grammar.tsv",
        "samples/iter4.trees",
        "samples/iter6.trees",
    ] {
        assert!(run1.join(name).exists(), "missing {name}");
        assert_eq!(read(&run1.join(name)), read(&run2.join(name)), "{name} differs");
    }

    let trace = read(&run1.join("trace.tsv"));
    assert!(trace.starts_with("iteration\tlogLikelihood\n"));
    assert_eq!(trace.lines().count(), 8); // header + iterations 0..=6

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&run1.join("manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["maxDepth"], 1);
    assert_eq!(manifest["config"]["categories"], 2);
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["status"], "finished"); // far too short to converge
    assert!(manifest["finalLogLik"].as_f64().unwrap().is_finite());
}

#[test]
fn induce_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let run = dir.path().join("run");
    ok(&induce(&corpus, &run, 7, 6, false));
    let second = induce(&corpus, &run, 7, 6, false);
    assert!(!second.status.success());
    let stderr = String::from_utf8_lossy(&second.stderr);
    assert!(stderr.contains("--resume"), "stderr: {stderr}");
}

#[test]
fn resumed_run_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let full = dir.path().join("full");
    let split = dir.path().join("split");
    ok(&induce(&corpus, &full, 7, 6, false));
    ok(&induce(&corpus, &split, 7, 3, false)); // checkpoint written at the end
    ok(&induce(&corpus, &split, 7, 6, true));
    for name in [
        "trace.tsv",
        "grammar.tsv",
        "samples/iter4.trees",
        "samples/iter6.trees",
    ] {
        assert_eq!(read(&full.join(name)), read(&split.join(name)), "{name} differs");
    }
}

#[test]
fn induce_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"maxDepth": "unbounded", "categories": 3, "iterations": 5, "burnIn": 1, "sampleEvery": 3, "seed": 9, "workers": 1}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let output = bin()
        .arg("induce")
        .arg(&corpus)
        .arg("--out")
        .arg(&run)
        .arg("--config")
        .arg(&config)
        .args(["--categories", "2"]) // flag beats file
        .output()
        .unwrap();
    ok(&output);
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&run.join("manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["categories"], 2);
    assert_eq!(manifest["config"]["maxDepth"], serde_json::Value::Null);
    assert_eq!(manifest["config"]["iterations"], 5);
    assert_eq!(manifest["config"]["seed"], 9);
    // Emissions: t > 1 with (t − 1) % 3 == 0 → t = 4.
    assert!(run.join("samples/iter4.trees").exists());
    assert!(!run.join("samples/iter5.trees").exists());
}

#[test]
fn bound_transforms_a_grammar_file() {
    let dir = tempfile::tempdir().unwrap();
    let grammar = dir.path().join("toy.tsv");
    fs::write(
        &grammar,
        "categories\t1\nvocab\tw\nc0\tc0\tc0\t4.0000000000000000e-1\nc0\tw\t-\t6.0000000000000000e-1\n",
    )
    .unwrap();
    let out = dir.path().join("bounded.tsv");
    let output = bin()
        .arg("bound")
        .arg(&grammar)
        .args(["--depth", "1"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    ok(&output);
    let text = read(&out);
    assert!(text.contains("depth\t1"), "{text}");
    // The deepest left position can only emit words.
    assert!(text.contains("c0@L2\tw\t-\t1"), "{text}");
    // Every written row sums to 1.
    let mut sums: std::collections::BTreeMap<String, f64> = Default::default();
    for line in text.lines().skip(3) {
        let fields: Vec<&str> = line.split('\t').collect();
        *sums.entry(fields[0].to_owned()).or_default() += fields[3].parse::<f64>().unwrap();
    }
    assert!(!sums.is_empty());
    for (row, sum) in sums {
        assert!((sum - 1.0).abs() < 1e-9, "row {row} sums to {sum}");
    }
}

#[test]
fn pioc_decodes_pooled_samples() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "a b c d\n").unwrap();
    let majority = "(X (X (X a) (X b)) (X (X c) (X d)))\n";
    let minority = "(X (X a) (X (X b) (X (X c) (X d))))\n";
    fs::write(dir.path().join("s1.trees"), majority).unwrap();
    fs::write(dir.path().join("s2.trees"), majority).unwrap();
    fs::write(dir.path().join("s3.trees"), minority).unwrap();
    let decoded = dir.path().join("decoded.trees");

    // Glob pattern expanded by the tool itself (no shell here).
    let pattern = dir.path().join("s*.trees").display().to_string();
    let output = bin()
        .arg("pioc")
        .arg(&corpus)
        .args(["--samples", &pattern])
        .args(["--merge-threshold", "0"])
        .arg("--out")
        .arg(&decoded)
        .output()
        .unwrap();
    ok(&output);
    assert_eq!(read(&decoded), "(X (X a b) (X c d))\n");

    // The 4-word root splits 2/3 vs 1/3: margin 1/3 < 0.9 → flattened.
    let flat = dir.path().join("flat.trees");
    let output = bin()
        .arg("pioc")
        .arg(&corpus)
        .args(["--samples", &pattern])
        .args(["--merge-threshold", "0.9"])
        .arg("--out")
        .arg(&flat)
        .output()
        .unwrap();
    ok(&output);
    assert_eq!(read(&flat), "(X a b c d)\n");
}

#[test]
fn pioc_names_the_offending_file_and_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "a b\n").unwrap();
    let bad = dir.path().join("bad.trees");
    fs::write(&bad, "(X (X a) (X c))\n").unwrap(); // wrong word
    let output = bin()
        .arg("pioc")
        .arg(&corpus)
        .args(["--samples", &bad.display().to_string()])
        .arg("--out")
        .arg(dir.path().join("out.trees"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bad.trees") && stderr.contains("sentence 0"), "{stderr}");
}

#[test]
fn eval_prints_four_decimal_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.trees");
    let pred = dir.path().join("pred.trees");
    fs::write(&gold, "(X (X a b) (X c d))\n").unwrap();
    fs::write(&pred, "(X a (X b (X c d)))\n").unwrap();
    let diag = dir.path().join("diag.tsv");
    let output = bin()
        .arg("eval")
        .arg("--gold")
        .arg(&gold)
        .arg("--pred")
        .arg(&pred)
        .arg("--diagnostics")
        .arg(&diag)
        .output()
        .unwrap();
    let (stdout, _) = ok(&output);
    assert_eq!(stdout, "recall\tprecision\tf1\n0.6667\t0.6667\t0.6667\n");
    assert_eq!(
        read(&diag),
        "sentence\tstatus\tmatched\tgoldSpans\tpredictedSpans\n0\tscored\t2\t3\t3\n"
    );
}

#[test]
fn baseline_writes_right_branching_trees() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, "w1 w2 w3\nw4 w5\n").unwrap();
    let out = dir.path().join("rb.trees");
    let output = bin()
        .arg("baseline")
        .arg(&corpus)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    ok(&output);
    assert_eq!(read(&out), "(X w1 (X w2 w3))\n(X w4 w5)\n");
}

#[test]
fn analyze_reports_runs_and_depths() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let run1 = dir.path().join("run1");
    let run2 = dir.path().join("run2");
    ok(&induce(&corpus, &run1, 7, 6, false));
    ok(&induce(&corpus, &run2, 8, 6, false));

    // Gold: right-branching trees over the same corpus.
    let gold = dir.path().join("gold.trees");
    let baseline = bin()
        .arg("baseline")
        .arg(&corpus)
        .arg("--out")
        .arg(&gold)
        .output()
        .unwrap();
    ok(&baseline);

    let out = dir.path().join("analysis");
    let output = bin()
        .arg("analyze")
        .arg("--runs")
        .arg(&run1)
        .arg(&run2)
        .arg("--gold")
        .arg(&gold)
        .args(["--top-k-by-loglik", "1"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let (stdout, _) = ok(&output);

    let runs = read(&out.join("runs.tsv"));
    let lines: Vec<&str> = runs.lines().collect();
    assert_eq!(lines[0], "run\tfinalLogLik\trecall\tprecision\tf1\tselected");
    assert_eq!(lines.len(), 4); // header + 2 runs + correlation comment
    assert!(lines[3].starts_with("# pearson r="), "{}", lines[3]);
    let selected: Vec<&str> = lines[1..3]
        .iter()
        .map(|l| l.rsplit('\t').next().unwrap())
        .collect();
    assert_eq!(selected.iter().filter(|&&s| s == "1").count(), 1);

    // stdout lists exactly the selected run directory.
    assert_eq!(stdout.lines().count(), 1);
    let picked = stdout.lines().next().unwrap();
    assert!(picked.contains("run1") || picked.contains("run2"));

    // Depth-1 runs put no mass above depth 1.
    let depths = read(&out.join("depths.tsv"));
    let mut saw_stage = (false, false);
    for line in depths.lines().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[1] {
            "first" => saw_stage.0 = true,
            "final" => saw_stage.1 = true,
            other => panic!("unexpected stage {other}"),
        }
        assert!(fields[2].parse::<usize>().unwrap() <= 1, "{line}");
    }
    assert!(saw_stage.0 && saw_stage.1);
}

#[test]
fn analyze_requires_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let empty_run = dir.path().join("empty");
    fs::create_dir_all(&empty_run).unwrap();
    let output = bin()
        .arg("analyze")
        .arg("--runs")
        .arg(&empty_run)
        .arg("--out")
        .arg(dir.path().join("analysis"))
        .output()
        .unwrap();
    assert!(!output.status.success());
}
