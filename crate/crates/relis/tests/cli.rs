//! End-to-end tests of the command-line interface, driving the real
//! binary through the full workflow on a small synthetic corpus.

use std::path::Path;
use std::process::{Command, Output};

fn relis(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relis"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = relis(args, dir);
    assert!(
        out.status.success(),
        "relis {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

#[test]
fn full_workflow_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let synth_args = [
        "synth",
        "--out",
        "corpus",
        "--clusters",
        "5",
        "--docs",
        "2",
        "--sentences",
        "6",
        "--length-budget",
        "60",
        "--seed",
        "4",
    ];
    let stdout = ok(&synth_args, root);
    assert!(stdout.contains("clusters\t5"));

    let sample_args = [
        "sample",
        "--data",
        "corpus",
        "--out",
        "work",
        "--samples",
        "40",
        "--pairs",
        "120",
        "--length-budget",
        "60",
        "--seed",
        "4",
    ];
    ok(&sample_args, root);
    let samples = std::fs::read(root.join("work/samples.jsonl")).unwrap();
    assert!(!samples.is_empty());

    ok(
        &[
            "train-reward",
            "--data",
            "corpus",
            "--samples-file",
            "work/samples.jsonl",
            "--loss",
            "ce",
            "--epochs",
            "3",
            "--out",
            "work",
            "--length-budget",
            "60",
            "--seed",
            "4",
        ],
        root,
    );
    assert!(root.join("work/model.json").is_file());

    let summarize_args = [
        "summarize",
        "--data",
        "corpus",
        "--model",
        "work/model.json",
        "--episodes",
        "80",
        "--out",
        "summaries",
        "--length-budget",
        "60",
        "--seed",
        "4",
    ];
    let stdout = ok(&summarize_args, root);
    assert_eq!(stdout.lines().count(), 5);
    assert!(root.join("summaries/c00.txt").is_file());
    assert!(root.join("summaries/manifest.tsv").is_file());

    let stdout = ok(
        &[
            "evaluate",
            "--data",
            "corpus",
            "--model",
            "work/model.json",
            "--samples-file",
            "work/samples.jsonl",
            "--length-budget",
            "60",
        ],
        root,
    );
    assert!(stdout.contains("mean_rho\t"));
    assert!(stdout.contains("evaluated\t5"));

    // reruns of every writing step produce byte-identical outputs
    let mut synth2 = synth_args;
    synth2[2] = "corpus2";
    ok(&synth2, root);
    for cluster in ["c00", "c03"] {
        let a = std::fs::read(root.join(format!("corpus/{cluster}/docs/d0.txt"))).unwrap();
        let b = std::fs::read(root.join(format!("corpus2/{cluster}/docs/d0.txt"))).unwrap();
        assert_eq!(a, b);
    }
    let mut sample2 = sample_args;
    sample2[4] = "work2";
    ok(&sample2, root);
    assert_eq!(
        samples,
        std::fs::read(root.join("work2/samples.jsonl")).unwrap()
    );
    let mut summarize2 = summarize_args;
    summarize2[8] = "summaries2";
    ok(&summarize2, root);
    assert_eq!(
        std::fs::read(root.join("summaries/manifest.tsv")).unwrap(),
        std::fs::read(root.join("summaries2/manifest.tsv")).unwrap()
    );
}

#[test]
fn summarize_supports_builtin_rewards() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(
        &[
            "synth",
            "--out",
            "corpus",
            "--clusters",
            "2",
            "--docs",
            "2",
            "--sentences",
            "5",
            "--length-budget",
            "50",
            "--seed",
            "9",
        ],
        root,
    );
    for reward in ["oracle", "heuristic"] {
        let stdout = ok(
            &[
                "summarize",
                "--data",
                "corpus",
                "--reward",
                reward,
                "--episodes",
                "60",
                "--out",
                reward,
                "--length-budget",
                "50",
                "--seed",
                "9",
            ],
            root,
        );
        assert_eq!(stdout.lines().count(), 2, "{reward}: {stdout}");
    }
    // a reward source is mandatory
    let out = relis(
        &[
            "summarize",
            "--data",
            "corpus",
            "--out",
            "x",
            "--length-budget",
            "50",
        ],
        root,
    );
    assert!(!out.status.success());
}

#[test]
fn run_loo_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for (i, name) in ["one", "two"].iter().enumerate() {
        ok(
            &[
                "synth",
                "--out",
                name,
                "--clusters",
                "4",
                "--docs",
                "2",
                "--sentences",
                "6",
                "--length-budget",
                "60",
                "--seed",
                &(20 + i as u64).to_string(),
            ],
            root,
        );
    }
    std::fs::write(
        root.join("loo.conf"),
        "split.one = one\n\
         split.two = two\n\
         budget = 60\n\
         loss = ce\n\
         epochs = 3\n\
         samples = 30\n\
         pairs = 90\n\
         episodes = 50\n\
         seed = 5\n\
         out = looout\n",
    )
    .unwrap();
    let stdout = ok(&["run-loo", "--config", "loo.conf"], root);
    assert!(stdout.contains("held-out split: one"));
    assert!(stdout.contains("held-out split: two"));
    assert!(root.join("looout/report.txt").is_file());
    assert!(root.join("looout/report.tsv").is_file());
    assert!(root.join("looout/summaries/one").is_dir());

    // a single split cannot do leave-one-out
    std::fs::write(root.join("bad.conf"), "split.one = one\nout = bad\n").unwrap();
    let out = relis(&["run-loo", "--config", "bad.conf"], root);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("two splits"));
}

#[test]
fn verify_bound_and_feature_dump() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let stdout = ok(
        &[
            "verify-bound",
            "--trials",
            "2",
            "--episodes",
            "150",
            "--seed",
            "3",
            "--out",
            "bound",
        ],
        root,
    );
    assert!(stdout.contains("violations\t0"));
    assert!(root.join("bound/bound.tsv").is_file());

    ok(
        &[
            "synth",
            "--out",
            "corpus",
            "--clusters",
            "1",
            "--docs",
            "2",
            "--sentences",
            "5",
            "--length-budget",
            "50",
            "--seed",
            "2",
        ],
        root,
    );
    ok(
        &[
            "sample",
            "--data",
            "corpus",
            "--out",
            "work",
            "--samples",
            "8",
            "--pairs",
            "0",
            "--length-budget",
            "50",
            "--seed",
            "2",
        ],
        root,
    );
    let stdout = ok(
        &[
            "features",
            "dump",
            "--data",
            "corpus",
            "--samples-file",
            "work/samples.jsonl",
            "--length-budget",
            "50",
        ],
        root,
    );
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("columns\tcluster\tsample\tneg_jsd_unigram"));
    assert_eq!(lines.len(), 9); // header + 8 samples
    assert!(lines[1].starts_with("features\tc00\t0\t"));
}
