use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "simulator": {"n_queries": 60},
  "base": {"epochs": 3},
  "pretrain": {"epochs": 3},
  "grpo": {"steps": 5}
}"#;

fn reranklab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reranklab"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("RERANKLAB_")) {
        cmd.env_remove(k);
    }
    cmd.envs(envs.iter().copied());
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_reports_stats_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let stdout = ok(&reranklab(&["simulate", "--out", a.to_str().unwrap()], &[]));
    let avg: f64 = stdout
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("avg_pairs_per_query="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((7.0..=9.0).contains(&avg), "{avg}");
    ok(&reranklab(&["simulate", "--out", b.to_str().unwrap()], &[]));
    for f in ["sessions.jsonl", "pairs.jsonl", "simconfig.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = reranklab(
        &["simulate", "--out", tmp.path().to_str().unwrap()],
        &[("RERANKLAB_SIMULATOR__N_QUERIES", "0")],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_queries"));
}

#[test]
fn grpo_without_pretrain_checkpoint_is_a_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cfg = small_config(tmp.path());
    ok(&reranklab(&["simulate", "--config", &cfg, "--out", dir], &[]));
    ok(&reranklab(&["train", "--stage", "scorer", "--out", dir], &[]));
    let out = reranklab(&["train", "--stage", "grpo", "--out", dir], &[]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pretrain checkpoint"));
}

#[test]
fn stage_by_stage_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cfg = small_config(tmp.path());
    ok(&reranklab(&["simulate", "--config", &cfg, "--out", dir], &[]));
    for stage in ["scorer", "base", "pretrain", "grpo"] {
        ok(&reranklab(&["train", "--stage", stage, "--out", dir], &[]));
    }
    let scorer = fs::read_to_string(tmp.path().join("scorer.json")).unwrap();
    assert!(scorer.contains("\"config_hash\""));
    for m in ["exposure", "ctr", "scorer", "base", "s1", "s1s2"] {
        ok(&reranklab(&["rerank", "--method", m, "--out", dir, "--k", "10"], &[]));
    }
    ok(&reranklab(&["evaluate", "--out", dir, "--k", "1,5,10"], &[]));
    let report = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("method,metric,label_kind,k,value,n_queries"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for m in ["exposure", "ctr", "scorer", "base", "s1", "s1s2"] {
        for kind in ["click", "long", "dur", "human"] {
            let n = rows.iter().filter(|r| r[0] == m && r[1] == "ndcg" && r[2] == kind).count();
            assert_eq!(n, 3, "{m} {kind}");
        }
    }

    let scores = fs::read_to_string(tmp.path().join("scores.jsonl")).unwrap();
    assert_eq!(scores.lines().count(), 60 * 12);
    let rewards = fs::read_to_string(tmp.path().join("rewards_s1s2.jsonl")).unwrap();
    let lists = fs::read_to_string(tmp.path().join("lists_s1s2.jsonl")).unwrap();
    assert_eq!(rewards.lines().count(), lists.lines().count());
    assert!(rewards.lines().next().unwrap().contains("\"behavioral\""));

    let base = tmp.path().join("lists_base.jsonl");
    let stdout = ok(&reranklab(
        &["gsb", "--out", dir, "--a", base.to_str().unwrap(), "--b", base.to_str().unwrap()],
        &[],
    ));
    assert!(stdout.contains("adv=+0.00%"), "{stdout}");
}

#[test]
fn gsb_query_set_mismatch_lists_missing_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cfg = small_config(tmp.path());
    ok(&reranklab(&["simulate", "--config", &cfg, "--out", dir], &[]));
    ok(&reranklab(&["rerank", "--method", "ctr", "--out", dir], &[]));
    let full = fs::read_to_string(tmp.path().join("lists_ctr.jsonl")).unwrap();
    let first_line = full.lines().next().unwrap();
    let short = tmp.path().join("short.jsonl");
    fs::write(&short, full.lines().skip(1).collect::<Vec<_>>().join("\n")).unwrap();
    let out = reranklab(
        &[
            "gsb",
            "--out",
            dir,
            "--a",
            tmp.path().join("lists_ctr.jsonl").to_str().unwrap(),
            "--b",
            short.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(7));
    let qid = first_line.split('"').nth(3).unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains(qid));
}

#[test]
fn unknown_stage_is_rejected() {
    let out = reranklab(&["train", "--stage", "warmup", "--out", "/nonexistent"], &[]);
    assert!(!out.status.success());
}

#[test]
fn missing_corpus_is_a_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = reranklab(&["evaluate", "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn malformed_config_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, "{\"simulator\": ").unwrap();
    let out = reranklab(
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(4));
}
