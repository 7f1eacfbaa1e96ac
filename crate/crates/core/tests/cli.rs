mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zscomp::config::{Inputs, RunConfig};
use zscomp::evaluation::per_action_delta;
use zscomp::inference::{Method, MethodSupport};

fn zscomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zscomp"))
        .args(args)
        .env_remove("ZSCOMP_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path, seed: &str) -> PathBuf {
    let fx = dir.join(format!("fx{seed}"));
    let out = zscomp(&["fixtures", "--seed", seed, "--output-dir", s(&fx)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fx.join("config.json")
}

#[test]
fn fixtures_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = fixture(dir.path(), "11");
    let b = dir.path().join("again");
    assert!(zscomp(&["fixtures", "--seed", "11", "--output-dir", s(&b)]).status.success());
    assert_eq!(common::snapshot(a.parent().unwrap()), common::snapshot(&b));
    let c = fixture(dir.path(), "12");
    assert_ne!(common::snapshot(a.parent().unwrap()), common::snapshot(c.parent().unwrap()));
}

#[test]
fn degenerate_fixture_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("tiny");
    assert!(zscomp(&["fixtures", "--size", "1x1x1", "--output-dir", s(&fx)]).status.success());
    let cfg = fx.join("config.json");
    for cmd in ["select", "classify", "evaluate", "ablate", "oracle-check"] {
        let out = zscomp(&[cmd, "--config", s(&cfg), "--output-dir", s(&dir.path().join(cmd))]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn lambda_defaults_to_three_quarters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = fixture(dir.path(), "1");
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    json.as_object_mut().unwrap().remove("lambda");
    fs::write(&cfg_path, json.to_string()).unwrap();
    let out = dir.path().join("sel");
    assert!(zscomp(&["select", "--config", s(&cfg_path), "--output-dir", s(&out)]).status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["lambda"], 0.75);
}

#[test]
fn invalid_lambda_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "1");
    let out = zscomp(&["select", "--config", s(&cfg), "--lambda", "1.5", "--output-dir", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn missing_embeddings_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "1");
    let out = zscomp(&[
        "classify",
        "--config",
        s(&cfg),
        "--object-embeddings",
        "/nonexistent/emb.txt",
        "--output-dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("object_embeddings"));
}

#[test]
fn malformed_matrix_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "1");
    let probs = dir.path().join("fx1/object_probs.csv");
    let text = fs::read_to_string(&probs).unwrap().replacen("obj000", "objXXX", 1);
    fs::write(&probs, text).unwrap();
    let out = zscomp(&["classify", "--config", s(&cfg), "--method", "object_only", "--output-dir", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("objXXX"));
}

#[test]
fn object_only_needs_no_scene_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "1");
    fs::remove_file(dir.path().join("fx1/scene_probs.csv")).unwrap();
    let out = zscomp(&["classify", "--config", s(&cfg), "--method", "object_only", "--output-dir", s(&dir.path().join("o"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = zscomp(&["classify", "--config", s(&cfg), "--method", "compositions", "--output-dir", s(&dir.path().join("p"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_and_flags_fail() {
    assert_eq!(zscomp(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(zscomp(&["select", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn select_files_replay_the_selection_module() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = fixture(dir.path(), "3");
    let out = dir.path().join("sel");
    assert!(zscomp(&["select", "--config", s(&cfg_path), "--output-dir", s(&out)]).status.success());

    let cfg = RunConfig::from_file(&cfg_path).unwrap();
    let methods = [Method::Compositions];
    let inputs = Inputs::load(&cfg, &methods, false, false).unwrap();
    let engine = inputs.engine(&cfg, &methods).unwrap();
    let all: Vec<usize> = (0..inputs.actions.len()).collect();
    let MethodSupport::Compositions { sets, .. } = engine.support(Method::Compositions, &all).unwrap() else {
        panic!("expected composition sets");
    };
    let objects = inputs.objects.as_ref().unwrap().vocab();
    let scenes = inputs.scenes.as_ref().unwrap().vocab();
    for set in &sets {
        let label = inputs.actions.vocab().label(set.action_id);
        let mut expect = String::from("action_label,rank,object_label,scene_label,similarity,mmr_score\n");
        for (r, m) in set.members.iter().enumerate() {
            expect += &format!(
                "{label},{},{},{},{},{}\n",
                r + 1,
                objects.label(m.composition.object),
                scenes.label(m.composition.scene),
                m.similarity,
                m.mmr_score
            );
        }
        let file = out.join(format!("selections/{:04}_{label}.csv", set.action_id));
        assert_eq!(fs::read_to_string(file).unwrap(), expect);
    }
}

#[test]
fn classify_replays_the_engine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = fixture(dir.path(), "4");
    let out = dir.path().join("cls");
    assert!(zscomp(&["classify", "--config", s(&cfg_path), "--output-dir", s(&out)]).status.success());

    let cfg = RunConfig::from_file(&cfg_path).unwrap();
    let inputs = Inputs::load(&cfg, &[cfg.method], true, false).unwrap();
    let engine = inputs.engine(&cfg, &[cfg.method]).unwrap();
    let c = engine.classify(cfg.method, &inputs.evidence(), None).unwrap();
    let mut reader = csv::Reader::from_path(out.join("scores.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), c.scores.num_videos() * c.scores.num_actions());
    for (i, r) in rows.iter().enumerate() {
        let (v, a) = (i / c.scores.num_actions(), i % c.scores.num_actions());
        assert_eq!(&r[0], c.scores.video_ids[v]);
        assert_eq!(r[2].parse::<f64>().unwrap(), c.scores.get(v, a));
    }
    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    for (line, p) in preds.lines().skip(1).zip(&c.predictions) {
        assert_eq!(line, format!("{},{}", p.video_id, p.action_label));
    }
}

#[test]
fn evaluate_is_reproducible_and_deltas_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = fixture(dir.path(), "6");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = zscomp(&["evaluate", "--config", s(&cfg_path), "--output-dir", s(&out), "--subset-size", "10"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(common::snapshot(&a), common::snapshot(&b));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("evaluation.json")).unwrap()).unwrap();
    for m in report["methods"].as_array().unwrap() {
        assert_eq!(m["trials"][0]["std"], 0.0, "{}", m["method"]);
    }

    let cfg = RunConfig::from_file(&cfg_path).unwrap();
    let methods = [Method::Compositions, Method::ObjectOnly];
    let inputs = Inputs::load(&cfg, &methods, true, true).unwrap();
    let engine = inputs.engine(&cfg, &methods).unwrap();
    let pa = engine.classify(Method::Compositions, &inputs.evidence(), None).unwrap().predictions;
    let pb = engine.classify(Method::ObjectOnly, &inputs.evidence(), None).unwrap().predictions;
    let rows = per_action_delta(&pa, &pb, inputs.truth.as_ref().unwrap(), inputs.actions.vocab()).unwrap();
    let text = fs::read_to_string(a.join("delta_compositions_vs_object_only.csv")).unwrap();
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(lines.len(), rows.len());
    for (line, r) in lines.iter().zip(&rows) {
        assert!(line.starts_with(&format!("{},{},", r.action_label, r.num_videos)));
        assert!(line.ends_with(&format!(",{}", r.delta)));
    }
}

#[test]
fn ablation_table_has_a_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "2");
    let out = dir.path().join("abl");
    let o = zscomp(&["ablate", "--config", s(&cfg), "--output-dir", s(&out), "--subset-sizes", "4,10", "--num-trials", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,mean_4,std_4,mean_10,std_10");
    assert_eq!(lines.count(), Method::ALL.len());
}

#[test]
fn threads_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "1");
    let o = Command::new(env!("CARGO_BIN_EXE_zscomp"))
        .args(["classify", "--config", s(&cfg), "--output-dir", s(&dir.path().join("o"))])
        .env("ZSCOMP_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
