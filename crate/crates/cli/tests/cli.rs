use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use maskaggr::io::read_volume;
use maskaggr_cli::Manifest;

fn maskaggr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskaggr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = maskaggr(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--shape", "24,24,4", "--instances", "6", "--seed", "3", "--out", &p(d, "gt")]);
    for s in ["1,1,1", "4,4,1"] {
        let name = format!("m{}", &s[..1]);
        ok(&["masks", "export", "--labels", &p(d, "gt"), "--scale", s, "--out", &p(d, &name)]);
    }
    ok(&["aggregate", "--masks", &p(d, "m1"), "--masks", &p(d, "m4"), "--out", &p(d, "g")]);
    ok(&["segment", "--graph", &p(d, "g"), "--out", &p(d, "seg")]);
    let json = ok(&["eval", "--seg", &p(d, "seg"), "--gt", &p(d, "gt")]);
    let e: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["voi_split", "voi_merge", "arand", "cremi"] {
        assert_eq!(e[key].as_f64(), Some(0.0), "{json}");
    }
    ok(&["postprocess", "--seg", &p(d, "seg"), "--graph", &p(d, "g"), "--min-size", "10", "--out", &p(d, "pp")]);
    assert_eq!(read_volume(&d.join("pp")).unwrap().shape(), read_volume(&d.join("gt")).unwrap().shape());

    // gasp, baseline and the codec path
    ok(&["segment", "--graph", &p(d, "g"), "--method", "gasp", "--out", &p(d, "seg_gasp")]);
    ok(&["aggregate", "--masks", &p(d, "m1"), "--method", "baseline", "--neighborhood", "compact", "--out", &p(d, "gb")]);
    ok(&["codec", "fit", "--labels", &p(d, "gt"), "--q", "8", "--out", &p(d, "codec")]);
    ok(&["codec", "apply", "--codec", &p(d, "codec"), "--masks", &p(d, "m1"), "--out", &p(d, "m1c")]);
    ok(&["masks", "export", "--labels", &p(d, "gt"), "--codec", &p(d, "codec"), "--sigma", "0.5", "--out", &p(d, "m1cn")]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // config errors
    assert_eq!(maskaggr(&["gen", "--shape", "4,4", "--out", &p(d, "x")]).status.code(), Some(2));
    assert_eq!(maskaggr(&["gen", "--shape", "2,2,1", "--instances", "9", "--out", &p(d, "x")]).status.code(), Some(2));
    fs::write(d.join("bad.json"), r#"{"masks": {"window": [6, 7, 5]}}"#).unwrap();
    let out = maskaggr(&["pipeline", "--config", &p(d, "bad.json"), "--out", &p(d, "run")]);
    assert_eq!(out.status.code(), Some(2));
    // i/o errors
    assert_eq!(maskaggr(&["eval", "--seg", &p(d, "nope"), "--gt", &p(d, "nope")]).status.code(), Some(3));
    ok(&["gen", "--shape", "8,8,2", "--instances", "2", "--out", &p(d, "gt")]);
    fs::write(d.join("gt.raw"), [0u8; 7]).unwrap();
    assert_eq!(maskaggr(&["eval", "--seg", &p(d, "gt"), "--gt", &p(d, "gt")]).status.code(), Some(3));
    // computation error: nothing survives the size filter
    ok(&["gen", "--shape", "8,8,2", "--instances", "2", "--out", &p(d, "gt2")]);
    ok(&["masks", "export", "--labels", &p(d, "gt2"), "--window", "3,3,1", "--out", &p(d, "m")]);
    ok(&["aggregate", "--masks", &p(d, "m"), "--neighborhood", "compact", "--out", &p(d, "g")]);
    ok(&["segment", "--graph", &p(d, "g"), "--out", &p(d, "s")]);
    let out = maskaggr(&["postprocess", "--seg", &p(d, "s"), "--graph", &p(d, "g"), "--min-size", "1000", "--out", &p(d, "pp")]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn pipeline_is_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{
        "volume": {"shape": [16, 16, 16], "num_instances": 6, "seed": 2},
        "masks": {"noise": {"flip_sigma": 0.5, "seed": 4}},
        "postprocess": {"min_size": 50}
    }"#;
    fs::write(d.join("cfg.json"), cfg).unwrap();
    ok(&["pipeline", "--config", &p(d, "cfg.json"), "--out", &p(d, "a")]);
    ok(&["--threads", "1", "pipeline", "--config", &p(d, "cfg.json"), "--out", &p(d, "b")]);
    ok(&["pipeline", "--manifest", &p(d, "a/manifest.json"), "--out", &p(d, "c")]);
    let ma = Manifest::read(&d.join("a/manifest.json")).unwrap();
    assert!(ma.metrics.unwrap().cremi >= 0.0);
    assert_eq!(ma.seeds["noise"], 4);
    let stages: Vec<_> = ma.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(stages, ["gen", "masks", "aggregate", "segment", "postprocess", "eval"]);
    for run in ["b", "c"] {
        let m = Manifest::read(&d.join(run).join("manifest.json")).unwrap();
        assert_eq!(m.outputs, ma.outputs);
        assert_eq!(m.config_sha256, ma.config_sha256);
        assert_eq!(
            fs::read(d.join(run).join("metrics.json")).unwrap(),
            fs::read(d.join("a/metrics.json")).unwrap()
        );
    }
    assert_eq!(Manifest::read(&d.join("b/manifest.json")).unwrap().threads, 1);
}

#[test]
fn manifest_rerun_detects_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--shape", "12,12,3", "--instances", "3", "--out", &p(d, "gt")]);
    let cfg = format!(
        r#"{{"volume": {{"path": {:?}}}, "postprocess": {{"enabled": false}}}}"#,
        p(d, "gt")
    );
    fs::write(d.join("cfg.json"), cfg).unwrap();
    ok(&["pipeline", "--config", &p(d, "cfg.json"), "--out", &p(d, "a")]);
    let m = Manifest::read(&d.join("a/manifest.json")).unwrap();
    assert!(m.inputs.keys().any(|k| k.ends_with("gt.raw")));
    ok(&["gen", "--shape", "12,12,3", "--instances", "3", "--seed", "9", "--out", &p(d, "gt")]);
    let out = maskaggr(&["pipeline", "--manifest", &p(d, "a/manifest.json"), "--out", &p(d, "b")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_stage_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{"volume": {"shape": [8, 8, 2], "num_instances": 2}, "postprocess": {"min_size": 1000}}"#;
    fs::write(d.join("cfg.json"), cfg).unwrap();
    let out = maskaggr(&["pipeline", "--config", &p(d, "cfg.json"), "--out", &p(d, "run")]);
    assert_eq!(out.status.code(), Some(4));
    let m = Manifest::read(&d.join("run/manifest.json")).unwrap();
    assert_eq!(m.status, "error");
    let e = m.error.unwrap();
    assert_eq!((e.stage.as_str(), e.exit_code, e.kind.as_str()), ("postprocess", 4, "computation"));
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{
        "pipeline": {"volume": {"shape": [12, 12, 3], "num_instances": 3}, "postprocess": {"enabled": false}},
        "sigmas": [0.0, 0.5, 1.0],
        "seeds": [0]
    }"#;
    fs::write(d.join("sweep.json"), cfg).unwrap();
    ok(&["sweep", "--config", &p(d, "sweep.json"), "--out", &p(d, "s")]);
    let csv = fs::read_to_string(d.join("s/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sigma,method,seed,cremi,voi_split,voi_merge,arand,mean_variance"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[1].starts_with("0.0,baseline,0,"));
    let m = Manifest::read(&d.join("s/manifest.json")).unwrap();
    assert_eq!((m.command.as_str(), m.stages.len()), ("sweep", 6));
}
