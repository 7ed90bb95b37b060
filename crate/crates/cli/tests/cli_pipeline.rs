//! End-to-end checks of the `mvtrack` binary: synth → track → eval, exit
//! codes, and output determinism across reruns and worker counts.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvtrack"))
}

fn write_scene(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn pipeline_tracks_and_evaluates() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let res = tmp.path().join("res");

    let scene = write_scene(
        tmp.path(),
        "scene.cfg",
        "fixture = two_view_plain\nseed = 2\nframes = 14\n",
    );
    let st = bin()
        .args(["synth", "--config"])
        .arg(&scene)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(st.success());

    let st = bin()
        .args(["track", "--dataset"])
        .arg(&data)
        .arg("--out")
        .arg(&res)
        .status()
        .unwrap();
    assert!(st.success());
    let results_file = res.join("two_view_plain_s2.txt");
    assert!(results_file.is_file());

    let st = bin()
        .args(["eval", "--results"])
        .arg(&res)
        .arg("--dataset")
        .arg(&data)
        .status()
        .unwrap();
    assert!(st.success());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(res.join("summary.json")).unwrap()).unwrap();
    let afs = summary["afs_success"].as_f64().unwrap();
    let ifs = summary["ifs_success"].as_f64().unwrap();
    assert!(ifs >= afs - 1e-12, "ifs {ifs} < afs {afs}");
    assert!(summary["per_attribute"]["DAY"].is_object());
    assert!(summary["per_attribute"]["NIGHT"].is_null());
    assert!(res
        .join("curves")
        .join("two_view_plain_s2.success.afs.csv")
        .is_file());
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    for (name, seed) in [("a.cfg", 3u64), ("b.cfg", 4u64)] {
        let scene = write_scene(
            tmp.path(),
            name,
            &format!("fixture = two_view_plain\nseed = {seed}\nframes = 10\n"),
        );
        let st = bin()
            .args(["synth", "--config"])
            .arg(&scene)
            .arg("--out")
            .arg(&data)
            .status()
            .unwrap();
        assert!(st.success());
    }

    let mut outputs = Vec::new();
    for (dir, workers) in [("r1", "1"), ("r2", "1"), ("r4", "4")] {
        let out = tmp.path().join(dir);
        let st = bin()
            .args(["track", "--dataset"])
            .arg(&data)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .status()
            .unwrap();
        assert!(st.success());
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        assert_eq!(files.len(), 2);
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
        outputs.push(bytes);
    }
    assert_eq!(outputs[0], outputs[1], "rerun changed the outputs");
    assert_eq!(outputs[0], outputs[2], "worker count changed the outputs");
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_cfg = write_scene(tmp.path(), "bad.cfg", "bogus_key = 1\n");
    let data = tmp.path().join("nope");

    let st = bin()
        .args(["track", "--dataset"])
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .arg("--config")
        .arg(&bad_cfg)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    let st = bin()
        .args(["track", "--dataset"])
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .args(["--preset", "not-a-preset"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    // clap usage error
    let st = bin().args(["track"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn missing_results_are_skipped_with_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    for (name, seed) in [("a.cfg", 5u64), ("b.cfg", 6u64)] {
        let scene = write_scene(
            tmp.path(),
            name,
            &format!("fixture = static\nseed = {seed}\nframes = 6\n"),
        );
        assert!(bin()
            .args(["synth", "--config"])
            .arg(&scene)
            .arg("--out")
            .arg(&data)
            .status()
            .unwrap()
            .success());
    }
    let res = tmp.path().join("res");
    // only track one of the two groups
    assert!(bin()
        .args(["track", "--dataset"])
        .arg(&data)
        .args(["--groups", "static_s5"])
        .arg("--out")
        .arg(&res)
        .status()
        .unwrap()
        .success());

    let st = bin()
        .args(["eval", "--results"])
        .arg(&res)
        .arg("--dataset")
        .arg(&data)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
    // the evaluated group still produced a summary
    assert!(res.join("summary.json").is_file());
}

#[test]
fn synth_fixture_suite_renders() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fixtures");
    let st = bin()
        .args(["synth", "--fixture", "static", "--seed", "9"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    assert!(out
        .join("static_s9")
        .join("drone1")
        .join("img000001.png")
        .is_file());
    assert!(out.join("static_s9").join("attributes.txt").is_file());

    let st = bin()
        .args(["synth", "--fixture", "no-such-fixture"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn full_fixture_suite_renders_quickly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("all");
    let start = std::time::Instant::now();
    let st = bin()
        .args(["synth", "--fixture", "all", "--seed", "1"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    let elapsed = start.elapsed();
    assert!(st.success());
    assert!(
        elapsed < std::time::Duration::from_secs(60),
        "suite took {elapsed:?}"
    );
    let groups: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(groups.len(), 6);
}
