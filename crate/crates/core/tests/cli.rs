use std::process::Command;

use parsebrain::synth::{write_dataset, SynthSpec};

fn parsebrain() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_parsebrain"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn verbs_run_against_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { n_subjects: 2, n_voxels: 120, n_permutations: 100, n_bootstrap: 100, ..SynthSpec::default() };
    let data = write_dataset(&dir.path().join("data"), &spec).unwrap();
    let out = dir.path().join("out");
    let run = |args: &[&str]| {
        let o = parsebrain()
            .arg("--config")
            .arg(&data.config)
            .arg("--out")
            .arg(&out)
            .args(["--jobs", "1", "--seed", "3"])
            .args(args)
            .output()
            .unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    assert_eq!(run(&["features"]), "A\t4\nB\t4\n");
    assert_eq!(run(&["encode", "A"]).lines().count(), 2);
    run(&["encode"]);
    assert!(run(&["compare", "pairwise"]).starts_with("B-A\t"));
    assert!(run(&["report"]).contains("pairwise"));
    assert!(out.join("report/pairwise_L.svg").exists());
    let cfg = std::fs::read_to_string(out.join("run.cfg")).unwrap();
    assert!(cfg.contains("seed = 3"), "{cfg}");
}

#[test]
fn errors_exit_with_two() {
    let o = parsebrain().arg("features").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));

    let o = parsebrain().args(["--config", "/nonexistent/run.cfg", "features"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { n_subjects: 2, n_voxels: 120, n_permutations: 100, n_bootstrap: 100, ..SynthSpec::default() };
    let data = write_dataset(&dir.path().join("data"), &spec).unwrap();
    let mut digests = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("out{jobs}"));
        for verb in [&["features"][..], &["encode"], &["compare", "individual"], &["compare", "pairwise"], &["report"]] {
            let o = parsebrain().arg("--config").arg(&data.config).arg("--out").arg(&out).args(["--jobs", jobs]).args(verb).output().unwrap();
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        digests.push(parsebrain::pipeline::tree_digest(&out).unwrap());
    }
    assert_eq!(digests[0], digests[1]);
}
