use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn odenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odenet")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn status(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn study_writes_tables_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.cfg",
        "experiment = heun_adjoint\ndim = 3\nhidden = 5\ndepths = 8,16,32\n",
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = odenet(&[
            "study",
            "--config",
            &cfg,
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["study.csv", "slopes.csv", "gradients_N8.csv", "gradients_N32.csv"] {
        let a = fs::read(out_a.join(name)).unwrap();
        assert_eq!(a, fs::read(out_b.join(name)).unwrap(), "{name}");
    }
    let slopes = fs::read_to_string(out_a.join("slopes.csv")).unwrap();
    assert!(slopes.starts_with("metric,slope,intercept,r2,flag\n"));
    let study = fs::read_to_string(out_a.join("study.csv")).unwrap();
    assert!(study.starts_with("N,metric,value\n8,"));
}

#[test]
fn seed_override_changes_the_draw() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "experiment = euler_adjoint\ndepths = 8,16\n");
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        let o = odenet(&[
            "study",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(status(&o), 0);
        fs::read(out.join("study.csv")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn depths_override_replaces_the_file_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "experiment = approx_error\ndepths = 8,16\n");
    let out = dir.path().join("o");
    let o = odenet(&[
        "study",
        "--config",
        &cfg,
        "--depths",
        "4,12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status(&o), 0);
    let study = fs::read_to_string(out.join("study.csv")).unwrap();
    let depths: Vec<&str> = study.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(depths, ["4", "12"]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "u.cfg", "experiment = euler_adjoint\nlayers = 3\n");
    let o = odenet(&["study", "--config", &unknown]);
    assert_eq!(status(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("layers"));

    let ok = write_config(dir.path(), "ok.cfg", "experiment = euler_adjoint\n");
    assert_eq!(status(&odenet(&["study", "--config", &ok, "--depths", "16,8"])), 2);
    assert_eq!(
        status(&odenet(&[
            "study",
            "--config",
            dir.path().join("missing.cfg").to_str().unwrap()
        ])),
        2
    );
    // a study config handed to the training command
    assert_eq!(status(&odenet(&["train", "--config", &ok])), 2);
}

#[test]
fn all_depths_diverging_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.cfg",
        "experiment = euler_adjoint\nfamily = linear\ndim = 1\nschedule_profile = index\ndepths = 128,256\n",
    );
    let out = dir.path().join("o");
    assert_eq!(
        status(&odenet(&["study", "--config", &cfg, "--out", out.to_str().unwrap()])),
        3
    );
}

#[test]
fn oversized_initial_weights_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "l.cfg",
        "experiment = linear_flow\ndim = 2\nschedule_profile = ramp\nprofile_scale = 0.3\ndepths = 4\nt_end = 1\n",
    );
    let out = dir.path().join("o");
    let o = odenet(&["linflow", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(status(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("norm margin"));
}

#[test]
fn tightness_needs_no_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = odenet(&["tightness", "--depths", "10,100", "--out", out.to_str().unwrap()]);
    assert_eq!(status(&o), 0);
    let text = fs::read_to_string(out.join("tightness.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn linflow_and_train_emit_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let lin = write_config(
        dir.path(),
        "l.cfg",
        "experiment = limit_map\ndim = 2\nprofile_scale = 0.05\ndepths = 4,8\nt_end = 1\nsnapshots = 3\n",
    );
    let out = dir.path().join("lin");
    assert_eq!(
        status(&odenet(&["linflow", "--config", &lin, "--out", out.to_str().unwrap()])),
        0
    );
    for name in [
        "trace.csv",
        "limitmap.csv",
        "doubling.csv",
        "invariants.csv",
        "schedules/N8_t2.csv",
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,loss,max_theta_norm,smoothness_stat\n"));

    let train = write_config(
        dir.path(),
        "t.cfg",
        "experiment = toy_train\nhidden = 16\ndepths = 4,8\nepochs = 20\n",
    );
    let out = dir.path().join("train");
    assert_eq!(
        status(&odenet(&["train", "--config", &train, "--out", out.to_str().unwrap()])),
        0
    );
    for name in ["trajectories.csv", "summary.csv", "loss_N4.csv", "trajectories_N8.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
}
