use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rft_inverse::{ToeGeometry, Trajectory};
use rft_workbench::config::GridSpec;
use rft_workbench::{default_config, ExperimentConfig, GroundTruth};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rft-workbench"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_quick_config(dir: &Path) -> String {
    let mut cfg: ExperimentConfig = default_config("c_toe_gait2").unwrap();
    cfg.name = "cli".into();
    cfg.toe = ToeGeometry::c_toe(0.02, 0.008, 3);
    cfg.trajectory = Trajectory::rectangle(0.05, 0.2, 0.05, 24);
    cfg.grid = GridSpec {
        n_beta: 9,
        n_gamma: 7,
    };
    cfg.inversion.fit.restarts = 1;
    cfg.inversion.fit.max_iter = 40;
    let path = dir.join("quick.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn presets_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["presets", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    for name in ["i_toe_gait1", "i_toe_gait2", "c_toe_gait1", "c_toe_gait2"] {
        let loaded = ExperimentConfig::load(&dir.path().join(format!("{name}.toml"))).unwrap();
        assert_eq!(loaded.digest(), default_config(name).unwrap().digest());
    }
}

#[test]
fn run_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_quick_config(dir.path());
    let run_dir = dir.path().join("run");
    let out = cli(&[
        "run",
        "--config",
        &config,
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("cli"));

    let svg = dir.path().join("mean.svg");
    let out = cli(&[
        "export",
        "--input",
        run_dir.join("posterior_mean.csv").to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
        "--component",
        "x",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read_to_string(&svg).unwrap().matches("<rect").count(),
        63
    );
}

#[test]
fn simulate_then_invert() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_quick_config(dir.path());
    let data = dir.path().join("data");
    let out = cli(&[
        "simulate",
        "--config",
        &config,
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let inv = dir.path().join("inv");
    let out = cli(&[
        "invert",
        "--config",
        &config,
        "--out",
        inv.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--truth",
        data.join("ground_truth.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(inv.join("model.toml").is_file());
    assert!(fs::read_to_string(inv.join("results.txt"))
        .unwrap()
        .contains("grid.z.rmse"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p).to_str().unwrap().to_string();

    fs::write(d("bad.toml"), "name = \"x\"\nnot_a_field = 1\n").unwrap();
    assert_eq!(code(&cli(&["run", "--config", &d("bad.toml")])), 2);
    assert_eq!(code(&cli(&["run", "--preset", "nope"])), 2);
    assert_eq!(code(&cli(&["run"])), 2);

    // referenced inputs are checked before anything runs
    let mut cfg = default_config("i_toe_gait1").unwrap();
    cfg.ground_truth = GroundTruth::File {
        path: dir.path().join("absent.csv"),
    };
    fs::write(d("m.toml"), cfg.to_toml_string()).unwrap();
    assert_eq!(code(&cli(&["run", "--config", &d("m.toml")])), 2);

    // output directory below a regular file
    fs::write(d("blocker"), "").unwrap();
    let quick = write_quick_config(dir.path());
    let out = cli(&["run", "--config", &quick, "--out", &d("blocker/run")]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(
        code(&cli(&[
            "export",
            "--input",
            &d("absent.csv"),
            "--out",
            &d("o.svg")
        ])),
        4
    );
    fs::write(d("map.csv"), "").unwrap();
    assert_eq!(
        code(&cli(&[
            "export",
            "--input",
            &d("map.csv"),
            "--out",
            &d("o.png")
        ])),
        2
    );
}
