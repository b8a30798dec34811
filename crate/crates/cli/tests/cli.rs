use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn xmodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xmodal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SYNTH: &str = "num_identities = 8\nper_identity_per_modality = 4\ninput_dim = 6\ncluster_std = 0.3\nseed = 2\n\
                     [modality_transform]\nkind = \"rotation\"\noffset_norm = 1.0\n";

const TRAIN: &str =
    "P = 3\nK = 2\nepochs = 3\nfreeze_stage_epochs = 1\nlearning_rate = 0.01\nlr_decay_epoch = 2\nseed = 4\n\
                     [encoder]\ninput_dim = 6\nstage_dims = [8, 8]\ntap_stage = 1\nd = 6\n";

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(ws.path("synth.toml"), SYNTH).unwrap();
        std::fs::write(ws.path("train.toml"), TRAIN).unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn prepare(&self) {
        let out = xmodal(&[
            "synth",
            "--config",
            path_str(&self.path("synth.toml")),
            "--out",
            path_str(&self.path("all.csv")),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let out = xmodal(&[
            "split",
            "--data",
            path_str(&self.path("all.csv")),
            "--train-out",
            path_str(&self.path("train.csv")),
            "--test-out",
            path_str(&self.path("test.csv")),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }

    fn train_and_eval(&self, tag: &str) -> (Vec<u8>, Vec<u8>) {
        let ckpt = self.path(&format!("{tag}.ckpt"));
        let train_report = self.path(&format!("{tag}-train.json"));
        let eval_report = self.path(&format!("{tag}-eval.json"));
        let out = xmodal(&[
            "train",
            "--data",
            path_str(&self.path("train.csv")),
            "--config",
            path_str(&self.path("train.toml")),
            "--out",
            path_str(&ckpt),
            "--report",
            path_str(&train_report),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("L_all"));
        let out = xmodal(&[
            "eval",
            "--checkpoint",
            path_str(&ckpt),
            "--data",
            path_str(&self.path("test.csv")),
            "--trials",
            "10",
            "--single-shot",
            "--seed",
            "7",
            "--report",
            path_str(&eval_report),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("visible->thermal") && stdout.contains("thermal->visible"));
        (
            std::fs::read(train_report).unwrap(),
            std::fs::read(eval_report).unwrap(),
        )
    }
}

#[test]
fn pipeline_reports_are_byte_identical() {
    let ws = Workspace::new();
    ws.prepare();
    let first = ws.train_and_eval("a");
    let second = ws.train_and_eval("b");
    assert_eq!(first, second);
    assert_eq!(
        std::fs::read(ws.path("a.ckpt")).unwrap(),
        std::fs::read(ws.path("b.ckpt")).unwrap()
    );
    let report: serde_json::Value = serde_json::from_slice(&first.0).unwrap();
    assert_eq!(report["history"].as_array().unwrap().len(), 3);
}

#[test]
fn single_direction_eval() {
    let ws = Workspace::new();
    ws.prepare();
    ws.train_and_eval("m");
    let report = ws.path("t.json");
    let out = xmodal(&[
        "eval",
        "--checkpoint",
        path_str(&ws.path("m.ckpt")),
        "--data",
        path_str(&ws.path("test.csv")),
        "--query-modality",
        "T",
        "--trials",
        "1",
        "--report",
        path_str(&report),
    ]);
    assert_eq!(code(&out), 0);
    let value: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    let metrics = value["metrics"].as_array().unwrap();
    assert_eq!(metrics.len(), 1);
    assert_eq!(metrics[0]["protocol"]["query_modality"], "T");
}

#[test]
fn usage_errors_exit_with_1() {
    let ws = Workspace::new();
    assert_eq!(code(&xmodal(&["train", "--bogus"])), 1);
    assert_eq!(code(&xmodal(&[])), 1);
    std::fs::write(ws.path("bad.toml"), "epochs = 0\n").unwrap();
    ws.prepare();
    let out = xmodal(&[
        "train",
        "--data",
        path_str(&ws.path("train.csv")),
        "--config",
        path_str(&ws.path("bad.toml")),
        "--out",
        path_str(&ws.path("x.ckpt")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochs"));
    assert_eq!(code(&xmodal(&["gradcheck", "--trials", "0"])), 1);
    assert_eq!(code(&xmodal(&["--help"])), 0);
}

#[test]
fn data_errors_exit_with_2() {
    let ws = Workspace::new();
    std::fs::write(ws.path("broken.csv"), "# xmodal-dataset v1 dim=6\n0,0,V,1,2\n").unwrap();
    let out = xmodal(&[
        "train",
        "--data",
        path_str(&ws.path("broken.csv")),
        "--config",
        path_str(&ws.path("train.toml")),
        "--out",
        path_str(&ws.path("x.ckpt")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = xmodal(&[
        "eval",
        "--checkpoint",
        path_str(&ws.path("missing.ckpt")),
        "--data",
        path_str(&ws.path("broken.csv")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gradcheck_exit_status() {
    let out = xmodal(&["gradcheck", "--trials", "3", "--seed", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(table.contains("full_model_cat") && table.contains("PASS"));

    let out = xmodal(&["gradcheck", "--trials", "3", "--inject-fault", "batchnorm_train"]);
    assert_eq!(code(&out), 3);
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(table
        .lines()
        .any(|l| l.starts_with("batchnorm_train") && l.contains("FAIL")));
}

#[test]
fn ablation_command_writes_table() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path("data.toml"),
        format!(
            "train_fraction = 0.5\n[synth]\n{}",
            SYNTH.replace("[modality_transform]", "[synth.modality_transform]")
        ),
    )
    .unwrap();
    let report = ws.path("ablation.json");
    let out = xmodal(&[
        "ablation",
        "--data-config",
        path_str(&ws.path("data.toml")),
        "--config",
        path_str(&ws.path("train.toml")),
        "--seeds",
        "0,1",
        "--report",
        path_str(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for arm in ["baseline", "DMTL", "MFI", "EDFL"] {
        assert!(stdout.contains(arm));
    }
    let value: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    assert_eq!(value["runs"].as_array().unwrap().len(), 8);
}
