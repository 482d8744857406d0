//! End-to-end runs of the `stpt` binary on a tiny corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stpt_core::config::KEYS;

const TINY: &str = r#"
seed = 0

[synth]
n_videos = 24
frame_size = 32
length_min = 60
length_max = 80
label_fraction = 0.8

[preprocess]
resize_to = 16

[sampling]
view_pool = 2

[model]
spatial = "conv(input=16,channels=4-8,width=8)"
temporal = "transformer(width=8,layers=1,heads=2,mlp=16,max_len=32,pooling=mean)"
head_hidden = 4

[stage.spatial]
epochs = 2
learning_rate = 0.001

[stage.temporal]
epochs = 2
batch_size = 8

[stage.finetune]
epochs = 2

[eval]
folds = 2
repeats = 1
"#;

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Env {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        Env { dir }
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_stpt"))
            .current_dir(self.dir.path())
            .env("STPT_DETERMINISTIC", "1")
            .args(["--config", "tiny.toml"])
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        let stdout = String::from_utf8(o.stdout).unwrap();
        assert!(o.status.success(), "{args:?} failed: {}{}", stdout, String::from_utf8_lossy(&o.stderr));
        assert!(stdout.starts_with("fingerprint "), "{stdout}");
        stdout
    }

    fn fails(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(!o.status.success(), "{args:?} unexpectedly succeeded");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        err
    }
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_lists_every_key() {
    let o = Command::new(env!("CARGO_BIN_EXE_stpt")).arg("--help").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for k in KEYS {
        let line = text.lines().find(|l| l.trim_start().starts_with(&format!("{} = ", k.key)));
        let line = line.unwrap_or_else(|| panic!("{} missing from --help", k.key));
        assert!(line.contains(&format!("[{}]", k.provenance)), "{line}");
    }
    for cmd in ["gen-data", "preprocess", "pretrain-spatial", "pretrain-temporal", "finetune", "evaluate", "crossval", "export-embeddings", "report-trainable"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[test]
fn full_pipeline_is_reproducible() {
    let env = Env::new();
    env.ok(&["gen-data", "--out", "corpus"]);
    let first = tree(&env.path("corpus"));
    env.ok(&["gen-data", "--out", "corpus2"]);
    assert_eq!(first, tree(&env.path("corpus2")));

    let pre = env.ok(&["preprocess", "--in", "corpus", "--out", "clean"]);
    assert!(pre.contains("precision"), "{pre}");
    let report = fs::read_to_string(env.path("clean/removal_report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 25);
    let mirror = stpt::io::load_manifest(&env.path("clean")).unwrap();
    assert_eq!(mirror.load_video("v0000").unwrap().frame_shape(), (16, 16));

    let steps: &[&[&str]] = &[
        &["pretrain-spatial", "--data", "corpus", "--out-ckpt", "s.ckpt"],
        &["pretrain-temporal", "--data", "corpus", "--spatial-ckpt", "s.ckpt", "--out-ckpt", "t.ckpt"],
        &["finetune", "--data", "corpus", "--temporal-ckpt", "t.ckpt", "--holdout-fold", "0", "--out-ckpt", "f.ckpt"],
        &["evaluate", "--data", "corpus", "--ckpt", "f.ckpt", "--fold", "0"],
        &["export-embeddings", "--data", "corpus", "--ckpt", "f.ckpt", "--level", "frame", "--out", "frames.tsv"],
        &["export-embeddings", "--data", "corpus", "--ckpt", "f.ckpt", "--level", "video", "--out", "videos.tsv"],
        &["crossval", "--data", "corpus", "--ablation", "none"],
        &["report-trainable"],
    ];
    let artifacts = ["s.ckpt", "t.ckpt", "f.ckpt", "frames.tsv", "videos.tsv"];
    let mut outputs = Vec::new();
    for s in steps {
        outputs.push(env.ok(s));
    }
    let snapshot = |env: &Env| (artifacts.map(|a| fs::read(env.path(a)).unwrap()), tree(&env.path("runs")));
    let before = snapshot(&env);
    for (s, out) in steps.iter().zip(&outputs) {
        assert_eq!(&env.ok(s), out, "{s:?}");
    }
    assert!(before == snapshot(&env), "rerun changed an artifact");

    assert!(outputs[3].contains("auroc"));
    assert!(outputs[6].contains("none"), "{}", outputs[6]);
    let videos = fs::read_to_string(env.path("videos.tsv")).unwrap();
    assert_eq!(videos.lines().count(), 25);
    assert_eq!(videos.lines().next().unwrap().split('\t').count(), 3 + 8);
    let frames = fs::read_to_string(env.path("frames.tsv")).unwrap();
    assert!(frames.lines().count() > 24 * 20);
    assert_eq!(frames.lines().nth(1).unwrap().split('\t').count(), 2 + 8);

    // the spatial payload survives both later stages unchanged
    let load = |p: &str| stpt::io::load_checkpoint(&env.path(p)).unwrap();
    let s = load("s.ckpt").spatial.unwrap();
    assert_eq!(s, load("t.ckpt").spatial.unwrap());
    assert_eq!(s, load("f.ckpt").spatial.unwrap());
}

#[test]
fn errors_are_one_categorized_line() {
    let env = Env::new();
    let e = env.fails(&["report-trainable", "--set", "stage.spatial.epoch=3"]);
    assert!(e.starts_with("error[config-schema]:") && e.contains("stage.spatial.epoch"), "{e}");
    let e = env.fails(&["report-trainable", "--set", "seed"]);
    assert!(e.starts_with("error[usage]:"), "{e}");
    let e = env.fails(&["crossval", "--ablation", "half"]);
    assert!(e.starts_with("error[usage]:"), "{e}");

    env.ok(&["gen-data", "--out", "corpus"]);
    let e = env.fails(&["pretrain-temporal", "--data", "corpus"]);
    assert!(e.starts_with("error[missing-checkpoint]:"), "{e}");

    fs::write(env.path("bad.ckpt"), b"STPT1 truncated").unwrap();
    let e = env.fails(&["evaluate", "--data", "corpus", "--ckpt", "bad.ckpt"]);
    assert!(e.starts_with("error[corruption]:") || e.starts_with("error[version]:"), "{e}");

    let frame = env.path("corpus/videos/v0003/frame_00002.png");
    fs::write(&frame, b"not a png").unwrap();
    let e = env.fails(&["pretrain-spatial", "--data", "corpus"]);
    assert!(e.starts_with("error[corrupt-frame]:") && e.contains("frame_00002.png"), "{e}");

    fs::remove_file(&frame).unwrap();
    let e = env.fails(&["pretrain-spatial", "--data", "corpus"]);
    assert!(e.starts_with("error[integrity]:") && e.contains("v0003"), "{e}");
}
