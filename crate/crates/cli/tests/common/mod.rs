#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_mocap-doppler");

/// A model small enough to train in well under a second per epoch.
pub const TINY_CONFIG: &str = "\
[preprocess]
window = 16
hop = 8

[model]
d_s = 8
d_t = 8
d_f = 16
heads_s = 2
heads_t = 2
heads_c = 2
layers_s = 1
layers_t = 1

[train]
epochs = 2
batch_size = 8
val_frac = 0.2
";

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("MOCAP_DOPPLER_DATA")
        .output()
        .expect("spawn mocap-doppler")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "mocap-doppler {args:?} failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    /// One short synthetic gait trial with `markers` markers, windowed into
    /// `pairs.bin`, plus the tiny config file.
    pub fn new(markers: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        fs::write(f.config(), TINY_CONFIG).unwrap();
        let m = markers.to_string();
        run_ok(&["synth", "--markers", &m, "--trials", "1", "--duration", "2.5", "--out", s(&f.synth())]);
        run_ok(&["--config", s(&f.config()), "preprocess", "--dataset", s(&f.synth()), "--out", s(&f.pairs())]);
        f
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.path("tiny.toml")
    }

    pub fn synth(&self) -> PathBuf {
        self.path("synth")
    }

    pub fn pairs(&self) -> PathBuf {
        self.path("pairs.bin")
    }

    pub fn mocap(&self) -> PathBuf {
        self.synth().join("trial_000.mocap.csv")
    }

    pub fn radar(&self) -> PathBuf {
        self.synth().join("trial_000.radar.csv")
    }
}
