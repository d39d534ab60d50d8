#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fnnstat_core::rng::{stream_rng, uniform};

/// `n` rows: two continuous covariates, a three-level factor, a 0/1 flag
/// and a Gaussian response driven mostly by `a` and the flag.
pub fn write_design(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = stream_rng(seed, 0);
    let mut csv = String::from("a,b,group,flag,y\n");
    for i in 0..n {
        let a = uniform(&mut rng, 2.0);
        let b = 40.0 + 10.0 * uniform(&mut rng, 1.0);
        let group = ["north", "south", "east"][i % 3];
        let flag = u8::from(uniform(&mut rng, 1.0) > 0.0);
        let y = 2.0 * (1.5 * a).tanh() + 1.5 * f64::from(flag) + 0.02 * b + 0.3 * uniform(&mut rng, 1.0);
        csv.push_str(&format!("{a:.6},{b:.4},{group},{flag},{y:.6}\n"));
    }
    let path = dir.join("design.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

pub fn fnnstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnnstat")).args(args).output().unwrap()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
