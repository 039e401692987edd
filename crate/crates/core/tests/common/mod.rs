#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const VOCAB: usize = 40;
pub const DIM: usize = 8;

pub fn vforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vforge"))
        .args(args)
        .env_remove("VFORGE_RECONSTRUCTOR_URL")
        .output()
        .expect("binary runs")
}

pub fn token(i: usize) -> String {
    format!("w{i:02}")
}

/// Writes a random `VOCAB x DIM` table in word-vector text format.
pub fn write_table(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut text = format!("{VOCAB} {DIM}\n");
    for i in 0..VOCAB {
        text.push_str(&token(i));
        for _ in 0..DIM {
            let _ = write!(text, " {:.6}", rng.random_range(-1.0..1.0));
        }
        text.push('\n');
    }
    let path = dir.join("vectors.txt");
    fs::write(&path, text).unwrap();
    path
}

/// Writes a labeled corpus with the given per-domain sizes. Every text
/// uses in-vocabulary tokens only.
pub fn write_corpus(dir: &Path, name: &str, language: &str, sizes: &[(&str, usize)], seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for (domain, n) in sizes {
        for k in 0..*n {
            let len = rng.random_range(2..7);
            let tokens: Vec<String> = (0..len).map(|_| token(rng.random_range(0..VOCAB))).collect();
            let record = json!({
                "id": format!("{language}-{domain}-{k:04}"),
                "tokens": tokens,
                "label": rng.random_range(0..2u8),
                "language": language,
                "domain": domain,
            });
            text.push_str(&record.to_string());
            text.push('\n');
        }
    }
    let path = dir.join(format!("{name}.jsonl"));
    fs::write(&path, text).unwrap();
    path
}

pub fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.trim().is_empty()).count()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
