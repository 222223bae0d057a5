//! Fusion-weight checkpoints as a small line-based text document.
//!
//! ```text
//! mml-fusion-weights v1
//! w <w1> <w2> <w3>
//! b <b1> <b2> <b3>
//! running_mean <m1> <m2> <m3>
//! running_var <v1> <v2> <v3>
//! momentum <m>
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! save → load reproduces every parameter bit-for-bit.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use mml_core::fusion::FusionWeights;
use mml_core::MmlError;
use thiserror::Error;

pub const HEADER: &str = "mml-fusion-weights v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] MmlError),
}

pub fn weights_to_string(weights: &FusionWeights) -> String {
    let triple = |v: &[f64; 3]| format!("{} {} {}", v[0], v[1], v[2]);
    format!(
        "{HEADER}\nw {}\nb {}\nrunning_mean {}\nrunning_var {}\nmomentum {}\n",
        triple(&weights.w),
        triple(&weights.b),
        triple(&weights.running_mean),
        triple(&weights.running_var),
        weights.momentum,
    )
}

pub fn weights_from_str(text: &str) -> Result<FusionWeights, CheckpointError> {
    let parse_err = |line: usize, message: String| CheckpointError::Parse { line, message };
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty checkpoint".into()))?;
    if header.trim() != HEADER {
        return Err(parse_err(1, format!("expected header {HEADER:?}, found {header:?}")));
    }

    let mut triple = |key: &str| -> Result<[f64; 3], CheckpointError> {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing field {key}")))?;
        let mut parts = line.split_whitespace();
        let found = parts.next().unwrap_or("");
        if found != key {
            return Err(parse_err(idx + 1, format!("expected field {key}, found {found:?}")));
        }
        let mut out = [0.0; 3];
        for slot in &mut out {
            let token = parts
                .next()
                .ok_or_else(|| parse_err(idx + 1, format!("{key} needs 3 values")))?;
            *slot = token
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad float {token:?} in {key}")))?;
        }
        if parts.next().is_some() {
            return Err(parse_err(idx + 1, format!("{key} has trailing values")));
        }
        Ok(out)
    };

    let w = triple("w")?;
    let b = triple("b")?;
    let running_mean = triple("running_mean")?;
    let running_var = triple("running_var")?;

    let (idx, line) = lines
        .next()
        .ok_or_else(|| parse_err(0, "missing field momentum".into()))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some("momentum") {
        return Err(parse_err(idx + 1, "expected field momentum".into()));
    }
    let token = parts
        .next()
        .ok_or_else(|| parse_err(idx + 1, "momentum needs a value".into()))?;
    let momentum: f64 = token
        .parse()
        .map_err(|_| parse_err(idx + 1, format!("bad float {token:?} in momentum")))?;

    let weights = FusionWeights {
        w,
        b,
        running_mean,
        running_var,
        momentum,
    };
    weights.validate()?;
    Ok(weights)
}

pub fn save_weights(weights: &FusionWeights, path: &Path) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(weights_to_string(weights).as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<FusionWeights, CheckpointError> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    weights_from_str(&text)
}
