//! Run manifests written next to every output file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    pub parameters: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub threads: usize,
    pub tool_version: String,
}

pub fn sha256_file(path: &str) -> Result<String, Failure> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Collects provenance while a command runs.
pub struct Recorder {
    command: String,
    parameters: serde_json::Value,
    inputs: BTreeMap<String, String>,
    start: Instant,
}

impl Recorder {
    /// Hashes the inputs before they are read.
    pub fn begin(command: &str, parameters: &impl Serialize, inputs: &[&str]) -> Result<Self, Failure> {
        let mut hashed = BTreeMap::new();
        for path in inputs {
            hashed.insert(path.to_string(), sha256_file(path)?);
        }
        Ok(Self {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters).map_err(wavecwt::Error::from)?,
            inputs: hashed,
            start: Instant::now(),
        })
    }

    /// Writes `<out>.manifest.json` and returns the output hash.
    pub fn finish(self, out: &str) -> Result<String, Failure> {
        let digest = sha256_file(out)?;
        let manifest = RunManifest {
            command_line: std::env::args().collect(),
            command: self.command,
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: BTreeMap::from([(out.to_string(), digest.clone())]),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let mut w = BufWriter::new(File::create(format!("{out}.manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(wavecwt::Error::from)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(digest)
    }
}
