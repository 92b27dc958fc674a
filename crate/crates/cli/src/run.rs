use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use riesz_core::{KernelSpec, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Written next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub kernel: Option<KernelSpec>,
    pub seed: u64,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: u8,
    pub outputs: Vec<String>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory, the files written into it and the hashed config.
pub struct Run {
    dir: PathBuf,
    command: String,
    config: serde_json::Value,
    kernel: Option<KernelSpec>,
    seed: u64,
    started: f64,
    outputs: Vec<String>,
    /// Print reports as JSON instead of a summary line.
    pub json: bool,
}

impl Run {
    pub fn new(dir: &Path, command: &str, args: &impl Serialize, seed: u64, json: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config: serde_json::json!({ "command": command, "args": args, "seed": seed }),
            kernel: None,
            seed,
            started: now(),
            outputs: Vec::new(),
            json,
        })
    }

    /// Folds the content digest of an input file into the config.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_hex(&fs::read(path)?);
        let inputs = self.config.as_object_mut().unwrap().entry("inputs").or_insert_with(|| serde_json::json!({}));
        inputs.as_object_mut().unwrap().insert(path.display().to_string(), digest.into());
        Ok(())
    }

    pub fn kernel(&mut self, spec: &KernelSpec) {
        self.kernel = Some(spec.clone());
        self.add_config("kernel", spec);
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add_config(&mut self, key: &str, value: &impl Serialize) {
        self.config.as_object_mut().unwrap().insert(key.into(), serde_json::to_value(value).unwrap());
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.path(name);
        fs::write(path, serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        // serde_json maps are sorted, so the encoding is canonical
        sha256_hex(serde_json::to_string(&self.config).unwrap().as_bytes())
    }

    /// Prints the report or the summary line.
    pub fn report(&self, value: &impl Serialize, summary: &str) -> Result<()> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        } else {
            println!("{summary}");
        }
        Ok(())
    }

    pub fn finish(mut self, exit_code: u8) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command.clone(),
            config_hash: self.config_hash(),
            config: self.config.clone(),
            kernel: self.kernel.clone(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: now(),
            exit_code,
            outputs: std::mem::take(&mut self.outputs),
        };
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}
