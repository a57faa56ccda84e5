//! Loading, validating and running scenarios; artifact bookkeeping.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bundled;
use crate::config::{Config, Diagnostic, Origin};
use crate::error::CliError;
use crate::modes;
use crate::scenario::{self, Validation};

/// A configuration text and where it came from.
#[derive(Debug, Clone)]
pub struct Source {
    /// File path or `bundled:<name>`.
    pub label: String,
    pub text: String,
    /// Directory that relative input paths resolve against.
    pub base_dir: PathBuf,
}

impl Source {
    /// Reads `arg` as a file, falling back to a bundled scenario name.
    pub fn load(arg: &str) -> Result<Self, CliError> {
        let path = Path::new(arg);
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {arg}"), e))?;
            let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            return Ok(Self {
                label: arg.to_string(),
                text,
                base_dir,
            });
        }
        match bundled::find(arg) {
            Some(text) => Ok(Self {
                label: format!("bundled:{}", arg.strip_suffix(".cfg").unwrap_or(arg)),
                text: text.to_string(),
                base_dir: PathBuf::from("."),
            }),
            None => Err(CliError::Io(format!(
                "config file {arg} not found, and no bundled scenario has that name (see `list-scenarios`)"
            ))),
        }
    }

    pub fn from_text(label: &str, text: &str, base_dir: &Path) -> Self {
        Self {
            label: label.to_string(),
            text: text.to_string(),
            base_dir: base_dir.to_path_buf(),
        }
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

/// Command-line overrides. Environment variables come in as pairs so that
/// callers (and tests) control what is applied.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub env: Vec<(String, String)>,
}

/// Parses the source and applies environment and flag overrides; returns
/// the configuration and the overridden keys with their origin.
pub fn prepare(src: &Source, ov: &Overrides) -> Result<(Config, Vec<String>), CliError> {
    let mut cfg = Config::parse(&src.text).map_err(CliError::Validation)?;
    let mut applied: Vec<String> = cfg
        .apply_env(ov.env.iter().cloned())
        .map_err(CliError::Validation)?
        .into_iter()
        .map(|k| format!("{k} (environment)"))
        .collect();
    if let Some(seed) = ov.seed {
        cfg.set("scenario", "seed", seed.to_string(), Origin::Flag { name: "seed".into() });
        applied.push("scenario.seed (--seed)".into());
    }
    if let Some(out) = &ov.out {
        cfg.set("output", "dir", out.display().to_string(), Origin::Flag { name: "out".into() });
        applied.push("output.dir (--out)".into());
    }
    Ok((cfg, applied))
}

pub fn validate(src: &Source, ov: &Overrides) -> Result<Validation, CliError> {
    let (cfg, _) = prepare(src, ov)?;
    Ok(scenario::build(&cfg, &src.base_dir))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    /// ISO-8601 UTC completion time.
    pub timestamp: String,
    pub scenario: String,
    pub mode: &'static str,
    pub config_source: String,
    pub config_sha256: String,
    pub seed: u64,
    pub overrides: Vec<String>,
    pub threads: usize,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".coldamp.lock";

/// Writes artifacts into one directory and remembers them, so that a failed
/// run can remove what it wrote.
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<OutputEntry>,
    created_dirs: Vec<PathBuf>,
}

impl ArtifactWriter {
    fn create(dir: &Path) -> Result<Self, CliError> {
        let mut created_dirs = Vec::new();
        let mut missing = Vec::new();
        let mut d = dir;
        while !d.as_os_str().is_empty() && !d.exists() {
            missing.push(d.to_path_buf());
            match d.parent() {
                Some(p) => d = p,
                None => break,
            }
        }
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating output directory {}", dir.display()), e))?;
        created_dirs.extend(missing);
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            created_dirs,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        // Record before writing so a partial file is cleaned up too.
        self.written.push(OutputEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        f.write_all(bytes)
            .and_then(|_| f.sync_all())
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Physics(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn discard(&mut self) {
        for e in self.written.drain(..).rev() {
            let _ = fs::remove_file(self.dir.join(&e.path));
        }
        for d in &self.created_dirs {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Exclusive claim on an output directory for the duration of a run.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Io(format!(
                "output directory {} is in use by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io(format!("locking {}", dir.display()), e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    /// Short human-readable result lines.
    pub summary: Vec<String>,
}

/// Validates and runs a scenario, writing its artifacts and manifest.
/// On any error after the output directory was touched, everything this run
/// wrote is removed.
pub fn run(src: &Source, ov: &Overrides) -> Result<RunOutcome, CliError> {
    let (cfg, overrides) = prepare(src, ov)?;
    let v = scenario::build(&cfg, &src.base_dir);
    let warnings: Vec<String> = v.warnings.iter().map(Diagnostic::to_string).collect();
    let Some(sc) = v.scenario else {
        return Err(CliError::Validation(v.errors));
    };
    let mut w = ArtifactWriter::create(&sc.output_dir)?;
    let lock = match DirLock::acquire(&sc.output_dir) {
        Ok(l) => l,
        Err(e) => {
            w.discard();
            return Err(e);
        }
    };
    let result = modes::execute(&sc, &mut w).and_then(|summary| {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            scenario: sc.name.clone(),
            mode: sc.mode.name(),
            config_source: src.label.clone(),
            config_sha256: src.sha256(),
            seed: sc.seed,
            overrides,
            threads: rayon::current_num_threads(),
            warnings,
            outputs: w.written.clone(),
        };
        w.write_json(MANIFEST, &manifest)?;
        // The manifest does not list itself.
        w.written.pop();
        Ok((manifest, summary))
    });
    drop(lock);
    match result {
        Ok((manifest, summary)) => Ok(RunOutcome {
            output_dir: sc.output_dir.clone(),
            manifest,
            summary,
        }),
        Err(e) => {
            w.discard();
            Err(e)
        }
    }
}
