//! Config loading with line/field diagnostics.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use hyperstab_core::{Experiment, SuiteConfig};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    Parse { path: PathBuf, line: usize, column: usize, field: String, message: String },
    Invalid { path: PathBuf, problems: Vec<String> },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "{}: cannot read config: {message}", path.display()),
            ConfigError::Parse { path, line, column, field, message } => {
                write!(f, "{}:{line}:{column}: field `{field}`: {message}", path.display())
            }
            ConfigError::Invalid { path, problems } => {
                write!(f, "{}: invalid config", path.display())?;
                for p in problems {
                    write!(f, "\n  {p}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub struct LoadedSuite {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub suite: SuiteConfig,
}

pub fn parse_suite(path: &Path, text: &str) -> Result<SuiteConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.inner();
        ConfigError::Parse {
            path: path.to_path_buf(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: strip_position(&inner.to_string()),
        }
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn load_suite(path: &Path) -> Result<LoadedSuite, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: format!("not valid UTF-8: {e}"),
    })?;
    let suite = parse_suite(path, text)?;
    Ok(LoadedSuite { path: path.to_path_buf(), bytes, suite })
}

/// Per-experiment seed derived from the experiment name and the global seed.
pub fn substream(global_seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    h.update([0u8]);
    h.update(global_seed.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest is 32 bytes"))
}

/// SHA-256 over a git blob header and the content.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub struct BuiltExperiment {
    pub stream: u64,
    pub experiment: Experiment,
}

/// Validates and builds every experiment, sorted by name.
pub fn build_suite(loaded: &LoadedSuite) -> Result<Vec<BuiltExperiment>, ConfigError> {
    let mut problems = Vec::new();
    if loaded.suite.experiments.is_empty() {
        problems.push("experiments: at least one experiment is required".to_string());
    }
    let mut seen = BTreeSet::new();
    for (i, c) in loaded.suite.experiments.iter().enumerate() {
        if !valid_name(&c.name) {
            problems.push(format!(
                "experiments[{i}].name: `{}` must be nonempty ASCII letters, digits, `-`, `_` or `.`",
                c.name
            ));
        } else if !seen.insert(c.name.as_str()) {
            problems.push(format!("experiments[{i}].name: duplicate name `{}`", c.name));
        }
    }
    let mut built = Vec::new();
    for (i, c) in loaded.suite.experiments.iter().enumerate() {
        let stream = substream(loaded.suite.seed, &c.name);
        match c.build(stream) {
            Ok(experiment) => built.push(BuiltExperiment { stream, experiment }),
            Err(e) => problems.push(format!("experiments[{i}]: {e}")),
        }
    }
    if !problems.is_empty() {
        return Err(ConfigError::Invalid { path: loaded.path.clone(), problems });
    }
    built.sort_by(|a, b| a.experiment.config.name.cmp(&b.experiment.config.name));
    Ok(built)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_names_line_and_field() {
        let text = "{\n  \"seed\": 1,\n  \"experiments\": [\n    {\"name\": \"a\", \"theorem\": \"thm-main\",\n     \"algebra\": {\"family\": \"full-matrix\", \"n\": 2}, \"map\": {\"generator_sed\": 3}}\n  ]\n}";
        match parse_suite(Path::new("c.json"), text) {
            Err(ConfigError::Parse { line, field, message, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(field, "experiments[0].map.generator_sed");
                assert!(message.contains("generator_sed"), "{message}");
            }
            other => panic!("{:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn substreams_are_independent_of_order() {
        assert_eq!(substream(7, "a"), substream(7, "a"));
        assert_ne!(substream(7, "a"), substream(8, "a"));
        assert_ne!(substream(7, "a"), substream(7, "b"));
    }

    #[test]
    fn blob_hash_matches_git_format() {
        // Independent value: `git hash-object --object-format=sha256` on an empty file.
        assert_eq!(
            git_blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
