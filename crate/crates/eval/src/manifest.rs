//! Line-delimited JSON dataset manifests.
//!
//! Each line describes one login: the phone and computer recordings, their
//! capture times on the server clock, and the labels the evaluation groups by.
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use earshot_core::{decode_wav, AudioSample};
use serde::{Deserialize, Serialize};

use crate::{EvalError, Result};

/// Environments known out of the box; extend with [`Vocabulary::environment`].
pub const ENVIRONMENTS: [&str; 7] = [
    "Office",
    "Music",
    "TV",
    "Lecture",
    "TrainStation",
    "Cafe",
    "Synthetic",
];

/// Whether an entry is a genuine login or a ready-made attack pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    #[default]
    Legitimate,
    Impostor,
}

impl Pairing {
    fn is_legitimate(&self) -> bool {
        *self == Pairing::Legitimate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub phone_wav: PathBuf,
    pub computer_wav: PathBuf,
    pub phone_captured_at: i64,
    pub computer_captured_at: i64,
    pub subject: String,
    pub environment: String,
    pub activity: String,
    pub phone_position: String,
    pub phone_model: String,
    pub computer_model: String,
    #[serde(default, skip_serializing_if = "Pairing::is_legitimate")]
    pub pairing: Pairing,
}

/// Accepted environment labels.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    environments: BTreeSet<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            environments: ENVIRONMENTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Vocabulary {
    pub fn environment(mut self, label: &str) -> Self {
        self.environments.insert(label.to_string());
        self
    }

    pub fn knows_environment(&self, label: &str) -> bool {
        self.environments.contains(label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            entries,
            base_dir: base_dir.into(),
        }
    }

    /// Parses and validates against the default vocabulary.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, &Vocabulary::default())
    }

    pub fn load_with(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let m = Self::parse(&text, base)?;
        m.validate(vocab)?;
        Ok(m)
    }

    /// Parses JSONL text without touching the filesystem. Blank lines are skipped.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| EvalError::Manifest {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self::new(entries, base_dir))
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("entries serialize") + "\n")
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| EvalError::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| EvalError::io(path, e))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every referenced file exists and every label is non-empty and known.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            for p in [&e.phone_wav, &e.computer_wav] {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(EvalError::MissingFile(full));
                }
            }
            let labels = [
                ("subject", &e.subject),
                ("environment", &e.environment),
                ("activity", &e.activity),
                ("phone_position", &e.phone_position),
                ("phone_model", &e.phone_model),
                ("computer_model", &e.computer_model),
            ];
            if let Some((field, _)) = labels.iter().find(|(_, v)| v.trim().is_empty()) {
                return Err(EvalError::Manifest {
                    line: i + 1,
                    message: format!("empty {field}"),
                });
            }
            if !vocab.knows_environment(&e.environment) {
                return Err(EvalError::UnknownLabel {
                    field: "environment",
                    value: e.environment.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn legitimate(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.pairing == Pairing::Legitimate)
    }

    pub fn impostors(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.pairing == Pairing::Impostor)
    }

    /// Decodes a WAV referenced by the manifest, stamped with `captured_at`.
    pub fn read_audio(&self, p: &Path, captured_at: i64, device: &str) -> Result<AudioSample> {
        let full = self.resolve(p);
        let bytes = fs::read(&full).map_err(|e| EvalError::io(&full, e))?;
        decode_wav(&bytes)
            .map(|s| s.with_captured_at(captured_at).with_device_id(device))
            .map_err(|source| EvalError::Audio { path: full, source })
    }
}

/// Grouping key for per-setting rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    All,
    Subject,
    Environment,
    Activity,
    PhonePosition,
    PhoneModel,
    ComputerModel,
}

impl GroupBy {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupBy::All => "all",
            GroupBy::Subject => "subject",
            GroupBy::Environment => "environment",
            GroupBy::Activity => "activity",
            GroupBy::PhonePosition => "phone_position",
            GroupBy::PhoneModel => "phone_model",
            GroupBy::ComputerModel => "computer_model",
        }
    }

    pub fn label<'a>(&self, e: &'a ManifestEntry) -> &'a str {
        match self {
            GroupBy::All => "all",
            GroupBy::Subject => &e.subject,
            GroupBy::Environment => &e.environment,
            GroupBy::Activity => &e.activity,
            GroupBy::PhonePosition => &e.phone_position,
            GroupBy::PhoneModel => &e.phone_model,
            GroupBy::ComputerModel => &e.computer_model,
        }
    }
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        const ALL: [GroupBy; 7] = [
            GroupBy::All,
            GroupBy::Subject,
            GroupBy::Environment,
            GroupBy::Activity,
            GroupBy::PhonePosition,
            GroupBy::PhoneModel,
            GroupBy::ComputerModel,
        ];
        let key = s.replace('-', "_");
        ALL.into_iter()
            .find(|g| g.as_str() == key)
            .ok_or_else(|| format!("unknown grouping {s:?}"))
    }
}
