use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConstantEstimate, Domain, DriftFunctionSpec};
use crate::error::{Error, Result};

const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    Pickands,
    Piterbarg,
}

impl ConstantKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstantKind::Pickands => "pickands",
            ConstantKind::Piterbarg => "piterbarg",
        }
    }
}

/// Settings an estimate was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub s_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub n_rep: usize,
    pub seed: u64,
    pub estimator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub kind: ConstantKind,
    pub alpha: f64,
    pub a: f64,
    pub f: String,
    pub domain: Domain,
    pub estimate: ConstantEstimate,
    pub provenance: Provenance,
}

impl CacheEntry {
    pub fn key(&self) -> String {
        ConstantsCache::key(self.kind, self.alpha, self.a, &self.f, self.domain)
    }
}

/// JSON-backed store of constant estimates keyed by
/// `(kind, alpha, a, f, domain)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsCache {
    pub version: u32,
    pub entries: BTreeMap<String, CacheEntry>,
}

impl Default for ConstantsCache {
    fn default() -> Self {
        Self { version: VERSION, entries: BTreeMap::new() }
    }
}

impl ConstantsCache {
    pub fn key(kind: ConstantKind, alpha: f64, a: f64, f: &str, domain: Domain) -> String {
        format!("{}|alpha={alpha}|a={a}|f={f}|domain={domain}", kind.as_str())
    }

    pub fn pickands_key(alpha: f64) -> String {
        Self::key(ConstantKind::Pickands, alpha, 1.0, "zero", Domain::HalfLine)
    }

    pub fn piterbarg_key(alpha: f64, a: f64, f: &DriftFunctionSpec, domain: Domain) -> String {
        Self::key(ConstantKind::Piterbarg, alpha, a, &f.descriptor(), domain)
    }

    /// Reads the cache; a missing file yields an empty cache, an unreadable
    /// or malformed one an error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(e) => return Err(e.into()),
        };
        let cache: Self = serde_json::from_str(&text)?;
        if cache.version != VERSION {
            return Err(Error::InvalidSpec(format!("constants cache version {} is not supported (expected {VERSION})", cache.version)));
        }
        for (k, e) in &cache.entries {
            if *k != e.key() {
                return Err(Error::InvalidSpec(format!("constants cache entry {k:?} does not match its contents")));
            }
        }
        Ok(cache)
    }

    /// Writes the cache through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, text)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn insert(&mut self, entry: CacheEntry) {
        self.entries.insert(entry.key(), entry);
    }

    pub fn get(&self, key: &str) -> Option<&CacheEntry> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn pickands(&self, alpha: f64) -> Result<&ConstantEstimate> {
        let key = Self::pickands_key(alpha);
        self.get(&key).map(|e| &e.estimate).ok_or(Error::MissingConstant { key })
    }

    pub fn piterbarg(&self, alpha: f64, a: f64, f: &DriftFunctionSpec, domain: Domain) -> Result<&ConstantEstimate> {
        let key = Self::piterbarg_key(alpha, a, f, domain);
        self.get(&key).map(|e| &e.estimate).ok_or(Error::MissingConstant { key })
    }

    /// Inserts a Pickands entry with no sampling provenance.
    pub fn with_pickands(mut self, alpha: f64, estimate: ConstantEstimate) -> Self {
        self.insert(CacheEntry {
            kind: ConstantKind::Pickands,
            alpha,
            a: 1.0,
            f: "zero".into(),
            domain: Domain::HalfLine,
            estimate,
            provenance: Provenance { s_list: vec![], delta_list: vec![], n_rep: 0, seed: 0, estimator: "given".into() },
        });
        self
    }

    /// Inserts a Piterbarg entry with no sampling provenance.
    pub fn with_piterbarg(mut self, alpha: f64, a: f64, f: &DriftFunctionSpec, domain: Domain, estimate: ConstantEstimate) -> Self {
        self.insert(CacheEntry {
            kind: ConstantKind::Piterbarg,
            alpha,
            a,
            f: f.descriptor(),
            domain,
            estimate,
            provenance: Provenance { s_list: vec![], delta_list: vec![], n_rep: 0, seed: 0, estimator: "given".into() },
        });
        self
    }
}
