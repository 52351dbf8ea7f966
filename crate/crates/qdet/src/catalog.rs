//! File-backed store of algorithms and their determinants.
//!
//! Layout under the store root:
//!
//! ```text
//! algorithms.json          index: algorithms and the ids of their determinants
//! determinants/<id>.qd     determinant file, stored verbatim
//! determinants/<id>.json   metadata: parameters, D, P and counting flags
//! .lock                    writers hold it exclusively, readers shared
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use qdet_core::compare::{compare, CompareError, ComparisonReport};
use qdet_core::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{parse_qdet, sharing_name, FormatError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("no record with id `{0}`")]
    NotFound(String),
    #[error("id `{0}` is already taken")]
    DuplicateId(String),
    #[error("id `{0}` may only use letters, digits, `_`, `-` and `.`")]
    InvalidId(String),
    #[error("store is corrupt at {path}: {reason}")]
    StoreCorrupt { path: PathBuf, reason: String },
    #[error("store IO: {0}")]
    Io(#[from] io::Error),
    #[error("determinant: {0}")]
    Format(#[from] FormatError),
    #[error(transparent)]
    Compare(#[from] CompareError),
}

pub type Result<T> = std::result::Result<T, CatalogError>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmRecord {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Ids of the stored determinants, in insertion order.
    #[serde(default)]
    pub determinants: Vec<String>,
}

impl AlgorithmRecord {
    pub fn count(&self) -> usize {
        self.determinants.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagsDoc {
    pub sharing: String,
    pub doubling: bool,
    pub chain_count: String,
}

impl FlagsDoc {
    pub fn from_flags(f: AnalysisFlags) -> FlagsDoc {
        let chain_count = match f.chain_count {
            ChainCount::Exact => "exact",
            ChainCount::Floor => "floor",
        };
        FlagsDoc {
            sharing: sharing_name(f.sharing).to_string(),
            doubling: f.doubling,
            chain_count: chain_count.to_string(),
        }
    }

    pub fn to_flags(&self) -> Option<AnalysisFlags> {
        let sharing = match self.sharing.as_str() {
            "dag" => Sharing::Dag,
            "tree" => Sharing::Tree,
            _ => return None,
        };
        let chain_count = match self.chain_count.as_str() {
            "exact" => ChainCount::Exact,
            "floor" => ChainCount::Floor,
            _ => return None,
        };
        Some(AnalysisFlags { sharing, doubling: self.doubling, chain_count })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterminantRecord {
    pub id: String,
    pub algorithm: String,
    /// Dimension parameters; empty when the algorithm has none.
    pub params: BTreeMap<String, i64>,
    /// Iteration bound, 0 without iterative terms.
    pub iterations: u32,
    pub d: u32,
    pub p: u64,
    pub flags: FlagsDoc,
}

impl DeterminantRecord {
    pub fn key(&self) -> ParamKey {
        ParamKey { params: self.params.clone(), iterations: self.iterations }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    version: u32,
    algorithms: Vec<AlgorithmRecord>,
}

pub struct Store {
    root: PathBuf,
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CatalogError::InvalidId(id.to_string()))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn remove_if_present(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}

impl Store {
    /// Opens the store at `root`, creating the directories if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store> {
        let root = root.into();
        fs::create_dir_all(root.join("determinants"))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self, exclusive: bool) -> Result<File> {
        let f = OpenOptions::new().create(true).truncate(false).write(true).open(self.root.join(".lock"))?;
        if exclusive {
            f.lock()?;
        } else {
            f.lock_shared()?;
        }
        Ok(f)
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("algorithms.json")
    }

    fn det_path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join("determinants").join(format!("{id}.{ext}"))
    }

    fn corrupt(path: &Path, reason: impl ToString) -> CatalogError {
        CatalogError::StoreCorrupt { path: path.to_path_buf(), reason: reason.to_string() }
    }

    fn read_index(&self) -> Result<Index> {
        let path = self.index_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Index { version: 1, algorithms: Vec::new() }),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text).map_err(|e| Self::corrupt(&path, e))
    }

    fn write_index(&self, index: &Index) -> Result<()> {
        let text = serde_json::to_string_pretty(index).expect("plain data serializes") + "\n";
        write_atomic(&self.index_path(), text.as_bytes())
    }

    fn read_record(&self, id: &str) -> Result<DeterminantRecord> {
        let path = self.det_path(id, "json");
        let text = fs::read_to_string(&path).map_err(|e| Self::corrupt(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Self::corrupt(&path, e))
    }

    fn owner(index: &Index, det: &str) -> Option<usize> {
        index.algorithms.iter().position(|a| a.determinants.iter().any(|d| d == det))
    }

    pub fn algorithm_add(&self, id: &str, name: &str, description: &str) -> Result<AlgorithmRecord> {
        check_id(id)?;
        let _g = self.lock(true)?;
        let mut index = self.read_index()?;
        if index.algorithms.iter().any(|a| a.id == id) {
            return Err(CatalogError::DuplicateId(id.to_string()));
        }
        let rec = AlgorithmRecord {
            id: id.to_string(),
            name: name.to_string(),
            description: description.to_string(),
            determinants: Vec::new(),
        };
        index.algorithms.push(rec.clone());
        self.write_index(&index)?;
        Ok(rec)
    }

    pub fn algorithm_update(&self, id: &str, name: Option<&str>, description: Option<&str>) -> Result<AlgorithmRecord> {
        let _g = self.lock(true)?;
        let mut index = self.read_index()?;
        let a = index
            .algorithms
            .iter_mut()
            .find(|a| a.id == id)
            .ok_or_else(|| CatalogError::NotFound(id.to_string()))?;
        if let Some(n) = name {
            a.name = n.to_string();
        }
        if let Some(d) = description {
            a.description = d.to_string();
        }
        let rec = a.clone();
        self.write_index(&index)?;
        Ok(rec)
    }

    pub fn algorithm_list(&self) -> Result<Vec<AlgorithmRecord>> {
        let _g = self.lock(false)?;
        Ok(self.read_index()?.algorithms)
    }

    pub fn algorithm_get(&self, id: &str) -> Result<AlgorithmRecord> {
        self.algorithm_list()?
            .into_iter()
            .find(|a| a.id == id)
            .ok_or_else(|| CatalogError::NotFound(id.to_string()))
    }

    /// Removes the algorithm and every determinant stored for it.
    pub fn algorithm_remove(&self, id: &str) -> Result<AlgorithmRecord> {
        let _g = self.lock(true)?;
        let mut index = self.read_index()?;
        let pos = index
            .algorithms
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| CatalogError::NotFound(id.to_string()))?;
        let rec = index.algorithms.remove(pos);
        self.write_index(&index)?;
        for d in &rec.determinants {
            remove_if_present(&self.det_path(d, "qd"))?;
            remove_if_present(&self.det_path(d, "json"))?;
        }
        Ok(rec)
    }

    /// Stores a determinant file for `algorithm`, with D and P computed under `flags`.
    pub fn determinant_add(&self, algorithm: &str, text: &str, flags: AnalysisFlags) -> Result<DeterminantRecord> {
        let q = parse_qdet(text)?;
        let c = analyze(&q, flags);
        let _g = self.lock(true)?;
        let mut index = self.read_index()?;
        let alg = index
            .algorithms
            .iter()
            .position(|a| a.id == algorithm)
            .ok_or_else(|| CatalogError::NotFound(algorithm.to_string()))?;
        let id = (1..)
            .map(|k| format!("{algorithm}-{k}"))
            .find(|id| Self::owner(&index, id).is_none() && !self.det_path(id, "json").exists())
            .expect("unbounded range");
        let rec = DeterminantRecord {
            id: id.clone(),
            algorithm: algorithm.to_string(),
            params: q.params().clone(),
            iterations: q.iterations(),
            d: c.d,
            p: c.p,
            flags: FlagsDoc::from_flags(flags),
        };
        write_atomic(&self.det_path(&id, "qd"), text.as_bytes())?;
        let meta = serde_json::to_string_pretty(&rec).expect("plain data serializes") + "\n";
        write_atomic(&self.det_path(&id, "json"), meta.as_bytes())?;
        index.algorithms[alg].determinants.push(id);
        self.write_index(&index)?;
        Ok(rec)
    }

    /// Determinant records, of one algorithm or of all.
    pub fn determinant_list(&self, algorithm: Option<&str>) -> Result<Vec<DeterminantRecord>> {
        let _g = self.lock(false)?;
        let index = self.read_index()?;
        let mut out = Vec::new();
        let mut found = algorithm.is_none();
        for a in &index.algorithms {
            if algorithm.is_some_and(|x| x != a.id) {
                continue;
            }
            found = true;
            for d in &a.determinants {
                out.push(self.read_record(d)?);
            }
        }
        if !found {
            return Err(CatalogError::NotFound(algorithm.unwrap_or_default().to_string()));
        }
        Ok(out)
    }

    pub fn determinant_get(&self, id: &str) -> Result<DeterminantRecord> {
        let _g = self.lock(false)?;
        let index = self.read_index()?;
        Self::owner(&index, id).ok_or_else(|| CatalogError::NotFound(id.to_string()))?;
        self.read_record(id)
    }

    /// The stored determinant file, byte for byte.
    pub fn determinant_download(&self, id: &str) -> Result<String> {
        let _g = self.lock(false)?;
        let index = self.read_index()?;
        Self::owner(&index, id).ok_or_else(|| CatalogError::NotFound(id.to_string()))?;
        let path = self.det_path(id, "qd");
        fs::read_to_string(&path).map_err(|e| Self::corrupt(&path, e))
    }

    pub fn determinant_remove(&self, id: &str) -> Result<DeterminantRecord> {
        let _g = self.lock(true)?;
        let mut index = self.read_index()?;
        let a = Self::owner(&index, id).ok_or_else(|| CatalogError::NotFound(id.to_string()))?;
        let rec = self.read_record(id)?;
        index.algorithms[a].determinants.retain(|d| d != id);
        self.write_index(&index)?;
        remove_if_present(&self.det_path(id, "qd"))?;
        remove_if_present(&self.det_path(id, "json"))?;
        Ok(rec)
    }

    /// Stored and recomputed `(D, P)` of a determinant.
    pub fn verify(&self, id: &str) -> Result<((u32, u64), (u32, u64))> {
        let rec = self.determinant_get(id)?;
        let text = self.determinant_download(id)?;
        let path = self.det_path(id, "json");
        let flags = rec.flags.to_flags().ok_or_else(|| Self::corrupt(&path, "unknown counting flags"))?;
        let c = analyze(&parse_qdet(&text)?, flags);
        Ok(((rec.d, rec.p), (c.d, c.p)))
    }

    fn characteristics(&self, algorithm: &str) -> Result<Vec<Characteristics>> {
        let path = self.index_path();
        self.determinant_list(Some(algorithm))?
            .into_iter()
            .map(|r| {
                let flags = r.flags.to_flags().ok_or_else(|| Self::corrupt(&path, "unknown counting flags"))?;
                Ok(Characteristics { d: r.d, p: r.p, key: r.key(), flags })
            })
            .collect()
    }

    /// Compares two stored algorithms over their shared parameter values.
    pub fn compare(&self, a: &str, b: &str) -> Result<ComparisonReport> {
        Ok(compare(&self.characteristics(a)?, &self.characteristics(b)?)?)
    }
}
