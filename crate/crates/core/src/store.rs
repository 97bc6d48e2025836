//! On-disk model store: one canonical JSON document per artifact under a
//! versioned root.
//!
//! Documents are written with sorted keys, two-space indentation and every
//! float as `{:.16e}`, so the same inputs always produce identical bytes.
//! Writes go to a temporary sibling first and are renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("artifact not found: {0}")]
    NotFound(String),
    #[error("store schema version {found} is not supported (expected {expected})")]
    IncompatibleStore { found: u32, expected: u32 },
    #[error("malformed document {key}: {message}")]
    Malformed { key: String, message: String },
    #[error("invalid artifact key {0:?}")]
    InvalidKey(String),
}

fn io_err(path: &Path, e: io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

struct CanonicalFormatter {
    inner: PrettyFormatter<'static>,
}

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for CanonicalFormatter {
    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Canonical bytes of any serializable value.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    // through Value so map keys come out sorted
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        CanonicalFormatter {
            inner: PrettyFormatter::with_indent(b"  "),
        },
    );
    v.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex digest of a value's canonical form.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(&canonical_json(value).expect("fingerprinted values serialize"))
}

/// Percent-encode an opaque id into a file-name-safe key segment.
pub fn encode_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Write `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Digest of the ingested records the artifacts were trained on.
    pub data_fingerprint: String,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
    manifest: Manifest,
}

impl Store {
    /// Create or reset the manifest of a store rooted at `root`.
    pub fn create(root: impl Into<PathBuf>, data_fingerprint: &str) -> Result<Self, StoreError> {
        let store = Store {
            root: root.into(),
            manifest: Manifest {
                schema_version: SCHEMA_VERSION,
                data_fingerprint: data_fingerprint.to_string(),
            },
        };
        store.write(MANIFEST, &store.manifest)?;
        Ok(store)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let path = root.join("manifest.json");
        let text = match fs::read(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(path.display().to_string()))
            }
            Err(e) => return Err(io_err(&path, e)),
        };
        let raw: serde_json::Value =
            serde_json::from_slice(&text).map_err(|e| StoreError::Malformed {
                key: MANIFEST.into(),
                message: e.to_string(),
            })?;
        let found = raw
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(StoreError::IncompatibleStore {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let manifest = serde_json::from_value(raw).map_err(|e| StoreError::Malformed {
            key: MANIFEST.into(),
            message: e.to_string(),
        })?;
        Ok(Store { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn data_fingerprint(&self) -> &str {
        &self.manifest.data_fingerprint
    }

    /// Path of an artifact key such as `control/P1`.
    pub fn path_of(&self, key: &str) -> Result<PathBuf, StoreError> {
        let ok = !key.is_empty()
            && key.split('/').all(|seg| {
                !seg.is_empty()
                    && seg != "."
                    && seg != ".."
                    && seg
                        .bytes()
                        .all(|b| b.is_ascii_alphanumeric() || b"-_%.".contains(&b))
            });
        if !ok {
            return Err(StoreError::InvalidKey(key.to_string()));
        }
        Ok(self.root.join(format!("{key}.json")))
    }

    pub fn exists(&self, key: &str) -> bool {
        self.path_of(key).is_ok_and(|p| p.is_file())
    }

    pub fn write<T: Serialize + ?Sized>(&self, key: &str, value: &T) -> Result<(), StoreError> {
        let path = self.path_of(key)?;
        let bytes = canonical_json(value).map_err(|e| StoreError::Malformed {
            key: key.to_string(),
            message: e.to_string(),
        })?;
        write_atomic(&path, &bytes)
    }

    pub fn read<T: DeserializeOwned>(&self, key: &str) -> Result<T, StoreError> {
        let path = self.path_of(key)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(key.to_string()))
            }
            Err(e) => return Err(io_err(&path, e)),
        };
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Malformed {
            key: key.to_string(),
            message: e.to_string(),
        })
    }

    /// Keys directly under a directory, sorted, without the `.json` suffix.
    pub fn list(&self, dir: &str) -> Result<Vec<String>, StoreError> {
        let path = self.root.join(dir);
        let entries = match fs::read_dir(&path) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path, e)),
        };
        let mut out = Vec::new();
        for e in entries {
            let e = e.map_err(|e| io_err(&path, e))?;
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".json") {
                out.push(format!("{dir}/{stem}"));
            }
        }
        out.sort();
        Ok(out)
    }
}
