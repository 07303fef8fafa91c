//! Run manifests: what was run, with which configuration, on which inputs.
//! Manifests carry no timestamps so that reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    /// Hex digest; for indexes this is the corpus digest, otherwise the
    /// sha256 of the file bytes.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_digest: Option<String>,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "verbatim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_digest: None,
            config: Value::Null,
            inputs: Vec::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path, digest: String) -> &mut Self {
        self.inputs.push(InputDigest {
            role: role.into(),
            path: path.display().to_string(),
            digest,
        });
        self
    }

    pub fn output(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.outputs
            .insert(key.into(), serde_json::to_value(value).expect("serializable"));
        self
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        crate::report::write_json(path, self)
    }
}

/// Hex sha256 of a file's contents.
pub fn file_digest(path: &Path) -> std::io::Result<String> {
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
