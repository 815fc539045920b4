use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::params::NetworkParams;
use crate::error::{Error, Result};
use crate::io::{bytes_to_f64s, f64s_to_bytes, split_header, write_atomic, HEADER_END};

pub const CHECKPOINT_FORMAT: &str = "FRACBACK-CHECKPOINT v1";

#[derive(Debug, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    epochs: usize,
    config: NetworkConfig,
    blocks: Vec<BlockInfo>,
}

/// Trained network as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub params: NetworkParams,
    pub epochs: usize,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let blocks = self.params.blocks();
        let header = Header {
            format: CHECKPOINT_FORMAT.into(),
            epochs: self.epochs,
            config: self.config.clone(),
            blocks: blocks
                .iter()
                .map(|(n, b)| BlockInfo {
                    name: n.clone(),
                    len: b.len(),
                })
                .collect(),
        };
        let mut out = toml::to_string(&header)
            .map_err(|e| Error::Config(e.to_string()))?
            .into_bytes();
        out.extend_from_slice(HEADER_END.as_bytes());
        for (_, b) in &blocks {
            f64s_to_bytes(b, &mut out);
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let (head, body) = split_header(path, &bytes)?;
        let h: Header = toml::from_str(head).map_err(|e| Error::format(path, e.to_string()))?;
        if h.format != CHECKPOINT_FORMAT {
            return Err(Error::format(
                path,
                format!("unknown format '{}'", h.format),
            ));
        }
        h.config
            .validate()
            .map_err(|e| Error::format(path, e.to_string()))?;
        let mut params = NetworkParams::zeros(&h.config);
        let expected: Vec<(String, usize)> = params
            .blocks()
            .iter()
            .map(|(n, b)| (n.clone(), b.len()))
            .collect();
        if expected.len() != h.blocks.len()
            || expected
                .iter()
                .zip(&h.blocks)
                .any(|((n, l), b)| *n != b.name || *l != b.len)
        {
            return Err(Error::format(
                path,
                "parameter blocks do not match the stored config",
            ));
        }
        let total: usize = expected.iter().map(|(_, l)| l).sum();
        let data = bytes_to_f64s(path, body, total)?;
        let mut off = 0;
        for block in params.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&data[off..off + n]);
            off += n;
        }
        Ok(Self {
            config: h.config,
            params,
            epochs: h.epochs,
        })
    }
}
