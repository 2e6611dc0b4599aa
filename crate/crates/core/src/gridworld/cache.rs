//! Binary Q-table files.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes      | field                                             |
//! |------------|---------------------------------------------------|
//! | 8          | magic `PQTABLE\0`                                 |
//! | 4          | format version, currently 1                       |
//! | 32         | SHA-256 of the map's canonical text               |
//! | 8          | gamma (f64)                                       |
//! | 4          | horizon (u32)                                     |
//! | 4, 4       | height, width (u32)                               |
//! | 4          | goal count `G` (u32)                              |
//! | 8 * G      | goals as (row u32, col u32), row-major order      |
//! | 8 * G*H*W*12 | Q values (f64), goal-major, then cell, heading (N E S W), action (left, right, forward) |

use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{GridMap, Pos, QTable, SolverParams};

const MAGIC: &[u8; 8] = b"PQTABLE\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a Q-table file")]
    BadMagic,
    #[error("unsupported Q-table format version {0}")]
    Version(u32),
    #[error("Q-table was built for a different map or solver parameters")]
    Mismatch,
}

pub(crate) fn map_hash(map: &GridMap) -> [u8; 32] {
    Sha256::digest(map.to_text().as_bytes()).into()
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

impl QTable {
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.map_hash)?;
        w.write_all(&self.params.gamma.to_le_bytes())?;
        w.write_all(&(self.params.horizon as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.goals.len() as u32).to_le_bytes())?;
        for g in &self.goals {
            w.write_all(&(g.row as u32).to_le_bytes())?;
            w.write_all(&(g.col as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CacheError> {
        let mut magic = [0; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CacheError::BadMagic);
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(CacheError::Version(version));
        }
        let mut map_hash = [0; 32];
        r.read_exact(&mut map_hash)?;
        let gamma = read_f64(r)?;
        let horizon = read_u32(r)? as usize;
        let height = read_u32(r)? as usize;
        let width = read_u32(r)? as usize;
        let n_goals = read_u32(r)? as usize;
        let mut goals = Vec::with_capacity(n_goals);
        for _ in 0..n_goals {
            let row = read_u32(r)? as usize;
            let col = read_u32(r)? as usize;
            goals.push(Pos::new(row, col));
        }
        let n_values = n_goals * height * width * 12;
        let mut values = Vec::with_capacity(n_values);
        for _ in 0..n_values {
            values.push(read_f64(r)?);
        }
        Ok(QTable {
            height,
            width,
            params: SolverParams { gamma, horizon },
            map_hash,
            goals,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut w = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()
    }

    /// Loads a table and checks it was built for `map` with `params`.
    pub fn load(path: &Path, map: &GridMap, params: &SolverParams) -> Result<Self, CacheError> {
        let mut r = io::BufReader::new(std::fs::File::open(path)?);
        let table = Self::read_from(&mut r)?;
        if !table.matches(map, params) {
            return Err(CacheError::Mismatch);
        }
        Ok(table)
    }

    /// File name that identifies the map and solver parameters.
    pub fn cache_file_name(map: &GridMap, params: &SolverParams) -> String {
        let hash = map_hash(map);
        let short: String = hash[..8].iter().map(|b| format!("{b:02x}")).collect();
        format!("qtable-{short}-g{}-h{}.bin", params.gamma, params.horizon)
    }
}
