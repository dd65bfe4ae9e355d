//! Feeder files.
//!
//! CSV: header `from,to,r_ohm,x_ohm,p_kw,q_kvar`, one row per branch, node 0
//! is the slack and `p_kw`/`q_kvar` is the base load at node `to`. Ohms are
//! converted with the bases from the experiment file.
//!
//! JSON: `{"base_mva": .., "base_kv": .., "branches": [{"from": .., ...}]}`
//! with the same branch fields.

use std::path::Path;

use serde::{Deserialize, Serialize};
use v2x_core::network::{Branch, NetworkTopology};

use crate::error::{CliError, Result};
use crate::traces::{check_header, reader, schema};

const HEADER: [&str; 6] = ["from", "to", "r_ohm", "x_ohm", "p_kw", "q_kvar"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub from: usize,
    pub to: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub p_kw: f64,
    pub q_kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederFile {
    pub base_mva: f64,
    pub base_kv: f64,
    pub branches: Vec<BranchRow>,
}

/// A feeder with its nodal base loads.
#[derive(Debug, Clone, PartialEq)]
pub struct Feeder {
    pub topology: NetworkTopology,
    pub base_p: Vec<f64>,
    pub base_q: Vec<f64>,
}

impl FeederFile {
    pub fn build(&self, slots: usize) -> v2x_core::Result<Feeder> {
        let z_base = self.base_kv * self.base_kv / self.base_mva;
        let branches: Vec<Branch> = self
            .branches
            .iter()
            .map(|b| Branch {
                from: b.from,
                to: b.to,
                r_pu: b.r_ohm / z_base,
                x_pu: b.x_ohm / z_base,
            })
            .collect();
        let topology = NetworkTopology::radial(&branches, self.base_mva, self.base_kv, slots)?;
        let n = topology.num_nodes();
        let mut base_p = vec![0.0; n];
        let mut base_q = vec![0.0; n];
        for b in &self.branches {
            base_p[b.to] = b.p_kw;
            base_q[b.to] = b.q_kvar;
        }
        Ok(Feeder { topology, base_p, base_q })
    }
}

/// Read a feeder file; the extension picks the format.
pub fn read_feeder(path: &Path, base_mva: f64, base_kv: f64) -> Result<FeederFile> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let file = if is_json {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
    } else {
        let mut rdr = reader(path)?;
        let headers = rdr.headers().map_err(|e| schema(path, e))?.clone();
        check_header(path, &headers, &HEADER)?;
        let branches = rdr
            .deserialize::<BranchRow>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| schema(path, e))?;
        FeederFile {
            base_mva,
            base_kv,
            branches,
        }
    };
    for b in &file.branches {
        let values = [b.r_ohm, b.x_ohm, b.p_kw, b.q_kvar];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                message: format!("non-finite value on branch {}-{}", b.from, b.to),
            });
        }
    }
    Ok(file)
}
