//! `.tucker` directory container: `core.dten`, `factor_1.dten` ..
//! `factor_N.dten` (factors as order-2 tensors), and `meta.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{ModeReport, TuckerDecomposition};
use crate::error::{Error, Result};
use crate::tensor::{read_dten, write_dten, DenseTensor};

pub const CONTAINER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerMeta {
    pub schema_version: u32,
    pub original_dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub strategy: String,
    pub reports: Vec<ModeReport>,
}

impl TuckerMeta {
    pub fn new(
        t: &TuckerDecomposition,
        strategy: impl Into<String>,
        reports: Vec<ModeReport>,
    ) -> Self {
        Self {
            schema_version: CONTAINER_SCHEMA_VERSION,
            original_dims: t.original_dims.clone(),
            ranks: t.ranks().to_vec(),
            strategy: strategy.into(),
            reports,
        }
    }
}

fn factor_name(mode: usize) -> String {
    format!("factor_{}.dten", mode + 1)
}

pub fn save_tucker(
    dir: impl AsRef<Path>,
    t: &TuckerDecomposition,
    meta: &TuckerMeta,
) -> Result<()> {
    t.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_dten(dir.join("core.dten"), &t.core)?;
    for (mode, f) in t.factors.iter().enumerate() {
        write_dten(
            dir.join(factor_name(mode)),
            &DenseTensor::from_matrix(f.clone()),
        )?;
    }
    let mut json = serde_json::to_string_pretty(&serde_json::to_value(meta)?)?;
    json.push('\n');
    fs::write(dir.join("meta.json"), json)?;
    Ok(())
}

pub fn load_tucker(dir: impl AsRef<Path>) -> Result<(TuckerDecomposition, TuckerMeta)> {
    let dir = dir.as_ref();
    let meta: TuckerMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    if meta.schema_version != CONTAINER_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "container schema {} (expected {CONTAINER_SCHEMA_VERSION})",
            meta.schema_version
        )));
    }
    let core = read_dten(dir.join("core.dten"))?;
    let factors = (0..meta.original_dims.len())
        .map(|mode| {
            let f = read_dten(dir.join(factor_name(mode)))?;
            if f.order() != 2 {
                return Err(Error::Format(format!(
                    "{} is not a matrix",
                    factor_name(mode)
                )));
            }
            f.into_matrix()
        })
        .collect::<Result<Vec<_>>>()?;
    let t = TuckerDecomposition {
        core,
        factors,
        original_dims: meta.original_dims.clone(),
    };
    t.validate()?;
    if t.ranks() != meta.ranks.as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "core dims {:?} disagree with recorded ranks {:?}",
            t.ranks(),
            meta.ranks
        )));
    }
    Ok((t, meta))
}
