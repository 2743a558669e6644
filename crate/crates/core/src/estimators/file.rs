//! Versioned JSON model files. A file embeds the training count table, so a
//! reloaded model answers every query bit-identically.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ModelKind, NameModel, SmoothingConfig, UnseenEstimate};
use crate::counts::{CountTable, CountTableData};
use crate::error::{Error, Result};

pub const FORMAT_ID: &str = "namepop-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: ModelKind,
    config: SmoothingConfig,
    target_population: u64,
    unseen: Vec<UnseenEstimate>,
    table: CountTableData,
}

impl NameModel {
    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let file = ModelFile {
            format: FORMAT_ID.to_string(),
            version: VERSION,
            kind: self.kind,
            config: self.config.clone(),
            target_population: self.target_population,
            unseen: self.unseen.values().cloned().collect(),
            table: CountTableData::from(&*self.table),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(input)?;
        if file.format != FORMAT_ID {
            return Err(Error::ModelFile(format!("unexpected format id `{}`", file.format)));
        }
        if file.version != VERSION {
            return Err(Error::ModelFile(format!("unsupported version {}", file.version)));
        }
        let table = Arc::new(CountTable::try_from(file.table)?);
        let unseen: BTreeMap<_, _> = file.unseen.into_iter().map(|u| (u.target, u)).collect();
        NameModel::with_unseen(file.kind, table, file.config, file.target_population, unseen)
    }
}
