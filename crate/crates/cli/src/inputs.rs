//! Loading input files. Every failure names the file.

use std::fs;
use std::path::Path;

use ipir_core::location::{MobilityFile, MobilityModel, PrivacySchedule};
use ipir_core::obfuscation::PolicyFile;
use ipir_core::prob::{ConditionalFile, JointFile};
use ipir_core::{Conditional, Joint, MessageStore, Policy, SeedTree};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(path.display(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, to_json(value)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn in_file<T>(path: &Path, r: ipir_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::config(path.display(), e))
}

pub fn load_joint(path: &Path) -> CliResult<Joint> {
    in_file(path, Joint::from_file(&read_json::<JointFile>(path)?))
}

pub fn load_conditional(path: &Path) -> CliResult<Conditional> {
    in_file(path, Conditional::from_file(&read_json::<ConditionalFile>(path)?))
}

pub fn load_policy(path: &Path) -> CliResult<Policy> {
    in_file(path, Policy::from_file(&read_json::<PolicyFile>(path)?))
}

pub fn load_model(path: &Path) -> CliResult<MobilityModel> {
    in_file(path, MobilityModel::from_file(&read_json::<MobilityFile>(path)?))
}

/// Schedule file: `{"private": [0, 3]}`, times counted from 0. An optional
/// `"horizon"` is used when none is given on the command line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub private: Vec<usize>,
}

pub fn load_schedule(path: &Path, horizon: Option<usize>) -> CliResult<PrivacySchedule> {
    let file: ScheduleFile = read_json(path)?;
    let horizon = horizon
        .or(file.horizon)
        .ok_or_else(|| CliError::config(path.display(), "no horizon in the file or on the command line"))?;
    in_file(path, PrivacySchedule::new(horizon, file.private))
}

pub fn load_store(path: &Path) -> CliResult<MessageStore> {
    ipir_net::store_file::read(path).map_err(|e| CliError::config(path.display(), e))
}

/// Store drawn from the `store` stream of the seed.
pub fn random_store(k: usize, length: usize, seed: u64) -> MessageStore {
    MessageStore::random(k, length, &mut SeedTree::new(seed).stream("store", 0))
}
