//! Versioned JSON envelopes and CSV tables.

use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, SecondsFormat};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub const BUILD_ID: &str = env!("REGRET_BW_BUILD");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub s_draws: usize,
    pub timestamp: String,
    pub build: &'static str,
}

impl Provenance {
    pub fn new(cfg: &RunConfig) -> CliResult<Self> {
        Ok(Provenance { seed: cfg.seed, s_draws: cfg.s_draws, timestamp: timestamp()?, build: BUILD_ID })
    }
}

/// UTC time of the run in RFC 3339, taken from `SOURCE_DATE_EPOCH` when set
/// so that repeated runs can be byte-identical.
pub fn timestamp() -> CliResult<String> {
    let secs = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .map_err(|_| CliError::Config(format!("SOURCE_DATE_EPOCH must be an integer, got {v:?}")))?,
        Err(_) => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64),
    };
    let t = DateTime::from_timestamp(secs, 0)
        .ok_or_else(|| CliError::Config(format!("SOURCE_DATE_EPOCH out of range: {secs}")))?;
    Ok(t.to_rfc3339_opts(SecondsFormat::Secs, true))
}

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub payload: T,
    pub provenance: Provenance,
}

pub fn to_json<T: Serialize>(command: &'static str, config: &RunConfig, payload: T) -> CliResult<String> {
    let env =
        Envelope { schema_version: SCHEMA_VERSION, command, config, payload, provenance: Provenance::new(config)? };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Renders rows with a header line.
pub fn to_csv<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.as_ref()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
