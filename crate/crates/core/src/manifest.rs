//! Run manifests: flat `key=value` records of everything needed to repeat a
//! command.

use std::time::{SystemTime, UNIX_EPOCH};

use crate::kv;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command_line: String,
    pub seed: Option<u64>,
    /// Resolved parameters in insertion order.
    pub params: Vec<(String, String)>,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
}

/// Keys written by [`RunManifest`] itself rather than by a command.
pub const MANIFEST_META_KEYS: [&str; 4] =
    ["command_line", "version", "started_unix", "finished_unix"];

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(command_line: impl Into<String>) -> Self {
        RunManifest {
            command_line: command_line.into(),
            seed: None,
            params: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now(),
            finished_unix: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn finish(&mut self) {
        self.finished_unix = Some(now());
    }

    pub fn to_kv(&self) -> String {
        let mut pairs: Vec<(&str, String)> = vec![
            ("command_line", self.command_line.clone()),
            ("version", self.version.clone()),
        ];
        if let Some(s) = self.seed {
            pairs.push(("seed", s.to_string()));
        }
        for (k, v) in &self.params {
            pairs.push((k, v.clone()));
        }
        pairs.push(("started_unix", format!("{:.3}", self.started_unix)));
        if let Some(f) = self.finished_unix {
            pairs.push(("finished_unix", format!("{f:.3}")));
        }
        kv::format(pairs)
    }
}
