use std::collections::BTreeMap;
use std::path::Path;

use germflow_core::Verdict;
use serde::Serialize;
use serde_json::Value;

use crate::args::JobConfig;
use crate::error::Result;

#[derive(Debug, Serialize)]
pub struct VerdictEntry {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl VerdictEntry {
    pub fn from_bool(holds: bool) -> Self {
        Self {
            verdict: if holds { Verdict::HoldsEmpirically } else { Verdict::FailsWithWitness },
            margin: None,
            witness: None,
            message: None,
        }
    }

    pub fn margin(mut self, m: f64) -> Self {
        self.margin = Some(m);
        self
    }

    pub fn witness(mut self, w: Option<Vec<f64>>) -> Self {
        self.witness = w;
        self
    }

    pub fn message(mut self, m: impl Into<String>) -> Self {
        self.message = Some(m.into());
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub job: JobConfig,
    pub verdicts: BTreeMap<String, VerdictEntry>,
    pub certificates: BTreeMap<String, Value>,
    pub witnesses: BTreeMap<String, Vec<f64>>,
    pub timing: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn new(job: JobConfig) -> Self {
        let timing = (!job.omit_timing).then(BTreeMap::new);
        Self { job, verdicts: BTreeMap::new(), certificates: BTreeMap::new(), witnesses: BTreeMap::new(), timing }
    }

    pub fn verdict(&mut self, key: &str, entry: VerdictEntry) {
        if let Some(w) = &entry.witness {
            self.witnesses.insert(key.to_string(), w.clone());
        }
        self.verdicts.insert(key.to_string(), entry);
    }

    pub fn certificate<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.certificates.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn time(&mut self, key: &str, seconds: f64) {
        if let Some(t) = &mut self.timing {
            t.insert(key.to_string(), seconds);
        }
    }

    pub fn all_hold(&self) -> bool {
        self.verdicts.values().all(|v| v.verdict.holds())
    }

    pub fn write(&self, out: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        match out {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}
