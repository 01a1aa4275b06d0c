use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
    /// Failure reason or extra context; omitted when empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    /// A check that passes when `measured ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, seconds: f64) -> Self {
        CheckResult {
            name: name.into(),
            measured,
            tolerance,
            pass: measured.is_finite() && measured <= tolerance,
            seconds,
            note: None,
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, tolerance: f64, seconds: f64, reason: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            measured: f64::NAN,
            tolerance,
            pass: false,
            seconds,
            note: Some(reason.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A batch of checks; passes only if every member passes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn new(mut checks: Vec<CheckResult>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        Report { checks }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `{"pass": bool, "checks": [{name, measured, tolerance, pass, seconds}]}`.
    /// Non-finite measurements serialize as `null`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            pass: bool,
            checks: &'a [CheckResult],
        }
        serde_json::to_string_pretty(&Out { pass: self.pass(), checks: &self.checks })
            .map_err(|e| Error::Format(e.to_string()))
    }

    /// Same as [`Report::to_json`] with run times zeroed, for byte-stable output.
    pub fn to_json_deterministic(&self) -> Result<String> {
        let mut r = self.clone();
        r.checks.iter_mut().for_each(|c| c.seconds = 0.0);
        r.to_json()
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:width$}  measured {:>11.3e}  tolerance {:>9.2e}  {:>8.3}s",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                c.seconds,
            ));
            if let Some(n) = &c.note {
                out.push_str(&format!("  ({n})"));
            }
            out.push('\n');
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "{}: {} checks, {} failed\n",
            if failed == 0 { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed
        ));
        out
    }
}
