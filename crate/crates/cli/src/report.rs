//! Aggregates scenario summaries into one Markdown report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::Scenario;
use crate::scenarios::{ErrorRecord, Summary};

/// Acceptance criteria and the scenario that produces their checks.
pub const CRITERIA: [(u8, &str, Scenario); 12] = [
    (1, "spectral arithmetic", Scenario::GapTable),
    (2, "diffeomorphism roundtrip", Scenario::Roundtrip),
    (3, "K-scaling of the advection coefficient", Scenario::KScaling),
    (4, "resolvent bounds", Scenario::GapTable),
    (5, "Perron contraction", Scenario::BuildManifold),
    (6, "linear oracle equivalence", Scenario::Invariance),
    (7, "exponential tracking", Scenario::Tracking),
    (8, "invariance", Scenario::Invariance),
    (9, "original vs transformed flow", Scenario::Equivalence),
    (10, "elliptic solver", Scenario::UpsilonAudit),
    (11, "Neumann pipeline", Scenario::NeumannPipeline),
    (12, "dissipativity", Scenario::BuildManifold),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Error,
    Skipped,
}

impl Status {
    fn label(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
            Status::Skipped => "SKIPPED",
        }
    }
}

/// What was found in an output directory.
#[derive(Debug, Default)]
pub struct Collected {
    pub summaries: Vec<Summary>,
    pub errors: Vec<ErrorRecord>,
}

impl Collected {
    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty() && self.errors.is_empty()
    }

    /// Status of acceptance criterion `id`.
    pub fn status(&self, id: u8) -> Status {
        let checks: Vec<_> =
            self.summaries.iter().flat_map(|s| s.checks.iter()).filter(|c| c.criterion == Some(id)).collect();
        let scenario = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.2.name());
        if checks.is_empty() {
            if self.errors.iter().any(|e| Some(e.scenario.as_str()) == scenario) {
                return Status::Error;
            }
            return Status::Skipped;
        }
        if checks.iter().all(|c| c.pass) {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// Reads `<dir>/<scenario>/summary.json` and `error.json` for every known scenario.
pub fn collect(dir: &Path) -> std::io::Result<Collected> {
    let mut out = Collected::default();
    for s in Scenario::ALL {
        let sub = dir.join(s.name());
        if let Ok(text) = fs::read_to_string(sub.join("summary.json")) {
            let summary: Summary = serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", sub.display())))?;
            out.summaries.push(summary);
        } else if let Ok(text) = fs::read_to_string(sub.join("error.json")) {
            let rec: ErrorRecord = serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", sub.display())))?;
            out.errors.push(rec);
        }
    }
    Ok(out)
}

/// Renders the report. With no artifacts the tables have no rows; otherwise
/// every criterion gets a row, `SKIPPED` when no check covers it.
pub fn render(c: &Collected) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# imlab report\n");
    let _ = writeln!(s, "## Acceptance\n");
    let _ = writeln!(s, "| # | criterion | status |");
    let _ = writeln!(s, "|---|---|---|");
    if !c.is_empty() {
        for (id, name, _) in CRITERIA {
            let _ = writeln!(s, "| {id} | {name} | {} |", c.status(id).label());
        }
    }
    let _ = writeln!(s, "\n## Checks\n");
    let _ = writeln!(s, "| scenario | seed | check | value | bound | result |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for sum in &c.summaries {
        for ch in &sum.checks {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.6e} | {} | {} |",
                sum.scenario,
                sum.seed,
                ch.name,
                ch.value,
                ch.bound,
                if ch.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    if !c.errors.is_empty() {
        let _ = writeln!(s, "\n## Errors\n");
        for e in &c.errors {
            let _ = writeln!(s, "- {} ({} error): {}", e.scenario, e.kind, e.message);
        }
    }
    s
}

/// True when nothing recorded failed or errored.
pub fn all_passed(c: &Collected) -> bool {
    c.errors.is_empty() && c.summaries.iter().all(|s| s.pass)
}
