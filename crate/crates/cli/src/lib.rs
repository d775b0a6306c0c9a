//! Configuration-driven runner for the imlab pipeline: `imlab run` executes
//! scenarios and writes CSV/JSON artifacts, `imlab report` summarizes them.

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::{ExperimentConfig, Scenario};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

/// Runs every configured scenario in order and returns the exit code: the
/// most severe outcome wins (numerical failure, then configuration, then a
/// failed check).
pub fn run(cfg: &ExperimentConfig) -> i32 {
    let mut code = exit::PASS;
    for s in cfg.scenario.to_vec() {
        let c = match scenarios::run_scenario(cfg, s) {
            Ok(sum) => {
                for ch in &sum.checks {
                    eprintln!("  {} {}: {:.4e} ({})", if ch.pass { "ok  " } else { "FAIL" }, ch.name, ch.value, ch.bound);
                }
                eprintln!("{s}: {}", if sum.pass { "pass" } else { "FAIL" });
                if sum.pass {
                    exit::PASS
                } else {
                    exit::CHECK_FAILED
                }
            }
            Err(e) => {
                eprintln!("{s}: {} error: {}", e.kind(), e.message());
                match e {
                    scenarios::RunError::Config(_) => exit::CONFIG,
                    scenarios::RunError::Numerical(_) => exit::NUMERICAL,
                }
            }
        };
        code = code.max(c);
    }
    code
}
