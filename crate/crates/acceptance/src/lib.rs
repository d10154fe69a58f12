//! Result bookkeeping for the acceptance run in `tests/acceptance.rs`.
//!
//! Run with `cargo test -p mrlr-acceptance --release` for realistic
//! timings; each criterion prints a single `PASS` or `FAIL` line.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects outcomes and prints each one as soon as it is known.
#[derive(Default)]
pub struct Ledger {
    outcomes: Vec<Outcome>,
}

impl Ledger {
    pub fn check(&mut self, id: &'static str, title: &'static str, f: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (passed, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into());
                (false, format!("panicked: {msg}"))
            }
        };
        let outcome = Outcome {
            id,
            title,
            passed,
            detail,
            elapsed: start.elapsed(),
        };
        println!("{}", outcome.line());
        self.outcomes.push(outcome);
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn summary(&self) -> String {
        let passed = self.outcomes.iter().filter(|o| o.passed).count();
        let mut s = format!("acceptance: {passed}/{} passed", self.outcomes.len());
        let failed: Vec<&str> = self
            .outcomes
            .iter()
            .filter(|o| !o.passed)
            .map(|o| o.id)
            .collect();
        if !failed.is_empty() {
            write!(s, "; failed: {}", failed.join(", ")).unwrap();
        }
        s
    }
}
