//! Reporting helpers for the `acceptance` test target.

use std::io::Write;
use std::time::Duration;

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Verdict {
    /// One line, e.g. `criterion 01 PASS lac reproduction | theta* = 38.32 | 0.4 s / 10 s`.
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} {} {} | {} | {:.2} s / {} s",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64()
        )
    }

    /// The numerical check and the runtime budget both hold.
    pub fn passed(&self) -> bool {
        self.pass && self.elapsed <= self.budget
    }

    /// Writes the line straight to stderr, past the test harness capture,
    /// then panics if the criterion failed.
    pub fn report(&self) {
        let _ = writeln!(std::io::stderr(), "\n{}", self.line());
        assert!(self.passed(), "{}", self.line());
    }
}
