//! Pass/fail bookkeeping for the acceptance suite.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// One checked criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub label: String,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} [{:.2} s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.label,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects outcomes and prints each one as it lands.
#[derive(Debug, Default)]
pub struct Report {
    outcomes: Vec<Outcome>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `check`, which returns whether it passed and a one-line detail.
    /// An `Err` counts as a failure with the error as its detail.
    pub fn run<E: std::fmt::Display>(
        &mut self,
        label: &str,
        check: impl FnOnce() -> Result<(bool, String), E>,
    ) -> bool {
        let t0 = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        self.push(Outcome {
            label: label.to_string(),
            pass,
            detail,
            elapsed: t0.elapsed(),
        })
    }

    pub fn push(&mut self, outcome: Outcome) -> bool {
        println!("{}", outcome.line());
        let pass = outcome.pass;
        self.outcomes.push(outcome);
        pass
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.pass).count()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} checks, {} passed, {} failed",
            self.outcomes.len(),
            self.outcomes.len() - self.failures(),
            self.failures()
        );
        for o in self.outcomes.iter().filter(|o| !o.pass) {
            let _ = write!(s, "\n  failed: {}", o.label);
        }
        s
    }
}

/// `|x - 1|`, the distance of an efficiency from ideal.
pub fn off_unity(x: f64) -> f64 {
    (x - 1.0).abs()
}

/// Relative difference scaled by the larger magnitude, zero for two zeros.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_failures_and_errors() {
        let mut r = Report::new();
        assert!(r.run("a", || Ok::<_, String>((true, "ok".into()))));
        assert!(!r.run("b", || Ok::<_, String>((false, "bad".into()))));
        assert!(!r.run("c", || Err::<(bool, String), _>("boom")));
        assert_eq!(r.failures(), 2);
        assert!(r.outcomes()[2].detail.contains("boom"));
        assert!(r.summary().contains("3 checks, 1 passed, 2 failed"));
    }

    #[test]
    fn rel_diff_handles_zero() {
        assert_eq!(rel_diff(0.0, 0.0), 0.0);
        assert_eq!(rel_diff(2.0, 1.0), 0.5);
    }
}
