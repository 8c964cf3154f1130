//! Check reporting for the acceptance runner in `tests/acceptance.rs`.

use std::time::Instant;

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {} ({:.1} s): {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// A check returns `Ok(detail)` on success and `Err(detail)` on failure.
pub type Check = fn() -> Result<String, String>;

/// Runs `check`, converting panics to failures.
pub fn run_check(id: u32, name: &'static str, check: Check) -> Outcome {
    let start = Instant::now();
    let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(format!("panic: {msg}"))
    });
    let seconds = start.elapsed().as_secs_f64();
    let (pass, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Outcome { id, name, pass, detail, seconds }
}

/// Selects criteria from command-line arguments: numeric arguments pick
/// ids, anything else is ignored. No ids selects everything.
pub fn selected(args: &[String], id: u32) -> bool {
    let ids: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    ids.is_empty() || ids.contains(&id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_failures() {
        let o = run_check(3, "x", || panic!("boom"));
        assert!(!o.pass);
        assert!(o.line().starts_with("FAIL  3 x"));
        assert!(o.detail.contains("boom"));
    }

    #[test]
    fn selection() {
        assert!(selected(&[], 4));
        assert!(selected(&["--nocapture".into(), "4".into()], 4));
        assert!(!selected(&["5".into()], 4));
    }
}
