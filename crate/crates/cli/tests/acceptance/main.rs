//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=C1,C9` restricts the run to the listed criteria.

mod checks;
mod e2e;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// `Ok(detail)` on success, `Err(detail)` on a failed criterion.
pub type Verdict = Result<String, String>;

fn main() {
    let criteria: [(&str, &str, fn() -> Verdict); 10] = [
        ("C1", "gradient fidelity", checks::gradient_fidelity),
        ("C2", "Cox-loss invariants", checks::cox_invariants),
        ("C3", "C-index oracle equivalence", checks::cindex_oracle),
        ("C4", "attention correctness", checks::attention),
        ("C5", "patient weights and nested mean", checks::aggregation),
        ("C6", "K-means and PCA", checks::kmeans_pca),
        ("C7", "LASSO-Cox", checks::lasso),
        ("C8", "end-to-end synthetic pipeline", e2e::end_to_end),
        ("C9", "survival statistics", checks::survival_stats),
        ("C10", "determinism", e2e::determinism),
    ];
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|t| t.trim().to_uppercase()).collect());

    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|t| t == id)) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("{id} PASS {name} [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name} [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
