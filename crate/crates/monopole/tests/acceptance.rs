//! Runs the full acceptance suite and prints one line per criterion.

use monopole::selftest::{run, timing_table, SelftestOptions};

#[test]
fn acceptance() {
    let results = run(&SelftestOptions::default(), None).expect("reference fixtures build");
    assert_eq!(results.len(), 10);
    for r in &results {
        println!("criterion {:>2} {}: {} ({:.2} s)", r.id, if r.pass { "PASS" } else { "FAIL" }, r.name, r.seconds);
        if let Some(e) = &r.error {
            println!("    error: {e}");
        }
        for c in r.checks.iter().filter(|c| !c.pass) {
            println!("    {} residual {:.3e} tol {:.1e}", c.check, c.residual, c.tol);
        }
    }
    print!("{}", timing_table(&results));
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
