//! Full acceptance sweep: runs every bundled verification criterion and
//! fails if any of them does. The per-criterion verdict lines are printed
//! so a failing run shows exactly which claim broke.

use tubemass_cli::verify;

#[test]
fn acceptance_criteria_all_pass() {
    let mut buf: Vec<u8> = Vec::new();
    let report = verify::run_suite(None, &mut buf).expect("verification suite should run");
    print!("{}", String::from_utf8_lossy(&buf));
    assert_eq!(report.results.len(), 17);
    assert!(
        report.all_passed(),
        "failed criteria: {:?}",
        report
            .results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.tag)
            .collect::<Vec<_>>()
    );
}
