use landau_verify::criteria::{run_suite, Suite};
use landau_verify::CheckReport;

#[test]
fn suites_partition_the_criteria() {
    let mut all: Vec<usize> = [Suite::Kernel, Suite::Solver, Suite::Estimates]
        .iter()
        .flat_map(|s| s.criteria())
        .collect();
    all.sort_unstable();
    assert_eq!(all, Suite::All.criteria());
    assert_eq!("estimates".parse::<Suite>(), Ok(Suite::Estimates));
    assert!("everything".parse::<Suite>().is_err());
}

#[test]
fn kernel_suite_passes_and_reports_round_trip() {
    let reports = run_suite(Suite::Kernel, 3);
    assert_eq!(reports.len(), 2);
    for r in &reports {
        assert!(r.pass, "{}\n{}", r.summary_line(), r.witness);
        assert!(r.runtime_ms > 0.0);
        let back: CheckReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.name, r.name);
        assert_eq!(back.pass, r.pass);
        assert_eq!(back.witness, r.witness);
    }
    // Randomized checks are reproducible from their seed.
    let again = run_suite(Suite::Kernel, 3);
    assert_eq!(again[0].witness, reports[0].witness);
}
