use dgfric::adaptivity::{afem_run, AfemConfig, AfemProblem, StopReason};
use dgfric::verification::benchmarks::{Benchmark, BenchmarkId};
use dgfric::verification::studies::ReferenceSolution;

#[test]
fn stick_estimator_decreases_on_every_level() {
    let b = Benchmark::get(BenchmarkId::Stick);
    let reference = ReferenceSolution::Exact(b.exact.unwrap());
    let problem = AfemProblem {
        mesh: b.base_mesh().unwrap(),
        benchmark: b,
        reference: Some(&reference),
    };
    let cfg = AfemConfig { theta: 0.5, max_levels: 5, ..Default::default() };
    let r = afem_run(problem, &cfg, |_| Ok(())).unwrap();
    assert_eq!(r.rows.len(), 6);
    assert_eq!(r.stop, StopReason::MaxLevels);
    let eta: Vec<f64> = r.rows.iter().map(|r| r.eta_tot()).collect();
    assert!(eta.windows(2).all(|w| w[1] < w[0]), "{eta:?}");
    // the estimator stays an upper bound up to a moderate constant
    for row in &r.rows {
        let q = row.reliability_ratio().unwrap();
        assert!(q > 0.0 && q < 1.5, "{q}");
    }
}

#[test]
fn unknown_limit_stops_the_loop() {
    let b = Benchmark::get(BenchmarkId::LShape);
    let problem = AfemProblem {
        mesh: b.base_mesh().unwrap(),
        benchmark: b,
        reference: None,
    };
    let cfg = AfemConfig { max_dof: 100, ..Default::default() };
    let r = afem_run(problem, &cfg, |_| Ok(())).unwrap();
    assert_eq!(r.stop, StopReason::MaxDof);
    assert!(r.rows.last().unwrap().dofs >= 100);
    assert!(r.rows[r.rows.len() - 2].dofs < 100);
}
