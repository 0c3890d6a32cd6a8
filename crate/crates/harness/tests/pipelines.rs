use ngo_harness::registry;
use ngo_harness::runs::{moment, run_asymptotic_compare, run_convergence, run_hopping, run_timeseries};
use ngo_harness::{preset, ReferenceCache, RunConfig};
use ngo_core::PeriodicGrid;

fn config(name: &str, edit: impl FnOnce(&mut RunConfig)) -> RunConfig {
    let mut c = preset(name).unwrap();
    edit(&mut c);
    c.validate().unwrap();
    c
}

#[test]
fn warmed_cache_gives_identical_rows() {
    let cfg = config("scalar_smooth", |c| {
        c.epsilons = vec![0.1, 0.01];
        c.n_ts = vec![20, 40];
    });
    let cold = run_convergence(&cfg, &ReferenceCache::new()).unwrap();
    let cache = ReferenceCache::new();
    cache.prepare(&cfg).unwrap();
    assert_eq!(cache.len(), 4);
    let warm = run_convergence(&cfg, &cache).unwrap();
    assert_eq!(cold.body_without_timing().unwrap(), warm.body_without_timing().unwrap());
    assert_eq!(cache.len(), 4);
}

#[test]
fn timeseries_starts_at_moment_of_data() {
    let cfg = config("scalar_timeseries", |c| c.t_final = 0.05);
    let ts = run_timeseries(&cfg).unwrap();
    let first = ts.series.iter().find(|r| r.t == 0.0 && r.solver_id.starts_with("ngo")).unwrap();
    let grid = PeriodicGrid::new(cfg.domain.0, cfg.domain.1, cfg.n_ts[0]).unwrap();
    let alpha = registry::data(&cfg.scalar.alpha).unwrap();
    let u: Vec<_> = grid.nodes().iter().map(|&x| alpha(x)).collect();
    assert!((first.r - moment(&u, &grid)).abs() < 1e-12, "{} vs {}", first.r, moment(&u, &grid));
}

#[test]
fn asymptotic_distance_vanishes_without_source() {
    let cfg = config("scalar_smooth", |c| {
        c.scalar.r = "zero".into();
        c.epsilons = vec![0.1, 0.01];
        c.n_ts = vec![40];
    });
    let report = run_asymptotic_compare(&cfg).unwrap();
    for row in &report.rows {
        assert!(row.linf_error < 1e-10, "{row:?}");
    }
}

#[test]
fn uncoupled_hopping_conserves_mass() {
    let cfg = config("hopping_eps1", |c| {
        c.hopping.bi = "zero".into();
        c.hopping.run_reference = false;
        c.t_final = 0.5;
    });
    let out = run_hopping(&cfg).unwrap();
    let case = &out.cases[0];
    assert!((case.ngo_mass.1 - case.ngo_mass.0).abs() < 1e-10, "{:?}", case.ngo_mass);
}
