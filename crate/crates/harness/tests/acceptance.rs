//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of the outcome so that `cargo test` reports the lines
//! without aborting; set `NGO_ACCEPTANCE_STRICT=1` to exit 1 on any failure.

use std::time::Instant;

use ngo_core::spectral::{apply_q_inverse, tau_antiderivative, MeanPolicy, SpectralField1D};
use ngo_core::system::{system_direct_reference_with, DirectSettings, Splitting, Transport};
use ngo_core::{InitMode, PeriodicGrid, PhaseMethod};
use ngo_harness::problems::system_problem;
use ngo_harness::report::loglog_slope;
use ngo_harness::runs::{run_asymptotic_compare, run_convergence, run_hopping, run_ngo, run_timeseries};
use ngo_harness::{preset, ErrorReport, ReferenceCache, RunConfig};
use num_complex::Complex64 as C;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Suite {
    passed: usize,
    failed: Vec<String>,
}

impl Suite {
    fn check(&mut self, name: &str, pass: bool, detail: String, started: Instant) {
        let secs = started.elapsed().as_secs_f64();
        println!("{} {name}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
        if pass {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }
}

fn config(name: &str, edit: impl FnOnce(&mut RunConfig)) -> RunConfig {
    let mut c = preset(name).expect("preset");
    edit(&mut c);
    c.validate().expect("valid configuration");
    c
}

fn only_id(report: &ErrorReport, eps: f64) -> String {
    report.rows.iter().find(|r| r.epsilon == eps).unwrap().solver_id.clone()
}

/// Convergence sweep: fitted order `−d log(error)/d log(N_ts)` per ε and the
/// largest error ratio across ε at fixed `N_ts`.
fn sweep(cfg: &RunConfig) -> (ErrorReport, Vec<(f64, f64)>, f64) {
    let report = run_convergence(cfg, &ReferenceCache::new()).expect("sweep");
    let slopes = cfg
        .epsilons
        .iter()
        .map(|&eps| {
            let rows = report.series(&only_id(&report, eps), eps);
            let n: Vec<f64> = rows.iter().map(|r| r.n_ts as f64).collect();
            let e: Vec<f64> = rows.iter().map(|r| r.linf_error).collect();
            (eps, -loglog_slope(&n, &e))
        })
        .collect();
    let flat = cfg
        .n_ts
        .iter()
        .map(|&n| {
            let e: Vec<f64> = cfg.epsilons.iter().map(|&eps| error_at(&report, eps, n)).collect();
            e.iter().cloned().fold(0.0, f64::max) / e.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    (report, slopes, flat)
}

fn fmt_slopes(slopes: &[(f64, f64)]) -> String {
    slopes.iter().map(|(e, s)| format!("ε={e}: {s:.3}")).collect::<Vec<_>>().join(", ")
}

fn error_at(report: &ErrorReport, eps: f64, n: usize) -> f64 {
    report.rows.iter().find(|r| r.epsilon == eps && r.n_ts == n).unwrap().linf_error
}

fn operator_calculus(s: &mut Suite) {
    let t0 = Instant::now();
    let grid = PeriodicGrid::tau(32).unwrap();
    let mut calc = 0.0f64;
    for sign in [1.0, -1.0] {
        let f = SpectralField1D::from_fn(grid, |t| C::new(0.0, sign * t).exp());
        let g = tau_antiderivative(&f, MeanPolicy::Strict).unwrap();
        for (v, t) in g.values.iter().zip(grid.nodes()) {
            let expect = C::new(0.0, -sign) * C::new(0.0, sign * t).exp();
            calc = calc.max((v - expect).norm());
        }
    }
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let g: Vec<C> = (0..32).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mu = rng.random_range(0.0..1e6);
        let field = SpectralField1D::new(grid, g).unwrap();
        let q = apply_q_inverse(&field, mu).unwrap();
        worst = worst.max(q.max_abs() / field.max_abs());
    }
    s.check(
        "operator calculus",
        calc <= 1e-12 && worst <= 1.0,
        format!("L⁻¹(e^{{±iτ}}) error {calc:.2e} (≤ 1e-12); max ‖Q⁻¹g‖∞/‖g‖∞ over 1000 trials {worst:.3} (≤ 1)"),
        t0,
    );
}

fn analytic_oracle(s: &mut Suite) {
    let t0 = Instant::now();
    let mut rotation = 0.0f64;
    for eps in [1.0, 1e-3] {
        let cfg = config("scalar_smooth", |c| {
            c.scalar.c = "0".into();
            c.scalar.r = "zero".into();
            c.phase = PhaseMethod::Exact;
            c.epsilons = vec![eps];
            c.n_ts = vec![64];
        });
        let run = run_ngo(&cfg, eps, 64).unwrap();
        let t = cfg.t_final;
        for (u, x) in run.components[0].iter().zip(run.grid.nodes()) {
            let a = 1.5 + (2.0 * x).cos();
            let u0 = C::new(1.0 + 0.5 * (2.0 * x).cos(), 1.0 + 0.5 * (2.0 * x).sin());
            let expect = u0 * C::new(0.0, a * t / eps).exp();
            rotation = rotation.max((u - expect).norm());
        }
    }
    let (c, lambda) = (1.0, 0.5);
    let mut orders = Vec::new();
    for eps in [1.0, 1e-3] {
        let ns = [40usize, 80, 160, 320];
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let cfg = config("scalar_smooth", |cf| {
                    cf.scalar.c = c.to_string();
                    cf.scalar.r = lambda.to_string();
                    cf.phase = PhaseMethod::Exact;
                    cf.epsilons = vec![eps];
                    cf.n_ts = vec![n];
                });
                let t = cfg.t_final;
                let run = run_ngo(&cfg, eps, n).unwrap();
                run.components[0]
                    .iter()
                    .zip(run.grid.nodes())
                    .map(|(u, x)| {
                        let y = x - c * t;
                        let phase = 1.5 * t + ((2.0 * x).sin() - (2.0 * y).sin()) / (2.0 * c);
                        let u0 = C::new(1.0 + 0.5 * (2.0 * y).cos(), 1.0 + 0.5 * (2.0 * y).sin());
                        let expect = u0 * (-lambda * t).exp() * C::new(0.0, phase / eps).exp();
                        (u - expect).norm()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let n: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        orders.push((eps, -loglog_slope(&n, &errs), errs[errs.len() - 1]));
    }
    let first_order = orders.iter().all(|(_, p, _)| *p >= 0.8);
    s.check(
        "analytic oracle",
        rotation <= 1e-10 && first_order,
        format!(
            "c = r = 0: max error {rotation:.2e} (≤ 1e-10); c = 1, r = u/2 vs closed form: {}",
            orders
                .iter()
                .map(|(e, p, last)| format!("ε={e}: order {p:.2}, error {last:.2e} at N=320"))
                .collect::<Vec<_>>()
                .join("; ")
        ),
        t0,
    );
}

fn main() {
    let mut s = Suite { passed: 0, failed: Vec::new() };
    operator_calculus(&mut s);
    analytic_oracle(&mut s);

    let t0 = Instant::now();
    let smooth = config("scalar_smooth", |c| c.n_ts = vec![20, 40, 100, 200]);
    let (base, slopes, flat) = sweep(&smooth);
    s.check(
        "uniform first order, scalar",
        slopes.iter().all(|(_, p)| (0.8..=1.2).contains(p)) && flat <= 3.0,
        format!("slopes {} (in [0.8, 1.2]); max error ratio across ε {flat:.2} (≤ 3)", fmt_slopes(&slopes)),
        t0,
    );

    let t0 = Instant::now();
    let uncorrected = config("scalar_smooth", |c| {
        c.init = InitMode::Uncorrected;
        c.epsilons = vec![1e-2];
        c.n_ts = vec![100];
    });
    let bad = error_at(&run_convergence(&uncorrected, &ReferenceCache::new()).unwrap(), 1e-2, 100);
    let good = error_at(&base, 1e-2, 100);
    s.check(
        "correction necessity",
        bad >= 2.0 * good,
        format!("ε = 1e-2, N_ts = 100: uncorrected {bad:.3e} vs corrected {good:.3e}, ratio {:.2} (≥ 2)", bad / good),
        t0,
    );

    let t0 = Instant::now();
    let upwind = config("scalar_smooth", |c| {
        c.phase = PhaseMethod::Upwind1;
        c.epsilons = vec![1e-3];
        c.n_ts = vec![100];
    });
    let bad = error_at(&run_convergence(&upwind, &ReferenceCache::new()).unwrap(), 1e-3, 100);
    let good = error_at(&base, 1e-3, 100);
    s.check(
        "phase accuracy sensitivity",
        bad >= 5.0 * good,
        format!("ε = 1e-3, N_ts = 100: upwind1 {bad:.3e} vs spectral_rk4 {good:.3e}, ratio {:.1} (≥ 5)", bad / good),
        t0,
    );

    let t0 = Instant::now();
    let asym = config("scalar_smooth", |c| {
        c.epsilons = vec![1e-1, 1e-2, 1e-3];
        c.n_ts = vec![200];
    });
    let report = run_asymptotic_compare(&asym).unwrap();
    let eps: Vec<f64> = report.rows.iter().map(|r| r.epsilon).collect();
    let dist: Vec<f64> = report.rows.iter().map(|r| r.linf_error).collect();
    let slope = loglog_slope(&eps, &dist);
    s.check(
        "asymptotic model distance",
        (0.8..=1.2).contains(&slope),
        format!(
            "distances {} at N_ts = 200; slope {slope:.3} (1 ± 0.2)",
            eps.iter().zip(&dist).map(|(e, d)| format!("ε={e}: {d:.2e}")).collect::<Vec<_>>().join(", ")
        ),
        t0,
    );

    let t0 = Instant::now();
    let vanishing = config("scalar_vanishing_a", |c| c.n_ts = vec![20, 40, 100, 200]);
    let (_, slopes, flat) = sweep(&vanishing);
    s.check(
        "vanishing a robustness",
        slopes.iter().all(|(_, p)| (0.8..=1.2).contains(p)) && flat <= 5.0,
        format!("a = 1 + cos 2x: slopes {} (in [0.8, 1.2]); max ratio across ε {flat:.2} (≤ 5)", fmt_slopes(&slopes)),
        t0,
    );

    let t0 = Instant::now();
    let system = config("system", |c| c.n_ts = vec![20, 40, 100, 200]);
    let (_, slopes, flat) = sweep(&system);
    s.check(
        "uniform first order, 2x2 system",
        slopes.iter().all(|(_, p)| (0.8..=1.2).contains(p)) && flat <= 3.0,
        format!("slopes {} (in [0.8, 1.2]); max ratio across ε {flat:.2} (≤ 3)", fmt_slopes(&slopes)),
        t0,
    );

    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for eps in [1.0, 1e-2, 1e-3] {
        let p = system_problem(&system, eps, 256).unwrap();
        let grid = p.xgrid;
        let norm = |u1: &[C], u2: &[C]| u1.iter().chain(u2).map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing();
        for (transport, splitting) in [(Transport::Spectral, Splitting::Strang), (Transport::Spectral, Splitting::Lie)] {
            let settings = DirectSettings { grid, dt: 1e-4, transport, splitting };
            let mut last: Option<f64> = None;
            system_direct_reference_with(&p, 0.1, settings, |_, u1, u2| {
                let n = norm(u1, u2);
                if let Some(prev) = last {
                    worst = worst.max((n - prev).abs() / prev);
                }
                last = Some(n);
            })
            .unwrap();
        }
    }
    s.check(
        "2x2 direct norm conservation",
        worst <= 1e-12,
        format!("skew C: max per-step relative change of ∫|u₁|²+|u₂|² {worst:.2e} (≤ 1e-12)"),
        t0,
    );

    let t0 = Instant::now();
    let hopping = config("hopping", |c| c.hopping.repeats = 5);
    let out = run_hopping(&hopping).unwrap();
    let hop_secs = t0.elapsed().as_secs_f64();
    let case = |eps: f64| out.cases.iter().find(|c| c.epsilon == eps).unwrap();
    let (one, small) = (case(1.0), case(1.0 / 32.0));
    let (r1, r32) = (one.reference.as_ref().unwrap(), small.reference.as_ref().unwrap());
    let t0 = Instant::now();
    s.check(
        "hopping (a) direct mass",
        r1.mass_drift <= 1e-10 && r32.mass_drift <= 1e-10,
        format!(
            "max |∫∫(f⁺+f⁻)(t) − ∫∫(f⁺+f⁻)(0)| over t ≤ 2: {:.2e} (ε = 1), {:.2e} (ε = 1/32) (≤ 1e-10)",
            r1.mass_drift, r32.mass_drift
        ),
        t0,
    );
    let drift = |c: &ngo_harness::runs::HoppingCase| (c.ngo_mass.1 - c.ngo_mass.0).abs();
    let dens = |c: &ngo_harness::runs::HoppingCase| (c.ngo_density_mass.1 - c.ngo_density_mass.0).abs();
    let avg = |c: &ngo_harness::runs::HoppingCase| (c.ngo_averaged_mass.1 - c.ngo_averaged_mass.0).abs();
    s.check(
        "hopping (a) NGO mass",
        drift(one) <= 1e-10 && drift(small) <= 1e-10,
        format!(
            "reconstructed mass {:.3} drifts {:.2e} (ε = 1), {:.2e} (ε = 1/32) (≤ 1e-10); \
             with refined momentum quadrature {:.2e}, {:.2e}; ∫∫Π(F⁺+F⁻) drifts {:.2e}, {:.2e}",
            one.ngo_mass.0,
            drift(one),
            drift(small),
            dens(one),
            dens(small),
            avg(one),
            avg(small)
        ),
        t0,
    );
    s.check(
        "hopping (b) ε = 1 agreement",
        r1.slice_error <= 5e-2 && r1.density_error <= 5e-2,
        format!(
            "NGO (N_x = 32, N_p = 64, N_τ = 8, dt = 0.05) vs direct (N_x = {}, N_p = {}, dt = {}): slices {:.2e}, densities {:.2e} (≤ 5e-2)",
            r1.n_x, r1.n_p, r1.dt, r1.slice_error, r1.density_error
        ),
        t0,
    );
    s.check(
        "hopping (c) ε = 1/32 densities",
        r32.density_error <= 1e-1,
        format!(
            "vs direct (N_x = {}, N_p = {}, dt = {}): densities {:.2e} (≤ 1e-1); slices {:.2e}",
            r32.n_x, r32.n_p, r32.dt, r32.density_error, r32.slice_error
        ),
        t0,
    );
    let ratio = one.ngo_seconds.max(small.ngo_seconds) / one.ngo_seconds.min(small.ngo_seconds);
    s.check(
        "hopping (d) NGO cost independent of ε",
        ratio <= 1.3 && r32.seconds > r1.seconds,
        format!(
            "NGO {:.3} s (ε = 1), {:.3} s (ε = 1/32), ratio {ratio:.2} (≤ 1.3); direct {:.2} s → {:.2} s",
            one.ngo_seconds, small.ngo_seconds, r1.seconds, r32.seconds
        ),
        t0,
    );
    println!("     (hopping runs took {hop_secs:.1} s)");

    let t0 = Instant::now();
    let mut same = Vec::new();
    let small_scalar = config("scalar_smooth", |c| {
        c.epsilons = vec![1.0, 1e-2];
        c.n_ts = vec![20, 40];
    });
    let small_system = config("system", |c| {
        c.epsilons = vec![1.0, 1e-2];
        c.n_ts = vec![20, 40];
    });
    for cfg in [&small_scalar, &small_system] {
        let a = run_convergence(cfg, &ReferenceCache::new()).unwrap().body_without_timing().unwrap();
        let b = run_convergence(cfg, &ReferenceCache::new()).unwrap().body_without_timing().unwrap();
        same.push((cfg.preset.clone(), a == b));
    }
    let ts = config("scalar_timeseries", |_| {});
    let series = |c: &RunConfig| {
        let t = run_timeseries(c).unwrap();
        (
            ngo_harness::report::to_csv(&t.series).unwrap(),
            ngo_harness::report::to_csv(&t.snapshots).unwrap(),
            t.gaps.body_without_timing().unwrap(),
        )
    };
    same.push((ts.preset.clone(), series(&ts) == series(&ts)));
    let hop = config("hopping_eps1", |c| {
        c.t_final = 0.5;
        c.reference.n_d = Some(64);
        c.reference.n_p = Some(64);
        c.reference.dt_d = Some(0.01);
    });
    let kinetic = |c: &RunConfig| {
        let o = run_hopping(c).unwrap();
        (
            ngo_harness::report::to_csv(&o.slices).unwrap(),
            ngo_harness::report::to_csv(&o.densities).unwrap(),
            o.timings.body_without_timing().unwrap(),
        )
    };
    same.push((hop.preset.clone(), kinetic(&hop) == kinetic(&hop)));
    s.check(
        "determinism",
        same.iter().all(|(_, ok)| *ok),
        format!(
            "bit-identical CSV bodies on repeat: {}",
            same.iter().map(|(p, ok)| format!("{p} {}", if *ok { "yes" } else { "no" })).collect::<Vec<_>>().join(", ")
        ),
        t0,
    );

    println!("acceptance: {} passed, {} failed", s.passed, s.failed.len());
    if !s.failed.is_empty() {
        println!("failed: {}", s.failed.join(", "));
        if std::env::var("NGO_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
