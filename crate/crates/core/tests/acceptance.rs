//! Acceptance gate. Every criterion prints one `AC<k> PASS|FAIL` line to stdout
//! (outside the test harness capture) before asserting.
//!
//! The criteria carry wall-clock budgets, so the tests take a shared lock and run
//! one at a time. AC8 and AC9 are the long runs and are ignored by default:
//! `cargo test --test acceptance -- --ignored`.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::Rng;
use tfmbe::caputo::{apply_direct, gamma, l1_row, l1plus_row, quadratic_form, KernelKind};
use tfmbe::harness::benchmark::{adaptive_benchmark, benchmark_config, benchmark_initial, benchmark_params, Strategy};
use tfmbe::harness::coarsen::{coarsen_config, coarsening};
use tfmbe::harness::output::{write_series_csv, write_steps_csv, write_table_csv};
use tfmbe::harness::pde::{manufactured_params, pde_convergence};
use tfmbe::harness::singularity::initial_singularity;
use tfmbe::harness::{ode_convergence, ConvergenceRow, RunReport};
use tfmbe::sav::Stepper;
use tfmbe::soe::{fast_l1_apply, fast_l1plus_apply, HistoryBank, SoeApprox};
use tfmbe::spectral::{Grid2D, Model, Spectral};
use tfmbe::timemesh::{MeshSpec, TimeMesh};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, ok: bool, detail: &str) {
    let line = format!("AC{id} {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn within_budget(start: Instant, secs: u64) -> (bool, String) {
    let el = start.elapsed();
    (el < Duration::from_secs(secs), format!("runtime {:.1}s (budget {secs}s)", el.as_secs_f64()))
}

const NS: [usize; 4] = [64, 128, 256, 512];

/// Seed of the random tail for every table run on a random mesh.
const TAIL_SEED: u64 = 2;

fn orders(rows: &[ConvergenceRow]) -> Vec<f64> {
    rows.iter().filter_map(|r| r.order).collect()
}

fn fmt_orders(o: &[f64]) -> String {
    o.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ")
}

#[test]
fn ac01_uniform_smooth_solution() {
    let _g = serial();
    let start = Instant::now();
    let expected: [(f64, [f64; 4]); 3] = [
        (0.1, [3.44e-5, 8.61e-6, 2.15e-6, 5.38e-7]),
        (0.5, [3.39e-5, 8.51e-6, 2.13e-6, 5.35e-7]),
        (0.9, [2.25e-5, 5.83e-6, 1.51e-6, 3.88e-7]),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (alpha, errs) in expected {
        let rows = ode_convergence(alpha, 2.5, &MeshSpec::uniform(1.0, 64), &NS).unwrap();
        for (r, e) in rows.iter().zip(errs) {
            ok &= ((r.error - e) / e).abs() <= 0.2;
        }
        let o = orders(&rows);
        ok &= o.iter().all(|x| (x - 2.0).abs() <= 0.1);
        detail += &format!("a={alpha}: e512={:.2e} orders [{}]; ", rows[3].error, fmt_orders(&o));
    }
    let (fast, t) = within_budget(start, 5);
    report(1, ok && fast, &format!("{detail}{t}"));
    assert!(ok && fast);
}

#[test]
fn ac02_uniform_rough_solution() {
    let _g = serial();
    let start = Instant::now();
    let expected: [(f64, [f64; 4]); 3] = [
        (0.1, [5.90e-3, 3.39e-3, 1.95e-3, 1.12e-3]),
        (0.5, [4.65e-3, 2.67e-3, 1.53e-3, 8.80e-4]),
        (0.9, [1.10e-3, 6.29e-4, 3.61e-4, 2.07e-4]),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (alpha, errs) in expected {
        // gamma = 1 puts T0 = min(1/gamma, T) = T: the whole mesh is uniform
        let spec = MeshSpec::graded_random_tail(1.0, 64, 1.0, TAIL_SEED);
        let rows = ode_convergence(alpha, 0.8, &spec, &NS).unwrap();
        for (r, e) in rows.iter().zip(errs) {
            ok &= ((r.error - e) / e).abs() <= 0.3;
        }
        let o = orders(&rows);
        ok &= o.iter().all(|x| *x >= 0.68 && *x <= 0.94);
        detail += &format!("a={alpha}: e64={:.2e} orders [{}]; ", rows[0].error, fmt_orders(&o));
    }
    let (fast, t) = within_budget(start, 5);
    report(2, ok && fast, &format!("{detail}{t}"));
    assert!(ok && fast);
}

#[test]
fn ac03_grading_recovers_order() {
    let _g = serial();
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for alpha in [0.3, 0.7] {
        for (gamma, target) in [(2.0, 1.0), (4.0, 2.0), (5.0, 2.0)] {
            let spec = MeshSpec::graded_random_tail(1.0, 64, gamma, TAIL_SEED);
            let rows = ode_convergence(alpha, 0.5, &spec, &NS).unwrap();
            let o = orders(&rows);
            ok &= o.iter().all(|x| (x - target).abs() <= 0.3);
            detail += &format!("a={alpha} g={gamma}: [{}]; ", fmt_orders(&o));
        }
    }
    let (fast, t) = within_budget(start, 10);
    report(3, ok && fast, &format!("{detail}{t}"));
    assert!(ok && fast);
}

#[test]
fn ac04_pde_orders() {
    let _g = serial();
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for model in [Model::Slope, Model::NoSlope] {
        for (gamma, target) in [(3.0, 1.2), (5.0, 2.0), (6.0, 2.0)] {
            let spec = MeshSpec::graded_random_tail(1.0, 64, gamma, TAIL_SEED);
            let rows = pde_convergence(&manufactured_params(model), 0.8, 0.4, &spec, &NS, 64).unwrap();
            let o = orders(&rows);
            ok &= o.iter().all(|x| (x - target).abs() <= 0.3);
            detail += &format!("{} g={gamma}: [{}]; ", model.name(), fmt_orders(&o));
        }
    }
    let (fast, t) = within_budget(start, 180);
    report(4, ok && fast, &format!("{detail}{t}"));
    assert!(ok && fast);
}

#[test]
fn ac05_kernel_properties() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = common::rng(5);
    let (mut form_min, mut diag_dev, mut oracle_dev) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut ordered = true;
    for _ in 0..200 {
        let n = rng.random_range(2..=40);
        let alpha = rng.random_range(0.05..0.95);
        let mesh = common::random_mesh(&mut rng, n, 1e-4, 1.0);

        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm2: f64 = w.iter().map(|x| x * x).sum();
        form_min = form_min.min(quadratic_form(&mesh, alpha, &w, KernelKind::L1Plus).unwrap() / norm2);

        for m in 1..=n {
            let a = l1_row(&mesh, alpha, m).unwrap();
            let ab = l1plus_row(&mesh, alpha, m).unwrap();
            ordered &= a.weights.iter().all(|&x| x > 0.0) && ab.weights.iter().all(|&x| x > 0.0);
            ordered &= a.weights.windows(2).all(|p| p[0] > p[1]);
            ordered &= m < 3 || ab.weights[1..].windows(2).all(|p| p[0] > p[1]);
            let scaled = ab.weight(0) * gamma(3.0 - alpha) * mesh.tau(m).powf(alpha);
            diag_dev = diag_dev.max((scaled - 1.0).abs());
        }

        // oracle on one row: the two nearest cells and up to ten others
        let m = rng.random_range(1..=n);
        let mut ks: Vec<usize> = vec![m, m.saturating_sub(1).max(1)];
        for _ in 0..10 {
            ks.push(rng.random_range(1..=m));
        }
        let a = l1_row(&mesh, alpha, m).unwrap();
        let ab = l1plus_row(&mesh, alpha, m).unwrap();
        for k in ks {
            let o = common::l1plus_entry_oracle(mesh.levels(), alpha, m, k);
            oracle_dev = oracle_dev.max((ab.weight(m - k) - o).abs() / o);
            let o = common::l1_entry_oracle(mesh.levels(), alpha, m, k);
            oracle_dev = oracle_dev.max((a.weight(m - k) - o).abs() / o);
        }
    }
    let ok = form_min >= -1e-12 && ordered && diag_dev <= 1e-13 && oracle_dev <= 1e-10;
    let (fast, t) = within_budget(start, 30);
    report(
        5,
        ok && fast,
        &format!(
            "min form/|w|^2 {form_min:.3e}, ordering {ordered}, diagonal dev {diag_dev:.1e}, oracle rel dev {oracle_dev:.1e}; {t}"
        ),
    );
    assert!(ok && fast);
}

#[test]
fn ac06_soe_suite() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = common::rng(6);
    let mut ok = true;
    let mut detail = String::new();
    for alpha in [0.1, 0.5, 0.9] {
        for eps in [1e-6, 1e-10] {
            let soe = SoeApprox::build(alpha, eps, 1e-4, 30.0).unwrap();
            let verified = soe.verify(10_000);
            ok &= verified <= eps;
            let mut worst: f64 = 0.0;
            for _ in 0..4 {
                let mesh = common::random_mesh(&mut rng, 50, 1e-4, 0.5);
                let inc: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
                let vmax = inc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let mut bank = HistoryBank::new(&soe, 1);
                for n in 1..=50 {
                    let dp = apply_direct(&l1plus_row(&mesh, alpha, n).unwrap(), &inc).unwrap();
                    let d1 = apply_direct(&l1_row(&mesh, alpha, n).unwrap(), &inc).unwrap();
                    let fp = fast_l1plus_apply(&bank, &soe, &mesh, alpha, n, inc[n - 1]).unwrap();
                    let f1 = fast_l1_apply(&bank, &soe, &mesh, alpha, n, inc[n - 1]).unwrap();
                    worst = worst.max((fp - dp).abs().max((f1 - d1).abs()) / (eps * vmax));
                    bank.advance(&soe, n, mesh.tau(n), &[inc[n - 1]]).unwrap();
                }
            }
            ok &= worst <= 10.0;
            detail += &format!(
                "a={alpha} eps={eps:e}: {} terms, verified {verified:.1e}, fast/direct {worst:.2}eps; ",
                soe.len()
            );
        }
    }
    let (fast, t) = within_budget(start, 30);
    report(6, ok && fast, &format!("{detail}{t}"));
    assert!(ok && fast);
}

fn energy_checks(run: &RunReport) -> (bool, f64) {
    let e0 = run.summary.initial_energy;
    let bounded = run.accepted().all(|r| r.modified_energy <= e0 + 1e-9 * e0.abs());
    (bounded, run.summary.telescoping_residual)
}

#[test]
fn ac07_energy_dissipation() {
    let _g = serial();
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for model in [Model::Slope, Model::NoSlope] {
        for alpha in [0.4, 0.7] {
            let cfg = benchmark_config(model, alpha, Strategy::Adaptive, 64, 30.0);
            match adaptive_benchmark(&cfg) {
                Ok(run) => {
                    let (bounded, tele) = energy_checks(&run);
                    ok &= bounded && tele <= 1e-8;
                    detail += &format!(
                        "{} a={alpha}: {} steps, bound {bounded}, telescoping {tele:.1e}; ",
                        model.name(),
                        run.summary.accepted
                    );
                }
                Err(e) => {
                    ok = false;
                    detail += &format!("{} a={alpha}: {e}; ", model.name());
                }
            }
        }
    }
    let (fast, t) = within_budget(start, 300);
    report(7, ok && fast, &format!("{detail}{t}"));
    assert!(ok && fast);
}

#[test]
#[ignore = "full-scale run, about ten minutes"]
fn ac08_adaptive_step_counts_full() {
    let _g = serial();
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for (model, lo, hi) in [(Model::Slope, 3000, 6000), (Model::NoSlope, 2500, 5000)] {
        let cfg = benchmark_config(model, 0.7, Strategy::Adaptive, 128, 30.0);
        match adaptive_benchmark(&cfg) {
            Ok(run) => {
                let n = run.summary.accepted;
                ok &= (lo..=hi).contains(&n);
                detail += &format!("{}: {n} accepted in [{lo}, {hi}]; ", model.name());
            }
            Err(e) => {
                ok = false;
                detail += &format!("{}: {e}; ", model.name());
            }
        }
    }
    let (fast, t) = within_budget(start, 3600);
    report(8, ok && fast, &format!("{detail}{t}"));
    assert!(ok && fast);
}

#[test]
#[ignore = "long coarsening runs"]
fn ac09_coarsening_scaling_full() {
    let _g = serial();
    let mut ok = true;
    let mut detail = String::new();
    for (model, tol) in [(Model::Slope, 0.06), (Model::NoSlope, 0.08)] {
        for alpha in [0.4, 0.7, 1.0] {
            let cfg = coarsen_config(model, alpha, 64, 200.0, 1);
            match coarsening(&cfg) {
                Ok(r) => {
                    let f = &r.fits;
                    match model {
                        Model::Slope => {
                            let target = alpha / 3.0;
                            ok &= (f.energy_rate - target).abs() <= tol;
                            ok &= (f.roughness_rate - target).abs() <= tol;
                            detail += &format!(
                                "slope a={alpha}: beta {:.3} R {:.3} (target {target:.3}); ",
                                f.energy_rate, f.roughness_rate
                            );
                        }
                        Model::NoSlope => {
                            let target = alpha / 2.0;
                            ok &= (f.roughness_rate - target).abs() <= tol;
                            detail += &format!(
                                "no-slope a={alpha}: R {:.3} (target {target:.3}), energy per decade {:.3}; ",
                                f.roughness_rate, f.energy.slope
                            );
                        }
                    }
                }
                Err(e) => {
                    ok = false;
                    detail += &format!("{} a={alpha}: {e}; ", model.name());
                }
            }
        }
    }
    report(9, ok, &detail);
    assert!(ok);
}

#[test]
fn ac10_initial_singularity() {
    let _g = serial();
    let start = Instant::now();
    let alpha = 0.4;
    let grid = Grid2D::square(64).unwrap();
    let stepper = Stepper::new(Spectral::new(grid), benchmark_params(Model::Slope), alpha).unwrap();
    let mesh = TimeMesh::graded(1.0, 400, 5.0).unwrap();
    let fit = initial_singularity(&stepper, benchmark_initial(grid), &mesh, 10).unwrap();
    let ok = (fit.slope - (alpha - 1.0)).abs() <= 0.1;
    let (fast, t) = within_budget(start, 60);
    report(10, ok && fast, &format!("slope {:.4} (target {:.1}); {t}", fit.slope, alpha - 1.0));
    assert!(ok && fast);
}

fn all_outputs() -> Vec<Vec<u8>> {
    let mut outs = Vec::new();

    let spec = MeshSpec::graded_random_tail(1.0, 64, 4.0, 9);
    let rows = ode_convergence(0.7, 0.5, &spec, &NS).unwrap();
    let mut buf = Vec::new();
    write_table_csv(&mut buf, &rows).unwrap();
    outs.push(buf);

    let spec = MeshSpec::graded_random_tail(1.0, 16, 5.0, 9);
    let rows = pde_convergence(&manufactured_params(Model::NoSlope), 0.8, 0.4, &spec, &[16, 32], 16).unwrap();
    let mut buf = Vec::new();
    write_table_csv(&mut buf, &rows).unwrap();
    outs.push(buf);

    let cfg = benchmark_config(Model::Slope, 0.5, Strategy::Adaptive, 16, 1.0);
    let run = adaptive_benchmark(&cfg).unwrap();
    let mut buf = Vec::new();
    write_steps_csv(&mut buf, &run.records).unwrap();
    outs.push(buf);

    let mut cfg = coarsen_config(Model::NoSlope, 0.6, 16, 0.5, 9);
    cfg.window = (0.1, 0.5);
    let r = coarsening(&cfg).unwrap();
    let mut buf = Vec::new();
    write_steps_csv(&mut buf, &r.run.records).unwrap();
    outs.push(buf);

    let soe = SoeApprox::build(0.5, 1e-8, 1e-3, 10.0).unwrap();
    let pts: Vec<(f64, f64)> = (0..50)
        .map(|i| {
            let t = 1e-3 * 1.2f64.powi(i);
            (t, soe.eval(t))
        })
        .collect();
    let mut buf = Vec::new();
    write_series_csv(&mut buf, ("t", "kernel"), &pts).unwrap();
    outs.push(buf);
    outs
}

#[test]
fn ac11_determinism() {
    let _g = serial();
    let first = all_outputs();
    let second = all_outputs();
    let same = first.iter().zip(&second).filter(|(a, b)| a == b).count();
    let nonempty = first.iter().all(|b| b.len() > 100);
    let ok = same == first.len() && nonempty;
    report(
        11,
        ok,
        &format!("{same}/{} driver outputs byte-identical on rerun", first.len()),
    );
    assert!(ok);
}
