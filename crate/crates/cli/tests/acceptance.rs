//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.
//! Run with `cargo test -p spinsq-cli --test acceptance -- --nocapture`.

use spinsq_cli::budget::{budget, BudgetInput, ScalingLaw};
use spinsq_cli::config::{Backend, SweepConfig, SweepParam, SweepSpec};
use spinsq_cli::fit::{exponent_sensitivity, fit_powerlaw};
use spinsq_cli::optimize::{min_xi2_over_omega, steady_xi2};
use spinsq_cli::oracle::oracle_check;
use spinsq_cli::sweep::run_sweep;
use spinsq_core::fluctuations::xi2_analytic;
use spinsq_core::lindblad::SteadyOptions;
use spinsq_core::lindblad::{build_liouvillian_collective, steady_state, Basis};
use spinsq_core::meanfield::{
    constant_of_motion, integrate, orbit_period, relaxation, stability_spectrum, time_average, BlochVector, Model,
    ModelParams,
};
use spinsq_core::observables::{wigner, WignerGrid};
use std::f64::consts::PI;

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Driven-model squeezing written out independently of the library.
fn driven_formula(vx: f64, om: f64) -> f64 {
    let r = (vx * vx / 4.0 + vx.powi(4) / 4.0 + om.powi(4)).sqrt();
    (1.0 + vx * vx - 2.0 * om * om - 2.0 * r) / (1.0 - 4.0 * om * om).sqrt()
}

#[test]
fn criterion_1_paramagnet_squeezing() {
    let mut worst = 0.0f64;
    for v in linspace(-0.485, 0.485, 50) {
        let xi2 = xi2_analytic(&ModelParams::collective_xy(v, 1.0)).unwrap();
        worst = worst.max((xi2 - 1.0 / (1.0 + 2.0 * v.abs())).abs());
    }
    let edge = xi2_analytic(&ModelParams::collective_xy(0.499, 1.0)).unwrap();
    let pass = worst < 1e-8 && (edge - 0.5).abs() < 1e-2;
    verdict(1, pass, &format!("max |err| = {worst:.2e} over 50 points, ξ²(0.499) = {edge:.5}"));
}

#[test]
fn criterion_2_driven_closed_form() {
    let grid = linspace(0.0, 0.49, 50);
    let mut general = 0.0f64;
    for vx in [0.0, 1.0, 5.0] {
        for &om in &grid {
            let xi2 = xi2_analytic(&ModelParams::driven(vx, om, 1.0)).unwrap();
            general = general.max((xi2 - driven_formula(vx, om)).abs());
        }
    }
    let (mut free, mut strong) = (0.0f64, 0.0f64);
    for &om in &grid {
        let root = (1.0 - 4.0 * om * om).sqrt();
        free = free.max((xi2_analytic(&ModelParams::driven(0.0, om, 1.0)).unwrap() - root).abs());
        strong = strong.max((xi2_analytic(&ModelParams::driven(1e3, om, 1.0)).unwrap() - 0.5 * root).abs());
    }
    let pass = general < 1e-8 && free < 1e-8 && strong < 1e-3;
    verdict(2, pass, &format!("general {general:.2e}, Vx=0 {free:.2e}, Vx=1e3 vs half {strong:.2e}"));
}

#[test]
fn criterion_3_exact_vs_analytic_at_n1000() {
    let opts = SteadyOptions::default();
    let closed = |om: f64| (1.0 - 4.0 * om * om).sqrt();
    let mut worst_rel = 0.0f64;
    for om in linspace(0.05, 0.35, 7) {
        let xi2 = steady_xi2(1000, 0.0, om, 1.0, &opts).unwrap();
        worst_rel = worst_rel.max((xi2 / closed(om) - 1.0).abs());
    }
    let mut upturn = Vec::new();
    for om in [0.47, 0.48, 0.49] {
        let xi2 = steady_xi2(1000, 0.0, om, 1.0, &opts).unwrap();
        upturn.push((om, xi2, closed(om)));
    }
    let low_ok = worst_rel < 0.05;
    let high_ok = upturn.iter().all(|&(_, x, c)| x > c);
    let detail = upturn.iter().map(|(o, x, c)| format!("Ω={o}: {x:.4} vs {c:.4}")).collect::<Vec<_>>().join(", ");
    verdict(3, low_ok && high_ok, &format!("Ω ≤ 0.35 max rel {worst_rel:.3}; {detail}"));
}

#[test]
fn criterion_4_finite_size_scaling() {
    let opts = SteadyOptions::default();
    let mut pts = Vec::new();
    for n in [100, 200, 500, 1000, 2000] {
        let m = min_xi2_over_omega(n, 0.0, &opts).unwrap();
        assert!(!m.no_squeezing);
        pts.push((n as f64, m.xi2));
    }
    let fit = fit_powerlaw(&pts).unwrap();
    let sens = exponent_sensitivity(&pts).unwrap();
    let pass = (-0.34..=-0.24).contains(&fit.exponent) && (1.3..=2.1).contains(&fit.prefactor);
    let tail = sens.iter().map(|(n, f)| format!("N≥{n}: {:.3}", f.exponent)).collect::<Vec<_>>().join(", ");
    verdict(4, pass, &format!("ξ²_min ≈ {:.3}·N^{:.3} ({tail})", fit.prefactor, fit.exponent));
}

fn z_curve(backend: Backend, model: Model, n: usize, grid: Vec<f64>) -> Vec<f64> {
    let cfg = SweepConfig {
        model,
        backend,
        n_atoms: n,
        sweep: Some(SweepSpec { param: SweepParam::Vx, grid }),
        ..Default::default()
    };
    let out = run_sweep(&cfg).unwrap();
    out.rows
        .iter()
        .map(|r| {
            assert!(r.is_ok(), "{}", r.status);
            r.bloch[2]
        })
        .collect()
}

#[test]
fn criterion_5_phase_diagram() {
    let grid = linspace(0.0, 1.0, 21);
    let mut monotone = true;
    let mut curves = Vec::new();
    for n in [10, 100] {
        let z = z_curve(Backend::Dicke, Model::CollectiveXy, n, grid.clone());
        monotone &= z.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        curves.push(z);
    }
    let at = |v: f64| grid.iter().position(|&g| (g - v).abs() < 1e-12).unwrap();
    let (z04, z06) = (curves[1][at(0.4)], curves[1][at(0.6)]);
    let jump = z04.abs() > 0.9 && z06.abs() < 0.25;

    let vs = vec![0.75, 1.0, 1.5, 2.0, 3.0];
    let z = z_curve(Backend::Perm, Model::IndependentXy, 100, vs.clone());
    let track = vs.iter().zip(&z).map(|(v, z)| (z + 1.0 / (2.0 * v)).abs()).fold(0.0, f64::max);
    let pass = monotone && jump && track < 0.1;
    verdict(
        5,
        pass,
        &format!("monotone {monotone}, N=100 Z(0.4)={z04:.3} Z(0.6)={z06:.3}, perm max |Z − Z̄| = {track:.3}"),
    );
}

#[test]
fn criterion_6_oracle_equivalence() {
    let r = oracle_check(&[2, 4, 6], 5, 20, 4.0).unwrap();
    assert_eq!(r.cases.len(), 30);
    verdict(6, r.max_distance < 1e-8, &format!("max trace distance {:.2e} over {} cases", r.max_distance, r.cases.len()));
}

fn on_sphere(x: f64, y: f64) -> BlochVector {
    BlochVector::new(x, y, -(1.0 - x * x - y * y).sqrt())
}

#[test]
fn criterion_7_meanfield_structure() {
    let p = ModelParams::collective_xy(0.6, 1.0);
    let traj = integrate(&p, on_sphere(0.5, 0.1), 100.0, 1e-10).unwrap();
    let c0 = constant_of_motion(&p, traj.states[0]).unwrap().0;
    let drift = traj.states.iter().map(|s| (constant_of_motion(&p, *s).unwrap().0 - c0).abs()).fold(0.0, f64::max);
    let radius = traj.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);

    let mut lam_err = 0.0f64;
    for vx in [0.0, 1.0, 5.0] {
        for om in [0.1, 0.25, 0.4, 0.45] {
            let dp = ModelParams::driven(vx, om, 1.0);
            let r = relaxation(&dp).unwrap();
            let point = BlochVector::new(0.0, 2.0 * om, -(1.0 - 4.0 * om * om).sqrt());
            let spec = stability_spectrum(&dp, point);
            let slowest = spec[..2].iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
            lam_err = lam_err.max((slowest - r.lambda).abs()).max((1.0 / slowest.abs() - r.tau).abs());
        }
    }

    let long = integrate(&p, on_sphere(0.5, 0.1), 400.0, 1e-10).unwrap();
    let period = orbit_period(&long, 0.0).unwrap();
    // Average over a whole number of orbits.
    let t_end = (long.times.last().unwrap() / period).floor() * period;
    let whole = integrate(&p, on_sphere(0.5, 0.1), t_end, 1e-10).unwrap();
    let avg = time_average(&whole, 0.0).unwrap();
    let orbit_ok = avg.z.abs() < 1e-2 && avg.x.abs() > 1e-2 && avg.y.abs() > 1e-2;

    let pass = drift < 1e-6 && radius < 1e-8 && lam_err < 1e-9 && orbit_ok;
    verdict(
        7,
        pass,
        &format!(
            "log|C| drift {drift:.1e}, radius drift {radius:.1e}, λ/τ err {lam_err:.1e}, ⟨X,Y,Z⟩ = ({:.3}, {:.3}, {:.1e})",
            avg.x, avg.y, avg.z
        ),
    );
}

fn angle_between(t1: f64, p1: f64, t2: f64, p2: f64) -> f64 {
    let c = t1.sin() * t2.sin() * (p1 - p2).cos() + t1.cos() * t2.cos();
    c.clamp(-1.0, 1.0).acos()
}

#[test]
fn criterion_8_wigner_peaks() {
    let (th, ph) = WignerGrid::angles(91, 180);
    let tol = 10f64.to_radians();
    let steady = |v: f64| {
        let p = ModelParams::collective_xy(v, 1.0).with_n_atoms(50);
        let l = build_liouvillian_collective(&Basis::dicke(50).unwrap(), &p).unwrap();
        steady_state(&l, &SteadyOptions::default()).unwrap().rho
    };
    let w = wigner(&steady(0.6), &th, &ph).unwrap();
    let peaks = w.local_maxima();
    let targets = [PI / 4.0, 5.0 * PI / 4.0];
    let two = targets
        .iter()
        .all(|&t| peaks.len() >= 2 && peaks[..2].iter().any(|p| angle_between(p.theta, p.phi, PI / 2.0, t) < tol));
    let w = wigner(&steady(0.4), &th, &ph).unwrap();
    let top = w.local_maxima()[0];
    let south = angle_between(top.theta, top.phi, PI, 0.0);
    let pass = two && south < tol;
    let found =
        peaks.iter().take(2).map(|p| format!("({:.1}°, {:.1}°)", p.theta.to_degrees(), p.phi.to_degrees())).collect::<Vec<_>>();
    verdict(8, pass, &format!("V=0.6 peaks {}, V=0.4 peak {:.1}° from south", found.join(" "), south.to_degrees()));
}

#[test]
fn criterion_9_budget() {
    let r = budget(BudgetInput {
        n_atoms: 1e4,
        cooperativity: 0.1,
        gamma_i: 2.0 * PI * 1e4,
        large_vx: false,
        law: ScalingLaw::DEFAULT,
    })
    .unwrap();
    let pass = (r.xi2_0 - 0.12).abs() <= 0.01
        && (r.xi2_total - 0.13).abs() <= 0.01
        && (r.tau * 1e6 - 0.3).abs() <= 0.05
        && r.omega_c == 2.0 * PI * 5e6;
    verdict(
        9,
        pass,
        &format!(
            "ξ²₀ = {:.4}, ξ²_total = {:.4}, τ = {:.3} μs, Ωc = 2π × {:.6e} Hz",
            r.xi2_0,
            r.xi2_total,
            r.tau * 1e6,
            r.omega_c_hz
        ),
    );
}
