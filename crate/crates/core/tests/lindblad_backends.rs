use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinsq_core::lindblad::embed::to_full;
use spinsq_core::lindblad::*;
use spinsq_core::meanfield::ModelParams;
use spinsq_core::observables::bloch_from_rho;

/// Random permutation-invariant state: `d_j·ρ_j` with each `ρ_j` a random
/// positive matrix, blocks weighted and normalized jointly.
fn random_state(basis: &Basis, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let mut rho = DensityMatrix::zeros(basis.clone());
    for (k, bl) in basis.blocks().iter().enumerate() {
        let g: Vec<Complex64> =
            (0..bl.dim * bl.dim).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let w = rng.random::<f64>();
        for b in 0..bl.dim {
            for a in 0..bl.dim {
                let v: Complex64 = (0..bl.dim).map(|c| g[a + bl.dim * c] * g[b + bl.dim * c].conj()).sum();
                let idx = basis.index(k, a, b);
                rho.data_mut()[idx] = v * w;
            }
        }
    }
    rho.normalize().unwrap();
    rho
}

fn random_params(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    (u(-1.5, 1.5), u(-1.5, 1.5), u(-0.8, 0.8), u(0.3, 1.5))
}

#[test]
fn reduced_backends_match_full_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for n in [2, 4, 6] {
        for _ in 0..5 {
            let (vx, vy, om, g) = random_params(&mut rng);
            let p_perm = ModelParams { gamma_i: g, gamma_c: 0.0, ..ModelParams::general(vx, vy, om, 0.0) };
            let p_dicke = ModelParams::general(vx, vy, om, g);
            let cases = [
                (build_liouvillian_independent(&Basis::perm(n).unwrap(), &p_perm).unwrap(), p_perm),
                (build_liouvillian_collective(&Basis::dicke(n).unwrap(), &p_dicke).unwrap(), p_dicke),
            ];
            for (l, p) in cases {
                let rho0 = random_state(l.basis(), &mut rng);
                let full = brute_force_liouvillian(n, &p).unwrap();
                let reduced = evolve(&l, &rho0, 4.0, 1e-12, 19).unwrap();
                let exact = evolve(&full, &to_full(&rho0).unwrap(), 4.0, 1e-12, 19).unwrap();
                assert_eq!(reduced.states.len(), 20);
                for (a, b) in reduced.states.iter().zip(&exact.states) {
                    let d = to_full(a).unwrap().trace_distance(b).unwrap();
                    worst = worst.max(d);
                }
            }
        }
    }
    assert!(worst < 1e-8, "worst trace distance {worst:e}");
}

#[test]
fn full_space_with_both_channels_preserves_invariants() {
    let mut p = ModelParams::general(0.7, -0.4, 0.3, 1.0);
    p.gamma_i = 0.5;
    let l = brute_force_liouvillian(4, &p).unwrap();
    let traj = evolve(&l, &DensityMatrix::all_down(l.basis().clone()), 20.0, 1e-10, 40).unwrap();
    for s in &traj.states {
        assert!((s.trace() - 1.0).norm() < 1e-9);
        assert!(s.hermiticity_error() < 1e-12);
        assert!(s.min_eigenvalue() > -1e-8);
    }
}

#[test]
fn trace_drift_over_long_runs() {
    let l = build_liouvillian_collective(&Basis::dicke(20).unwrap(), &ModelParams::collective_xy(0.6, 1.0)).unwrap();
    let traj = evolve(&l, &DensityMatrix::all_down(l.basis().clone()), 100.0, 1e-10, 10).unwrap();
    for s in &traj.states {
        assert!((s.trace() - 1.0).norm() < 1e-9);
    }
}

#[test]
fn frozen_generator_leaves_state_unchanged() {
    let l = build_liouvillian_collective(&Basis::dicke(5).unwrap(), &ModelParams::general(0.0, 0.0, 0.0, 0.0)).unwrap();
    let rho0 = random_state(l.basis(), &mut ChaCha8Rng::seed_from_u64(5));
    let traj = evolve(&l, &rho0, 10.0, 1e-10, 5).unwrap();
    for s in &traj.states {
        assert_eq!(s.data(), rho0.data());
    }
}

#[test]
fn single_atom_population_decays_exponentially() {
    let l = build_liouvillian_collective(&Basis::dicke(1).unwrap(), &ModelParams::general(0.0, 0.0, 0.0, 0.7)).unwrap();
    let mut rho0 = DensityMatrix::zeros(l.basis().clone());
    rho0.data_mut()[l.basis().index(0, 1, 1)] = Complex64::new(1.0, 0.0);
    let traj = evolve(&l, &rho0, 5.0, 1e-12, 10).unwrap();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        assert!((s.get(0, 1, 1).re - (-0.7 * t).exp()).abs() < 1e-11);
    }
}

#[test]
fn oscillatory_phase_relaxes_to_zero_magnetization() {
    let l = build_liouvillian_collective(&Basis::dicke(50).unwrap(), &ModelParams::collective_xy(0.6, 1.0)).unwrap();
    let traj = evolve(&l, &DensityMatrix::all_down(l.basis().clone()), 200.0, 1e-9, 4).unwrap();
    let z: Vec<f64> = traj.states.iter().map(|s| bloch_from_rho(s).0.z).collect();
    assert!(z[0] == -1.0);
    // finite-N remnant of the mean-field value 0, same band as the N=100 check
    assert!(z[4].abs() < 0.25, "{z:?}");
    assert!((z[4] - z[3]).abs() < 1e-4);
}

#[test]
fn steady_states_carry_no_transverse_spin() {
    let cases = [
        build_liouvillian_collective(&Basis::dicke(30).unwrap(), &ModelParams::collective_xy(0.45, 1.0)).unwrap(),
        build_liouvillian_collective(&Basis::dicke(30).unwrap(), &ModelParams::collective_xy(0.8, 1.0)).unwrap(),
        build_liouvillian_independent(&Basis::perm(20).unwrap(), &ModelParams::independent_xy(1.2, 1.0)).unwrap(),
    ];
    for l in &cases {
        let ss = steady_state(l, &SteadyOptions::default()).unwrap();
        let (_, raw) = bloch_from_rho(&ss.rho);
        assert!(raw[0].abs() < 1e-8 && raw[1].abs() < 1e-8, "{raw:?}");
        assert!(ss.rho.min_eigenvalue() > -1e-8);
    }
}

#[test]
fn collective_step_sharpens_at_n100() {
    let z = |v: f64| {
        let l = build_liouvillian_collective(&Basis::dicke(100).unwrap(), &ModelParams::collective_xy(v, 1.0)).unwrap();
        bloch_from_rho(&steady_state(&l, &SteadyOptions::default()).unwrap().rho).0.z
    };
    assert!(z(0.4) < -0.9);
    assert!(z(0.6) > -0.25);
}

#[test]
fn mean_field_accuracy_improves_with_n() {
    // below the transition the mean-field steady state points straight down
    let dev: Vec<f64> = [10, 100, 1000]
        .iter()
        .map(|&n| {
            let l = build_liouvillian_collective(&Basis::dicke(n).unwrap(), &ModelParams::collective_xy(0.25, 1.0))
                .unwrap();
            let ss = steady_state(&l, &SteadyOptions::default()).unwrap();
            (bloch_from_rho(&ss.rho).0.z + 1.0).abs()
        })
        .collect();
    assert!(dev[0] > dev[1] && dev[1] > dev[2], "{dev:?}");
}

#[test]
fn null_space_and_time_march_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..3 {
        let (vx, vy, om, g) = random_params(&mut rng);
        let p = ModelParams::general(vx, vy, om, g);
        let l = build_liouvillian_collective(&Basis::dicke(16).unwrap(), &p).unwrap();
        let a = steady_state(&l, &SteadyOptions { method: SteadyMethod::NullSpace, ..Default::default() }).unwrap();
        let march = SteadyOptions { method: SteadyMethod::TimeMarch, t_max: Some(5000.0), ..Default::default() };
        let b = steady_state(&l, &march).unwrap();
        assert!(a.rho.trace_distance(&b.rho).unwrap() < 1e-6);
    }
}

#[test]
fn exact_drive_state_matches_direct_solve() {
    let l = build_liouvillian_collective(&Basis::dicke(60).unwrap(), &ModelParams::driven(0.0, 0.4, 1.0)).unwrap();
    let exact = steady_state(&l, &SteadyOptions::default()).unwrap();
    assert_eq!(exact.method, SteadyMethod::Exact);
    let direct = steady_state(&l, &SteadyOptions { method: SteadyMethod::NullSpace, ..Default::default() }).unwrap();
    assert!(exact.rho.trace_distance(&direct.rho).unwrap() < 1e-9);
}
