use num_complex::Complex64;
use spinsq_core::collective_spin::{spin_matrix, HalfInt, SpinKind};
use spinsq_core::error::Error;
use spinsq_core::fluctuations::{xi2_from_rotated, RotatedSpinMoments};
use spinsq_core::lindblad::*;
use spinsq_core::meanfield::ModelParams;
use spinsq_core::numerics::factorial::ln_binomial;
use spinsq_core::observables::*;
use std::f64::consts::PI;

fn coherent(n: usize, theta: f64, phi: f64) -> DensityMatrix {
    // amplitude of |j, m⟩ with k = j + m spins up
    let psi: Vec<Complex64> = (0..=n)
        .map(|k| {
            let mag = (0.5 * ln_binomial(n, k)).exp()
                * (0.5 * theta).sin().powi(k as i32)
                * (0.5 * theta).cos().powi((n - k) as i32);
            Complex64::from_polar(mag, -(k as f64) * phi)
        })
        .collect();
    // θ measured from the south pole here; flip to the usual polar angle
    DensityMatrix::pure(Basis::dicke(n).unwrap(), 0, &psi).unwrap()
}

fn steady(n: usize, p: ModelParams) -> DensityMatrix {
    let l = build_liouvillian_collective(&Basis::dicke(n).unwrap(), &p).unwrap();
    steady_state(&l, &SteadyOptions::default()).unwrap().rho
}

#[test]
fn coherent_states_agree_with_rotated_frame_formula() {
    for (th, ph) in [(0.3, 0.0), (1.2, 2.0), (2.5, -1.0), (PI / 2.0, 0.7)] {
        let rho = coherent(16, th, ph);
        let m = spin_moments(&rho);
        let r = xi2_from_moments(&m, 16).unwrap();
        assert!((r.bloch_length - 8.0).abs() < 1e-10);
        let (e1, e2) = transverse_frame(m.mean);
        let second = |u: [f64; 3], v: [f64; 3]| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += u[a] * m.second[a][b] * v[b];
                }
            }
            s
        };
        let rot = RotatedSpinMoments { xx: second(e1, e1) / 16.0, yy: second(e2, e2) / 16.0, xy: 2.0 * second(e1, e2) / 16.0 };
        assert!((xi2_from_rotated(&rot) - r.xi2).abs() < 1e-10);
        assert!((r.xi2 - 1.0).abs() < 1e-10);
    }
}

#[test]
fn report_fields_are_consistent() {
    let rho = steady(40, ModelParams::driven(0.0, 0.3, 1.0));
    let r = xi2_from_rho(&rho).unwrap();
    assert!((r.xi2 - 40.0 * r.eigenvalues[0] / (r.bloch_length * r.bloch_length)).abs() < 1e-12);
    assert!(r.xi2 < 1.0, "{r:?}");
    let n_dot: f64 = (0..3).map(|a| r.direction[a] * r.bloch[a]).sum();
    assert!(n_dot.abs() < 1e-10);
}

#[test]
fn squeezing_is_rotation_invariant() {
    let rho = steady(30, ModelParams::driven(1.0, 0.35, 1.0));
    let j = HalfInt(30);
    let jz = spin_matrix(j, SpinKind::Jz);
    let alpha = 0.83;
    // exp(iαJz) is diagonal
    let phase: Vec<Complex64> = (0..31).map(|a| Complex64::from_polar(1.0, alpha * jz.get(a, a).re)).collect();
    let mut rot = rho.clone();
    for b in 0..31 {
        for a in 0..31 {
            let idx = rho.basis().index(0, a, b);
            rot.data_mut()[idx] = phase[a] * rho.get(0, a, b) * phase[b].conj();
        }
    }
    let (r0, r1) = (xi2_from_rho(&rho).unwrap(), xi2_from_rho(&rot).unwrap());
    assert!((r0.xi2 - r1.xi2).abs() < 1e-10);
    // ⟨J⟩ and the squeezed axis turn together by −α about z
    let turn = |v: [f64; 3]| [v[0] * alpha.cos() + v[1] * alpha.sin(), -v[0] * alpha.sin() + v[1] * alpha.cos(), v[2]];
    let (b, d) = (turn(r0.bloch), turn(r0.direction));
    assert!((0..3).all(|a| (b[a] - r1.bloch[a]).abs() < 1e-9));
    let overlap: f64 = (0..3).map(|a| d[a] * r1.direction[a]).sum();
    assert!((overlap.abs() - 1.0).abs() < 1e-9);
}

#[test]
fn driven_n1000_matches_large_n_value_away_from_threshold() {
    let r = xi2_from_rho(&steady(1000, ModelParams::driven(0.0, 0.3, 1.0))).unwrap();
    assert!((r.xi2 - 0.8).abs() < 0.04, "{}", r.xi2);
}

#[test]
fn oscillatory_phase_is_not_squeezed() {
    match xi2_from_rho(&steady(50, ModelParams::collective_xy(0.6, 1.0))) {
        Ok(r) => assert!(r.xi2 > 1.0),
        Err(Error::Degenerate(_)) => {}
        Err(e) => panic!("{e}"),
    }
}

fn angle_between(t1: f64, p1: f64, t2: f64, p2: f64) -> f64 {
    let c = t1.cos() * t2.cos() + t1.sin() * t2.sin() * (p1 - p2).cos();
    c.clamp(-1.0, 1.0).acos()
}

#[test]
fn wigner_peaks_follow_the_phase() {
    let (th, ph) = WignerGrid::angles(91, 180);
    let tol = 10f64.to_radians();
    let w = wigner(&steady(50, ModelParams::collective_xy(0.6, 1.0)), &th, &ph).unwrap();
    let peaks = w.local_maxima();
    assert!(w.min() > -1e-3 * w.max());
    for target in [PI / 4.0, 5.0 * PI / 4.0] {
        assert!(peaks[..2].iter().any(|p| angle_between(p.theta, p.phi, PI / 2.0, target) < tol), "{:?}", &peaks[..2]);
    }
    let w = wigner(&steady(50, ModelParams::collective_xy(0.4, 1.0)), &th, &ph).unwrap();
    assert!(w.min() > -1e-3 * w.max());
    let top = w.local_maxima()[0];
    assert!(angle_between(top.theta, top.phi, PI, 0.0) < tol);
}

#[test]
fn wigner_peaks_stable_under_refinement() {
    let rho = steady(20, ModelParams::collective_xy(0.6, 1.0));
    let (t1, p1) = WignerGrid::angles(31, 60);
    let (t2, p2) = WignerGrid::angles(61, 120);
    let a = wigner(&rho, &t1, &p1).unwrap().local_maxima();
    let b = wigner(&rho, &t2, &p2).unwrap().local_maxima();
    let cell = PI / 30.0;
    assert!(angle_between(a[0].theta, a[0].phi, b[0].theta, b[0].phi) < cell * 1.5 || angle_between(a[0].theta, a[0].phi, b[1].theta, b[1].phi) < cell * 1.5);
}

#[test]
fn wigner_of_coherent_state_points_along_it() {
    let (th, ph) = WignerGrid::angles(61, 120);
    let w = wigner(&coherent(10, 1.0, 2.0), &th, &ph).unwrap();
    let top = w.local_maxima()[0];
    // θ measured from the south pole in `coherent`
    assert!(angle_between(top.theta, top.phi, PI - 1.0, 2.0) < 0.06, "{top:?}");
}

#[test]
fn moment_equations_hold_along_trajectories() {
    let p = ModelParams::collective_xy(0.6, 1.0);
    let l = build_liouvillian_collective(&Basis::dicke(20).unwrap(), &p).unwrap();
    let traj = evolve(&l, &coherent(20, 1.1, 0.4), 6.0, 1e-10, 240).unwrap();
    let res = moment_residuals(&traj, &p).unwrap();
    assert!(res.max_residual < 1e-6, "{}", res.max_residual);
    assert!(!res.aliasing);

    let p = ModelParams::general(0.0, 0.0, 0.0, 1.0);
    let l = build_liouvillian_collective(&Basis::dicke(2).unwrap(), &p).unwrap();
    let traj = evolve(&l, &coherent(2, 2.0, 0.0), 3.0, 1e-13, 120).unwrap();
    assert!(moment_residuals(&traj, &p).unwrap().max_residual < 1e-10);

    let mut bad = traj.clone();
    let idx = bad.states[60].basis().index(0, 2, 2);
    bad.states[60].data_mut()[idx] += Complex64::new(0.05, 0.0);
    let idx = bad.states[60].basis().index(0, 0, 0);
    bad.states[60].data_mut()[idx] -= Complex64::new(0.05, 0.0);
    assert!(moment_residuals(&bad, &p).unwrap().max_residual > 1e-3);
}
