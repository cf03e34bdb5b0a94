use spinsq_core::meanfield::{
    constant_of_motion, integrate, orbit_period, time_average, BlochVector, ModelParams,
};

fn on_sphere(x: f64, y: f64) -> BlochVector {
    BlochVector::new(x, y, -(1.0 - x * x - y * y).sqrt())
}

#[test]
fn oscillatory_orbit_statistics() {
    let p = ModelParams::collective_xy(0.6, 1.0);
    let traj = integrate(&p, on_sphere(0.5, 0.1), 200.0, 1e-10).unwrap();


    let c0 = constant_of_motion(&p, traj.states[0]).unwrap();
    let mut drift = 0.0f64;
    for (&t, s) in traj.times.iter().zip(&traj.states) {
        if t > 100.0 {
            break;
        }
        let c = constant_of_motion(&p, *s).unwrap();
        assert_eq!(c.1, c0.1);
        drift = drift.max((c.0 - c0.0).abs());
    }
    assert!(drift < 1e-6, "log|C| drift {drift:e}");

    let avg = time_average(&traj, 0.0).unwrap();
    assert!(avg.z.abs() < 1e-2, "<Z> = {}", avg.z);
    assert!(avg.x.abs() > 0.1 && avg.y.abs() > 0.1);
    assert!(orbit_period(&traj, 0.0).is_some());
}

#[test]
fn rise_slower_than_fall() {
    let p = ModelParams::collective_xy(0.6, 1.0);
    let traj = integrate(&p, on_sphere(0.5, 0.1), 200.0, 1e-10).unwrap();
    let (mut rising, mut falling) = (0.0, 0.0);
    for k in 1..traj.times.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        if traj.states[k].z > traj.states[k - 1].z {
            rising += dt;
        } else {
            falling += dt;
        }
    }
    assert!(rising > 1.5 * falling, "rising {rising} falling {falling}");
}

#[test]
fn sphere_radius_drift_scales_with_tol() {
    let p = ModelParams::collective_xy(0.6, 1.0);
    for tol in [1e-6, 1e-8, 1e-10, 1e-12, 1e-13] {
        let traj = integrate(&p, on_sphere(0.5, 0.1), 100.0, tol).unwrap();
        let radius = traj.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(radius <= 100.0 * tol, "tol {tol:e}: radius drift {radius:e}");
    }
    for p in [ModelParams::driven(1.0, 0.6, 1.0), ModelParams::general(0.7, -0.2, 0.3, 1.0)] {
        let traj = integrate(&p, on_sphere(-0.3, 0.4), 100.0, 1e-10).unwrap();
        let radius = traj.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(radius <= 1e-8, "{p:?}: radius drift {radius:e}");
    }
}

#[test]
fn same_orbit_same_constant() {
    let p = ModelParams::collective_xy(0.6, 1.0);
    let traj = integrate(&p, on_sphere(-0.2, 0.7), 60.0, 1e-10).unwrap();
    let a = constant_of_motion(&p, traj.states[0]).unwrap().0;
    let b = constant_of_motion(&p, *traj.states.last().unwrap()).unwrap().0;
    assert!((a - b).abs() < 1e-6);
}
