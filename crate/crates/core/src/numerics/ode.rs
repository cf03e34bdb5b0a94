//! Dormand–Prince 5(4) with FSAL and Hairer's step-size control.

use super::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Zero means pick automatically.
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h_init: 0.0, h_max: f64::INFINITY, max_steps: 50_000_000 }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub t_final: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// `observer` sees the initial point and every accepted step; returning
/// [`Control::Stop`] ends the run early. Steps are shortened so that each time in
/// `stops` (ascending) is hit exactly.
pub fn integrate<T: Scalar>(
    mut f: impl FnMut(f64, &[T], &mut [T]),
    t0: f64,
    y0: &[T],
    t_end: f64,
    stops: &[f64],
    opts: &OdeOptions,
    mut observer: impl FnMut(f64, &[T]) -> Control,
) -> Result<OdeStats> {
    assert!(t_end >= t0, "integration must run forward");
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = OdeStats { t_final: t0, ..Default::default() };
    if observer(t0, &y) == Control::Stop || t_end == t0 {
        return Ok(stats);
    }
    let mut k1 = vec![T::ZERO; n];
    let mut k2 = vec![T::ZERO; n];
    let mut k3 = vec![T::ZERO; n];
    let mut k4 = vec![T::ZERO; n];
    let mut k5 = vec![T::ZERO; n];
    let mut k6 = vec![T::ZERO; n];
    let mut k7 = vec![T::ZERO; n];
    let mut tmp = vec![T::ZERO; n];
    let mut y_new = vec![T::ZERO; n];

    let mut t = t0;
    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut h = if opts.h_init > 0.0 {
        opts.h_init
    } else {
        initial_step(&mut f, t, &y, &k1, opts, &mut tmp, &mut k2)
    };
    stats.evaluations += usize::from(opts.h_init <= 0.0);
    h = h.min(opts.h_max).min(t_end - t0);

    let mut next_stop = stops.iter().copied().filter(|&s| s > t0 && s < t_end);
    let mut stop = next_stop.next();
    let mut err_prev = 1e-4f64;
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Stiffness { time: t, step: h });
        }
        let target = stop.unwrap_or(t_end);
        let mut lands = false;
        if t + h >= target || (target - t - h) < 1e-12 * target.abs().max(1.0) {
            h = target - t;
            lands = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { time: t, step: h });
        }

        let stage = |tmp: &mut [T], terms: &[(&[T], f64)]| {
            for i in 0..n {
                let mut acc = y[i];
                for &(k, a) in terms {
                    acc += k[i] * (h * a);
                }
                tmp[i] = acc;
            }
        };
        stage(&mut tmp, &[(&k1, A21)]);
        f(t + C2 * h, &tmp, &mut k2);
        stage(&mut tmp, &[(&k1, A31), (&k2, A32)]);
        f(t + C3 * h, &tmp, &mut k3);
        stage(&mut tmp, &[(&k1, A41), (&k2, A42), (&k3, A43)]);
        f(t + C4 * h, &tmp, &mut k4);
        stage(&mut tmp, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]);
        f(t + C5 * h, &tmp, &mut k5);
        stage(&mut tmp, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]);
        f(t + h, &tmp, &mut k6);
        stage(&mut y_new, &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
        let t_new = if lands { target } else { t + h };
        f(t_new, &y_new, &mut k7);
        stats.evaluations += 6;

        let mut err_sum = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = opts.atol + opts.rtol * y[i].abs_sq().sqrt().max(y_new[i].abs_sq().sqrt());
            err_sum += e.abs_sq() / (scale * scale);
        }
        let err = (err_sum / n.max(1) as f64).sqrt();

        if err <= 1.0 {
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            stats.t_final = t;
            if lands && stop.is_some() {
                stop = next_stop.next();
            }
            if observer(t, &y) == Control::Stop {
                return Ok(stats);
            }
            // PI controller (Hairer's beta = 0.04)
            let e = err.max(1e-10);
            let mut fac = 0.9 * e.powf(-0.17) * err_prev.powf(0.04);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_prev = e;
            last_rejected = false;
            h = (h * fac).min(opts.h_max);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.1 };
            h *= fac;
        }
    }
    Ok(stats)
}

fn initial_step<T: Scalar>(
    f: &mut impl FnMut(f64, &[T], &mut [T]),
    t: f64,
    y: &[T],
    f0: &[T],
    opts: &OdeOptions,
    tmp: &mut [T],
    f1: &mut [T],
) -> f64 {
    let n = y.len().max(1) as f64;
    let scale = |i: usize| opts.atol + opts.rtol * y[i].abs_sq().sqrt();
    let d0 = (y.iter().enumerate().map(|(i, v)| v.abs_sq() / scale(i).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().enumerate().map(|(i, v)| v.abs_sq() / scale(i).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    for i in 0..y.len() {
        tmp[i] = y[i] + f0[i] * h0;
    }
    f(t + h0, tmp, f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| (*a - *b).abs_sq() / scale(i).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn exponential_decay() {
        let mut last = (0.0, 0.0);
        let opts = OdeOptions::default();
        integrate(|_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], 0.0, &[1.0], 5.0, &[], &opts, |t, y| {
            last = (t, y[0]);
            Control::Continue
        })
        .unwrap();
        assert_eq!(last.0, 5.0);
        assert!((last.1 - (-5f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn complex_rotation_hits_stops() {
        let opts = OdeOptions::default();
        let stops = [0.5, 1.0, 1.5];
        let mut hit = Vec::new();
        let omega = Complex64::new(0.0, 2.0);
        integrate(
            |_, y: &[Complex64], dy: &mut [Complex64]| dy[0] = omega * y[0],
            0.0,
            &[Complex64::new(1.0, 0.0)],
            2.0,
            &stops,
            &opts,
            |t, y| {
                if stops.contains(&t) || t == 2.0 {
                    hit.push((t, y[0]));
                }
                Control::Continue
            },
        )
        .unwrap();
        assert_eq!(hit.len(), 4);
        for (t, z) in hit {
            assert!((z - (omega * t).exp()).norm() < 1e-10);
        }
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let opts = OdeOptions::with_tol(1e-12);
        let mut worst = 0.0f64;
        integrate(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            50.0,
            &[],
            &opts,
            |t, y| {
                worst = worst.max((y[0] - t.cos()).abs());
                Control::Continue
            },
        )
        .unwrap();
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn early_stop() {
        let opts = OdeOptions::default();
        let stats = integrate(
            |_, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0,
            0.0,
            &[0.0],
            100.0,
            &[],
            &opts,
            |_, y| if y[0] > 1.0 { Control::Stop } else { Control::Continue },
        )
        .unwrap();
        assert!(stats.t_final < 100.0);
    }

    #[test]
    fn blow_up_reports_stiffness() {
        let opts = OdeOptions { max_steps: 100_000, ..Default::default() };
        let r = integrate(|_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0], 0.0, &[1.0], 2.0, &[], &opts, |_, _| Control::Continue);
        match r {
            Err(Error::Stiffness { time, .. }) => assert!((time - 1.0).abs() < 1e-3),
            other => panic!("expected stiffness error, got {other:?}"),
        }
    }
}
