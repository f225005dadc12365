//! Explicit Runge-Kutta integrators for linear ODE systems on the torus.

use crate::error::{Error, Result};

/// One classical RK4 step of size `h` from `(t, y)`, in place.
pub(crate) fn rk4_step(
    f: &mut dyn FnMut(f64, &[f64], &mut [f64]),
    t: f64,
    h: f64,
    y: &mut [f64],
    work: &mut Rk4Work,
) {
    let n = y.len();
    let Rk4Work { k1, k2, k3, k4, tmp } = work;
    f(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, tmp, k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

pub(crate) struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    pub(crate) fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AdaptiveConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h0: f64,
}

pub(crate) struct AdaptiveOutcome {
    pub t: f64,
    pub steps: usize,
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Dormand-Prince 5(4) with FSAL from `t0` towards `t_end`. After every
/// accepted step `stop(t, y)` is consulted and integration ends early if it
/// returns true.
pub(crate) fn dopri45(
    f: &mut dyn FnMut(f64, &[f64], &mut [f64]),
    y: &mut Vec<f64>,
    t0: f64,
    t_end: f64,
    cfg: &AdaptiveConfig,
    stop: &mut dyn FnMut(f64, &[f64]) -> bool,
) -> Result<AdaptiveOutcome> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;
    let mut h = cfg.h0.min(t_end - t0);
    let mut steps = 0;
    f(t, y, &mut k[0]);
    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(Error::StepLimit { steps, t });
        }
        h = h.min(t_end - t);
        macro_rules! stage {
            ($dst:expr, $c:expr, $($coef:expr => $src:expr),+) => {{
                for i in 0..n {
                    tmp[i] = y[i] + h * (0.0 $(+ $coef * k[$src][i])+);
                }
                let (_, rest) = k.split_at_mut($dst);
                f(t + $c * h, &tmp, &mut rest[0]);
            }};
        }
        stage!(1, C2, A21 => 0);
        stage!(2, C3, A31 => 0, A32 => 1);
        stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            ynew[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        {
            let (_, rest) = k.split_at_mut(6);
            f(t + h, &ynew, &mut rest[0]);
        }
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t += h;
            steps += 1;
            std::mem::swap(y, &mut ynew);
            k.swap(0, 6);
            if stop(t, y) {
                break;
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if err <= 1.0 { fac } else { fac.min(1.0) };
    }
    Ok(AdaptiveOutcome { t, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| out[0] = -y[0];
        let mut y = vec![1.0];
        let cfg = AdaptiveConfig { rtol: 1e-12, atol: 1e-14, max_steps: 100_000, h0: 0.01 };
        let out = dopri45(&mut f, &mut y, 0.0, 3.0, &cfg, &mut |_, _| false).unwrap();
        assert!((out.t - 3.0).abs() < 1e-14);
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn rotation_with_stop() {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            out[0] = -y[1];
            out[1] = y[0];
        };
        let mut y = vec![1.0, 0.0];
        let cfg = AdaptiveConfig { rtol: 1e-11, atol: 1e-13, max_steps: 100_000, h0: 0.1 };
        let out = dopri45(&mut f, &mut y, 0.0, 100.0, &cfg, &mut |t, _| t >= 1.0).unwrap();
        assert!(out.t >= 1.0 && out.t < 100.0);
        assert!((y[0] - out.t.cos()).abs() < 1e-9);
        assert!((y[1] - out.t.sin()).abs() < 1e-9);
    }

    #[test]
    fn step_cap_is_an_error() {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| out[0] = -y[0];
        let mut y = vec![1.0];
        let cfg = AdaptiveConfig { rtol: 1e-12, atol: 1e-14, max_steps: 3, h0: 0.01 };
        assert!(dopri45(&mut f, &mut y, 0.0, 30.0, &cfg, &mut |_, _| false).is_err());
    }

    #[test]
    fn rk4_fourth_order() {
        let run = |steps: usize| {
            let mut f = |_t: f64, y: &[f64], out: &mut [f64]| out[0] = -y[0];
            let mut y = vec![1.0];
            let mut w = Rk4Work::new(1);
            let h = 1.0 / steps as f64;
            for s in 0..steps {
                rk4_step(&mut f, s as f64 * h, h, &mut y, &mut w);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = run(10) / run(20);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }
}
