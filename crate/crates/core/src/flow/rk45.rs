//! Dormand–Prince 5(4) embedded pair with PI step-size control.

use nalgebra::DVector;

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
// fifth-order weights (also the last stage row, FSAL)
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

/// Result of one trial step.
pub struct Trial {
    pub y: DVector<f64>,
    /// Derivative at the new point (first stage of the next step).
    pub k_end: DVector<f64>,
    /// Scaled error norm; the step is acceptable when `≤ 1`.
    pub err: f64,
}

/// One Dormand–Prince step from `(t, y)` with known derivative `k1`.
pub fn trial_step<F>(f: &mut F, t: f64, y: &DVector<f64>, k1: &DVector<f64>, h: f64, rtol: f64, atol: f64) -> Trial
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let k2 = f(t + C2 * h, &(y + k1 * (h * A21)));
    let k3 = f(t + C3 * h, &(y + (k1 * A31 + &k2 * A32) * h));
    let k4 = f(t + C4 * h, &(y + (k1 * A41 + &k2 * A42 + &k3 * A43) * h));
    let k5 = f(t + C5 * h, &(y + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
    let k6 = f(t + h, &(y + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h));
    let y_new = y + (k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
    let k7 = f(t + h, &y_new);
    let e = (k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
    let n = y.len().max(1) as f64;
    let sum: f64 = e
        .iter()
        .zip(y.iter().zip(y_new.iter()))
        .map(|(ei, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (ei / sc).powi(2)
        })
        .sum();
    Trial {
        y: y_new,
        k_end: k7,
        err: (sum / n).sqrt(),
    }
}

/// PI controller for the step size.
#[derive(Clone, Debug)]
pub struct Controller {
    prev_err: f64,
}

impl Default for Controller {
    fn default() -> Self {
        Self { prev_err: 1e-4 }
    }
}

impl Controller {
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;
    const SAFETY: f64 = 0.9;

    /// Factor for the next step after an accepted step with error `err`.
    pub fn accept(&mut self, err: f64) -> f64 {
        let err = err.max(1e-10);
        let fac = Self::SAFETY * err.powf(-Self::ALPHA) * self.prev_err.powf(Self::BETA);
        self.prev_err = err;
        fac.clamp(0.2, 5.0)
    }

    /// Factor after a rejected step.
    pub fn reject(&mut self, err: f64) -> f64 {
        (Self::SAFETY * err.powf(-0.2)).clamp(0.1, 0.9)
    }
}

/// Initial step heuristic: a small fraction of the time scale `‖y‖/‖y'‖`.
pub fn initial_step(y: &DVector<f64>, dy: &DVector<f64>, atol: f64, rtol: f64) -> f64 {
    let d0 = y.norm() + atol;
    let d1 = dy.norm();
    if d1 <= 1e-300 {
        return 1e-3;
    }
    let h = 0.01 * d0 / d1;
    h.clamp(1e-10, 1.0) * (rtol / 1e-9).powf(0.2).min(1.0)
}
