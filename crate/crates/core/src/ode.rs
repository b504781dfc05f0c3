//! Fixed-step RK4 (propagation) and adaptive Dormand-Prince 5(4)
//! (validation). Two independent integrators by design: the discretizer's
//! fixed-step results are cross-checked by the adaptive one.

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (rejected below {floor:e})")]
    StepUnderflow { t: f64, floor: f64 },
    #[error("derivative evaluation failed at t = {t}: {message}")]
    Derivative { t: f64, message: String },
}

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F, E>(f: &mut F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + 0.5 * h * &k1))?;
    let k3 = f(t + 0.5 * h, &(y + 0.5 * h * &k2))?;
    let k4 = f(t + h, &(y + h * &k3))?;
    Ok(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Called after every accepted step, e.g. to renormalize a quaternion
    /// block in place.
    pub post_step: Option<fn(&mut DVector<f64>)>,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rtol: 1e-10,
            atol: 1e-12,
            post_step: None,
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` with embedded 5(4) error
/// control, landing exactly on `t1`.
pub fn dopri5<F>(
    f: &mut F,
    t0: f64,
    t1: f64,
    y0: &DVector<f64>,
    opts: &AdaptiveOptions,
) -> Result<DVector<f64>, OdeError>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, String>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0.clone());
    }
    let floor = span.abs() * 1e-14;
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = span / 64.0;
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);

    while (t1 - t) * span.signum() > 0.0 {
        if h.abs() < floor {
            return Err(OdeError::StepUnderflow { t, floor });
        }
        if (t + h - t1) * span.signum() > 0.0 {
            h = t1 - t;
        }
        k.clear();
        let mut failed: Option<String> = None;
        for stage in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                ys += h * DP_A[stage][j] * kj;
            }
            match f(t + DP_C[stage] * h, &ys) {
                Ok(v) => k.push(v),
                Err(m) => {
                    failed = Some(m);
                    break;
                }
            }
        }
        if let Some(message) = failed {
            // Retry with a smaller step before giving up.
            h *= 0.25;
            if h.abs() < floor {
                return Err(OdeError::Derivative { t, message });
            }
            continue;
        }

        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for stage in 0..7 {
            y5 += h * DP_B5[stage] * &k[stage];
            y4 += h * DP_B4[stage] * &k[stage];
        }
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err += ((y5[i] - y4[i]) / sc).powi(2);
        }
        err = (err / y.len() as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y5;
            if let Some(post) = opts.post_step {
                post(&mut y);
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(y)
}
