//! The propagation step: temporal normalization, first-order-hold control
//! interpolation, and per-subinterval multiple-shooting integration of the
//! state-transition-matrix quadratures that produce the discrete LTV system.

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{eom_jacobians, eom_raw, StateVector, CONTROL_DIM, IDX_Q, STATE_DIM};
use crate::ode::rk4_step;
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum DiscretizerError {
    #[error("tau {tau} outside subinterval {k} of [{lo}, {hi}]")]
    TauOutOfRange { tau: f64, k: usize, lo: f64, hi: f64 },
    #[error("propagation failed on subinterval {k}: {message}")]
    Propagation { k: usize, message: String },
    #[error("reference trajectory invalid: {0}")]
    InvalidReference(String),
}

/// Discrete iterate of the successive convexification loop: coast time,
/// burn-time dilation factor, and K node states/controls.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrajectory {
    pub t_c: f64,
    pub s: f64,
    pub states: Vec<StateVector>,
    pub controls: Vec<Vector3<f64>>,
}

impl ReferenceTrajectory {
    pub fn num_nodes(&self) -> usize {
        self.states.len()
    }

    /// Normalized time of node `k` (0-based).
    pub fn node_tau(&self, k: usize) -> f64 {
        k as f64 / (self.num_nodes() - 1) as f64
    }

    /// FOH control at normalized time `tau` in [0, 1].
    pub fn control_at(&self, tau: f64) -> Vector3<f64> {
        let n = self.num_nodes();
        let k = (((tau * (n - 1) as f64).floor() as usize).min(n - 2)).max(0);
        let (lm, lp) = foh_weights(tau, k, n).expect("tau in range");
        lm * self.controls[k] + lp * self.controls[k + 1]
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<(), DiscretizerError> {
        if self.states.len() != scenario.algorithm.k || self.controls.len() != scenario.algorithm.k
        {
            return Err(DiscretizerError::InvalidReference(format!(
                "expected {} nodes, got {} states / {} controls",
                scenario.algorithm.k,
                self.states.len(),
                self.controls.len()
            )));
        }
        if !(self.s > 0.0) {
            return Err(DiscretizerError::InvalidReference(format!(
                "dilation factor {} must be positive",
                self.s
            )));
        }
        if self.t_c < 0.0 || self.t_c > scenario.boundary.t_c_max {
            return Err(DiscretizerError::InvalidReference(format!(
                "coast time {} outside [0, {}]",
                self.t_c, scenario.boundary.t_c_max
            )));
        }
        for (k, x) in self.states.iter().enumerate() {
            if x[0] <= 0.0 {
                return Err(DiscretizerError::InvalidReference(format!(
                    "nonpositive mass at node {k}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-subinterval matrices of the discrete LTV system
/// `x_{k+1} = A x_k + Bm u_k + Bp u_{k+1} + S s + r (+ virtual control)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubintervalBlock {
    pub a: SMatrix<f64, STATE_DIM, STATE_DIM>,
    pub bm: SMatrix<f64, STATE_DIM, CONTROL_DIM>,
    pub bp: SMatrix<f64, STATE_DIM, CONTROL_DIM>,
    pub s: SVector<f64, STATE_DIM>,
    pub r: SVector<f64, STATE_DIM>,
    /// Endpoint of the nonlinear shooting arc started at the reference node.
    pub x_prop_end: SVector<f64, STATE_DIM>,
}

/// The full propagation-step output: one block per subinterval.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDynamics {
    pub blocks: Vec<SubintervalBlock>,
}

/// First-order-hold weights on subinterval `k` (0-based, nodes `k`/`k+1`).
pub fn foh_weights(tau: f64, k: usize, num_nodes: usize) -> Result<(f64, f64), DiscretizerError> {
    let denom = (num_nodes - 1) as f64;
    let lo = k as f64 / denom;
    let hi = (k + 1) as f64 / denom;
    if tau < lo - 1e-12 || tau > hi + 1e-12 {
        return Err(DiscretizerError::TauOutOfRange { tau, k, lo, hi });
    }
    let lm = (hi - tau) / (hi - lo);
    let lp = (tau - lo) / (hi - lo);
    Ok((lm.clamp(0.0, 1.0), lp.clamp(0.0, 1.0)))
}

/// Temporally normalized dynamics `x' = s * f(x, u)`.
pub fn normalized_eom(
    x: &StateVector,
    u: &Vector3<f64>,
    s: f64,
    scenario: &Scenario,
) -> Result<StateVector, crate::dynamics::DynamicsError> {
    Ok(s * eom_raw(x, u, scenario)?)
}

/// Dynamics interface for the discretizer. The 14-state vehicle model is the
/// production instance; tests plug in LTI systems with closed-form
/// discretizations.
pub trait DynamicsModel: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn f(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, String>;
    /// Returns (df/dx, df/du).
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>)
        -> Result<(DMatrix<f64>, DMatrix<f64>), String>;
    /// Hook applied to the propagated state after every integrator substep.
    fn normalize_state(&self, _x: &mut DVector<f64>) {}
}

/// Production model backed by the vehicle equations of motion.
pub struct RocketDynamics<'a> {
    pub scenario: &'a Scenario,
}

impl DynamicsModel for RocketDynamics<'_> {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn control_dim(&self) -> usize {
        CONTROL_DIM
    }

    fn f(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, String> {
        let xs = StateVector::from_column_slice(x.as_slice());
        let us = Vector3::from_column_slice(u.as_slice());
        let dx = eom_raw(&xs, &us, self.scenario).map_err(|e| e.to_string())?;
        Ok(DVector::from_column_slice(dx.as_slice()))
    }

    fn jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), String> {
        let xs = StateVector::from_column_slice(x.as_slice());
        let us = Vector3::from_column_slice(u.as_slice());
        let (fx, fu) = eom_jacobians(&xs, &us, self.scenario).map_err(|e| e.to_string())?;
        Ok((
            DMatrix::from_column_slice(STATE_DIM, STATE_DIM, fx.as_slice()),
            DMatrix::from_column_slice(STATE_DIM, CONTROL_DIM, fu.as_slice()),
        ))
    }

    fn normalize_state(&self, x: &mut DVector<f64>) {
        let norm = (x[IDX_Q] * x[IDX_Q]
            + x[IDX_Q + 1] * x[IDX_Q + 1]
            + x[IDX_Q + 2] * x[IDX_Q + 2]
            + x[IDX_Q + 3] * x[IDX_Q + 3])
            .sqrt();
        for i in 0..4 {
            x[IDX_Q + i] /= norm;
        }
    }
}

/// Generic single-subinterval discretization output (dynamic dimensions).
#[derive(Clone, Debug, PartialEq)]
pub struct GenericBlock {
    pub a: DMatrix<f64>,
    pub bm: DMatrix<f64>,
    pub bp: DMatrix<f64>,
    pub s: DVector<f64>,
    pub r: DVector<f64>,
    pub x_prop_end: DVector<f64>,
}

/// Integrates one shooting arc over `[tau_lo, tau_hi]` from `x_start`,
/// carrying the state-transition matrix and the FOH input quadratures
/// alongside the nonlinear state. `r` is chosen so that the defect identity
/// holds exactly at the reference.
#[allow(clippy::too_many_arguments)]
pub fn discretize_block(
    model: &dyn DynamicsModel,
    x_start: &DVector<f64>,
    u_lo: &DVector<f64>,
    u_hi: &DVector<f64>,
    s: f64,
    tau_lo: f64,
    tau_hi: f64,
    substeps: usize,
) -> Result<GenericBlock, String> {
    let n = model.state_dim();
    let m = model.control_dim();
    let len = n + n * n + 2 * n * m + n;
    let idx_phi = n;
    let idx_bm = idx_phi + n * n;
    let idx_bp = idx_bm + n * m;
    let idx_s = idx_bp + n * m;

    let mut y = DVector::<f64>::zeros(len);
    y.rows_mut(0, n).copy_from(x_start);
    for i in 0..n {
        y[idx_phi + i * n + i] = 1.0; // Phi(tau_lo) = I
    }

    let span = tau_hi - tau_lo;
    let mut deriv = |tau: f64, y: &DVector<f64>| -> Result<DVector<f64>, String> {
        let x = y.rows(0, n).into_owned();
        let phi = DMatrix::from_column_slice(n, n, y.rows(idx_phi, n * n).as_slice());
        let lp = ((tau - tau_lo) / span).clamp(0.0, 1.0);
        let lm = 1.0 - lp;
        let u = u_lo * lm + u_hi * lp;

        let f = model.f(&x, &u)?;
        let (fx, fu) = model.jacobians(&x, &u)?;
        let a = s * fx;
        let b = s * fu;

        let lu = phi.clone().lu();
        let phi_inv_b = lu
            .solve(&b)
            .ok_or_else(|| "singular state-transition matrix".to_string())?;
        let phi_inv_f = lu
            .solve(&f)
            .ok_or_else(|| "singular state-transition matrix".to_string())?;

        let mut dy = DVector::<f64>::zeros(len);
        dy.rows_mut(0, n).copy_from(&(s * &f));
        let dphi = &a * &phi;
        dy.rows_mut(idx_phi, n * n)
            .copy_from_slice(dphi.as_slice());
        dy.rows_mut(idx_bm, n * m)
            .copy_from_slice((&phi_inv_b * lm).as_slice());
        dy.rows_mut(idx_bp, n * m)
            .copy_from_slice((&phi_inv_b * lp).as_slice());
        dy.rows_mut(idx_s, n).copy_from(&phi_inv_f);
        Ok(dy)
    };

    let h = span / substeps as f64;
    for step in 0..substeps {
        let t = tau_lo + step as f64 * h;
        y = rk4_step(&mut deriv, t, &y, h)?;
        let mut x = y.rows(0, n).into_owned();
        model.normalize_state(&mut x);
        y.rows_mut(0, n).copy_from(&x);
    }

    let x_end = y.rows(0, n).into_owned();
    let a = DMatrix::from_column_slice(n, n, y.rows(idx_phi, n * n).as_slice());
    let bm = &a * DMatrix::from_column_slice(n, m, y.rows(idx_bm, n * m).as_slice());
    let bp = &a * DMatrix::from_column_slice(n, m, y.rows(idx_bp, n * m).as_slice());
    let s_vec = &a * y.rows(idx_s, n).into_owned();
    // Residual from the defect so the identity holds to machine precision.
    let r = &x_end - &a * x_start - &bm * u_lo - &bp * u_hi - &s_vec * s;
    Ok(GenericBlock {
        a,
        bm,
        bp,
        s: s_vec,
        r,
        x_prop_end: x_end,
    })
}

fn block_for_vehicle(
    k: usize,
    reference: &ReferenceTrajectory,
    scenario: &Scenario,
) -> Result<SubintervalBlock, DiscretizerError> {
    let model = RocketDynamics { scenario };
    let n = reference.num_nodes();
    let x0 = DVector::from_column_slice(reference.states[k].as_slice());
    let u0 = DVector::from_column_slice(reference.controls[k].as_slice());
    let u1 = DVector::from_column_slice(reference.controls[k + 1].as_slice());
    let g = discretize_block(
        &model,
        &x0,
        &u0,
        &u1,
        reference.s,
        k as f64 / (n - 1) as f64,
        (k + 1) as f64 / (n - 1) as f64,
        scenario.algorithm.integrator_substeps,
    )
    .map_err(|message| DiscretizerError::Propagation { k, message })?;
    Ok(SubintervalBlock {
        a: SMatrix::from_column_slice(g.a.as_slice()),
        bm: SMatrix::from_column_slice(g.bm.as_slice()),
        bp: SMatrix::from_column_slice(g.bp.as_slice()),
        s: SVector::from_column_slice(g.s.as_slice()),
        r: SVector::from_column_slice(g.r.as_slice()),
        x_prop_end: SVector::from_column_slice(g.x_prop_end.as_slice()),
    })
}

/// Discretizes one subinterval `k` (0-based) of the vehicle problem.
pub fn discretize_subinterval(
    k: usize,
    reference: &ReferenceTrajectory,
    scenario: &Scenario,
) -> Result<SubintervalBlock, DiscretizerError> {
    reference.validate(scenario)?;
    block_for_vehicle(k, reference, scenario)
}

/// Discretizes all K-1 subintervals, fanning out across the current rayon
/// pool. Blocks are independent, so the result is identical to the serial
/// path bit for bit.
pub fn discretize_all(
    reference: &ReferenceTrajectory,
    scenario: &Scenario,
) -> Result<DiscreteDynamics, DiscretizerError> {
    reference.validate(scenario)?;
    let blocks: Result<Vec<_>, _> = (0..reference.num_nodes() - 1)
        .into_par_iter()
        .map(|k| block_for_vehicle(k, reference, scenario))
        .collect();
    Ok(DiscreteDynamics { blocks: blocks? })
}

/// Serial twin of [`discretize_all`], kept for determinism checks.
pub fn discretize_all_serial(
    reference: &ReferenceTrajectory,
    scenario: &Scenario,
) -> Result<DiscreteDynamics, DiscretizerError> {
    reference.validate(scenario)?;
    let blocks: Result<Vec<_>, _> = (0..reference.num_nodes() - 1)
        .map(|k| block_for_vehicle(k, reference, scenario))
        .collect();
    Ok(DiscreteDynamics { blocks: blocks? })
}
