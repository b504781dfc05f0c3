//! Problem parameterization and scenario file I/O.
//!
//! A scenario file is a single JSON document with sections `vehicle`,
//! `environment`, `boundary`, `stc`, and `algorithm`. Angles are in degrees;
//! everything else is in the scaled unit system (U_L, U_T, U_M).

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario schema violation: {0}")]
    Schema(String),
    #[error("scenario invariant violated on `{field}`: {message}")]
    Invariant { field: &'static str, message: String },
}

fn invariant(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invariant {
        field,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Dry mass floor, U_M.
    pub m_dry: f64,
    /// Body-frame inertia tensor diagonal, U_M*U_L^2.
    pub j_b: [f64; 3],
    /// Gimbal pivot position in body coordinates, U_L.
    pub r_t_b: [f64; 3],
    /// Center-of-pressure position in body coordinates, U_L.
    pub r_cp_b: [f64; 3],
    /// Vacuum specific impulse, U_T.
    pub i_sp: f64,
    /// Reference gravity for the mass-depletion coefficient, U_L/U_T^2.
    pub g0: f64,
    /// Nozzle exit area, U_L^2.
    pub a_noz: f64,
    /// Thrust magnitude bounds, U_M*U_L/U_T^2.
    pub t_min: f64,
    pub t_max: f64,
    /// Maximum gimbal deflection, degrees.
    pub delta_max_deg: f64,
    /// Maximum tilt from vertical, degrees.
    pub theta_max_deg: f64,
    /// Maximum angular rate, degrees/U_T.
    pub omega_max_deg: f64,
}

impl VehicleParams {
    pub fn inertia(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.j_b[0], self.j_b[1], self.j_b[2]))
    }

    pub fn r_t(&self) -> Vector3<f64> {
        Vector3::from(self.r_t_b)
    }

    pub fn r_cp(&self) -> Vector3<f64> {
        Vector3::from(self.r_cp_b)
    }

    /// Mass-flow coefficient of the thrust magnitude.
    pub fn alpha_mdot(&self) -> f64 {
        1.0 / (self.i_sp * self.g0)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.m_dry > 0.0) {
            return Err(invariant("m_dry", "must be positive"));
        }
        if !(self.t_min > 0.0) {
            return Err(invariant("T_min", "must satisfy 0 < T_min"));
        }
        if self.t_min > self.t_max {
            return Err(invariant("T_min", "must satisfy T_min <= T_max"));
        }
        if self.j_b.iter().any(|&j| j <= 0.0) {
            return Err(invariant("J_B", "diagonal entries must be positive"));
        }
        if !(0.0..=90.0).contains(&self.delta_max_deg) {
            return Err(invariant("delta_max", "must lie in [0, 90] degrees"));
        }
        if !(self.theta_max_deg > 0.0 && self.theta_max_deg <= 90.0) {
            return Err(invariant("theta_max", "must lie in (0, 90] degrees"));
        }
        if !(self.i_sp > 0.0 && self.g0 > 0.0) {
            return Err(invariant("I_sp", "I_sp and g0 must be positive"));
        }
        if !(self.omega_max_deg > 0.0) {
            return Err(invariant("omega_max", "must be positive"));
        }
        if self.a_noz < 0.0 {
            return Err(invariant("A_noz", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AeroMode {
    None,
    Spherical,
    Ellipsoidal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentParams {
    /// Gravitational acceleration, U_L/U_T^2.
    pub g_i: [f64; 3],
    /// Atmospheric density, U_M/U_L^3.
    pub rho: f64,
    /// Ambient pressure, U_M/U_T^2/U_L.
    pub p_amb: f64,
    /// Aerodynamic reference area, U_L^2.
    pub s_a: f64,
    /// Axial aerodynamic coefficient (body x).
    pub c_ax: f64,
    /// Lateral aerodynamic coefficient (body y/z).
    pub c_ayz: f64,
    pub aero_mode: AeroMode,
}

impl EnvironmentParams {
    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.g_i)
    }

    pub fn aero_coefficients(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.c_ax, self.c_ayz, self.c_ayz))
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.rho < 0.0 || self.s_a < 0.0 {
            return Err(invariant("rho", "rho and S_A must be nonnegative"));
        }
        match self.aero_mode {
            AeroMode::None => {}
            AeroMode::Spherical => {
                if self.c_ax <= 0.0 || self.c_ayz <= 0.0 {
                    return Err(invariant("C_A", "must be positive definite"));
                }
                if (self.c_ax - self.c_ayz).abs() > 1e-12 {
                    return Err(invariant("c_ax", "spherical mode requires c_ax = c_ayz"));
                }
            }
            AeroMode::Ellipsoidal => {
                if self.c_ax <= 0.0 || self.c_ayz <= 0.0 {
                    return Err(invariant("C_A", "must be positive definite"));
                }
                if self.c_ax >= self.c_ayz {
                    return Err(invariant("c_ax", "ellipsoidal mode requires c_ax < c_ayz"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConditions {
    /// Mass at engine ignition, U_M.
    pub m_ig: f64,
    /// Position and velocity at the initial epoch, U_L and U_L/U_T.
    pub r_in: [f64; 3],
    pub v_in: [f64; 3],
    /// Terminal descent speed, U_L/U_T.
    pub v_d: f64,
    /// Whether the ignition time is a decision variable.
    pub free_ignition: bool,
    /// Maximum coast duration before ignition, U_T.
    pub t_c_max: f64,
    /// Glide-slope cone half-angle from the vertical axis, degrees.
    pub gamma_gs_deg: f64,
}

impl BoundaryConditions {
    pub fn r_initial(&self) -> Vector3<f64> {
        Vector3::from(self.r_in)
    }

    pub fn v_initial(&self) -> Vector3<f64> {
        Vector3::from(self.v_in)
    }

    /// Coast-curve position polynomial at coast time `xi`.
    pub fn coast_position(&self, xi: f64, g: &Vector3<f64>) -> Vector3<f64> {
        self.r_initial() + self.v_initial() * xi + 0.5 * g * xi * xi
    }

    /// Coast-curve velocity polynomial at coast time `xi`.
    pub fn coast_velocity(&self, xi: f64, g: &Vector3<f64>) -> Vector3<f64> {
        self.v_initial() + g * xi
    }

    fn validate(&self, vehicle: &VehicleParams) -> Result<(), ScenarioError> {
        if self.m_ig <= vehicle.m_dry {
            return Err(invariant("m_ig", "must exceed m_dry"));
        }
        if self.t_c_max < 0.0 {
            return Err(invariant("t_c_max", "must be nonnegative"));
        }
        if !(self.gamma_gs_deg > 0.0 && self.gamma_gs_deg < 90.0) {
            return Err(invariant("gamma_gs", "must lie in (0, 90) degrees"));
        }
        if self.v_d < 0.0 {
            return Err(invariant("v_d", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StcKind {
    /// Angle-of-attack limit triggered above a speed threshold.
    QAlpha,
    /// Line-of-sight limit triggered above a range threshold.
    Fov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StcParams {
    pub enabled: bool,
    pub kind: StcKind,
    /// Trigger threshold: speed (q_alpha) or range (fov).
    pub trigger_threshold: f64,
    /// Cone half-angle limit, degrees.
    pub cone_limit_deg: f64,
}

impl StcParams {
    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.trigger_threshold > 0.0) {
            return Err(invariant("trigger_threshold", "must be positive"));
        }
        if !(self.cone_limit_deg > 0.0 && self.cone_limit_deg < 90.0) {
            return Err(invariant("cone_limit", "must lie in (0, 90) degrees"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    StraightLine,
    ThreeDof,
}

/// Trust-region weight: a scalar multiple of the identity or a full diagonal
/// over the 19 components of z = [t_c, s, x, u].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrustWeight {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl TrustWeight {
    pub fn diagonal(&self, n: usize) -> Vec<f64> {
        match self {
            TrustWeight::Scalar(w) => vec![*w; n],
            TrustWeight::Diagonal(d) => d.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmParams {
    /// Temporal node count K.
    pub k: usize,
    /// Virtual-control penalty weight.
    pub w_nu: f64,
    /// Trust-region weight.
    pub w_tr: TrustWeight,
    /// Convergence tolerances on the penalty terms.
    pub eps_vc: f64,
    pub eps_tr: f64,
    /// Initial guess for the burn-time dilation factor, U_T.
    pub s_init: f64,
    pub max_iters: usize,
    pub init_mode: InitMode,
    /// Fixed RK4 substeps per subinterval in the propagation step.
    pub integrator_substeps: usize,
}

impl AlgorithmParams {
    fn validate(&self) -> Result<(), ScenarioError> {
        if self.k < 2 {
            return Err(invariant("K", "node count must be at least 2"));
        }
        if !(self.w_nu > 0.0) {
            return Err(invariant("w_nu", "must be positive"));
        }
        let diag = self.w_tr.diagonal(19);
        if diag.len() != 19 || diag.iter().any(|&w| w <= 0.0) {
            return Err(invariant(
                "W_tr",
                "diagonal must have 19 positive entries",
            ));
        }
        if !(self.eps_vc > 0.0 && self.eps_tr > 0.0) {
            return Err(invariant("eps_vc", "tolerances must be positive"));
        }
        if !(self.s_init > 0.0) {
            return Err(invariant("s_init", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invariant("max_iters", "must be positive"));
        }
        if self.integrator_substeps == 0 {
            return Err(invariant("integrator_substeps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub vehicle: VehicleParams,
    pub environment: EnvironmentParams,
    pub boundary: BoundaryConditions,
    pub stc: StcParams,
    pub algorithm: AlgorithmParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.vehicle.validate()?;
        self.environment.validate()?;
        self.boundary.validate(&self.vehicle)?;
        self.stc.validate()?;
        self.algorithm.validate()
    }
}

/// Baseline scenario: desk-scale vehicle, no aerodynamics, fixed ignition,
/// STC machinery parameterized but disabled.
pub fn default_scenario() -> Scenario {
    Scenario {
        vehicle: VehicleParams {
            m_dry: 1.0,
            j_b: [0.168 * 2e-2, 0.168, 0.168],
            r_t_b: [-0.25, 0.0, 0.0],
            r_cp_b: [0.05, 0.0, 0.0],
            i_sp: 30.0,
            g0: 1.0,
            a_noz: 0.0,
            t_min: 1.5,
            t_max: 6.5,
            delta_max_deg: 20.0,
            theta_max_deg: 90.0,
            omega_max_deg: 28.6,
        },
        environment: EnvironmentParams {
            g_i: [-1.0, 0.0, 0.0],
            rho: 1.0,
            p_amb: 0.0,
            s_a: 1.0,
            c_ax: 0.2,
            c_ayz: 0.2,
            aero_mode: AeroMode::None,
        },
        boundary: BoundaryConditions {
            m_ig: 2.0,
            r_in: [5.33, 4.5, 0.0],
            v_in: [-0.5, -2.5, 0.25],
            v_d: 0.1,
            free_ignition: false,
            t_c_max: 2.0,
            gamma_gs_deg: 75.0,
        },
        stc: StcParams {
            enabled: false,
            kind: StcKind::QAlpha,
            trigger_threshold: 2.0,
            cone_limit_deg: 3.0,
        },
        algorithm: AlgorithmParams {
            k: 20,
            w_nu: 1e4,
            w_tr: TrustWeight::Scalar(0.5),
            eps_vc: 1e-8,
            eps_tr: 5e-4,
            s_init: 5.0,
            max_iters: 30,
            init_mode: InitMode::StraightLine,
            integrator_substeps: 15,
        },
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(scenario).expect("scenario serialization");
    fs::write(path, text).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameterization() {
        let s = default_scenario();
        assert_eq!(s.vehicle.t_max, 6.5);
        assert_eq!(s.vehicle.t_min, 1.5);
        assert_eq!(s.algorithm.k, 20);
        assert_eq!(s.algorithm.eps_vc, 1e-8);
        assert_eq!(s.algorithm.eps_tr, 5e-4);
        assert_eq!(s.algorithm.w_nu, 1e4);
        assert_eq!(s.algorithm.s_init, 5.0);
        assert_eq!(s.boundary.m_ig, 2.0);
        assert_eq!(s.vehicle.m_dry, 1.0);
        assert_eq!(s.vehicle.i_sp, 30.0);
        assert_eq!(s.environment.g_i, [-1.0, 0.0, 0.0]);
        assert_eq!(s.vehicle.omega_max_deg, 28.6);
        assert_eq!(s.vehicle.delta_max_deg, 20.0);
        assert_eq!(s.vehicle.theta_max_deg, 90.0);
        assert_eq!(s.boundary.gamma_gs_deg, 75.0);
        assert_eq!(s.stc.trigger_threshold, 2.0);
        assert_eq!(s.stc.cone_limit_deg, 3.0);
        assert_eq!(s.vehicle.j_b, [0.168 * 2e-2, 0.168, 0.168]);
        s.validate().expect("defaults pass invariants");
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        let s = default_scenario();
        save_scenario(&s, &path).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(s, loaded);
    }

    #[test]
    fn invariant_errors_name_the_field() {
        let mut s = default_scenario();
        s.vehicle.t_min = 0.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("T_min"), "got: {err}");

        let mut s = default_scenario();
        s.environment.aero_mode = AeroMode::Ellipsoidal;
        s.environment.c_ax = 1.0;
        s.environment.c_ayz = 0.2;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("c_ax"), "got: {err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        let mut doc = serde_json::to_value(default_scenario()).unwrap();
        doc["vehicle"]["bogus_knob"] = serde_json::json!(1.0);
        std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("bogus_knob"), "got: {err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_scenario("/nonexistent/scenario.json").unwrap_err();
        assert!(matches!(err, ScenarioError::Io { .. }));
    }
}
