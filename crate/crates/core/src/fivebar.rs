//! Kinematics of the two-motor five-bar leg.
//!
//! Leg frame: `x` horizontal, `y` pointing down along the leg. With
//! `theta = (phi1 + phi2) / 2` and `gamma = (phi2 - phi1) / 2` the toe sits at
//! `(l sin theta, l cos theta)` where
//! `l = l3 + l1 cos gamma + sqrt(l2^2 - l1^2 sin^2 gamma)`.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RftError};

/// Jacobians with a larger condition number are rejected as singular.
pub const SINGULAR_CONDITION: f64 = 1e8;

/// Torque constant of the direct-drive motors, N m / A.
pub const DEFAULT_TORQUE_CONSTANT: f64 = 0.0973;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiveBarParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    #[serde(default = "default_kt")]
    pub torque_constant: f64,
}

fn default_kt() -> f64 {
    DEFAULT_TORQUE_CONSTANT
}

impl Default for FiveBarParams {
    fn default() -> Self {
        Self {
            l1: 0.15,
            l2: 0.3,
            l3: 0.0,
            torque_constant: DEFAULT_TORQUE_CONSTANT,
        }
    }
}

impl FiveBarParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l1", self.l1), ("l2", self.l2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RftError::InvalidSpec(format!("{name} must be positive")));
            }
        }
        if !(self.l3.is_finite() && self.l3 >= 0.0) {
            return Err(RftError::InvalidSpec("l3 must be >= 0".into()));
        }
        Ok(())
    }

    fn root(&self, phi1: f64, phi2: f64) -> Result<(f64, f64, f64)> {
        let theta = 0.5 * (phi1 + phi2);
        let gamma = 0.5 * (phi2 - phi1);
        let disc = self.l2 * self.l2 - (self.l1 * gamma.sin()).powi(2);
        if !(disc > 0.0) {
            return Err(RftError::Workspace { phi1, phi2 });
        }
        Ok((theta, gamma, disc.sqrt()))
    }

    /// Leg length as a function of the half-difference angle.
    fn length(&self, gamma: f64, root: f64) -> f64 {
        self.l3 + self.l1 * gamma.cos() + root
    }

    /// Toe position `(x, y)` in the leg frame.
    pub fn forward_kinematics(&self, phi1: f64, phi2: f64) -> Result<[f64; 2]> {
        let (theta, gamma, root) = self.root(phi1, phi2)?;
        let l = self.length(gamma, root);
        Ok([l * theta.sin(), l * theta.cos()])
    }

    /// Closed-form Jacobian `d(x, y) / d(phi1, phi2)` without a singularity check.
    pub fn jacobian_unchecked(&self, phi1: f64, phi2: f64) -> Result<Matrix2<f64>> {
        let (theta, gamma, root) = self.root(phi1, phi2)?;
        let l = self.length(gamma, root);
        let (sg, cg) = gamma.sin_cos();
        let big_phi = -self.l1 * sg * (1.0 + self.l1 * cg / root);
        let (st, ct) = theta.sin_cos();
        Ok(0.5
            * Matrix2::new(
                -big_phi * st + l * ct,
                big_phi * st + l * ct,
                -big_phi * ct - l * st,
                big_phi * ct - l * st,
            ))
    }

    /// Joint angles reaching `(x, y)`, choosing the branch with `gamma > 0`.
    pub fn inverse_kinematics(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        self.validate()?;
        let target = (x * x + y * y).sqrt();
        let len = |g: f64| {
            let d = self.l2 * self.l2 - (self.l1 * g.sin()).powi(2);
            self.l3 + self.l1 * g.cos() + d.max(0.0).sqrt()
        };
        // length decreases monotonically in gamma on [0, pi] when l2 > l1
        let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
        if self.l2 <= self.l1 || !(target <= len(lo) && target >= len(hi)) {
            return Err(RftError::InvalidSpec(format!(
                "toe position ({x}, {y}) is outside the leg workspace"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if len(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let gamma = 0.5 * (lo + hi);
        let theta = x.atan2(y);
        Ok((theta - gamma, theta + gamma))
    }
}

/// Ratio of the singular values of a 2x2 matrix.
pub fn condition_number(j: &Matrix2<f64>) -> f64 {
    let sv = j.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Five-bar Jacobian, rejecting workspace violations and near-singular poses.
pub fn fivebar_jacobian(phi1: f64, phi2: f64, params: &FiveBarParams) -> Result<Matrix2<f64>> {
    params.validate()?;
    let j = params.jacobian_unchecked(phi1, phi2)?;
    let condition = condition_number(&j);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(RftError::SingularJacobian {
            phi1,
            phi2,
            condition,
        });
    }
    Ok(j)
}

/// `tau = J^T F`.
pub fn force_to_torque(j: &Matrix2<f64>, force: &Vector2<f64>) -> Vector2<f64> {
    j.transpose() * force
}

/// `F = J^{-T} tau`.
pub fn torque_to_force(j: &Matrix2<f64>, torque: &Vector2<f64>) -> Result<Vector2<f64>> {
    let condition = condition_number(j);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(RftError::SingularJacobian {
            phi1: f64::NAN,
            phi2: f64::NAN,
            condition,
        });
    }
    let jt = j.transpose();
    jt.lu().solve(torque).ok_or(RftError::SingularJacobian {
        phi1: f64::NAN,
        phi2: f64::NAN,
        condition,
    })
}

/// `tau = k_t I`.
pub fn torque_from_current(torque_constant: f64, current: &Vector2<f64>) -> Vector2<f64> {
    current * torque_constant
}

/// Re-expresses a leg-frame Jacobian as a sensor map for stress components.
///
/// The result `G` is 2 x 2 with rows `(z, x)` and one column per motor, so a
/// segment contributes `w * G^T (alpha_z, alpha_x)` to the joint torques.
/// World `z` points up while leg `y` points down.
pub fn sensor_map(j: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-j[(1, 0)], -j[(1, 1)], j[(0, 0)], j[(0, 1)]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equal_angles_are_singular() {
        let p = FiveBarParams::default();
        let j = p.jacobian_unchecked(0.3, 0.3).unwrap();
        assert_relative_eq!(j.column(0), j.column(1));
        assert!(j.determinant().abs() < 1e-15);
        assert!(matches!(
            fivebar_jacobian(0.3, 0.3, &p),
            Err(RftError::SingularJacobian { .. })
        ));
    }

    #[test]
    fn workspace_violation() {
        let p = FiveBarParams {
            l1: 0.3,
            l2: 0.1,
            l3: 0.0,
            torque_constant: 0.1,
        };
        assert!(matches!(
            p.jacobian_unchecked(-0.8, 0.8),
            Err(RftError::Workspace { .. })
        ));
    }

    #[test]
    fn torque_from_motor_current() {
        let tau = torque_from_current(DEFAULT_TORQUE_CONSTANT, &Vector2::new(1.0, -2.0));
        assert_relative_eq!(tau[0], 0.0973, max_relative = 1e-15);
        assert_relative_eq!(tau[1], -0.1946, max_relative = 1e-15);
    }

    #[test]
    fn zero_force_zero_torque() {
        let p = FiveBarParams::default();
        let j = fivebar_jacobian(-0.5, 0.7, &p).unwrap();
        assert_eq!(force_to_torque(&j, &Vector2::zeros()), Vector2::zeros());
    }

    #[test]
    fn inverse_kinematics_round_trip() {
        let p = FiveBarParams::default();
        let (phi1, phi2) = p.inverse_kinematics(0.1, 0.25).unwrap();
        let xy = p.forward_kinematics(phi1, phi2).unwrap();
        assert_relative_eq!(xy[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(xy[1], 0.25, epsilon = 1e-12);
        assert!(phi2 > phi1);
        assert!(p.inverse_kinematics(1.0, 1.0).is_err());
    }

    #[test]
    fn sensor_map_matches_direct_projection() {
        let p = FiveBarParams::default();
        let j = fivebar_jacobian(-0.4, 0.9, &p).unwrap();
        let (fz, fx) = (2.0, -0.5);
        // world z up is leg -y
        let direct = force_to_torque(&j, &Vector2::new(fx, -fz));
        let g = sensor_map(&j);
        let via_g = g.transpose() * nalgebra::DVector::from_vec(vec![fz, fx]);
        assert_relative_eq!(direct[0], via_g[0], epsilon = 1e-15);
        assert_relative_eq!(direct[1], via_g[1], epsilon = 1e-15);
    }
}
