//! Equations of motion: mascon gravity of the rotating body plus a flat-field
//! solar radiation pressure term.

use std::sync::Arc;

use crate::body_model::{body_to_inertial, inertial_to_body, MasconModel, RotationState, Vec3};
use crate::error::{Result, SwarmError};

/// Closest allowed approach to a mascon before evaluation is a fault [km].
pub const SINGULAR_DISTANCE: f64 = 1e-9;

pub type SpacecraftId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct SpacecraftState {
    pub id: SpacecraftId,
    pub t: f64,
    pub r: Vec3,
    pub v: Vec3,
    /// Accumulated |ΔV| in km/s.
    pub dv_budget_used: f64,
}

impl SpacecraftState {
    pub fn new(id: SpacecraftId, t: f64, r: Vec3, v: Vec3) -> Self {
        Self { id, t, r, v, dv_budget_used: 0.0 }
    }

    pub fn y(&self) -> [f64; 6] {
        [self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z]
    }

    pub fn with_y(&self, t: f64, y: &[f64; 6]) -> Self {
        Self {
            id: self.id,
            t,
            r: Vec3::new(y[0], y[1], y[2]),
            v: Vec3::new(y[3], y[4], y[5]),
            dv_budget_used: self.dv_budget_used,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.r.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }
}

/// Solar radiation pressure parameters. `sun_dir` is the direction of the
/// radiation pressure push, i.e. away from the Sun.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpParams {
    /// Solar flux pressure at 1 AU [N/m²].
    pub p_flux_1au: f64,
    /// Illuminated ("wet") area [m²].
    pub area: f64,
    /// Spacecraft mass [kg].
    pub mass: f64,
    pub cr: f64,
    pub sun_dir: Vec3,
    /// Heliocentric distance [AU].
    pub helio_distance: f64,
}

impl Default for SrpParams {
    fn default() -> Self {
        Self {
            p_flux_1au: 4.56e-6,
            area: 1.0,
            mass: 12.0,
            cr: 1.2,
            sun_dir: Vec3::x(),
            helio_distance: 1.0,
        }
    }
}

impl SrpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.area > 0.0
            && self.mass > 0.0
            && (1.0..=2.0).contains(&self.cr)
            && self.helio_distance > 0.0
            && self.p_flux_1au >= 0.0
            && (self.sun_dir.norm() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(SwarmError::InvalidArgument(format!("invalid SRP parameters: {self:?}")))
        }
    }
}

/// Constant SRP acceleration in km/s².
pub fn srp_accel(p: &SrpParams) -> Vec3 {
    let pressure = p.p_flux_1au / (p.helio_distance * p.helio_distance);
    // N/kg = m/s², then to km/s².
    p.sun_dir * (pressure * p.cr * p.area / p.mass * 1e-3)
}

/// Gravity of the mascon set evaluated directly in the body frame.
pub fn gravity_accel_body(model: &MasconModel, x_body: &Vec3, t: f64) -> Result<Vec3> {
    let mut acc = Vec3::zeros();
    for (index, (p, mu)) in model.positions().iter().zip(model.mus()).enumerate() {
        let d = x_body - p;
        let r2 = d.norm_squared();
        if r2 < SINGULAR_DISTANCE * SINGULAR_DISTANCE {
            return Err(SwarmError::Singular { index, distance: r2.sqrt(), t });
        }
        let r = r2.sqrt();
        acc -= d * (mu / (r2 * r));
    }
    Ok(acc)
}

/// Inertial gravity acceleration of the rotating mascon body at `x` [km/s²].
pub fn gravity_accel(model: &MasconModel, rot: &RotationState, t: f64, x: &Vec3) -> Result<Vec3> {
    let x_body = inertial_to_body(rot, t, x);
    Ok(body_to_inertial(rot, t, &gravity_accel_body(model, &x_body, t)?))
}

/// Gravitational potential U = Σ μ_i / |x − p_i| (positive convention).
pub fn potential(model: &MasconModel, rot: &RotationState, t: f64, x: &Vec3) -> f64 {
    let x_body = inertial_to_body(rot, t, x);
    model
        .positions()
        .iter()
        .zip(model.mus())
        .map(|(p, mu)| mu / (x_body - p).norm())
        .sum()
}

/// Everything the right-hand side needs, shareable across workers.
#[derive(Debug, Clone)]
pub struct Dynamics {
    model: Arc<MasconModel>,
    rotation: RotationState,
    srp: Option<SrpParams>,
    srp_accel: Vec3,
}

impl Dynamics {
    pub fn new(model: Arc<MasconModel>, rotation: RotationState, srp: Option<SrpParams>) -> Self {
        let srp_accel = srp.as_ref().map_or_else(Vec3::zeros, srp_accel);
        Self { model, rotation, srp, srp_accel }
    }

    pub fn model(&self) -> &MasconModel {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<MasconModel> {
        &self.model
    }

    pub fn rotation(&self) -> &RotationState {
        &self.rotation
    }

    pub fn srp(&self) -> Option<&SrpParams> {
        self.srp.as_ref()
    }

    pub fn srp_accel(&self) -> Vec3 {
        self.srp_accel
    }

    pub fn gravity(&self, t: f64, x: &Vec3) -> Result<Vec3> {
        gravity_accel(&self.model, &self.rotation, t, x)
    }

    /// (ṙ, v̇) = (v, gravity + SRP).
    pub fn rhs(&self, t: f64, y: &[f64; 6]) -> Result<[f64; 6]> {
        let a = self.gravity(t, &Vec3::new(y[0], y[1], y[2]))? + self.srp_accel;
        Ok([y[3], y[4], y[5], a.x, a.y, a.z])
    }

    /// Specific mechanical energy |v|²/2 − U (meaningful for a non-rotating body).
    pub fn energy(&self, t: f64, r: &Vec3, v: &Vec3) -> f64 {
        0.5 * v.norm_squared() - potential(&self.model, &self.rotation, t, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(points: &[([f64; 3], f64)]) -> MasconModel {
        MasconModel::new(
            "test",
            points.iter().map(|(p, _)| Vec3::from(*p)).collect(),
            points.iter().map(|(_, mu)| *mu).collect(),
        )
        .unwrap()
    }

    #[test]
    fn point_mass_gravity() {
        let m = model(&[([0.0; 3], 1.0)]);
        let a = gravity_accel(&m, &RotationState::non_rotating(), 0.0, &Vec3::x()).unwrap();
        assert_eq!(a, Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn symmetric_pair_has_no_transverse_pull() {
        let m = model(&[([0.1, 0.0, 0.0], 0.5), ([-0.1, 0.0, 0.0], 0.5)]);
        let a = gravity_accel(&m, &RotationState::non_rotating(), 0.0, &Vec3::z()).unwrap();
        assert!(a.x.abs() < 1e-16 && a.y.abs() < 1e-16);
        assert!(a.z < 0.0);
    }

    #[test]
    fn pair_matches_direct_summation() {
        // Values from an independent direct summation script.
        let m = model(&[([0.1, 0.0, 0.0], 0.5), ([-0.1, 0.0, 0.0], 0.5)]);
        let rot = RotationState::non_rotating();
        let a = gravity_accel(&m, &rot, 0.0, &Vec3::x()).unwrap();
        assert!((a.x - -1.0305070911131515).abs() < 1e-15);
        let b = gravity_accel(&m, &rot, 0.0, &Vec3::new(0.3, 0.7, -0.4)).unwrap();
        let expected = Vec3::new(-0.44882067334551146, -1.0907626173402918, 0.6232929241944525);
        assert!((b - expected).norm() < 1e-14);
    }

    #[test]
    fn rotating_pair_follows_the_body() {
        let m = model(&[([0.1, 0.0, 0.0], 0.5), ([-0.1, 0.05, 0.0], 0.5)]);
        let rot = RotationState::new(Vec3::z(), Some(100.0), 0.0).unwrap();
        let x = Vec3::new(0.2, 0.9, 0.1);
        let a = gravity_accel(&m, &rot, 25.0, &x).unwrap();
        // Rotate every mascon explicitly and sum.
        let mut direct = Vec3::zeros();
        for (p, mu) in m.positions().iter().zip(m.mus()) {
            let q = body_to_inertial(&rot, 25.0, p);
            let d = x - q;
            direct -= d * (mu / d.norm().powi(3));
        }
        assert!((a - direct).norm() < 1e-14);
    }

    #[test]
    fn singular_evaluation_is_a_fault() {
        let m = model(&[([0.1, 0.0, 0.0], 1.0)]);
        let err = gravity_accel(&m, &RotationState::non_rotating(), 3.0, &Vec3::new(0.1, 0.0, 0.0))
            .unwrap_err();
        assert!(matches!(err, SwarmError::Singular { index: 0, .. }));
        assert!(err.is_dynamics_fault());
    }

    #[test]
    fn srp_magnitude_and_direction() {
        let p = SrpParams::default();
        p.validate().unwrap();
        let a = srp_accel(&p);
        assert!((a.norm() - 4.56e-10).abs() < 1e-22);
        assert!(a.y == 0.0 && a.z == 0.0 && a.x > 0.0);
        let doubled = srp_accel(&SrpParams { cr: 2.0 * p.cr, area: p.area, ..p });
        assert!((doubled.norm() - 2.0 * a.norm()).abs() < 1e-22);
        assert!(SrpParams { cr: 3.0, ..p }.validate().is_err());
    }

    #[test]
    fn rhs_examples() {
        let m = Arc::new(model(&[([0.0; 3], 1.0)]));
        let dyn_off = Dynamics::new(m.clone(), RotationState::non_rotating(), None);
        let y = dyn_off.rhs(0.0, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, [0.0, 0.0, 0.0, -0.25, 0.0, 0.0]);

        // Negligible gravity: acceleration is the SRP vector.
        let tiny = Arc::new(model(&[([0.0; 3], 1e-300)]));
        let srp = SrpParams::default();
        let dyn_srp = Dynamics::new(tiny, RotationState::non_rotating(), Some(srp));
        let y = dyn_srp.rhs(0.0, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(Vec3::new(y[3], y[4], y[5]), srp_accel(&srp));

        // Circular state: radial rate vanishes.
        let y = dyn_off.rhs(0.0, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let r = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(r.dot(&Vec3::new(y[0], y[1], y[2])), 0.0);
    }

    #[test]
    fn gravity_is_the_potential_gradient() {
        let body = crate::body_model::synth_ellipsoid_body(Vec3::new(0.3, 0.15, 0.15), 100, 3e-9, 9)
            .unwrap();
        let rot = RotationState::new(Vec3::new(0.1, 0.0, 1.0), Some(40_000.0), 0.2).unwrap();
        let step = 1e-5;
        for (i, x) in [Vec3::new(0.8, 0.1, -0.2), Vec3::new(-0.3, 1.1, 0.4), Vec3::new(0.0, 0.0, 0.5)]
            .iter()
            .enumerate()
        {
            let t = 1000.0 * i as f64;
            let a = gravity_accel(&body, &rot, t, x).unwrap();
            let mut fd = Vec3::zeros();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = step;
                fd[k] = (potential(&body, &rot, t, &(x + e)) - potential(&body, &rot, t, &(x - e)))
                    / (2.0 * step);
            }
            assert!((fd - a).norm() <= 1e-6 * a.norm(), "{fd:?} vs {a:?}");
        }
    }
}
