//! Impulsive maneuver policy and ΔV bookkeeping.

use std::fmt;
use std::str::FromStr;

use crate::body_model::Vec3;
use crate::dynamics::{SpacecraftId, SpacecraftState};
use crate::error::{Result, SwarmError};

/// Default collision-avoidance impulse per spacecraft [km/s] (1 cm/s).
pub const DEFAULT_DV_CA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ManeuverCause {
    CollisionAvoidance,
    Safety,
    ReEntry,
}

impl ManeuverCause {
    pub const ALL: [ManeuverCause; 3] = [Self::CollisionAvoidance, Self::Safety, Self::ReEntry];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CollisionAvoidance => "collision",
            Self::Safety => "safety",
            Self::ReEntry => "re-entry",
        }
    }
}

impl fmt::Display for ManeuverCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManeuverCause {
    type Err = SwarmError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| SwarmError::InvalidArgument(format!("unknown maneuver cause {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverEvent {
    pub t: f64,
    pub cause: ManeuverCause,
    pub sc_id: SpacecraftId,
    /// The partner of a collision-avoidance maneuver.
    pub other_id: Option<SpacecraftId>,
    /// Impulse applied to `sc_id` [km/s].
    pub dv: Vec3,
    pub dv_mag: f64,
    /// Fired at the guard-band edge of a disarmed event rather than at the boundary itself.
    pub guard: bool,
    /// Inertial position of `sc_id` at `t` [km].
    pub r: Vec3,
    /// Inertial position of the partner, for collision avoidance.
    pub r_other: Option<Vec3>,
}

impl ManeuverEvent {
    pub fn new(t: f64, cause: ManeuverCause, sc_id: SpacecraftId, other_id: Option<SpacecraftId>, dv: Vec3) -> Self {
        Self { t, cause, sc_id, other_id, dv, dv_mag: dv.norm(), guard: false, r: Vec3::zeros(), r_other: None }
    }

    pub fn at(mut self, r: Vec3, r_other: Option<Vec3>) -> Self {
        self.r = r;
        self.r_other = r_other;
        self
    }
}

/// Circular velocity at the current radius, in the current orbital plane.
/// Returns `(v_new, dv)`.
pub fn circularize(mu_total: f64, r: &Vec3, v: &Vec3) -> Result<(Vec3, Vec3)> {
    let rn = r.norm();
    if !(rn > 0.0) {
        return Err(SwarmError::InvalidArgument("cannot circularize at zero radius".into()));
    }
    let r_hat = r / rn;
    let h = r.cross(v);
    let t_hat = if h.norm() >= 1e-12 {
        h.normalize().cross(&r_hat)
    } else {
        // Radial motion leaves the plane undefined: move along ẑ×r̂ (or x̂×r̂ on the pole axis).
        let z_cross = Vec3::z().cross(&r_hat);
        if z_cross.norm() > 1e-12 {
            z_cross.normalize()
        } else {
            Vec3::x().cross(&r_hat).normalize()
        }
    };
    let v_new = (mu_total / rn).sqrt() * t_hat;
    Ok((v_new, v_new - v))
}

/// Specular reflection off a surface with outward normal `n_out` when moving inward.
pub fn reflect_safety(n_out: &Vec3, v: &Vec3) -> (Vec3, Vec3) {
    let vn = v.dot(n_out);
    if vn < 0.0 {
        let v_new = v - 2.0 * vn * n_out;
        (v_new, v_new - v)
    } else {
        (*v, Vec3::zeros())
    }
}

/// Pushes both spacecraft apart along the line of centers; `r_rel = r_i − r_j`.
pub fn separate_pair(r_rel: &Vec3, dv_ca: f64) -> Result<(Vec3, Vec3)> {
    let n = r_rel.norm();
    if !(n > 0.0) {
        return Err(SwarmError::InvalidArgument("coincident spacecraft cannot be separated".into()));
    }
    let u = r_rel / n;
    Ok((dv_ca * u, -dv_ca * u))
}

pub fn apply_maneuver(state: &SpacecraftState, dv: &Vec3) -> SpacecraftState {
    let mut next = state.clone();
    next.v += dv;
    next.dv_budget_used += dv.norm();
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn circularize_examples() {
        let (v, dv) = circularize(1.0, &Vec3::new(1.0, 0.0, 0.0), &Vec3::new(0.0, 1.2, 0.0)).unwrap();
        assert!(close(&v, &Vec3::new(0.0, 1.0, 0.0), 1e-15));
        assert!((dv.norm() - 0.2).abs() < 1e-15);

        let (_, dv) = circularize(1.0, &Vec3::new(1.0, 0.0, 0.0), &Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(dv, Vec3::zeros());

        let (v, dv) = circularize(1.0, &Vec3::new(1.0, 0.0, 0.0), &Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert!(close(&v, &Vec3::new(0.0, 1.0, 0.0), 1e-15));
        assert!((dv.norm() - 1.01f64.sqrt()).abs() < 1e-15);

        // Radial along ẑ uses the x̂ fallback.
        let (v, _) = circularize(1.0, &Vec3::new(0.0, 0.0, 4.0), &Vec3::new(0.0, 0.0, 0.1)).unwrap();
        assert!(close(&v, &Vec3::new(0.0, -0.5, 0.0), 1e-15));

        assert!(circularize(1.0, &Vec3::zeros(), &Vec3::x()).is_err());
    }

    #[test]
    fn reflect_examples() {
        let (v, dv) = reflect_safety(&Vec3::x(), &Vec3::new(-1.0, 2.0, 0.0));
        assert_eq!(v, Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(dv.norm(), 2.0);
        let (v, dv) = reflect_safety(&Vec3::x(), &Vec3::new(0.5, 2.0, 0.0));
        assert_eq!(v, Vec3::new(0.5, 2.0, 0.0));
        assert_eq!(dv, Vec3::zeros());
    }

    #[test]
    fn separate_examples() {
        let (a, b) = separate_pair(&Vec3::new(1.0, 0.0, 0.0), 0.01).unwrap();
        assert_eq!(a, Vec3::new(0.01, 0.0, 0.0));
        assert_eq!(b, Vec3::new(-0.01, 0.0, 0.0));
        assert!(separate_pair(&Vec3::zeros(), 0.01).is_err());
    }

    #[test]
    fn budget_accumulates_magnitudes() {
        let s = SpacecraftState::new(0, 5.0, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        let same = apply_maneuver(&s, &Vec3::zeros());
        assert_eq!(same, s);
        let dv = Vec3::new(1e-4, 0.0, 0.0);
        let once = apply_maneuver(&s, &dv);
        let twice = apply_maneuver(&once, &-dv);
        assert_eq!(twice.v, s.v);
        assert_eq!(twice.dv_budget_used, 2e-4);
        assert_eq!((twice.r, twice.t), (s.r, s.t));
        let mut k_times = s.clone();
        for _ in 0..10 {
            k_times = apply_maneuver(&k_times, &Vec3::new(0.0, 1e-4, 0.0));
        }
        assert!((k_times.dv_budget_used * 1e3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cause_round_trips() {
        for c in ManeuverCause::ALL {
            assert_eq!(c.as_str().parse::<ManeuverCause>().unwrap(), c);
        }
        assert!("other".parse::<ManeuverCause>().is_err());
        let e = ManeuverEvent::new(1.0, ManeuverCause::Safety, 3, None, Vec3::new(3.0, 4.0, 0.0));
        assert_eq!(e.dv_mag, 5.0);
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn circularize_postconditions(r in vec3(), v in vec3(), mu in 1e-9..10.0f64) {
            prop_assume!(r.norm() > 1e-3);
            let (v_new, dv) = circularize(mu, &r, &v).unwrap();
            let speed = (mu / r.norm()).sqrt();
            prop_assert!((v_new.norm() - speed).abs() <= 1e-12 * speed);
            prop_assert!(v_new.dot(&r).abs() <= 1e-12 * speed * r.norm());
            prop_assert!(close(&(v + dv), &v_new, 1e-15 * (1.0 + v.norm() + speed)));
        }

        #[test]
        fn reflection_postconditions(n in vec3(), v in vec3()) {
            prop_assume!(n.norm() > 1e-3);
            let n = n.normalize();
            let (v_new, dv) = reflect_safety(&n, &v);
            prop_assert!((v_new.norm() - v.norm()).abs() <= 1e-12 * (1.0 + v.norm()));
            prop_assert!((dv.norm() - 2.0 * v.dot(&n).min(0.0).abs()).abs() <= 1e-12 * (1.0 + v.norm()));
            if v.dot(&n) < 0.0 {
                prop_assert!((v_new.dot(&n) + v.dot(&n)).abs() <= 1e-12 * (1.0 + v.norm()));
            }
        }

        #[test]
        fn separation_is_symmetric(r in vec3(), dv_ca in 1e-6..1.0f64) {
            prop_assume!(r.norm() > 1e-6);
            let (a, b) = separate_pair(&r, dv_ca).unwrap();
            prop_assert_eq!(a + b, Vec3::zeros());
            // Relative radial speed grows by 2·dv_ca.
            prop_assert!(((a - b).dot(&r.normalize()) - 2.0 * dv_ca).abs() <= 1e-12);
        }

        #[test]
        fn budget_never_decreases(dvs in proptest::collection::vec(vec3(), 0..20)) {
            let mut s = SpacecraftState::new(0, 0.0, Vec3::x(), Vec3::y());
            for dv in dvs {
                let before = s.dv_budget_used;
                s = apply_maneuver(&s, &dv);
                prop_assert!(s.dv_budget_used >= before);
            }
        }
    }
}
