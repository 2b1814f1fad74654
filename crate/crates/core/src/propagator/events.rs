//! Terminal region events located on the dense output.
//!
//! Each event is tracked through a normalized "violation" coordinate `q`
//! that crosses zero upwards when the spacecraft breaches the boundary:
//! `q = −g_safe` for safety-ellipsoid entry and `q = g_exit / R_exit` for
//! leaving the operations sphere. After a maneuver the event is disarmed:
//! it then fires only past the outer edge of the guard band (`q = +GUARD_BAND`)
//! and re-arms once the spacecraft is back inside (`q = −GUARD_BAND`). Each
//! guard firing pushes the next guard edge out by another band width, so a
//! spacecraft that keeps drifting outward keeps being caught.

use crate::body_model::{inertial_to_body, RegionSpec, RotationState};
use crate::dynamics::SpacecraftState;
use crate::poly::{chebyshev_interpolant, poly_roots_in_interval};

use super::TrajectorySegment;

/// Relative half-width of the hysteresis band around each boundary.
pub const GUARD_BAND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    SafetyEntry,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventDirection {
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventSpec {
    pub kind: EventKind,
    pub direction: EventDirection,
    pub terminal: bool,
}

impl EventSpec {
    /// Entering the safety ellipsoid: `g_safe` decreasing through zero.
    pub fn safety_entry() -> Self {
        Self { kind: EventKind::SafetyEntry, direction: EventDirection::Decreasing, terminal: true }
    }

    /// Leaving the operations sphere: `g_exit` increasing through zero.
    pub fn exit() -> Self {
        Self { kind: EventKind::Exit, direction: EventDirection::Increasing, terminal: true }
    }

    pub fn both() -> [Self; 2] {
        [Self::safety_entry(), Self::exit()]
    }

    /// Normalized event function of this kind, positive on the violating side
    /// when the direction is honored.
    pub fn violation(&self, region: &RegionSpec, rot: &RotationState, t: f64, r: &crate::body_model::Vec3) -> f64 {
        let g = match self.kind {
            EventKind::SafetyEntry => region.g_safe_body(&inertial_to_body(rot, t, r)),
            EventKind::Exit => region.g_exit(r) / region.exit_radius(),
        };
        match self.direction {
            EventDirection::Increasing => g,
            EventDirection::Decreasing => -g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arming {
    pub safety: bool,
    pub exit: bool,
    /// Guard firings since the safety event was disarmed.
    pub safety_guards: u32,
    pub exit_guards: u32,
}

impl Default for Arming {
    fn default() -> Self {
        Self { safety: true, exit: true, safety_guards: 0, exit_guards: 0 }
    }
}

impl Arming {
    pub fn get(&self, kind: EventKind) -> bool {
        match kind {
            EventKind::SafetyEntry => self.safety,
            EventKind::Exit => self.exit,
        }
    }

    /// Arms or disarms `kind`, clearing its guard escalation.
    pub fn set(&mut self, kind: EventKind, armed: bool) {
        match kind {
            EventKind::SafetyEntry => (self.safety, self.safety_guards) = (armed, 0),
            EventKind::Exit => (self.exit, self.exit_guards) = (armed, 0),
        }
    }

    /// Records a guard firing of the disarmed event `kind`.
    pub fn escalate(&mut self, kind: EventKind) {
        match kind {
            EventKind::SafetyEntry => self.safety_guards += 1,
            EventKind::Exit => self.exit_guards += 1,
        }
    }

    /// Violation level at which the disarmed event `kind` fires.
    pub fn guard_level(&self, kind: EventKind) -> f64 {
        let n = match kind {
            EventKind::SafetyEntry => self.safety_guards,
            EventKind::Exit => self.exit_guards,
        };
        GUARD_BAND * (1 + n) as f64
    }
}

/// Which boundary fired: the nominal surface, or the guard-band edge of a disarmed event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Nominal,
    Guard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub kind: EventKind,
    pub boundary: Boundary,
    pub t: f64,
    pub state: SpacecraftState,
}

enum Action {
    Trigger(Boundary),
    Rearm,
}

/// Scans one step for the earliest terminal crossing, re-arming events on the way.
/// Returns `(kind, boundary, τ)` of the terminal crossing, if any.
pub(super) fn scan_segment(
    seg: &TrajectorySegment,
    region: &RegionSpec,
    rot: &RotationState,
    specs: &[EventSpec],
    arming: &mut Arming,
    rearms: &mut Vec<(f64, EventKind)>,
) -> Option<(EventKind, Boundary, f64)> {
    let h = seg.h;
    if !(h > 0.0) {
        return None;
    }
    let degree = seg.order.max(8);
    let q_at = |spec: &EventSpec, tau: f64| spec.violation(region, rot, seg.t0 + tau, &seg.position(tau));
    let interpolants: Vec<Vec<f64>> = specs
        .iter()
        .map(|spec| chebyshev_interpolant(degree, |u| q_at(spec, 0.5 * h * (u + 1.0))))
        .collect();

    let mut tau_start = 0.0;
    loop {
        let mut best: Option<(f64, usize, Action)> = None;
        for (i, spec) in specs.iter().enumerate().filter(|(_, s)| s.terminal) {
            let q = |tau: f64| q_at(spec, tau);
            let mut consider = |tau: Option<f64>, action: Action| {
                if let Some(tau) = tau {
                    if best.as_ref().is_none_or(|(b, _, _)| tau < *b) {
                        best = Some((tau, i, action));
                    }
                }
            };
            if arming.get(spec.kind) {
                let tau = first_crossing(&interpolants[i], &q, 0.0, true, tau_start, h);
                consider(tau, Action::Trigger(Boundary::Nominal));
            } else {
                let guard = first_crossing(&interpolants[i], &q, arming.guard_level(spec.kind), true, tau_start, h);
                consider(guard, Action::Trigger(Boundary::Guard));
                let rearm = first_crossing(&interpolants[i], &q, -GUARD_BAND, false, tau_start, h);
                consider(rearm, Action::Rearm);
            }
        }
        match best {
            None => return None,
            Some((tau, i, Action::Rearm)) => {
                arming.set(specs[i].kind, true);
                rearms.push((seg.t0 + tau, specs[i].kind));
                tau_start = tau;
            }
            Some((tau, i, Action::Trigger(boundary))) => return Some((specs[i].kind, boundary, tau)),
        }
    }
}

/// First τ in `(tau_start, h]` where `sign·(q − level)` goes from negative to
/// non-negative, located on the interpolant and refined on the true function.
fn first_crossing(
    interpolant: &[f64],
    q: &impl Fn(f64) -> f64,
    level: f64,
    upward: bool,
    tau_start: f64,
    h: f64,
) -> Option<f64> {
    let sign = if upward { 1.0 } else { -1.0 };
    let f = |tau: f64| sign * (q(tau) - level);
    let u_start = 2.0 * tau_start / h - 1.0;
    if u_start < 1.0 {
        let mut shifted: Vec<f64> = interpolant.iter().map(|c| sign * c).collect();
        shifted[0] -= sign * level;
        for u in poly_roots_in_interval(&shifted, u_start, 1.0, 1e-13) {
            let tau_root = 0.5 * h * (u + 1.0);
            let mut delta = 1e-9 * h;
            while delta <= 1e-5 * h {
                let lo = (tau_root - delta).max(tau_start);
                let hi = (tau_root + delta).min(h);
                if f(lo) < 0.0 && f(hi) >= 0.0 {
                    return Some(bisect(&f, lo, hi));
                }
                delta *= 10.0;
            }
        }
    }
    // Interpolation missed a crossing that the endpoints reveal.
    if tau_start < h && f(tau_start) < 0.0 && f(h) >= 0.0 {
        return Some(bisect(&f, tau_start, h));
    }
    None
}

/// Bisection for `f(lo) < 0 ≤ f(hi)`; returns the non-negative side.
fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
