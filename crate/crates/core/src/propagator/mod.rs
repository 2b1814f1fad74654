//! High-order Taylor propagation with polynomial dense output and terminal
//! region events.

mod events;
mod taylor;

use std::sync::Arc;

pub use events::{Arming, Boundary, EventDirection, EventKind, EventSpec, Hit, GUARD_BAND};
pub use crate::poly::poly_roots_in_interval;

use crate::body_model::{RegionSpec, Vec3};
use crate::dynamics::{Dynamics, SpacecraftId, SpacecraftState};
use crate::error::{Result, SwarmError};
use taylor::RotatingMascons;

/// Smallest step the controller may choose before the dynamics are declared faulty [s].
pub const MIN_STEP: f64 = 1e-6;

/// One integrator step: dense polynomials of position and velocity in the
/// local time `τ = t − t0 ∈ [0, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub sc_id: SpacecraftId,
    pub t0: f64,
    /// End time; `t1 == t0 + h` up to rounding, stored so that segments tile exactly.
    pub t1: f64,
    pub h: f64,
    pub order: usize,
    /// `[component][k]`: x, y, z, vx, vy, vz.
    pub coeffs: [Vec<f64>; 6],
}

impl TrajectorySegment {
    /// Horner evaluation of all six polynomials, without range checks.
    pub fn eval(&self, tau: f64) -> [f64; 6] {
        std::array::from_fn(|k| crate::poly::horner(&self.coeffs[k], tau))
    }

    pub fn eval_dense(&self, tau: f64) -> Result<[f64; 6]> {
        if !(0.0..=self.h).contains(&tau) {
            return Err(SwarmError::OutOfSpan { tau, h: self.h });
        }
        Ok(self.eval(tau))
    }

    pub fn position(&self, tau: f64) -> Vec3 {
        Vec3::new(
            crate::poly::horner(&self.coeffs[0], tau),
            crate::poly::horner(&self.coeffs[1], tau),
            crate::poly::horner(&self.coeffs[2], tau),
        )
    }

    /// Evaluation at absolute time `t`, clamped to the segment span.
    pub fn eval_at(&self, t: f64) -> [f64; 6] {
        self.eval((t - self.t0).clamp(0.0, self.h))
    }

    pub fn initial(&self) -> [f64; 6] {
        std::array::from_fn(|k| self.coeffs[k][0])
    }

    pub fn final_state(&self) -> [f64; 6] {
        self.eval(self.h)
    }

    /// Shortens the span to end at absolute time `t` (polynomials unchanged).
    pub fn truncate(&mut self, t: f64) {
        self.t1 = t;
        self.h = t - self.t0;
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    /// Relative tolerance driving order and step-size selection.
    pub tol: f64,
    /// Upper bound on any single step [s].
    pub h_max: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { tol: 1e-12, h_max: f64::INFINITY }
    }
}

impl PropagatorConfig {
    /// Taylor order for the tolerance, never below 8.
    pub fn order(&self) -> usize {
        let p = (-self.tol.ln() / 2.0 + 1.0).ceil();
        (p as usize).max(8)
    }
}

/// Result of propagating one spacecraft over an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub segments: Vec<TrajectorySegment>,
    pub hit: Option<Hit>,
    pub arming_start: Arming,
    pub start_state: SpacecraftState,
    /// Times at which a disarmed event re-armed during the leg.
    pub rearms: Vec<(f64, EventKind)>,
    /// State at the end of the leg (the hit state when terminated).
    pub end_state: SpacecraftState,
    pub arming_end: Arming,
}

impl Leg {
    pub fn t_start(&self) -> f64 {
        self.segments.first().map_or(self.end_state.t, |s| s.t0)
    }

    /// Arming in effect at time `t` inside the leg.
    pub fn arming_at(&self, t: f64) -> Arming {
        let mut arming = self.arming_start;
        for &(tr, kind) in &self.rearms {
            if tr <= t {
                arming.set(kind, true);
            }
        }
        arming
    }

    /// State at absolute time `t` from the dense output.
    pub fn state_at(&self, t: f64) -> Option<[f64; 6]> {
        let seg = self.segments.iter().find(|s| t >= s.t0 && t <= s.t1)?;
        Some(seg.eval_at(t))
    }

    /// Drops everything after `t`, including any terminal hit.
    pub fn truncate(&mut self, t: f64) {
        self.segments.retain(|s| s.t0 < t);
        if let Some(last) = self.segments.last_mut() {
            if last.t1 > t {
                last.truncate(t);
            }
        }
        self.hit = None;
        self.rearms.retain(|&(tr, _)| tr <= t);
        self.arming_end = self.arming_at(t);
        self.end_state = match self.segments.last() {
            Some(last) => self.end_state.with_y(t, &last.eval_at(t)),
            None => self.start_state.clone(),
        };
    }
}

/// Which events a propagation watches, and their current arming.
#[derive(Debug, Clone, Copy)]
pub struct EventWatch<'a> {
    pub region: &'a RegionSpec,
    pub specs: &'a [EventSpec],
    pub arming: Arming,
}

impl<'a> EventWatch<'a> {
    pub fn none(region: &'a RegionSpec) -> Self {
        Self { region, specs: &[], arming: Arming::default() }
    }
}

/// Taylor integrator bound to one dynamics context; cheap to share between workers.
#[derive(Debug, Clone)]
pub struct Propagator {
    dynamics: Dynamics,
    mascons: Arc<RotatingMascons>,
    config: PropagatorConfig,
}

impl Propagator {
    pub fn new(dynamics: Dynamics, config: PropagatorConfig) -> Self {
        let mascons = Arc::new(RotatingMascons::new(&dynamics));
        Self { dynamics, mascons, config }
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order()
    }

    fn coefficients(&self, state: &SpacecraftState) -> Result<[Vec<f64>; 6]> {
        taylor::taylor_coefficients(&self.dynamics, &self.mascons, state.t, &state.y(), self.order())
    }

    /// Step size from the last two Taylor terms of the position series: the
    /// estimated radius of convergence scaled by `tol^(1/(p−1))`.
    fn controller_step(&self, coeffs: &[Vec<f64>; 6]) -> f64 {
        let p = self.order();
        let inf_norm = |k: usize| (0..3).map(|c| coeffs[c][k].abs()).fold(0.0, f64::max);
        let scale = match inf_norm(0) {
            m if m > 0.0 => m,
            _ => 1.0,
        };
        let radius = |k: usize| {
            let nk = inf_norm(k);
            if nk == 0.0 {
                f64::INFINITY
            } else {
                (scale / nk).powf(1.0 / k as f64)
            }
        };
        let rho = radius(p - 1).min(radius(p));
        let exponent = 1.0 / (p - 1) as f64;
        rho * self.config.tol.powf(exponent) * (-0.7 * exponent).exp()
    }

    /// One adaptive step, never longer than `h_limit`.
    pub fn taylor_step(&self, state: &SpacecraftState, h_limit: f64) -> Result<TrajectorySegment> {
        let coeffs = self.coefficients(state)?;
        let h = self.controller_step(&coeffs);
        if h < MIN_STEP {
            return Err(SwarmError::StepUnderflow { t: state.t, h });
        }
        let limit = h_limit.min(self.config.h_max);
        // Absorb a sliver left before the limit rather than taking a tiny extra step.
        let h = if h >= limit || limit - h < 1e-3 * h { limit } else { h };
        Ok(self.segment(state, coeffs, h))
    }

    /// One step of prescribed size `h` (no error control).
    pub fn taylor_step_fixed(&self, state: &SpacecraftState, h: f64) -> Result<TrajectorySegment> {
        if !(h > 0.0) {
            return Err(SwarmError::InvalidArgument(format!("step size {h} must be positive")));
        }
        let coeffs = self.coefficients(state)?;
        Ok(self.segment(state, coeffs, h))
    }

    fn segment(&self, state: &SpacecraftState, coeffs: [Vec<f64>; 6], h: f64) -> TrajectorySegment {
        TrajectorySegment { sc_id: state.id, t0: state.t, t1: state.t + h, h, order: self.order(), coeffs }
    }

    /// Integrates from `state` to `t_end`, stopping at the first terminal event.
    pub fn propagate_until(&self, state: &SpacecraftState, t_end: f64, watch: &EventWatch) -> Result<Leg> {
        if t_end < state.t {
            return Err(SwarmError::InvalidArgument(format!(
                "t_end {t_end} precedes the state epoch {}",
                state.t
            )));
        }
        let mut leg = Leg {
            segments: Vec::new(),
            hit: None,
            arming_start: watch.arming,
            start_state: state.clone(),
            rearms: Vec::new(),
            end_state: state.clone(),
            arming_end: watch.arming,
        };
        let mut current = state.clone();
        let mut arming = watch.arming;
        while current.t < t_end {
            let remaining = t_end - current.t;
            let mut seg = self.taylor_step(&current, remaining)?;
            if seg.h == remaining {
                seg.t1 = t_end;
            }
            if !watch.specs.is_empty() {
                let outcome = events::scan_segment(
                    &seg,
                    watch.region,
                    self.dynamics.rotation(),
                    watch.specs,
                    &mut arming,
                    &mut leg.rearms,
                );
                if let Some((kind, boundary, tau)) = outcome {
                    let t_hit = seg.t0 + tau;
                    seg.truncate(t_hit);
                    let y = seg.eval(tau);
                    let hit_state = current.with_y(t_hit, &y);
                    leg.segments.push(seg);
                    leg.hit = Some(Hit { kind, boundary, t: t_hit, state: hit_state.clone() });
                    leg.end_state = hit_state;
                    leg.arming_end = arming;
                    return Ok(leg);
                }
            }
            let y = seg.final_state();
            current = current.with_y(seg.t1, &y);
            if !current.is_finite() {
                return Err(SwarmError::StepUnderflow { t: current.t, h: seg.h });
            }
            leg.segments.push(seg);
        }
        leg.end_state = current;
        leg.arming_end = arming;
        Ok(leg)
    }
}
