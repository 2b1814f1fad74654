//! The simulation loop: per collisional timestep, propagate every spacecraft
//! with terminal region events, screen the dense output for conjunctions,
//! resolve all events in time order, and record the gravity signal.
//!
//! Timesteps are grouped into batches. Within a batch each spacecraft is
//! propagated speculatively across all member timesteps in parallel; the
//! timesteps are then committed one after another, and a speculative leg is
//! used only when it starts from exactly the committed state, so the outcome
//! is identical to strictly serial execution.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::body_model::{inertial_to_body, Vec3};
use crate::conjunction::{detect_all, Track};
use crate::dynamics::{Dynamics, SpacecraftId, SpacecraftState};
use crate::error::{Result, SwarmError};
use crate::gravimetry::GravitySample;
use crate::guidance::{apply_maneuver, circularize, reflect_safety, separate_pair, ManeuverCause, ManeuverEvent};
use crate::propagator::{
    Arming, Boundary, EventKind, EventSpec, EventWatch, Leg, Propagator, PropagatorConfig, TrajectorySegment,
};
use crate::scenario::{mothership_state, sample_release, ScenarioConfig};

pub const EVENTS_CSV_HEADER: &str = "t_s,cause,sc_id,other_id,dv_x,dv_y,dv_z,dv_mag_m_s";
pub const TRAJECTORY_CSV_HEADER: &str = "t_s,sc_id,x_km,y_km,z_km,vx_km_s,vy_km_s,vz_km_s";

/// Row labels of the results table, in display order.
pub const TABLE_ROWS: [&str; 6] = [
    "ΔV_min [m/s]",
    "ΔV_max [m/s]",
    "ΔV_mean [m/s]",
    "Collision events",
    "Safety events",
    "Re-entry events",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSpacecraft {
    pub state: SpacecraftState,
    pub arming: Arming,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub sc_id: SpacecraftId,
    pub r: Vec3,
    pub v: Vec3,
}

/// A timestep in which a spacecraft exhausted its re-propagation budget; the
/// rest of that timestep was flown without event monitoring.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flag {
    pub t_s: f64,
    pub epoch: usize,
    pub sc_id: SpacecraftId,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldState {
    pub t: f64,
    /// Index of the next timestep to execute.
    pub epoch: usize,
    /// Released spacecraft, ordered by id.
    pub live: Vec<LiveSpacecraft>,
    /// Ids still waiting for their release timestep.
    pub pending_releases: Vec<SpacecraftId>,
    pub events: Vec<ManeuverEvent>,
    pub samples: Vec<GravitySample>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub propagation: Duration,
    pub screening: Duration,
    pub total: Duration,
}

impl Timing {
    pub fn screening_fraction(&self) -> f64 {
        let total = self.total.as_secs_f64();
        if total > 0.0 {
            self.screening.as_secs_f64() / total
        } else {
            0.0
        }
    }
}

/// ΔV statistics and event counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub dv_per_spacecraft_m_s: Vec<f64>,
    pub dv_min_m_s: f64,
    pub dv_max_m_s: f64,
    pub dv_mean_m_s: f64,
    pub collision_events: usize,
    pub safety_events: usize,
    pub reentry_events: usize,
}

impl Summary {
    pub fn table_values(&self) -> [f64; 6] {
        [
            self.dv_min_m_s,
            self.dv_max_m_s,
            self.dv_mean_m_s,
            self.collision_events as f64,
            self.safety_events as f64,
            self.reentry_events as f64,
        ]
    }

    pub fn total_events(&self) -> usize {
        self.collision_events + self.safety_events + self.reentry_events
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub row: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub body: String,
    pub swarm_size: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub timestep_s: f64,
    pub epochs: usize,
    #[serde(flatten)]
    pub summary: Summary,
    pub table: Vec<TableRow>,
    pub flags: Vec<Flag>,
    /// Wall-clock figures vary between runs and stay out of the JSON export.
    #[serde(skip)]
    pub timing: Timing,
}

/// Min/max/mean of the per-spacecraft ΔV totals [m/s] and per-cause counts.
pub fn summarize(events: &[ManeuverEvent], budgets_m_s: &[f64]) -> Summary {
    let count = |cause| events.iter().filter(|e| e.cause == cause).count();
    let (min, max, mean) = if budgets_m_s.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let min = budgets_m_s.iter().copied().fold(f64::INFINITY, f64::min);
        let max = budgets_m_s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = budgets_m_s.iter().sum::<f64>() / budgets_m_s.len() as f64;
        // Keep min ≤ mean ≤ max under rounding.
        (min, max, mean.clamp(min, max))
    };
    Summary {
        dv_per_spacecraft_m_s: budgets_m_s.to_vec(),
        dv_min_m_s: min,
        dv_max_m_s: max,
        dv_mean_m_s: mean,
        collision_events: count(ManeuverCause::CollisionAvoidance),
        safety_events: count(ManeuverCause::Safety),
        reentry_events: count(ManeuverCause::ReEntry),
    }
}

/// Results table with one column per report.
pub fn format_table(columns: &[(String, &Summary)]) -> String {
    let label_width = TABLE_ROWS.iter().map(|r| r.chars().count()).max().unwrap_or(0);
    let mut out = format!("{:label_width$}", "");
    for (header, _) in columns {
        out.push_str(&format!(" {header:>12}"));
    }
    out.push('\n');
    for (i, row) in TABLE_ROWS.iter().enumerate() {
        let pad = label_width - row.chars().count();
        out.push_str(row);
        out.push_str(&" ".repeat(pad));
        for (_, summary) in columns {
            let v = summary.table_values()[i];
            if i < 3 {
                out.push_str(&format!(" {v:>12.4}"));
            } else {
                out.push_str(&format!(" {:>12}", v as usize));
            }
        }
        out.push('\n');
    }
    out
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: SimReport,
    pub world: WorldState,
}

/// How timesteps are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// One timestep at a time, no speculation.
    Serial,
    /// Speculative preparation of `batch_size` timesteps at once.
    Batched,
}

/// Event awaiting resolution inside one timestep.
#[derive(Debug, Clone, Copy)]
enum Pending {
    Hit { t: f64, slot: usize, version: u32 },
    Conjunction { t: f64, a: usize, b: usize, va: u32, vb: u32 },
}

/// The committed trajectory of one spacecraft inside the current timestep.
struct Plan {
    pieces: Vec<Leg>,
    version: u32,
    depth: usize,
}

impl Plan {
    fn current(&mut self) -> &mut Leg {
        self.pieces.last_mut().expect("plan has at least one leg")
    }
}

pub struct Simulation {
    cfg: ScenarioConfig,
    propagator: Propagator,
    specs: [EventSpec; 2],
    dt: f64,
    epochs: usize,
    /// Spacecraft scheduled for release, by id; release timestep equals the id.
    schedule: bool,
    pub world: WorldState,
    timing: Timing,
}

impl Simulation {
    /// Scenario run with the regular release schedule.
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut sim = Self::bare(cfg);
        sim.world.pending_releases = (0..sim.cfg.swarm_size).rev().collect();
        Ok(sim)
    }

    /// Constructed run: the given spacecraft are live at t = 0 and nothing is released.
    pub fn with_spacecraft(cfg: ScenarioConfig, states: Vec<SpacecraftState>) -> Result<Self> {
        if !(cfg.duration > 0.0) || !(cfg.tol > 0.0) || cfg.batch_size == 0 {
            return Err(SwarmError::Config("duration, tolerance and batch size must be positive".into()));
        }
        let mut sorted = states;
        sorted.sort_by_key(|s| s.id);
        if sorted.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(SwarmError::InvalidArgument("duplicate spacecraft id".into()));
        }
        if let Some(s) = sorted.iter().find(|s| s.t != 0.0 || !s.is_finite()) {
            return Err(SwarmError::InvalidArgument(format!("spacecraft {} must start finite at t = 0", s.id)));
        }
        let mut sim = Self::bare(cfg);
        sim.schedule = false;
        sim.world.live = sorted.into_iter().map(|state| LiveSpacecraft { state, arming: Arming::default() }).collect();
        Ok(sim)
    }

    fn bare(cfg: ScenarioConfig) -> Self {
        let dynamics = Dynamics::new(cfg.model.clone(), cfg.rotation, cfg.srp);
        let propagator = Propagator::new(dynamics, PropagatorConfig { tol: cfg.tol, ..Default::default() });
        let dt = cfg.dt_c();
        let epochs = cfg.epochs();
        Self {
            cfg,
            propagator,
            specs: EventSpec::both(),
            dt,
            epochs,
            schedule: true,
            world: WorldState::default(),
            timing: Timing::default(),
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn timestep(&self) -> f64 {
        self.dt
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn epoch_time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    fn watch(&self, arming: Arming) -> EventWatch<'_> {
        EventWatch { region: &self.cfg.region, specs: &self.specs, arming }
    }

    fn release_state(&self, id: SpacecraftId) -> Result<SpacecraftState> {
        let t = self.epoch_time(id);
        Ok(sample_release(&self.cfg, id, &mothership_state(&self.cfg, t)?))
    }

    /// Executes the next timestep on its own.
    pub fn step_epoch(&mut self) -> Result<()> {
        let k = self.world.epoch;
        if k >= self.epochs {
            return Err(SwarmError::InvalidArgument(format!("all {} timesteps already executed", self.epochs)));
        }
        let mut prepared = self.prepare(k, k + 1);
        self.commit(k, &mut prepared[0])
    }

    /// Runs every remaining timestep.
    pub fn run_to_end(&mut self, mode: ExecMode) -> Result<()> {
        let started = Instant::now();
        let result = match mode {
            ExecMode::Serial => {
                while self.world.epoch < self.epochs {
                    self.step_epoch()?;
                }
                Ok(())
            }
            ExecMode::Batched => {
                while self.world.epoch < self.epochs {
                    let start = self.world.epoch;
                    let end = (start + self.cfg.batch_size).min(self.epochs);
                    let mut prepared = self.prepare(start, end);
                    for (k, legs) in (start..end).zip(prepared.iter_mut()) {
                        self.commit(k, legs)?;
                    }
                }
                Ok(())
            }
        };
        self.timing.total += started.elapsed();
        result
    }

    /// Speculative legs for timesteps `start..end`, indexed `[k − start][slot]`
    /// where slot follows the id order of spacecraft live at `k`.
    fn prepare(&mut self, start: usize, end: usize) -> Vec<Vec<Option<Leg>>> {
        let started = Instant::now();
        let mut seeds: Vec<(usize, SpacecraftState, Arming)> =
            self.world.live.iter().map(|s| (start, s.state.clone(), s.arming)).collect();
        if self.schedule {
            for &id in self.world.pending_releases.iter().rev() {
                if id >= start && id < end {
                    if let Ok(state) = self.release_state(id) {
                        seeds.push((id, state, Arming::default()));
                    }
                }
            }
        }
        let this: &Self = self;
        let chains: Vec<(SpacecraftId, Vec<(usize, Leg)>)> = seeds
            .into_par_iter()
            .map(|(first, state, arming)| {
                let id = state.id;
                let mut out = Vec::new();
                let (mut state, mut arming) = (state, arming);
                for k in first..end {
                    let Ok(leg) = this.propagator.propagate_until(&state, this.epoch_time(k + 1), &this.watch(arming)) else {
                        break;
                    };
                    let stop = leg.hit.is_some();
                    state = leg.end_state.clone();
                    arming = leg.arming_end;
                    out.push((k, leg));
                    if stop {
                        break;
                    }
                }
                (id, out)
            })
            .collect();

        // Slot layout per timestep: ids live at k in ascending order.
        let mut live_ids: Vec<SpacecraftId> = self.world.live.iter().map(|s| s.state.id).collect();
        let mut table = Vec::with_capacity(end - start);
        let mut by_id: std::collections::BTreeMap<SpacecraftId, Vec<(usize, Leg)>> = chains.into_iter().collect();
        for k in start..end {
            if self.schedule && self.world.pending_releases.contains(&k) {
                live_ids.push(k);
            }
            let row = live_ids
                .iter()
                .map(|id| {
                    let chain = by_id.get_mut(id)?;
                    match chain.first() {
                        Some((kk, _)) if *kk == k => Some(chain.remove(0).1),
                        _ => None,
                    }
                })
                .collect();
            table.push(row);
        }
        self.timing.propagation += started.elapsed();
        table
    }

    fn commit(&mut self, k: usize, prepared: &mut [Option<Leg>]) -> Result<()> {
        let (t0, t1) = (self.epoch_time(k), self.epoch_time(k + 1));

        // (1) Release.
        if self.schedule && self.world.pending_releases.last() == Some(&k) {
            self.world.pending_releases.pop();
            let state = self.release_state(k)?;
            self.world.live.push(LiveSpacecraft { state, arming: Arming::default() });
            self.world.live.sort_by_key(|s| s.state.id);
        }

        // (2) Propagation, reusing speculative legs that start from the committed state.
        let started = Instant::now();
        let n = self.world.live.len();
        let reusable: Vec<Option<Leg>> = (0..n)
            .map(|slot| {
                let leg = prepared.get_mut(slot).and_then(Option::take)?;
                let sc = &self.world.live[slot];
                let fits = leg.start_state == sc.state
                    && leg.arming_start == sc.arming
                    && (leg.hit.is_some() || leg.end_state.t == t1);
                fits.then_some(leg)
            })
            .collect();
        let legs: Vec<Leg> = reusable
            .into_par_iter()
            .enumerate()
            .map(|(slot, leg)| match leg {
                Some(leg) => Ok(leg),
                None => {
                    let sc = &self.world.live[slot];
                    self.propagator.propagate_until(&sc.state, t1, &self.watch(sc.arming))
                }
            })
            .collect::<Result<_>>()?;
        self.timing.propagation += started.elapsed();

        // (3) Screening on the produced segments.
        let started = Instant::now();
        let conjunctions = {
            let tracks: Vec<Track> =
                legs.iter().enumerate().map(|(slot, leg)| Track { id: slot, segments: &leg.segments }).collect();
            detect_all(&tracks, self.cfg.r_c, (t0, t1))
        };
        self.timing.screening += started.elapsed();

        // (4) Resolution in (t, sc_id) order.
        let started = Instant::now();
        let mut plans: Vec<Plan> = legs.into_iter().map(|leg| Plan { pieces: vec![leg], version: 0, depth: 0 }).collect();
        let mut queue: Vec<Pending> = Vec::new();
        for (slot, plan) in plans.iter().enumerate() {
            if let Some(hit) = &plan.pieces[0].hit {
                queue.push(Pending::Hit { t: hit.t, slot, version: 0 });
            }
        }
        for c in &conjunctions {
            queue.push(Pending::Conjunction { t: c.t, a: c.id_i, b: c.id_j, va: 0, vb: 0 });
        }
        let mut epoch_events: Vec<ManeuverEvent> = Vec::new();
        while let Some(next) = self.pop_earliest(&mut queue, &plans) {
            match next {
                Pending::Hit { slot, version, .. } => {
                    if plans[slot].version != version {
                        continue;
                    }
                    let event = self.resolve_hit(k, t1, slot, &mut plans, &mut queue)?;
                    epoch_events.push(event);
                }
                Pending::Conjunction { t, a, b, va, vb } => {
                    if plans[a].version != va || plans[b].version != vb {
                        continue;
                    }
                    let event = self.resolve_conjunction(k, t, t1, (a, b), &mut plans, &mut queue)?;
                    epoch_events.push(event);
                }
            }
        }
        epoch_events.sort_by(|x, y| {
            x.t.total_cmp(&y.t)
                .then(x.cause.cmp(&y.cause))
                .then(x.sc_id.cmp(&y.sc_id))
                .then(x.other_id.cmp(&y.other_id))
        });
        self.world.events.extend(epoch_events);

        // (5) Gravity samples at the segment grid, trajectory export, and advance.
        let rot = self.cfg.rotation;
        let srp = self.propagator.dynamics().srp_accel();
        let r_min = self.cfg.region.safety_semi_axes().max();
        let stride = self.cfg.trajectory_stride;
        for (slot, plan) in plans.iter().enumerate() {
            let id = self.world.live[slot].state.id;
            let segments: Vec<&TrajectorySegment> = plan.pieces.iter().flat_map(|leg| leg.segments.iter()).collect();
            for seg in &segments {
                let r = Vec3::new(seg.coeffs[0][0], seg.coeffs[1][0], seg.coeffs[2][0]);
                let a = Vec3::new(seg.coeffs[3][1], seg.coeffs[4][1], seg.coeffs[5][1]) - srp;
                let r_body = inertial_to_body(&rot, seg.t0, &r);
                if r_body.norm() > r_min {
                    let a_body = inertial_to_body(&rot, seg.t0, &a);
                    self.world.samples.push(GravitySample { t: seg.t0, r_body, a_body, sc_id: id });
                }
            }
            let mut j = (t0 / stride).ceil() as i64;
            while (j as f64) * stride < t1 {
                let t = j as f64 * stride;
                if let Some(seg) = segments.iter().rev().find(|s| s.t0 <= t) {
                    let y = seg.eval_at(t);
                    self.world.trajectory.push(TrajectoryPoint {
                        t,
                        sc_id: id,
                        r: Vec3::new(y[0], y[1], y[2]),
                        v: Vec3::new(y[3], y[4], y[5]),
                    });
                }
                j += 1;
            }
        }
        for (sc, mut plan) in self.world.live.iter_mut().zip(plans) {
            let leg = plan.current();
            sc.state = leg.end_state.clone();
            sc.arming = leg.arming_end;
        }
        self.world.t = t1;
        self.world.epoch = k + 1;
        self.timing.propagation += started.elapsed();
        Ok(())
    }

    fn pop_earliest(&self, queue: &mut Vec<Pending>, plans: &[Plan]) -> Option<Pending> {
        let key = |p: &Pending| -> (f64, SpacecraftId, ManeuverCause, SpacecraftId) {
            match *p {
                Pending::Hit { t, slot, .. } => {
                    let id = self.world.live[slot].state.id;
                    let kind = plans[slot].pieces.last().and_then(|l| l.hit.as_ref()).map(|h| h.kind);
                    let cause = match kind {
                        Some(EventKind::SafetyEntry) => ManeuverCause::Safety,
                        _ => ManeuverCause::ReEntry,
                    };
                    (t, id, cause, 0)
                }
                Pending::Conjunction { t, a, b, .. } => {
                    (t, self.world.live[a].state.id, ManeuverCause::CollisionAvoidance, self.world.live[b].state.id)
                }
            }
        };
        let best = (0..queue.len()).min_by(|&i, &j| {
            let (ki, kj) = (key(&queue[i]), key(&queue[j]));
            ki.0.total_cmp(&kj.0).then(ki.1.cmp(&kj.1)).then(ki.2.cmp(&kj.2)).then(ki.3.cmp(&kj.3))
        })?;
        Some(queue.swap_remove(best))
    }

    /// Applies the region policy at the terminal hit ending the current leg of `slot`.
    fn resolve_hit(
        &mut self,
        k: usize,
        t1: f64,
        slot: usize,
        plans: &mut [Plan],
        queue: &mut Vec<Pending>,
    ) -> Result<ManeuverEvent> {
        let leg = plans[slot].current();
        let hit = leg.hit.take().expect("pending hit");
        let mut arming = leg.arming_end;
        match hit.boundary {
            Boundary::Nominal => arming.set(hit.kind, false),
            Boundary::Guard => arming.escalate(hit.kind),
        }
        let state = hit.state;
        let (cause, dv) = match hit.kind {
            EventKind::SafetyEntry => {
                // Reflect the velocity relative to the rotating surface.
                let rot = &self.cfg.rotation;
                let n = self.cfg.region.safety_normal(rot, state.t, &state.r);
                let omega = rot.axis() * rot.rate();
                let v_rel = state.v - omega.cross(&state.r);
                let (_, dv) = reflect_safety(&n, &v_rel);
                (ManeuverCause::Safety, dv)
            }
            EventKind::Exit => {
                let (_, dv) = circularize(self.cfg.mu_total(), &state.r, &state.v)?;
                (ManeuverCause::ReEntry, dv)
            }
        };
        let mut event = ManeuverEvent::new(state.t, cause, state.id, None, dv).at(state.r, None);
        event.guard = hit.boundary == Boundary::Guard;
        let next = apply_maneuver(&state, &dv);
        self.continue_from(k, t1, slot, next, arming, plans, queue)?;
        Ok(event)
    }

    fn resolve_conjunction(
        &mut self,
        k: usize,
        t: f64,
        t1: f64,
        (a, b): (usize, usize),
        plans: &mut [Plan],
        queue: &mut Vec<Pending>,
    ) -> Result<ManeuverEvent> {
        let mut cut = |slot: usize| {
            let leg = plans[slot].current();
            leg.truncate(t);
            (leg.end_state.clone(), leg.arming_end)
        };
        let (sa, arm_a) = cut(a);
        let (sb, arm_b) = cut(b);
        let (dva, dvb) = separate_pair(&(sa.r - sb.r), self.cfg.dv_ca)?;
        let event =
            ManeuverEvent::new(t, ManeuverCause::CollisionAvoidance, sa.id, Some(sb.id), dva).at(sa.r, Some(sb.r));
        self.continue_from(k, t1, a, apply_maneuver(&sa, &dva), arm_a, plans, queue)?;
        self.continue_from(k, t1, b, apply_maneuver(&sb, &dvb), arm_b, plans, queue)?;
        Ok(event)
    }

    /// Re-propagates `slot` from a post-maneuver state to the end of the timestep.
    #[allow(clippy::too_many_arguments)]
    fn continue_from(
        &mut self,
        k: usize,
        t1: f64,
        slot: usize,
        state: SpacecraftState,
        arming: Arming,
        plans: &mut [Plan],
        queue: &mut Vec<Pending>,
    ) -> Result<()> {
        let plan = &mut plans[slot];
        plan.version += 1;
        plan.depth += 1;
        let leg = if plan.depth > self.cfg.recursion_cap {
            self.world.flags.push(Flag {
                t_s: state.t,
                epoch: k,
                sc_id: state.id,
                reason: format!("re-propagation cap of {} reached", self.cfg.recursion_cap),
            });
            let mut leg = self.propagator.propagate_until(&state, t1, &EventWatch::none(&self.cfg.region))?;
            leg.arming_start = arming;
            // Arm whatever is not currently violated so the next timestep resumes monitoring.
            let end = &leg.end_state;
            for spec in &self.specs {
                let q = spec.violation(&self.cfg.region, &self.cfg.rotation, end.t, &end.r);
                leg.arming_end.set(spec.kind, q < 0.0);
            }
            leg
        } else {
            self.propagator.propagate_until(&state, t1, &self.watch(arming))?
        };
        if let Some(hit) = &leg.hit {
            queue.push(Pending::Hit { t: hit.t, slot, version: plan.version });
        }
        plan.pieces.push(leg);
        Ok(())
    }

    pub fn report(&self) -> SimReport {
        let budgets: Vec<f64> = self.world.live.iter().map(|s| s.state.dv_budget_used * 1e3).collect();
        let summary = summarize(&self.world.events, &budgets);
        let table = TABLE_ROWS.iter().zip(summary.table_values()).map(|(&row, value)| TableRow { row, value }).collect();
        SimReport {
            scenario: self.cfg.name.clone(),
            body: self.cfg.model.name.clone(),
            swarm_size: self.cfg.swarm_size,
            seed: self.cfg.seed,
            duration_s: self.cfg.duration,
            timestep_s: self.dt,
            epochs: self.epochs,
            summary,
            table,
            flags: self.world.flags.clone(),
            timing: self.timing,
        }
    }

    pub fn finish(self) -> SimOutput {
        SimOutput { report: self.report(), world: self.world }
    }
}

/// Runs a scenario to the end on the current rayon pool.
pub fn run(cfg: ScenarioConfig) -> Result<SimOutput> {
    run_mode(cfg, ExecMode::Batched)
}

pub fn run_mode(cfg: ScenarioConfig, mode: ExecMode) -> Result<SimOutput> {
    let mut sim = Simulation::new(cfg)?;
    sim.run_to_end(mode)?;
    Ok(sim.finish())
}

/// Runs on a dedicated pool of `threads` workers; one thread selects the
/// strictly serial path.
pub fn run_with_threads(cfg: ScenarioConfig, threads: usize) -> Result<SimOutput> {
    let threads = threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SwarmError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let mode = if threads == 1 { ExecMode::Serial } else { ExecMode::Batched };
    pool.install(|| run_mode(cfg, mode))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|source| SwarmError::Io { path: path.into(), source })?;
    Ok(std::io::BufWriter::new(file))
}

pub fn write_events_csv(path: &Path, events: &[ManeuverEvent]) -> Result<()> {
    let io = |source| SwarmError::Io { path: path.into(), source };
    let mut out = create(path)?;
    writeln!(out, "{EVENTS_CSV_HEADER}").map_err(io)?;
    for e in events {
        let other = e.other_id.map(|id| id.to_string()).unwrap_or_default();
        let dv = e.dv * 1e3;
        writeln!(out, "{},{},{},{},{},{},{},{}", e.t, e.cause, e.sc_id, other, dv.x, dv.y, dv.z, e.dv_mag * 1e3).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_trajectory_csv(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    let io = |source| SwarmError::Io { path: path.into(), source };
    let mut out = create(path)?;
    writeln!(out, "{TRAJECTORY_CSV_HEADER}").map_err(io)?;
    for p in points {
        writeln!(out, "{},{},{},{},{},{},{},{}", p.t, p.sc_id, p.r.x, p.r.y, p.r.z, p.v.x, p.v.y, p.v.z).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_summary_json(path: &Path, report: &SimReport) -> Result<()> {
    let io = |source| SwarmError::Io { path: path.into(), source };
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)
}
