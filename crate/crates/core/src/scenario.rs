//! Mission setup: scenario files and presets, the mothership's Keplerian
//! reference orbit, and the sequential release of the swarm.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::body_model::{load_mascons, synth_ellipsoid_body, MasconModel, RegionSpec, RotationState, Vec3};
use crate::dynamics::{SpacecraftId, SpacecraftState, SrpParams};
use crate::error::{Result, SwarmError};
use crate::guidance::DEFAULT_DV_CA;

/// Mothership periods per collisional timestep.
pub const TIMESTEPS_PER_ORBIT: f64 = 60.0;

/// Synthetic ellipsoid standing in for a mascon file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticBody {
    pub semi_axes_km: [f64; 3],
    pub n: usize,
    pub mu_km3_s2: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSection {
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    /// Spin period; absent or null for a non-rotating body.
    #[serde(default)]
    pub period_s: Option<f64>,
    #[serde(default)]
    pub phase0_rad: f64,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl Default for RotationSection {
    fn default() -> Self {
        Self { axis: default_axis(), period_s: None, phase0_rad: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    /// Mascon file, relative to the scenario file's directory.
    #[serde(default)]
    pub mascon_path: Option<PathBuf>,
    /// Used when no mascon file is configured, or as a fallback when it is absent.
    #[serde(default)]
    pub synthetic: Option<SyntheticBody>,
    #[serde(default)]
    pub rotation: RotationSection,
    /// Body dimensions; the safety factor is applied to these.
    #[serde(default)]
    pub body_semi_axes_km: Option<[f64; 3]>,
    #[serde(default = "default_safety_factor")]
    pub safety_factor: f64,
    /// Already-scaled safety semi-axes; overrides the body dimensions.
    #[serde(default)]
    pub safety_semi_axes_km: Option<[f64; 3]>,
    pub exit_radius_km: f64,
    #[serde(default)]
    pub notes: Option<String>,
}

fn default_safety_factor() -> f64 {
    1.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmSection {
    pub size: usize,
    #[serde(default = "default_v_rel")]
    pub v_rel_range_m_s: [f64; 2],
    #[serde(default = "default_r_c")]
    pub r_c_m: f64,
    #[serde(default = "default_dv_ca")]
    pub dv_ca_m_s: f64,
    #[serde(default)]
    pub position_jitter_m: f64,
}

fn default_v_rel() -> [f64; 2] {
    [0.015, 0.035]
}

fn default_r_c() -> f64 {
    5.0
}

fn default_dv_ca() -> f64 {
    DEFAULT_DV_CA * 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MothershipSection {
    pub a_km: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub M0_deg: f64,
}

impl Default for MothershipSection {
    fn default() -> Self {
        Self { a_km: 1.5, e: 0.0, i_deg: 90.0, raan_deg: 0.0, argp_deg: 0.0, M0_deg: 90.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrpSection {
    pub enabled: bool,
    pub p_flux_1au: f64,
    pub area_m2: f64,
    pub mass_kg: f64,
    pub cr: f64,
    pub sun_dir: [f64; 3],
    pub helio_distance_au: f64,
}

impl Default for SrpSection {
    fn default() -> Self {
        let d = SrpParams::default();
        Self {
            enabled: true,
            p_flux_1au: d.p_flux_1au,
            area_m2: d.area,
            mass_kg: d.mass,
            cr: d.cr,
            sun_dir: [d.sun_dir.x, d.sun_dir.y, d.sun_dir.z],
            helio_distance_au: d.helio_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub duration_s: f64,
    #[serde(default = "default_batch")]
    pub batch_timesteps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_recursion_cap")]
    pub recursion_cap: usize,
    /// Sampling interval of the exported trajectories.
    #[serde(default = "default_stride")]
    pub trajectory_stride_s: f64,
}

fn default_batch() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-12
}

fn default_recursion_cap() -> usize {
    8
}

fn default_stride() -> f64 {
    600.0
}

/// Scenario file contents, before files are loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub body: BodySection,
    pub swarm: SwarmSection,
    #[serde(default)]
    pub mothership: MothershipSection,
    #[serde(default)]
    pub srp: SrpSection,
    pub sim: SimSection,
}

/// Classical elements of the mothership orbit; angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub m0: f64,
}

/// Where the body's mascons came from.
#[derive(Debug, Clone, PartialEq)]
pub enum BodySource {
    File(PathBuf),
    Synthetic,
    /// The configured file was absent; the synthetic body was used instead.
    SyntheticFallback(PathBuf),
}

/// Fully resolved scenario, in km / s / km/s.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: Arc<MasconModel>,
    pub body_source: BodySource,
    pub rotation: RotationState,
    pub region: RegionSpec,
    pub swarm_size: usize,
    pub v_rel_range: (f64, f64),
    pub position_jitter: f64,
    pub r_c: f64,
    pub dv_ca: f64,
    pub mothership: OrbitElements,
    pub srp: Option<SrpParams>,
    pub duration: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub tol: f64,
    pub recursion_cap: usize,
    pub trajectory_stride: f64,
}

fn config_err(msg: impl Into<String>) -> SwarmError {
    SwarmError::Config(msg.into())
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl ScenarioFile {
    pub fn from_json_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        serde_json::from_value(value).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SwarmError::Io { path: path.into(), source })?;
        Self::from_json_str(&text, overrides).map_err(|e| match e {
            SwarmError::Json(e) => SwarmError::Format { path: path.into(), reason: e.to_string() },
            SwarmError::Config(reason) => SwarmError::Format { path: path.into(), reason },
            other => other,
        })
    }

    /// Applies `key=value` overrides to an in-memory scenario.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        serde_json::from_value(value).map_err(|e| config_err(e.to_string()))
    }

    /// Loads the body and validates everything. Relative mascon paths are
    /// taken relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<ScenarioConfig> {
        let b = &self.body;
        let synthesize = |s: &SyntheticBody| synth_ellipsoid_body(vec3(s.semi_axes_km), s.n, s.mu_km3_s2, s.seed);
        let (model, body_source) = match (&b.mascon_path, &b.synthetic) {
            (Some(p), synthetic) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                match (path.exists(), synthetic) {
                    (true, _) => (load_mascons(&path)?, BodySource::File(path)),
                    (false, Some(s)) => (synthesize(s)?, BodySource::SyntheticFallback(path)),
                    (false, None) => return Err(config_err(format!("mascon file {} not found", path.display()))),
                }
            }
            (None, Some(s)) => (synthesize(s)?, BodySource::Synthetic),
            (None, None) => return Err(config_err("body needs a mascon_path or a synthetic section")),
        };

        let rotation = RotationState::new(vec3(b.rotation.axis), b.rotation.period_s, b.rotation.phase0_rad)?;
        let region = match (b.safety_semi_axes_km, b.body_semi_axes_km) {
            (Some(axes), _) => RegionSpec::new(vec3(axes), b.exit_radius_km)?,
            (None, Some(axes)) => RegionSpec::from_body(vec3(axes), b.safety_factor, b.exit_radius_km)?,
            (None, None) => match &b.synthetic {
                Some(s) => RegionSpec::from_body(vec3(s.semi_axes_km), b.safety_factor, b.exit_radius_km)?,
                None => return Err(config_err("body needs body_semi_axes_km or safety_semi_axes_km")),
            },
        };

        let sw = &self.swarm;
        let [v_lo, v_hi] = sw.v_rel_range_m_s;
        let m = &self.mothership;
        let srp = if self.srp.enabled {
            let s = &self.srp;
            let params = SrpParams {
                p_flux_1au: s.p_flux_1au,
                area: s.area_m2,
                mass: s.mass_kg,
                cr: s.cr,
                sun_dir: vec3(s.sun_dir),
                helio_distance: s.helio_distance_au,
            };
            params.validate()?;
            Some(params)
        } else {
            None
        };
        let cfg = ScenarioConfig {
            name: if self.name.is_empty() { model.name.clone() } else { self.name.clone() },
            model: Arc::new(model),
            body_source,
            rotation,
            region,
            swarm_size: sw.size,
            v_rel_range: (v_lo * 1e-3, v_hi * 1e-3),
            position_jitter: sw.position_jitter_m * 1e-3,
            r_c: sw.r_c_m * 1e-3,
            dv_ca: sw.dv_ca_m_s * 1e-3,
            mothership: OrbitElements {
                a: m.a_km,
                e: m.e,
                i: m.i_deg.to_radians(),
                raan: m.raan_deg.to_radians(),
                argp: m.argp_deg.to_radians(),
                m0: m.M0_deg.to_radians(),
            },
            srp,
            duration: self.sim.duration_s,
            batch_size: self.sim.batch_timesteps,
            seed: self.sim.seed,
            tol: self.sim.tol,
            recursion_cap: self.sim.recursion_cap,
            trajectory_stride: self.sim.trajectory_stride_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sets `key` (a dotted path such as `swarm.size`) to `raw`, parsed as JSON
/// when possible and as a string otherwise.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(config_err(format!("override {key}: {} is not an object", parts[..depth].join("."))));
        };
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(config_err(format!("empty override key {key:?}")))
}

/// Parses `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(config_err(format!("override {text:?} is not key=value"))),
    }
}

impl ScenarioConfig {
    pub fn mu_total(&self) -> f64 {
        self.model.total_mu()
    }

    pub fn mothership_period(&self) -> f64 {
        TAU * (self.mothership.a.powi(3) / self.mu_total()).sqrt()
    }

    /// Collisional timestep: one sixtieth of the mothership period.
    pub fn dt_c(&self) -> f64 {
        self.mothership_period() / TIMESTEPS_PER_ORBIT
    }

    /// Whole collisional timesteps within the duration.
    pub fn epochs(&self) -> usize {
        (self.duration / self.dt_c() + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.v_rel_range;
        let checks = [
            (self.swarm_size >= 1, "swarm size must be at least 1".to_string()),
            (0.0 <= lo && lo <= hi && hi.is_finite(), format!("release speed range [{lo}, {hi}] km/s is invalid")),
            (self.duration > 0.0 && self.duration.is_finite(), "duration must be positive".into()),
            (self.r_c > 0.0, "collision radius must be positive".into()),
            (self.dv_ca >= 0.0, "collision-avoidance impulse must be non-negative".into()),
            (self.position_jitter >= 0.0, "position jitter must be non-negative".into()),
            (self.batch_size >= 1, "batch_timesteps must be at least 1".into()),
            (self.tol > 0.0 && self.tol < 1e-2, "tolerance must lie in (0, 1e-2)".into()),
            (self.trajectory_stride > 0.0, "trajectory stride must be positive".into()),
            (self.mothership.a > 0.0, "mothership semi-major axis must be positive".into()),
            ((0.0..1.0).contains(&self.mothership.e), "mothership orbit must be elliptic (0 ≤ e < 1)".into()),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(config_err(msg));
            }
        }
        // Releases happen at the start of whole timesteps only.
        let last = (self.swarm_size - 1) as f64 * self.dt_c();
        if self.swarm_size > self.epochs() {
            return Err(config_err(format!(
                "release of spacecraft {} at t = {last:.1} s falls outside the {} s duration",
                self.swarm_size - 1,
                self.duration
            )));
        }
        Ok(())
    }
}

/// Inertial state of the mothership on its Keplerian reference orbit.
pub fn mothership_state(cfg: &ScenarioConfig, t: f64) -> Result<SpacecraftState> {
    let (r, v) = kepler_state(&cfg.mothership, cfg.mu_total(), t)?;
    Ok(SpacecraftState::new(usize::MAX, t, r, v))
}

/// Position and velocity from classical elements with `M(t) = M0 + n t`.
pub fn kepler_state(el: &OrbitElements, mu: f64, t: f64) -> Result<(Vec3, Vec3)> {
    if !(el.a > 0.0) || !(0.0..1.0).contains(&el.e) || !(mu > 0.0) {
        return Err(SwarmError::InvalidArgument(format!("unsupported orbit a = {}, e = {}", el.a, el.e)));
    }
    let n = (mu / el.a.powi(3)).sqrt();
    let m = (el.m0 + n * t).rem_euclid(TAU);
    let e = el.e;
    let mut ecc_anom = if e < 0.8 { m } else { PI };
    for _ in 0..50 {
        let f = ecc_anom - e * ecc_anom.sin() - m;
        let step = f / (1.0 - e * ecc_anom.cos());
        ecc_anom -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let (sin_e, cos_e) = ecc_anom.sin_cos();
    let b = el.a * (1.0 - e * e).sqrt();
    let r_pf = Vec3::new(el.a * (cos_e - e), b * sin_e, 0.0);
    let rdot = el.a * n / (1.0 - e * cos_e);
    let v_pf = Vec3::new(-rdot * sin_e, rdot * (1.0 - e * e).sqrt() * cos_e, 0.0);
    let rot = perifocal_to_inertial(el);
    Ok((rot * r_pf, rot * v_pf))
}

fn perifocal_to_inertial(el: &OrbitElements) -> nalgebra::Matrix3<f64> {
    let (so, co) = el.raan.sin_cos();
    let (si, ci) = el.i.sin_cos();
    let (sw, cw) = el.argp.sin_cos();
    nalgebra::Matrix3::new(
        co * cw - so * sw * ci,
        -co * sw - so * cw * ci,
        so * si,
        so * cw + co * sw * ci,
        -so * sw + co * cw * ci,
        -co * si,
        sw * si,
        cw * si,
        ci,
    )
}

/// Spacecraft `k` is released at `k·Δt_c`.
pub fn release_schedule(cfg: &ScenarioConfig) -> Vec<(f64, SpacecraftId)> {
    let dt = cfg.dt_c();
    (0..cfg.swarm_size).map(|k| (k as f64 * dt, k)).collect()
}

/// Random generator for one spacecraft: the scenario seed selects the key and
/// the spacecraft id the stream, so draws do not depend on release order.
pub fn spacecraft_rng(seed: u64, sc_id: SpacecraftId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sc_id as u64);
    rng
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector(rng: &mut impl Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..TAU);
    let rho = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
}

/// Release state of spacecraft `sc_id` from the given mothership state.
pub fn sample_release(cfg: &ScenarioConfig, sc_id: SpacecraftId, mothership: &SpacecraftState) -> SpacecraftState {
    let mut rng = spacecraft_rng(cfg.seed, sc_id);
    let (lo, hi) = cfg.v_rel_range;
    let speed = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let dir = random_unit_vector(&mut rng);
    let mut r = mothership.r;
    if cfg.position_jitter > 0.0 {
        let offset_dir = random_unit_vector(&mut rng);
        let u: f64 = rng.gen_range(0.0..1.0);
        r += offset_dir * (cfg.position_jitter * u.cbrt());
    }
    SpacecraftState::new(sc_id, mothership.t, r, mothership.v + dir * speed)
}

/// Built-in scenario for a named body and swarm size.
///
/// Shapes, spin periods and masses are literature values for the real bodies;
/// the mascon files are looked up under `mascons/` and replaced by a uniform
/// synthetic ellipsoid when absent.
pub fn preset(name: &str, swarm_size: usize) -> Result<ScenarioFile> {
    // (body semi-axes km, GM km³/s², spin period s, exit radius km, mascons)
    let (axes, mu, period, exit, n): ([f64; 3], f64, f64, f64, usize) = match name {
        "itokawa" => ([0.2675, 0.147, 0.1045], 2.34e-9, 12.132 * 3600.0, 3.0, 24_800),
        "bennu" => ([0.2825, 0.2675, 0.254], 4.892e-9, 4.296 * 3600.0, 2.0, 17_400),
        "ryugu" => ([0.502, 0.502, 0.438], 3.0e-8, 7.63 * 3600.0, 2.0, 26_800),
        "synthetic" => ([0.3, 0.15, 0.15], SYNTHETIC_MU, 12.132 * 3600.0, 2.0, 500),
        other => return Err(config_err(format!("unknown preset {other:?} (itokawa, bennu, ryugu, synthetic)"))),
    };
    let synthetic = SyntheticBody { semi_axes_km: axes, n, mu_km3_s2: mu, seed: 1 };
    let is_real = name != "synthetic";
    Ok(ScenarioFile {
        name: format!("{name}-{swarm_size}"),
        body: BodySection {
            mascon_path: is_real.then(|| PathBuf::from(format!("mascons/{name}.csv"))),
            synthetic: Some(synthetic),
            rotation: RotationSection { axis: [0.0, 0.0, 1.0], period_s: Some(period), phase0_rad: 0.0 },
            body_semi_axes_km: Some(axes),
            safety_factor: 1.3,
            safety_semi_axes_km: None,
            exit_radius_km: exit,
            notes: is_real.then(|| "shape, GM and spin period are external literature values".to_string()),
        },
        swarm: SwarmSection {
            size: swarm_size,
            v_rel_range_m_s: default_v_rel(),
            r_c_m: default_r_c(),
            dv_ca_m_s: default_dv_ca(),
            position_jitter_m: 0.0,
        },
        mothership: MothershipSection::default(),
        srp: SrpSection::default(),
        sim: SimSection {
            duration_s: if name == "synthetic" { 86_400.0 } else { 4.0 * 86_400.0 },
            batch_timesteps: default_batch(),
            seed: 0,
            tol: default_tol(),
            recursion_cap: default_recursion_cap(),
            trajectory_stride_s: default_stride(),
        },
    })
}

/// GM of the synthetic test ellipsoid (0.3 × 0.15 × 0.15 km at 1.9 g/cm³) [km³/s²].
pub const SYNTHETIC_MU: f64 = 3.585e-9;

pub const PRESET_NAMES: [&str; 4] = ["itokawa", "bennu", "ryugu", "synthetic"];
