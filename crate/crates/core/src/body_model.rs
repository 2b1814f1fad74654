//! The central body: a rotating set of point masses and the permitted-region
//! geometry around it.
//!
//! Units are km, s, km/s and km³/s² throughout the crate.

use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SwarmError};

pub type Vec3 = Vector3<f64>;

pub const MASCON_CSV_HEADER: &str = "x_km,y_km,z_km,mu_km3_s2";

/// Point-mass model of a small body, positions in the body-fixed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MasconModel {
    positions: Vec<Vec3>,
    mus: Vec<f64>,
    total_mu: f64,
    pub name: String,
}

impl MasconModel {
    pub fn new(name: impl Into<String>, positions: Vec<Vec3>, mus: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(SwarmError::InvalidArgument("mascon model has zero rows".into()));
        }
        if positions.len() != mus.len() {
            return Err(SwarmError::InvalidArgument(format!(
                "{} positions but {} gravitational parameters",
                positions.len(),
                mus.len()
            )));
        }
        if let Some(i) = mus.iter().position(|&mu| !(mu > 0.0) || !mu.is_finite()) {
            return Err(SwarmError::InvalidArgument(format!(
                "non-positive mu {} in row {}",
                mus[i], i
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SwarmError::InvalidArgument(format!("non-finite position in row {i}")));
        }
        let total_mu = mus.iter().sum();
        Ok(Self { positions, mus, total_mu, name: name.into() })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    pub fn total_mu(&self) -> f64 {
        self.total_mu
    }

    /// Largest distance of any mascon from the body-frame origin.
    pub fn max_radius(&self) -> f64 {
        self.positions.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn center_of_mass(&self) -> Vec3 {
        let weighted = self
            .positions
            .iter()
            .zip(&self.mus)
            .fold(Vec3::zeros(), |acc, (p, mu)| acc + p * *mu);
        weighted / self.total_mu
    }

    /// Writes the model in the mascon CSV format.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| SwarmError::Io { path: path.to_path_buf(), source };
        let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
        writeln!(out, "{MASCON_CSV_HEADER}").map_err(io_err)?;
        for (p, mu) in self.positions.iter().zip(&self.mus) {
            writeln!(out, "{},{},{},{}", p.x, p.y, p.z, mu).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Loads a mascon file: CSV with the `x_km,y_km,z_km,mu_km3_s2` header, or a
/// JSON array of `[x, y, z, mu]` rows.
pub fn load_mascons(path: &Path) -> Result<MasconModel> {
    let text = fs::read_to_string(path)
        .map_err(|source| SwarmError::Io { path: path.to_path_buf(), source })?;
    let format_err = |reason: String| SwarmError::Format { path: path.to_path_buf(), reason };
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with('[');

    let rows: Vec<[f64; 4]> = if is_json {
        serde_json::from_str(&text).map_err(|e| format_err(format!("malformed JSON: {e}")))?
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| format_err(e.to_string()))?.clone();
        let names: Vec<&str> = header.iter().collect();
        if names != MASCON_CSV_HEADER.split(',').collect::<Vec<_>>() {
            return Err(format_err(format!(
                "expected header `{MASCON_CSV_HEADER}`, found `{}`",
                names.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| format_err(format!("row {}: {e}", i + 1)))?;
            if record.len() != 4 {
                return Err(format_err(format!("row {}: expected 4 fields", i + 1)));
            }
            let mut row = [0.0; 4];
            for (slot, field) in row.iter_mut().zip(record.iter()) {
                *slot = field
                    .parse()
                    .map_err(|_| format_err(format!("row {}: bad number `{field}`", i + 1)))?;
            }
            rows.push(row);
        }
        rows
    };

    if rows.is_empty() {
        return Err(format_err("zero mascon rows".into()));
    }
    if let Some(i) = rows.iter().position(|r| !(r[3] > 0.0)) {
        return Err(format_err(format!("row {}: non-positive mu {}", i + 1, rows[i][3])));
    }
    let positions = rows.iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect();
    let mus = rows.iter().map(|r| r[3]).collect();
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    MasconModel::new(name, positions, mus).map_err(|e| format_err(e.to_string()))
}

/// Samples `n` equal mascons uniformly inside an ellipsoid by rejection from
/// the bounding cube. The generator is ChaCha8 seeded with `seed`.
pub fn synth_ellipsoid_body(semi_axes: Vec3, n: usize, mu_total: f64, seed: u64) -> Result<MasconModel> {
    if n == 0 {
        return Err(SwarmError::InvalidArgument("mascon count must be at least 1".into()));
    }
    if !semi_axes.iter().all(|&a| a > 0.0 && a.is_finite()) {
        return Err(SwarmError::InvalidArgument("semi-axes must be positive".into()));
    }
    if !(mu_total > 0.0) || !mu_total.is_finite() {
        return Err(SwarmError::InvalidArgument("mu_total must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    while positions.len() < n {
        let u = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if u.norm_squared() <= 1.0 {
            positions.push(u.component_mul(&semi_axes));
        }
    }
    let mu = mu_total / n as f64;
    MasconModel::new(format!("ellipsoid-{n}"), positions, vec![mu; n])
}

/// Spin state of the body about a fixed inertial axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationState {
    axis: Vec3,
    /// Spin period in seconds; `None` for a non-rotating body.
    period: Option<f64>,
    phase0: f64,
}

impl RotationState {
    pub fn new(axis: Vec3, period: Option<f64>, phase0: f64) -> Result<Self> {
        let norm = axis.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(SwarmError::InvalidArgument("rotation axis must be non-zero".into()));
        }
        if let Some(p) = period {
            if !(p > 0.0) || !p.is_finite() {
                return Err(SwarmError::InvalidArgument("rotation period must be positive".into()));
            }
        }
        Ok(Self { axis: axis / norm, period, phase0 })
    }

    pub fn non_rotating() -> Self {
        Self { axis: Vec3::z(), period: None, phase0: 0.0 }
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn phase0(&self) -> f64 {
        self.phase0
    }

    /// Angular rate in rad/s (zero when non-rotating).
    pub fn rate(&self) -> f64 {
        self.period.map_or(0.0, |p| TAU / p)
    }

    pub fn angle(&self, t: f64) -> f64 {
        match self.period {
            // Reduce the whole-turn count first so periodicity holds to rounding.
            Some(p) => self.phase0 + TAU * (t / p).fract(),
            None => self.phase0,
        }
    }
}

/// Rotates a body-frame vector into the inertial frame at time `t`.
pub fn body_to_inertial(rot: &RotationState, t: f64, r_body: &Vec3) -> Vec3 {
    rotate(&rot.axis, rot.angle(t), r_body)
}

pub fn inertial_to_body(rot: &RotationState, t: f64, r_inertial: &Vec3) -> Vec3 {
    rotate(&rot.axis, -rot.angle(t), r_inertial)
}

// Rodrigues' formula.
fn rotate(axis: &Vec3, angle: f64, r: &Vec3) -> Vec3 {
    if angle == 0.0 {
        return *r;
    }
    let (s, c) = angle.sin_cos();
    r * c + axis.cross(r) * s + axis * (axis.dot(r) * (1.0 - c))
}

/// Permitted shell: outside the safety ellipsoid, inside the exit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    /// Body-frame semi-axes, already multiplied by the safety factor.
    safety_semi_axes: Vec3,
    exit_radius: f64,
}

impl RegionSpec {
    pub fn new(safety_semi_axes: Vec3, exit_radius: f64) -> Result<Self> {
        if !safety_semi_axes.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return Err(SwarmError::InvalidArgument("safety semi-axes must be positive".into()));
        }
        if !(safety_semi_axes.max() < exit_radius) || !exit_radius.is_finite() {
            return Err(SwarmError::InvalidArgument(format!(
                "exit radius {exit_radius} km must exceed the largest safety semi-axis {} km",
                safety_semi_axes.max()
            )));
        }
        Ok(Self { safety_semi_axes, exit_radius })
    }

    /// Builds the region from raw body semi-axes and a safety factor.
    pub fn from_body(body_semi_axes: Vec3, safety_factor: f64, exit_radius: f64) -> Result<Self> {
        if !(safety_factor > 0.0) {
            return Err(SwarmError::InvalidArgument("safety factor must be positive".into()));
        }
        Self::new(body_semi_axes * safety_factor, exit_radius)
    }

    pub fn safety_semi_axes(&self) -> Vec3 {
        self.safety_semi_axes
    }

    pub fn exit_radius(&self) -> f64 {
        self.exit_radius
    }

    /// Safety function on a body-frame position: negative inside the ellipsoid.
    pub fn g_safe_body(&self, x_body: &Vec3) -> f64 {
        x_body.component_div(&self.safety_semi_axes).norm_squared() - 1.0
    }

    /// Exit function: positive outside the operations sphere.
    pub fn g_exit(&self, x_inertial: &Vec3) -> f64 {
        x_inertial.norm() - self.exit_radius
    }

    /// Outward unit normal of the safety ellipsoid level set through `x`, inertial frame.
    pub fn safety_normal(&self, rot: &RotationState, t: f64, x_inertial: &Vec3) -> Vec3 {
        let x_body = inertial_to_body(rot, t, x_inertial);
        let a2 = self.safety_semi_axes.component_mul(&self.safety_semi_axes);
        let grad = x_body.component_div(&a2);
        body_to_inertial(rot, t, &grad).normalize()
    }
}

/// Evaluates `(g_safe, g_exit)`; safety is violated when `g_safe < 0`, exit when `g_exit > 0`.
pub fn region_values(region: &RegionSpec, rot: &RotationState, t: f64, x_inertial: &Vec3) -> (f64, f64) {
    let x_body = inertial_to_body(rot, t, x_inertial);
    (region.g_safe_body(&x_body), region.g_exit(x_inertial))
}
