//! Spherical-harmonic description of the exterior field: coefficients of a
//! mascon set, field evaluation, and least-squares recovery from sampled
//! accelerations.
//!
//! Coefficients are unnormalized and carry no Condon–Shortley phase:
//! `U = μ/r Σ_l (R0/r)^l Σ_m P_lm(sin φ) (C_lm cos mλ + S_lm sin mλ)`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::body_model::{MasconModel, Vec3};
use crate::dynamics::SpacecraftId;
use crate::error::{Result, SwarmError};

pub const SAMPLES_CSV_HEADER: &str = "t_s,x_km,y_km,z_km,ax,ay,az,sc_id";
pub const COEFFS_CSV_HEADER: &str = "l,m,C,S";

/// Gravity-only acceleration recorded in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravitySample {
    pub t: f64,
    pub r_body: Vec3,
    pub a_body: Vec3,
    pub sc_id: SpacecraftId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    pub degree: usize,
    /// Reference radius [km].
    pub r0: f64,
    pub mu: f64,
    c: Vec<f64>,
    s: Vec<f64>,
}

/// Position of `(l, m)` in the packed lower-triangular layout.
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// `(l − m)! / (l + m)!` as a running product.
fn factorial_ratio(l: usize, m: usize) -> f64 {
    ((l - m + 1)..=(l + m)).fold(1.0, |acc, k| acc / k as f64)
}

impl HarmonicCoeffs {
    pub fn zeros(degree: usize, r0: f64, mu: f64) -> Self {
        let n = tri(degree, degree) + 1;
        Self { degree, r0, mu, c: vec![0.0; n], s: vec![0.0; n] }
    }

    /// Point mass: `C_00 = 1`, everything else zero.
    pub fn point_mass(degree: usize, r0: f64, mu: f64) -> Self {
        let mut out = Self::zeros(degree, r0, mu);
        out.c[0] = 1.0;
        out
    }

    pub fn c(&self, l: usize, m: usize) -> f64 {
        self.c[tri(l, m)]
    }

    pub fn s(&self, l: usize, m: usize) -> f64 {
        self.s[tri(l, m)]
    }

    pub fn set(&mut self, l: usize, m: usize, c: f64, s: f64) {
        assert!(m <= l && l <= self.degree, "({l}, {m}) outside degree {}", self.degree);
        self.c[tri(l, m)] = c;
        self.s[tri(l, m)] = if m == 0 { 0.0 } else { s };
    }

    /// `(l, m, C, S)` rows in degree-major order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..=self.degree).flat_map(move |l| (0..=l).map(move |m| (l, m, self.c(l, m), self.s(l, m))))
    }

    /// 4π-normalized copy: `C̄_lm = C_lm / N_lm`, `N_lm = √((2 − δ_m0)(2l + 1)(l − m)!/(l + m)!)`.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for l in 0..=self.degree {
            for m in 0..=l {
                let delta = if m == 0 { 1.0 } else { 2.0 };
                let n = (delta * (2 * l + 1) as f64 * factorial_ratio(l, m)).sqrt();
                out.c[tri(l, m)] /= n;
                out.s[tri(l, m)] /= n;
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| SwarmError::Io { path: path.into(), source };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "{COEFFS_CSV_HEADER}").map_err(io)?;
        for (l, m, c, s) in self.rows() {
            writeln!(out, "{l},{m},{c:e},{s:e}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Interior solid harmonics `E_lm + i F_lm = (r/R0)^l P_lm(sin φ) e^{imλ}` of one point.
fn interior_solid(p: &Vec3, r0: f64, degree: usize) -> (Vec<f64>, Vec<f64>) {
    let n = tri(degree, degree) + 1;
    let mut e = vec![0.0; n];
    let mut f = vec![0.0; n];
    let (x, y, z) = (p.x / r0, p.y / r0, p.z / r0);
    let rho2 = x * x + y * y + z * z;
    e[0] = 1.0;
    for m in 0..=degree {
        if m > 0 {
            let k = (2 * m - 1) as f64;
            let (pe, pf) = (e[tri(m - 1, m - 1)], f[tri(m - 1, m - 1)]);
            e[tri(m, m)] = k * (x * pe - y * pf);
            f[tri(m, m)] = k * (x * pf + y * pe);
        }
        for l in m + 1..=degree {
            let a = (2 * l - 1) as f64 * z;
            let b = (l + m - 1) as f64 * rho2;
            let d = (l - m) as f64;
            let (e2, f2) = if l >= m + 2 { (e[tri(l - 2, m)], f[tri(l - 2, m)]) } else { (0.0, 0.0) };
            e[tri(l, m)] = (a * e[tri(l - 1, m)] - b * e2) / d;
            f[tri(l, m)] = (a * f[tri(l - 1, m)] - b * f2) / d;
        }
    }
    (e, f)
}

/// Exact exterior coefficients of a mascon set about the origin.
pub fn mascon_to_harmonics(model: &MasconModel, degree: usize, r0: f64) -> Result<HarmonicCoeffs> {
    if !(r0 > 0.0) {
        return Err(SwarmError::InvalidArgument("reference radius must be positive".into()));
    }
    let r_max = model.max_radius();
    if r_max >= r0 {
        return Err(SwarmError::InvalidArgument(format!(
            "mascon at radius {r_max} km lies outside the reference radius {r0} km"
        )));
    }
    let mu = model.total_mu();
    let mut out = HarmonicCoeffs::zeros(degree, r0, mu);
    for (p, &mu_i) in model.positions().iter().zip(model.mus()) {
        let (e, f) = interior_solid(p, r0, degree);
        let w = mu_i / mu;
        for (k, (ek, fk)) in e.iter().zip(&f).enumerate() {
            out.c[k] += w * ek;
            out.s[k] += w * fk;
        }
    }
    for l in 0..=degree {
        for m in 0..=l {
            let scale = if m == 0 { 1.0 } else { 2.0 } * factorial_ratio(l, m);
            out.c[tri(l, m)] *= scale;
            out.s[tri(l, m)] *= scale;
        }
    }
    Ok(out)
}

/// Exterior solid harmonics `V_lm`, `W_lm` up to `degree` (recursions of
/// Montenbruck & Gill), packed like the coefficients.
fn exterior_solid(r: &Vec3, r0: f64, degree: usize) -> (Vec<f64>, Vec<f64>) {
    let n = tri(degree, degree) + 1;
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let r2 = r.norm_squared();
    let (x0, y0, z0) = (r.x * r0 / r2, r.y * r0 / r2, r.z * r0 / r2);
    let rho = r0 * r0 / r2;
    v[0] = r0 / r2.sqrt();
    for m in 0..=degree {
        if m > 0 {
            let k = (2 * m - 1) as f64;
            let (pv, pw) = (v[tri(m - 1, m - 1)], w[tri(m - 1, m - 1)]);
            v[tri(m, m)] = k * (x0 * pv - y0 * pw);
            w[tri(m, m)] = k * (x0 * pw + y0 * pv);
        }
        for l in m + 1..=degree {
            let a = (2 * l - 1) as f64 / (l - m) as f64 * z0;
            let b = (l + m - 1) as f64 / (l - m) as f64 * rho;
            let (v2, w2) = if l >= m + 2 { (v[tri(l - 2, m)], w[tri(l - 2, m)]) } else { (0.0, 0.0) };
            v[tri(l, m)] = a * v[tri(l - 1, m)] - b * v2;
            w[tri(l, m)] = a * w[tri(l - 1, m)] - b * w2;
        }
    }
    (v, w)
}

/// Acceleration per unit `C_lm` and per unit `S_lm` (in units of μ/R0²).
fn partials(v: &[f64], w: &[f64], l: usize, m: usize) -> (Vec3, Vec3) {
    let vv = |l: usize, m: usize| v[tri(l, m)];
    let ww = |l: usize, m: usize| w[tri(l, m)];
    let z_c = -((l - m + 1) as f64) * vv(l + 1, m);
    let z_s = -((l - m + 1) as f64) * ww(l + 1, m);
    if m == 0 {
        let dc = Vec3::new(-vv(l + 1, 1), -ww(l + 1, 1), z_c);
        return (dc, Vec3::new(0.0, 0.0, 0.0));
    }
    // (l − m + 2)! / (l − m)!
    let k = ((l - m + 1) * (l - m + 2)) as f64;
    let dc = Vec3::new(
        0.5 * (-vv(l + 1, m + 1) + k * vv(l + 1, m - 1)),
        0.5 * (-ww(l + 1, m + 1) - k * ww(l + 1, m - 1)),
        z_c,
    );
    let ds = Vec3::new(
        0.5 * (-ww(l + 1, m + 1) + k * ww(l + 1, m - 1)),
        0.5 * (vv(l + 1, m + 1) + k * vv(l + 1, m - 1)),
        z_s,
    );
    (dc, ds)
}

fn origin_check(r: &Vec3) -> Result<()> {
    if r.norm() > 0.0 && r.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(SwarmError::InvalidArgument("spherical-harmonic field evaluated at the origin".into()))
    }
}

/// Gradient of the truncated exterior potential [km/s²].
pub fn harmonics_accel(coeffs: &HarmonicCoeffs, r_body: &Vec3) -> Result<Vec3> {
    origin_check(r_body)?;
    let (v, w) = exterior_solid(r_body, coeffs.r0, coeffs.degree + 1);
    let mut a = Vec3::zeros();
    for l in 0..=coeffs.degree {
        for m in 0..=l {
            let (dc, ds) = partials(&v, &w, l, m);
            a += dc * coeffs.c(l, m) + ds * coeffs.s(l, m);
        }
    }
    Ok(a * (coeffs.mu / (coeffs.r0 * coeffs.r0)))
}

/// Truncated exterior potential (positive convention, `μ/r` for a point mass).
pub fn harmonics_potential(coeffs: &HarmonicCoeffs, r_body: &Vec3) -> Result<f64> {
    origin_check(r_body)?;
    let (v, w) = exterior_solid(r_body, coeffs.r0, coeffs.degree);
    let sum: f64 = (0..v.len()).map(|k| coeffs.c[k] * v[k] + coeffs.s[k] * w[k]).sum();
    Ok(sum * coeffs.mu / coeffs.r0)
}

/// Least-squares fit of all coefficients up to `degree` to sampled
/// accelerations, with `C_00` held at 1. Columns are scaled to unit norm and
/// the system is solved by Householder QR.
pub fn fit_harmonics(samples: &[GravitySample], degree: usize, r0: f64, mu: f64) -> Result<HarmonicCoeffs> {
    if !(r0 > 0.0) || !(mu > 0.0) {
        return Err(SwarmError::InvalidArgument("reference radius and mu must be positive".into()));
    }
    // Unknowns: C_lm for (l, m) ≠ (0, 0), S_lm for m ≥ 1.
    let mut unknowns: Vec<(usize, usize, bool)> = Vec::new();
    for l in 1..=degree {
        for m in 0..=l {
            unknowns.push((l, m, false));
            if m > 0 {
                unknowns.push((l, m, true));
            }
        }
    }
    let n_unknowns = unknowns.len();
    let rows = 3 * samples.len();
    if samples.is_empty() || rows < n_unknowns {
        return Err(SwarmError::RankDeficient { rank: rows.min(n_unknowns), unknowns: n_unknowns });
    }
    let scale = mu / (r0 * r0);
    let mut design = DMatrix::<f64>::zeros(rows, n_unknowns);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (k, sample) in samples.iter().enumerate() {
        origin_check(&sample.r_body)?;
        let (v, w) = exterior_solid(&sample.r_body, r0, degree + 1);
        let (central, _) = partials(&v, &w, 0, 0);
        let residual = sample.a_body - central * scale;
        for (col, &(l, m, is_s)) in unknowns.iter().enumerate() {
            let (dc, ds) = partials(&v, &w, l, m);
            let d = if is_s { ds } else { dc };
            for axis in 0..3 {
                design[(3 * k + axis, col)] = d[axis] * scale;
            }
        }
        for axis in 0..3 {
            rhs[3 * k + axis] = residual[axis];
        }
    }

    let mut out = HarmonicCoeffs::point_mass(degree, r0, mu);
    if n_unknowns == 0 {
        return Ok(out);
    }
    let norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    for (j, &n) in norms.iter().enumerate() {
        if n > 0.0 {
            design.column_mut(j).scale_mut(1.0 / n);
        }
    }
    let qr = design.qr();
    let r = qr.r();
    let diag_max = (0..n_unknowns).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..n_unknowns).filter(|&i| r[(i, i)].abs() > 1e-12 * diag_max.max(f64::MIN_POSITIVE)).count();
    if rank < n_unknowns || diag_max == 0.0 {
        return Err(SwarmError::RankDeficient { rank, unknowns: n_unknowns });
    }
    let mut qtb = rhs;
    qr.q_tr_mul(&mut qtb);
    let top = qtb.rows(0, n_unknowns).into_owned();
    let x = r
        .solve_upper_triangular(&top)
        .ok_or(SwarmError::RankDeficient { rank, unknowns: n_unknowns })?;
    for (col, &(l, m, is_s)) in unknowns.iter().enumerate() {
        let value = if norms[col] > 0.0 { x[col] / norms[col] } else { 0.0 };
        if is_s {
            out.s[tri(l, m)] = value;
        } else {
            out.c[tri(l, m)] = value;
        }
    }
    Ok(out)
}

/// Per-degree relative error: RMS over orders of the coefficient differences
/// (C and S) divided by the RMS of the reference coefficients of that degree.
pub fn coeff_error(fit: &HarmonicCoeffs, reference: &HarmonicCoeffs) -> Result<Vec<f64>> {
    if fit.degree != reference.degree || fit.r0 != reference.r0 {
        return Err(SwarmError::InvalidArgument(format!(
            "coefficient sets differ: degree {} vs {}, R0 {} vs {}",
            fit.degree, reference.degree, fit.r0, reference.r0
        )));
    }
    let rms = |vals: &mut dyn Iterator<Item = f64>| {
        let (sum, n) = vals.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
        (sum / n as f64).sqrt()
    };
    Ok((0..=fit.degree)
        .map(|l| {
            let values = |h: &HarmonicCoeffs| -> Vec<f64> {
                (0..=l).flat_map(|m| [h.c(l, m)].into_iter().chain((m > 0).then(|| h.s(l, m)))).collect()
            };
            let (f, r) = (values(fit), values(reference));
            let diff = rms(&mut f.iter().zip(&r).map(|(a, b)| a - b));
            let base = rms(&mut r.iter().copied());
            if base > 0.0 {
                diff / base
            } else if diff < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

pub fn write_samples_csv(path: &Path, samples: &[GravitySample]) -> Result<()> {
    let io = |source| SwarmError::Io { path: path.into(), source };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{SAMPLES_CSV_HEADER}").map_err(io)?;
    for s in samples {
        let (r, a) = (s.r_body, s.a_body);
        writeln!(out, "{},{},{},{},{:e},{:e},{:e},{}", s.t, r.x, r.y, r.z, a.x, a.y, a.z, s.sc_id).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<GravitySample>> {
    let format = |reason: String| SwarmError::Format { path: path.into(), reason };
    let file = std::fs::File::open(path).map_err(|source| SwarmError::Io { path: path.into(), source })?;
    let mut reader = csv::Reader::from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.join(",") != SAMPLES_CSV_HEADER {
        return Err(format(format!("expected header {SAMPLES_CSV_HEADER:?}, found {:?}", header.join(","))));
    }
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format(e.to_string()))?;
        let bad = |what: &str| format(format!("row {}: bad {what}", line + 1));
        let num = |i: usize| -> Result<f64> {
            record.get(i).and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite()).ok_or_else(|| bad("number"))
        };
        let sc_id = record.get(7).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("sc_id"))?;
        out.push(GravitySample {
            t: num(0)?,
            r_body: Vec3::new(num(1)?, num(2)?, num(3)?),
            a_body: Vec3::new(num(4)?, num(5)?, num(6)?),
            sc_id,
        });
    }
    Ok(out)
}
