//! Taylor-coefficient recurrences for the mascon equations of motion.
//!
//! For every mascon the rotated position `p_i(t0 + τ)` is an explicit series
//! (Rodrigues' formula with `cos`/`sin` of a linear angle). The relative vector
//! `d = x − p_i`, its squared norm `s`, `w = s^(−3/2)` and the product `d·w`
//! are expanded order by order with the usual automatic-differentiation
//! recurrences, so one sweep over orders `0..p` yields the full polynomial of
//! position and velocity.

use std::cell::RefCell;

use crate::body_model::Vec3;
use crate::dynamics::{Dynamics, SINGULAR_DISTANCE};
use crate::error::{Result, SwarmError};

/// Mascon positions split for Rodrigues rotation about the spin axis.
#[derive(Debug, Clone)]
pub(crate) struct RotatingMascons {
    /// Component along the axis (unaffected by rotation).
    parallel: Vec<Vec3>,
    perpendicular: Vec<Vec3>,
    axis_cross: Vec<Vec3>,
    mus: Vec<f64>,
    rate: f64,
}

impl RotatingMascons {
    pub(crate) fn new(dynamics: &Dynamics) -> Self {
        let k = dynamics.rotation().axis();
        let model = dynamics.model();
        let mut parallel = Vec::with_capacity(model.len());
        let mut perpendicular = Vec::with_capacity(model.len());
        let mut axis_cross = Vec::with_capacity(model.len());
        for p in model.positions() {
            let par = k * k.dot(p);
            parallel.push(par);
            perpendicular.push(p - par);
            axis_cross.push(k.cross(p));
        }
        Self {
            parallel,
            perpendicular,
            axis_cross,
            mus: model.mus().to_vec(),
            rate: dynamics.rotation().rate(),
        }
    }
}

thread_local! {
    static WORKSPACE: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// Position and velocity Taylor coefficients up to `order`, indexed
/// `[component][k]` with components x, y, z, vx, vy, vz.
pub(crate) fn taylor_coefficients(
    dynamics: &Dynamics,
    mascons: &RotatingMascons,
    t0: f64,
    y0: &[f64; 6],
    order: usize,
) -> Result<[Vec<f64>; 6]> {
    let p = order;
    let mut coeffs: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; p + 1]);
    for (c, &y) in coeffs.iter_mut().zip(y0) {
        c[0] = y;
    }

    // cos/sin(θ0 + ωτ) series.
    let theta0 = dynamics.rotation().angle(t0);
    let (sin0, cos0) = theta0.sin_cos();
    let omega = mascons.rate;
    let mut cos_series = vec![0.0; p + 1];
    let mut sin_series = vec![0.0; p + 1];
    let mut scale = 1.0;
    for n in 0..=p {
        let (c, s) = match n % 4 {
            0 => (cos0, sin0),
            1 => (-sin0, cos0),
            2 => (-cos0, -sin0),
            _ => (sin0, -cos0),
        };
        cos_series[n] = c * scale;
        sin_series[n] = s * scale;
        scale *= omega / (n + 1) as f64;
    }

    let n_mascons = mascons.mus.len();
    // Per mascon: d_x, d_y, d_z, s, w, each of length p + 1.
    let stride = 5 * (p + 1);
    let srp = dynamics.srp_accel();

    WORKSPACE.with(|cell| -> Result<()> {
        let mut ws = cell.borrow_mut();
        if ws.len() < stride * n_mascons {
            ws.resize(stride * n_mascons, 0.0);
        }
        let len = p + 1;
        for n in 0..p {
            let xn = [coeffs[0][n], coeffs[1][n], coeffs[2][n]];
            let (cn, sn) = (cos_series[n], sin_series[n]);
            let mut acc = [0.0f64; 3];
            for i in 0..n_mascons {
                let buf = &mut ws[i * stride..(i + 1) * stride];
                let (d, rest) = buf.split_at_mut(3 * len);
                let (s, w) = rest.split_at_mut(len);
                let perp = &mascons.perpendicular[i];
                let cross = &mascons.axis_cross[i];
                for k in 0..3 {
                    let mut pk = cn * perp[k] + sn * cross[k];
                    if n == 0 {
                        pk += mascons.parallel[i][k];
                    }
                    d[k * len + n] = xn[k] - pk;
                }
                let (dx, dy, dz) = (&d[..len], &d[len..2 * len], &d[2 * len..]);

                // s^[n] = Σ_j d^[j]·d^[n−j], using the symmetry of the sum.
                let mut sum = 0.0;
                for j in 0..n.div_ceil(2) {
                    sum += dx[j] * dx[n - j] + dy[j] * dy[n - j] + dz[j] * dz[n - j];
                }
                sum *= 2.0;
                if n % 2 == 0 {
                    let h = n / 2;
                    sum += dx[h] * dx[h] + dy[h] * dy[h] + dz[h] * dz[h];
                }
                s[n] = sum;

                if n == 0 {
                    if s[0] < SINGULAR_DISTANCE * SINGULAR_DISTANCE {
                        return Err(SwarmError::Singular { index: i, distance: s[0].sqrt(), t: t0 });
                    }
                    w[0] = 1.0 / (s[0] * s[0].sqrt());
                } else {
                    // w = s^α with α = −3/2.
                    let mut sum = 0.0;
                    for j in 0..n {
                        sum += (-1.5 * (n - j) as f64 - j as f64) * s[n - j] * w[j];
                    }
                    w[n] = sum / (n as f64 * s[0]);
                }

                let mu = mascons.mus[i];
                for (k, dk) in [dx, dy, dz].into_iter().enumerate() {
                    let mut prod = 0.0;
                    for j in 0..=n {
                        prod += dk[j] * w[n - j];
                    }
                    acc[k] -= mu * prod;
                }
            }
            if n == 0 {
                for k in 0..3 {
                    acc[k] += srp[k];
                }
            }
            let inv = 1.0 / (n + 1) as f64;
            for k in 0..3 {
                coeffs[3 + k][n + 1] = acc[k] * inv;
                coeffs[k][n + 1] = coeffs[3 + k][n] * inv;
            }
        }
        Ok(())
    })?;
    Ok(coeffs)
}
