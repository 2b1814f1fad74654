//! Dense univariate polynomials in the monomial basis (`c[k]` multiplies `x^k`)
//! and real-root isolation by Bernstein subdivision.

/// Horner evaluation.
pub fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &ck)| k as f64 * ck).collect()
}

/// Product of two polynomials.
pub fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &pi) in p.iter().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            out[i + j] += pi * qj;
        }
    }
    out
}

/// Coefficients of `q(s) = p(a + b·s)`.
pub fn compose_affine(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    // Taylor shift by `a` (repeated synthetic division).
    if a != 0.0 {
        let n = q.len();
        for i in 0..n {
            for k in (i..n - 1).rev() {
                q[k] += a * q[k + 1];
            }
        }
    }
    if b != 1.0 {
        let mut scale = 1.0;
        for ck in q.iter_mut() {
            *ck *= scale;
            scale *= b;
        }
    }
    q
}

/// Interpolates `f` on `[-1, 1]` at `degree + 1` Chebyshev nodes and returns
/// the interpolant in the monomial basis of `u`.
pub fn chebyshev_interpolant(degree: usize, mut f: impl FnMut(f64) -> f64) -> Vec<f64> {
    let n = degree + 1;
    let nodes: Vec<f64> = (0..n)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos())
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&u| f(u)).collect();

    let mut cheb = vec![0.0; n];
    for (k, ck) in cheb.iter_mut().enumerate() {
        let sum: f64 = (0..n)
            .map(|j| values[j] * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
            .sum();
        *ck = 2.0 * sum / n as f64;
    }
    cheb[0] *= 0.5;
    chebyshev_to_monomial(&cheb)
}

/// Converts a Chebyshev series `Σ a_k T_k(u)` to monomial coefficients.
pub fn chebyshev_to_monomial(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let mut t_prev = vec![0.0; n];
    let mut t_cur = vec![0.0; n];
    t_prev[0] = 1.0;
    out[0] += a[0];
    if n > 1 {
        t_cur[1] = 1.0;
        out[1] += a[1];
    }
    for ak in a.iter().skip(2) {
        // T_{k+1} = 2u T_k − T_{k−1}
        let mut t_next = vec![0.0; n];
        for i in 0..n - 1 {
            t_next[i + 1] += 2.0 * t_cur[i];
        }
        for i in 0..n {
            t_next[i] -= t_prev[i];
        }
        for i in 0..n {
            out[i] += ak * t_next[i];
        }
        t_prev = std::mem::replace(&mut t_cur, t_next);
    }
    out
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![1.0; 1]];
    for i in 1..=n {
        let prev = &table[i - 1];
        let mut row = vec![1.0; i + 1];
        for k in 1..i {
            row[k] = prev[k - 1] + prev[k];
        }
        table.push(row);
    }
    table
}

/// Bernstein coefficients on `[0, 1]` of a monomial-basis polynomial.
fn to_bernstein(q: &[f64]) -> Vec<f64> {
    let n = q.len() - 1;
    let binom = binomial_table(n);
    (0..=n)
        .map(|i| (0..=i).map(|k| binom[i][k] / binom[n][k] * q[k]).sum())
        .collect()
}

/// De Casteljau split at the midpoint.
fn split_half(b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = b.len();
    let mut work = b.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = vec![0.0; n];
    for level in 0..n {
        left.push(work[0]);
        right[n - 1 - level] = work[n - 1 - level];
        for i in 0..n - 1 - level {
            work[i] = 0.5 * (work[i] + work[i + 1]);
        }
    }
    (left, right)
}

fn sign_variations(b: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0;
    for &x in b {
        if x != 0.0 {
            if last != 0.0 && (x > 0.0) != (last > 0.0) {
                count += 1;
            }
            last = x;
        }
    }
    count
}

/// All real roots of `coeffs` in `[a, b]`, sorted ascending.
///
/// Each root is isolated by Descartes sign tests on Bernstein coefficients
/// over recursively halved subintervals, then refined to an interval of
/// width ≤ `tol` and Newton-polished. Clusters and even-multiplicity touches
/// that cannot be separated at `tol` are reported once.
pub fn poly_roots_in_interval(coeffs: &[f64], a: f64, b: f64, tol: f64) -> Vec<f64> {
    assert!(b > a, "empty interval [{a}, {b}]");
    let mut c = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    if c.len() <= 1 {
        // Constant polynomials have no isolated roots.
        return Vec::new();
    }
    let width = b - a;
    let q = compose_affine(&c, a, width);
    let dq = derivative(&q);
    let tol_s = (tol / width).max(f64::EPSILON);
    let mut roots_s = Vec::new();
    isolate(&q, &dq, &to_bernstein(&q), 0.0, 1.0, tol_s, &mut roots_s);

    roots_s.sort_by(|x, y| x.total_cmp(y));
    let dc = derivative(&c);
    let mut roots: Vec<f64> = Vec::with_capacity(roots_s.len());
    for s in roots_s {
        let x = polish_original(&c, &dc, a + width * s, 1e-6 * width);
        if roots.last().is_none_or(|&prev| x - prev > tol) {
            roots.push(x.clamp(a, b));
        }
    }
    roots
}

/// Newton polish on the caller's coefficients, undoing rounding introduced by
/// the change of variable. Moves of more than `max_shift` are rejected.
fn polish_original(c: &[f64], dc: &[f64], x0: f64, max_shift: f64) -> f64 {
    let mut x = x0;
    let mut fx = horner(c, x).abs();
    for _ in 0..4 {
        let d = horner(dc, x);
        if d == 0.0 || fx == 0.0 {
            break;
        }
        let next = x - horner(c, x) / d;
        let fnext = horner(c, next).abs();
        if !((next - x0).abs() <= max_shift && fnext < fx) {
            break;
        }
        x = next;
        fx = fnext;
    }
    x
}

fn isolate(q: &[f64], dq: &[f64], bern: &[f64], s0: f64, s1: f64, tol_s: f64, out: &mut Vec<f64>) {
    let n = bern.len() - 1;
    if bern[0] == 0.0 {
        out.push(s0);
    }
    if bern[n] == 0.0 {
        out.push(s1);
    }
    let inner = if bern[0] == 0.0 || bern[n] == 0.0 {
        // Strip endpoint zeros before the sign test: they are already reported.
        let lo = bern.iter().position(|&x| x != 0.0);
        let hi = bern.iter().rposition(|&x| x != 0.0);
        match (lo, hi) {
            (Some(lo), Some(hi)) if lo < hi => sign_variations(&bern[lo..=hi]),
            _ => 0,
        }
    } else {
        sign_variations(bern)
    };
    if inner == 0 {
        return;
    }
    if inner == 1 && bern[0] != 0.0 && bern[n] != 0.0 {
        out.push(refine_simple(q, dq, s0, s1, bern[0] < 0.0, tol_s));
        return;
    }
    if s1 - s0 <= tol_s {
        out.push(0.5 * (s0 + s1));
        return;
    }
    let mid = 0.5 * (s0 + s1);
    let (left, right) = split_half(bern);
    // An exact zero at the midpoint is reported by both halves; the caller dedupes.
    isolate(q, dq, &left, s0, mid, tol_s, out);
    isolate(q, dq, &right, mid, s1, tol_s, out);
}

/// Safeguarded Newton/bisection on a bracket with exactly one sign change.
fn refine_simple(q: &[f64], dq: &[f64], mut lo: f64, mut hi: f64, neg_at_lo: bool, tol_s: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = horner(q, x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == neg_at_lo {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol_s {
            break;
        }
        let dfx = horner(dq, x);
        let newton = x - fx / dfx;
        if dfx != 0.0 && newton > lo && newton < hi {
            if (newton - x).abs() <= 0.25 * tol_s {
                return newton;
            }
            x = newton;
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    // Final Newton polish, kept inside the bracket.
    let mut best = 0.5 * (lo + hi);
    for _ in 0..2 {
        let d = horner(dq, best);
        if d == 0.0 {
            break;
        }
        let next = best - horner(q, best) / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        best = next;
    }
    best
}
