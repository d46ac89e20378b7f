//! Explicit integrators: classical RK4 (fixed step) and Dormand–Prince 5(4)
//! with adaptive step control.

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)` written into the third argument.
pub trait Rhs: FnMut(f64, &[f64], &mut [f64]) -> Result<()> {}
impl<F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>> Rhs for F {}

pub fn rk4_step<F: Rhs>(f: &mut F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4)?;
    Ok((0..n).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Integrates from `t0` to `t1` in `n` equal RK4 steps; returns every node.
pub fn rk4_path<F: Rhs>(mut f: F, t0: f64, y0: &[f64], t1: f64, n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = n.max(1);
    let h = (t1 - t0) / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut y = y0.to_vec();
    out.push((t0, y.clone()));
    for k in 0..n {
        let t = t0 + k as f64 * h;
        y = rk4_step(&mut f, t, &y, h)?;
        let tk = if k + 1 == n { t1 } else { t0 + (k + 1) as f64 * h };
        out.push((tk, y.clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 200_000 }
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dormand–Prince 5(4) from `t0` to `t1`; returns the final state.
pub fn dopri<F: Rhs>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: AdaptiveOptions) -> Result<Vec<f64>> {
    let n = y0.len();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0.to_vec());
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = span.abs() * 1e-3 * dir;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    f(t, &y, &mut k[0])?;
    for _ in 0..opts.max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok(y);
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let mut stage_failed = false;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s - 1][j] * kj[i];
                }
                tmp[i] = acc;
            }
            if f(t + C[s] * h, &tmp, &mut k[s]).is_err() {
                stage_failed = true;
                break;
            }
        }
        if stage_failed {
            h *= 0.25;
            if h.abs() < 1e-14 * span.abs() {
                return Err(Error::Domain("integration path leaves the evaluable domain".into()));
            }
            continue;
        }
        let mut err = 0.0f64;
        let mut y5 = vec![0.0; n];
        for i in 0..n {
            let mut s5 = y[i];
            let mut s4 = y[i];
            for s in 0..7 {
                s5 += h * B5[s] * k[s][i];
                s4 += h * B4[s] * k[s][i];
            }
            y5[i] = s5;
            let sc = opts.atol + opts.rtol * y[i].abs().max(s5.abs());
            err = err.max(((s5 - s4) / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            let last = k[6].clone();
            k[0] = last;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h.abs() < 1e-15 * span.abs() {
            return Err(Error::NonConvergence("adaptive step underflow".into()));
        }
    }
    Err(Error::NonConvergence("adaptive integrator step limit".into()))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed-order Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, order: usize) -> Result<f64> {
    let (x, w) = gauss_legendre(order);
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        acc += wi * f(c + r * xi)?;
    }
    Ok(acc * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_fourth_order() {
        let rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[0];
            Ok(())
        };
        let e = |n| (rk4_path(rhs, 0.0, &[1.0], 1.0, n).unwrap().last().unwrap().1[0] - 1f64.exp()).abs();
        let ratio = e(10) / e(20);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn dopri_meets_tolerance() {
        let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = -2.0 * t * y[0];
            Ok(())
        };
        let y = dopri(rhs, 0.0, &[1.0], 3.0, AdaptiveOptions::default()).unwrap();
        assert!((y[0] - (-9f64).exp()).abs() < 1e-11);
        let back = dopri(
            |t: f64, y: &[f64], d: &mut [f64]| {
                d[0] = -2.0 * t * y[0];
                Ok(())
            },
            3.0,
            &y,
            0.0,
            AdaptiveOptions::default(),
        )
        .unwrap();
        assert!((back[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n}");
        }
        let v = integrate(|x| Ok(x.ln()), 1.0, 2.0, 20).unwrap();
        assert!((v - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
    }
}
