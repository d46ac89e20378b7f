//! Central finite differences with Richardson error estimates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A numeric derivative with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    /// `|self − other|` within the combined bounds plus `slack`.
    pub fn agrees_with(&self, other: f64, slack: f64) -> bool {
        (self.value - other).abs() <= self.error + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffToolkit {
    /// Step for first derivatives, relative to the coordinate scale.
    pub rel_step: f64,
    /// Step for order-2 stencils applied to function values.
    pub hessian_rel_step: f64,
    /// Floor on the coordinate scale used to size steps.
    pub min_scale: f64,
}

impl Default for DiffToolkit {
    fn default() -> Self {
        Self { rel_step: 1e-5, hessian_rel_step: 1e-3, min_scale: 1e-8 }
    }
}

const SHRINK_TRIES: usize = 12;

impl DiffToolkit {
    fn base_step(&self, x: f64, rel: f64) -> f64 {
        rel * x.abs().max(self.min_scale)
    }

    /// First derivative of a scalar function, stencils h and h/2.
    pub fn derivative<F: FnMut(f64) -> Result<f64>>(&self, mut f: F, x: f64) -> Result<Estimate> {
        let mut h = self.base_step(x, self.rel_step);
        for _ in 0..SHRINK_TRIES {
            match Self::richardson_first(&mut f, x, h) {
                Ok(e) => return Ok(e),
                Err(Error::Domain(_)) => h *= 0.25,
                Err(e) => return Err(e),
            }
        }
        Err(Error::StepUnderflow)
    }

    fn richardson_first<F: FnMut(f64) -> Result<f64>>(f: &mut F, x: f64, h: f64) -> Result<Estimate> {
        let fp = f(x + h)?;
        let fm = f(x - h)?;
        let fp2 = f(x + 0.5 * h)?;
        let fm2 = f(x - 0.5 * h)?;
        let d1 = (fp - fm) / (2.0 * h);
        let d2 = (fp2 - fm2) / h;
        let value = (4.0 * d2 - d1) / 3.0;
        let scale = fp.abs().max(fm.abs()).max(fp2.abs()).max(fm2.abs());
        let roundoff = 4.0 * f64::EPSILON * scale / h;
        Ok(Estimate { value, error: (d2 - d1).abs() / 3.0 + roundoff })
    }

    /// Partial derivative of `f` along coordinate `i` at `x`.
    pub fn partial<F: FnMut(&[f64]) -> Result<f64>>(&self, mut f: F, x: &[f64], i: usize) -> Result<Estimate> {
        let mut y = x.to_vec();
        self.derivative(
            |t| {
                y[i] = t;
                f(&y)
            },
            x[i],
        )
    }

    /// Second derivative from values only, stencils h and h/2.
    pub fn second<F: FnMut(f64) -> Result<f64>>(&self, mut f: F, x: f64) -> Result<Estimate> {
        let mut h = self.base_step(x, self.hessian_rel_step);
        for _ in 0..SHRINK_TRIES {
            let attempt = (|| {
                let f0 = f(x)?;
                let d = |hh: f64, f: &mut F| -> Result<(f64, f64)> {
                    let a = f(x + hh)?;
                    let b = f(x - hh)?;
                    Ok(((a - 2.0 * f0 + b) / (hh * hh), a.abs().max(b.abs())))
                };
                let (d1, s1) = d(h, &mut f)?;
                let (d2, s2) = d(0.5 * h, &mut f)?;
                let scale = s1.max(s2).max(f0.abs());
                let roundoff = 16.0 * f64::EPSILON * scale / (0.25 * h * h);
                Ok(Estimate { value: (4.0 * d2 - d1) / 3.0, error: (d2 - d1).abs() / 3.0 + roundoff })
            })();
            match attempt {
                Ok(e) => return Ok(e),
                Err(Error::Domain(_)) => h *= 0.25,
                Err(e) => return Err(e),
            }
        }
        Err(Error::StepUnderflow)
    }

    /// Hessian of a scalar function from values only; symmetrized.
    /// Returns the matrix, the element-wise error bounds and the asymmetry
    /// residual before symmetrization.
    pub fn hessian<F: FnMut(&[f64]) -> Result<f64>>(
        &self,
        mut f: F,
        x: &[f64],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        let mut err = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut y = x.to_vec();
            let e = self.second(
                |t| {
                    y[i] = t;
                    f(&y)
                },
                x[i],
            )?;
            h[(i, i)] = e.value;
            err[(i, i)] = e.error;
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // ∂/∂x_j of the first derivative along i, each by central differences.
                let tk = DiffToolkit { rel_step: self.hessian_rel_step, ..*self };
                let mut y = x.to_vec();
                let e = tk.derivative(
                    |t| {
                        y[j] = t;
                        let yy = y.clone();
                        tk.partial(&mut f, &yy, i).map(|d| d.value)
                    },
                    x[j],
                )?;
                h[(i, j)] = e.value;
                err[(i, j)] = e.error;
            }
        }
        let asym = max_asymmetry(&h);
        let sym = (&h + h.transpose()) * 0.5;
        let err = (&err + err.transpose()) * 0.5;
        Ok((sym, err, asym))
    }

    /// Jacobian of a vector-valued function: `J[(r, c)] = ∂g_r/∂x_c`.
    pub fn jacobian<F: FnMut(&[f64]) -> Result<Vec<f64>>>(
        &self,
        mut g: F,
        x: &[f64],
        rows: usize,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let n = x.len();
        let mut jac = DMatrix::zeros(rows, n);
        let mut err = DMatrix::zeros(rows, n);
        for c in 0..n {
            let mut h = self.base_step(x[c], self.rel_step);
            let mut done = false;
            for _ in 0..SHRINK_TRIES {
                let eval = |dx: f64, g: &mut F| -> Result<Vec<f64>> {
                    let mut y = x.to_vec();
                    y[c] += dx;
                    let v = g(&y)?;
                    if v.len() != rows {
                        return Err(Error::DimensionMismatch { expected: rows, got: v.len() });
                    }
                    Ok(v)
                };
                let attempt = (|| {
                    Ok::<_, Error>((eval(h, &mut g)?, eval(-h, &mut g)?, eval(0.5 * h, &mut g)?, eval(-0.5 * h, &mut g)?))
                })();
                match attempt {
                    Ok((fp, fm, fp2, fm2)) => {
                        for r in 0..rows {
                            let d1 = (fp[r] - fm[r]) / (2.0 * h);
                            let d2 = (fp2[r] - fm2[r]) / h;
                            let scale = fp[r].abs().max(fm[r].abs()).max(fp2[r].abs()).max(fm2[r].abs());
                            jac[(r, c)] = (4.0 * d2 - d1) / 3.0;
                            err[(r, c)] = (d2 - d1).abs() / 3.0 + 4.0 * f64::EPSILON * scale / h;
                        }
                        done = true;
                        break;
                    }
                    Err(Error::Domain(_)) => h *= 0.25,
                    Err(e) => return Err(e),
                }
            }
            if !done {
                return Err(Error::StepUnderflow);
            }
        }
        Ok((jac, err))
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut r = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            r = r.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_error_bound_covers_true_error() {
        let tk = DiffToolkit::default();
        for &x in &[0.3, 1.0, 7.5, 120.0] {
            let e = tk.derivative(|t| Ok(t.ln() * t.sin()), x).unwrap();
            let exact = x.sin() / x + x.ln() * x.cos();
            assert!((e.value - exact).abs() <= e.error, "x={x}: {} vs {exact} ± {}", e.value, e.error);
            assert!(e.error < 1e-5 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn second_derivative_matches() {
        let tk = DiffToolkit::default();
        let e = tk.second(|t| Ok(t.ln()), 2.0).unwrap();
        assert!((e.value + 0.25).abs() <= e.error.max(1e-9));
    }

    #[test]
    fn steps_shrink_near_the_boundary() {
        let tk = DiffToolkit { rel_step: 0.5, ..Default::default() };
        let f = |t: f64| if t < 0.9e-3 { Err(Error::Domain("t < 0.9e-3".into())) } else { Ok(t.ln()) };
        let e = tk.derivative(f, 1e-3).unwrap();
        assert!((e.value - 1e3).abs() / 1e3 < 1e-3);
        let always = |_t: f64| -> Result<f64> { Err(Error::Domain("nowhere".into())) };
        assert_eq!(tk.derivative(always, 1.0), Err(Error::StepUnderflow));
    }

    #[test]
    fn hessian_of_quadratic() {
        let tk = DiffToolkit::default();
        let (h, err, asym) = tk
            .hessian(|x| Ok(-x[0] * x[0] + 0.5 * x[0] * x[1] - 2.0 * x[1] * x[1]), &[0.7, -1.3])
            .unwrap();
        assert!((h[(0, 0)] + 2.0).abs() <= err[(0, 0)] + 1e-9);
        assert!((h[(0, 1)] - 0.5).abs() <= err[(0, 1)] + 1e-9, "{h} {err}");
        assert!((h[(1, 1)] + 4.0).abs() <= err[(1, 1)] + 1e-9);
        assert!(asym < 1e-6);
    }
}
