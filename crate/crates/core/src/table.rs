//! Natural cubic splines in one and two dimensions for tabulated entropies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    y2: Vec<f64>,
}

/// Second derivatives of the natural spline through `(x, y)`.
fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut y2 = vec![0.0; n];
    if n < 3 {
        return y2;
    }
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        let p = sig * y2[i - 1] + 2.0;
        y2[i] = (sig - 1.0) / p;
        let d = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * d / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    y2[n - 1] = 0.0;
    for k in (0..n - 1).rev() {
        y2[k] = y2[k] * y2[k + 1] + u[k];
    }
    y2
}

/// Value, first and second derivative of the spline segment containing `t`.
fn eval_segment(x: &[f64], y: &[f64], y2: &[f64], t: f64) -> (f64, f64, f64) {
    let n = x.len();
    let hi = x.partition_point(|v| *v < t).clamp(1, n - 1);
    let lo = hi - 1;
    let h = x[hi] - x[lo];
    let a = (x[hi] - t) / h;
    let b = (t - x[lo]) / h;
    let f = a * y[lo] + b * y[hi] + ((a * a * a - a) * y2[lo] + (b * b * b - b) * y2[hi]) * h * h / 6.0;
    let d = (y[hi] - y[lo]) / h - (3.0 * a * a - 1.0) / 6.0 * h * y2[lo] + (3.0 * b * b - 1.0) / 6.0 * h * y2[hi];
    let dd = a * y2[lo] + b * y2[hi];
    (f, d, dd)
}

fn check_axis(x: &[f64], name: &str) -> Result<()> {
    if x.len() < 4 {
        return Err(Error::InvalidParameter(format!("{name} axis needs at least 4 knots")));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_axis(&x, "x")?;
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        let y2 = natural_second_derivatives(&x, &y);
        Ok(Self { x, y, y2 })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// `(f, f', f'')` at `t`; outside the knot range is a domain error.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain(format!("{t} outside table range [{lo}, {hi}]")));
        }
        Ok(eval_segment(&self.x, &self.y, &self.y2, t))
    }

    /// Reads a two-column CSV with headers `G,F`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            x.push(parse_field(&rec, 0)?);
            y.push(parse_field(&rec, 1)?);
        }
        Self::new(x, y)
    }

    /// Concave and increasing at every knot and segment midpoint.
    pub fn validate_concave_increasing(&self, tol: f64) -> Result<()> {
        for w in self.x.windows(2) {
            for t in [w[0], 0.5 * (w[0] + w[1])] {
                let (_, d, dd) = self.eval(t)?;
                if d <= 0.0 || dd > tol {
                    return Err(Error::InvalidParameter(format!(
                        "table not increasing-concave at {t}: F' = {d}, F'' = {dd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn parse_field(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    rec.get(i)
        .ok_or_else(|| Error::Parse(format!("missing column {i}")))?
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(e.to_string()))
}

/// Tensor-product natural cubic spline `S(G, M)` on a rectilinear grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicubicTable {
    g: Vec<f64>,
    m: Vec<f64>,
    /// `values[j][i] = S(g[i], m[j])`
    values: Vec<Vec<f64>>,
    row_y2: Vec<Vec<f64>>,
}

/// Value, gradient `(∂M, ∂G)` and Hessian entries `(MM, MG, GG)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEval {
    pub s: f64,
    pub s_m: f64,
    pub s_g: f64,
    pub s_mm: f64,
    pub s_mg: f64,
    pub s_gg: f64,
}

impl BicubicTable {
    pub fn new(g: Vec<f64>, m: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_axis(&g, "G")?;
        check_axis(&m, "M")?;
        if values.len() != m.len() || values.iter().any(|r| r.len() != g.len()) {
            return Err(Error::DimensionMismatch { expected: g.len() * m.len(), got: values.iter().map(Vec::len).sum() });
        }
        let row_y2 = values.iter().map(|r| natural_second_derivatives(&g, r)).collect();
        Ok(Self { g, m, values, row_y2 })
    }

    /// Builds a table by sampling `f(G, M)` on the grid.
    pub fn sample<F: FnMut(f64, f64) -> f64>(g: Vec<f64>, m: Vec<f64>, mut f: F) -> Result<Self> {
        let values = m.iter().map(|mj| g.iter().map(|gi| f(*gi, *mj)).collect()).collect();
        Self::new(g, m, values)
    }

    /// Reads long-format CSV rows `G,M,S` covering a full rectilinear grid.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push((parse_field(&rec, 0)?, parse_field(&rec, 1)?, parse_field(&rec, 2)?));
        }
        let mut g: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut m: Vec<f64> = rows.iter().map(|r| r.1).collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        m.sort_by(f64::total_cmp);
        m.dedup();
        if g.len() * m.len() != rows.len() {
            return Err(Error::Parse("table rows do not form a full rectilinear grid".into()));
        }
        let mut values = vec![vec![f64::NAN; g.len()]; m.len()];
        for (gi, mj, s) in rows {
            let i = g.partition_point(|v| *v < gi);
            let j = m.partition_point(|v| *v < mj);
            values[j][i] = s;
        }
        Self::new(g, m, values)
    }

    pub fn money_range(&self) -> (f64, f64) {
        (self.m[0], *self.m.last().unwrap())
    }

    pub fn goods_range(&self) -> (f64, f64) {
        (self.g[0], *self.g.last().unwrap())
    }

    pub fn contains(&self, g: f64, m: f64) -> bool {
        g >= self.g[0] && g <= *self.g.last().unwrap() && m >= self.m[0] && m <= *self.m.last().unwrap()
    }

    pub fn eval(&self, g: f64, m: f64) -> Result<TableEval> {
        if !self.contains(g, m) {
            return Err(Error::Domain(format!("(G, M) = ({g}, {m}) outside the tabulated grid")));
        }
        let n = self.m.len();
        let mut f = Vec::with_capacity(n);
        let mut fg = Vec::with_capacity(n);
        let mut fgg = Vec::with_capacity(n);
        for (row, y2) in self.values.iter().zip(&self.row_y2) {
            let (a, b, c) = eval_segment(&self.g, row, y2, g);
            f.push(a);
            fg.push(b);
            fgg.push(c);
        }
        let (s, s_m, s_mm) = eval_segment(&self.m, &f, &natural_second_derivatives(&self.m, &f), m);
        let (s_g, s_mg, _) = eval_segment(&self.m, &fg, &natural_second_derivatives(&self.m, &fg), m);
        let (s_gg, _, _) = eval_segment(&self.m, &fgg, &natural_second_derivatives(&self.m, &fgg), m);
        Ok(TableEval { s, s_m, s_g, s_mm, s_mg, s_gg })
    }

    /// Money-desirable and concave at every interior node and cell centre.
    /// Boundary knots carry the natural end condition (zero curvature) and
    /// are skipped.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let mut pts = Vec::new();
        for j in 0..self.m.len() - 1 {
            for i in 0..self.g.len() - 1 {
                if i > 0 && j > 0 {
                    pts.push((self.g[i], self.m[j]));
                }
                pts.push((0.5 * (self.g[i] + self.g[i + 1]), 0.5 * (self.m[j] + self.m[j + 1])));
            }
        }
        for (g, m) in pts {
            let e = self.eval(g, m)?;
            let det = e.s_mm * e.s_gg - e.s_mg * e.s_mg;
            let scale = e.s_mm.abs().max(e.s_gg.abs()).max(e.s_mg.abs()).max(1e-300);
            if e.s_m <= 0.0 || e.s_mm > tol * scale || e.s_gg > tol * scale || det < -tol * scale * scale {
                return Err(Error::InvalidParameter(format!(
                    "table fails monotone-concavity at (G, M) = ({g}, {m}): S_M = {}, S_MM = {}, S_GG = {}, det = {det}",
                    e.s_m, e.s_mm, e.s_gg
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn spline_reproduces_smooth_function() {
        let x = grid(1.0, 3.0, 81);
        let s = CubicSpline::new(x.clone(), x.iter().map(|v| v.ln()).collect()).unwrap();
        let (f, d, _) = s.eval(2.01).unwrap();
        assert!((f - 2.01f64.ln()).abs() < 1e-7);
        assert!((d - 1.0 / 2.01).abs() < 1e-5);
        assert!(s.eval(3.5).is_err());
        s.validate_concave_increasing(1e-9).unwrap();
    }

    #[test]
    fn bicubic_reproduces_cobb_douglas() {
        let t = BicubicTable::sample(grid(1.0, 3.0, 41), grid(0.5, 2.0, 41), |g, m| 2.0 * g.ln() + 3.0 * m.ln()).unwrap();
        let e = t.eval(1.7, 1.1).unwrap();
        assert!((e.s - (2.0 * 1.7f64.ln() + 3.0 * 1.1f64.ln())).abs() < 1e-6);
        assert!((e.s_m - 3.0 / 1.1).abs() < 1e-3);
        assert!((e.s_g - 2.0 / 1.7).abs() < 1e-3);
        assert!(e.s_mg.abs() < 1e-3);
        t.validate(1e-9).unwrap();
    }

    #[test]
    fn convex_table_is_rejected() {
        let t = BicubicTable::sample(grid(1.0, 3.0, 9), grid(1.0, 3.0, 9), |g, m| g * g + m).unwrap();
        assert!(matches!(t.validate(1e-9), Err(Error::InvalidParameter(_))));
    }
}
