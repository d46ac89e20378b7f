//! CSV tables and JSON reports. Every table kind has a fixed column layout,
//! listed by [`schemas`]; columns marked per-index expand to `name_0`,
//! `name_1`, … for the table's index dimension (goods, or flux coordinates).

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::analysis::{AreaReport, CurvePoint, DerivativeReport, FlexibilityMatrix, FluctuationReport, OnsagerEstimate, PriceSample, ReconstructionResult};
use crate::error::{Error, Result};
use crate::micro::engine::TrajectoryRow;
use crate::model::EntropyModel;
use crate::protocols::carnot::LegPoint;
use crate::protocols::script::ScriptOutcome;
use crate::protocols::stochastic_carnot::CarnotReplica;
use crate::state::MacroState;
use crate::thermo;
use crate::trade::EdgeworthBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Trajectory,
    LegTrace,
    EntropyGrid,
    Isentrope,
    Pareto,
    EqualTemperature,
    QuadrantGrid,
    Marginal,
    AreaCells,
    AreaCurves,
    Reconstruction,
    Relations,
    Flexibility,
    PriceGrid,
    OnsagerDesign,
    Fluctuations,
    CarnotReplicas,
    Snapshots,
    Join,
    Gains,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnSpec {
    pub name: &'static str,
    /// Expands to one column per index.
    pub indexed: bool,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableSchema {
    pub kind: TableKind,
    pub file: &'static str,
    pub description: &'static str,
    pub columns: &'static [ColumnSpec],
}

const fn col(name: &'static str, description: &'static str) -> ColumnSpec {
    ColumnSpec { name, indexed: false, description }
}

const fn per(name: &'static str, description: &'static str) -> ColumnSpec {
    ColumnSpec { name, indexed: true, description }
}

static SCHEMAS: &[TableSchema] = &[
    TableSchema {
        kind: TableKind::Trajectory,
        file: "trajectory.csv",
        description: "macro state of each economy along a simulation",
        columns: &[
            col("step", "pair encounters so far"),
            col("economy", "economy index"),
            col("M", "money"),
            per("G", "goods"),
            col("T_oracle", "oracle temperature at the macro state"),
            col("S_oracle", "oracle entropy at the macro state"),
            per("price", "empirical price sum(m)/sum(g) weighted by alpha/eta"),
        ],
    },
    TableSchema {
        kind: TableKind::LegTrace,
        file: "leg_trace.csv",
        description: "boat state after every step of a Carnot cycle",
        columns: &[
            col("cycle", "cycle index"),
            col("leg", "0 hot isotherm, 1 expansion, 2 cold isotherm, 3 compression"),
            col("G_boat", "boat goods"),
            col("M_boat", "boat money"),
            col("T", "boat temperature"),
            col("S", "boat entropy"),
            col("mu", "boat market price"),
            col("trader_money", "trader balance"),
        ],
    },
    TableSchema {
        kind: TableKind::EntropyGrid,
        file: "entropy_grid.csv",
        description: "oracle quantities on a (G, M) grid of a single-good economy",
        columns: &[col("G", "goods"), col("M", "money"), col("S", "entropy"), col("T", "temperature"), col("mu", "market price")],
    },
    TableSchema {
        kind: TableKind::Isentrope,
        file: "isentropes.csv",
        description: "isentropes through the initial endowment in Edgeworth-box coordinates of economy 1",
        columns: &[col("economy", "whose entropy is held"), col("M_1", "money of economy 1"), col("G_1", "goods of economy 1"), col("S", "held entropy")],
    },
    TableSchema {
        kind: TableKind::Pareto,
        file: "pareto.csv",
        description: "equal-price curve with the MB segment flagged",
        columns: &[
            col("M_1", "money of economy 1"),
            col("G_1", "goods of economy 1"),
            col("mu", "common price"),
            col("T_1", "temperature of economy 1"),
            col("T_2", "temperature of economy 2"),
            col("S_total", "total entropy"),
            col("price_gap", "relative price mismatch"),
            col("mb", "1 when no economy is worse off than at the endowment"),
        ],
    },
    TableSchema {
        kind: TableKind::EqualTemperature,
        file: "equal_temperature.csv",
        description: "line of equal temperatures in the Edgeworth box",
        columns: &[col("M_1", "money of economy 1"), col("G_1", "goods of economy 1"), col("T", "common temperature")],
    },
    TableSchema {
        kind: TableKind::QuadrantGrid,
        file: "quadrants.csv",
        description: "sign quadrant of (T_2 - T_1, mu_2 - mu_1) over the Edgeworth box",
        columns: &[col("M_1", "money of economy 1"), col("G_1", "goods of economy 1"), col("quadrant", "quadrant label")],
    },
    TableSchema {
        kind: TableKind::Marginal,
        file: "marginal.csv",
        description: "histogram of one agent's money share against its Beta law",
        columns: &[
            col("bin_lo", "bin lower edge"),
            col("bin_hi", "bin upper edge"),
            col("empirical_density", "sample density"),
            col("reference_density", "Beta density averaged over the bin"),
        ],
    },
    TableSchema {
        kind: TableKind::AreaCells,
        file: "area_cells.csv",
        description: "loop integrals around isotherm/isentrope cells",
        columns: &[
            col("ti", "lower temperature index"),
            col("sj", "lower entropy index"),
            col("T_low", "lower temperature"),
            col("T_high", "upper temperature"),
            col("S_low", "lower entropy"),
            col("S_high", "upper entropy"),
            col("loop_integral", "closed integral of mu dG"),
            col("rectangle", "dT dS"),
            col("residual", "absolute difference"),
        ],
    },
    TableSchema {
        kind: TableKind::AreaCurves,
        file: "area_curves.csv",
        description: "grid isotherms and isentropes in the (G, mu) plane",
        columns: &[col("curve", "isotherm or isentrope"), col("level", "temperature or entropy"), col("G", "goods"), col("M", "money"), col("mu", "market price")],
    },
    TableSchema {
        kind: TableKind::Reconstruction,
        file: "reconstruction.csv",
        description: "entropy reconstructed from prices, with the affine fit",
        columns: &[
            col("G", "goods"),
            col("M", "money"),
            col("S_hat", "reconstructed entropy (0 and 1 at the reference endpoints)"),
            col("M_at_reference", "money where the isentrope meets the reference goods"),
            col("S_fit", "affine map of S_hat onto the comparison entropy"),
        ],
    },
    TableSchema {
        kind: TableKind::Relations,
        file: "relations.csv",
        description: "derivative relations with their numeric margins",
        columns: &[
            col("state", "state index"),
            col("relation", "relation name"),
            col("comparison", "equal or at-most"),
            col("good", "good or probe index, -1 when not applicable"),
            col("lhs", "left side"),
            col("rhs", "right side"),
            col("margin", "rhs - lhs, or -|lhs - rhs| for equalities"),
            col("tolerance", "allowed negative margin"),
            col("passed", "1 or 0"),
        ],
    },
    TableSchema {
        kind: TableKind::Flexibility,
        file: "flexibility.csv",
        description: "compensated price responses and their closed-form counterparts",
        columns: &[
            col("i", "price index"),
            col("j", "goods index"),
            col("value", "finite-difference estimate"),
            col("error", "Richardson error estimate"),
            col("formula", "Hessian-based value"),
        ],
    },
    TableSchema {
        kind: TableKind::PriceGrid,
        file: "price_grid.csv",
        description: "simulation-measured market prices",
        columns: &[col("G", "goods"), col("M", "money"), col("price", "no-flow price"), col("se", "standard error")],
    },
    TableSchema {
        kind: TableKind::OnsagerDesign,
        file: "onsager_design.csv",
        description: "forces and fluxes of every Onsager design run",
        columns: &[
            col("point", "design point"),
            col("replicate", "replicate"),
            per("perturbation", "relative perturbation per coordinate"),
            per("force", "value difference per coordinate"),
            per("flux", "flux per sweep per coordinate"),
        ],
    },
    TableSchema {
        kind: TableKind::Fluctuations,
        file: "fluctuations.csv",
        description: "ship fluctuations against the capacity formulas",
        columns: &[
            col("ship_agents", "ship size"),
            col("T", "joint temperature"),
            col("C", "ship money capacity"),
            col("money_ratio", "Var M / (C T^2)"),
            col("money_se", "standard error"),
            col("thermometer_ratio", "Var T_m / T^2"),
            col("thermometer_se", "standard error"),
            col("thermometer_expected", "1 / (eta N)"),
            col("price_ratio", "Var mu over its conditional prediction"),
            col("price_se", "standard error"),
        ],
    },
    TableSchema {
        kind: TableKind::CarnotReplicas,
        file: "carnot_replicas.csv",
        description: "per-replica results of the agent-level Carnot engine",
        columns: &[
            col("replica", "replica index"),
            col("seed", "replica seed"),
            col("efficiency", "profit / money from hot"),
            col("money_from_hot", "money taken from the hot mainland"),
            col("money_to_cold", "money given to the cold mainland"),
            col("trader_profit", "trader profit"),
            col("T_hot_final", "hot mainland temperature at the end"),
            col("T_cold_final", "cold mainland temperature at the end"),
        ],
    },
    TableSchema {
        kind: TableKind::Snapshots,
        file: "snapshots.csv",
        description: "protocol-script snapshots per economy",
        columns: &[
            col("snapshot", "snapshot index"),
            col("label", "snapshot label"),
            col("economy", "economy index"),
            col("M", "money"),
            per("G", "goods"),
            col("S", "economy entropy"),
            col("S_total", "total entropy"),
            col("sigma", "standard error of total entropy"),
            col("trader_money", "trader balance"),
        ],
    },
    TableSchema {
        kind: TableKind::Join,
        file: "join.csv",
        description: "financial join: money per economy",
        columns: &[col("economy", "economy index"), col("M_analytic", "equilibrium money"), col("M_mean", "simulated mean money"), col("M_se", "standard error")],
    },
    TableSchema {
        kind: TableKind::Gains,
        file: "gains.csv",
        description: "gains of trade by route",
        columns: &[col("route", "closed-form, optimizer or protocol"), col("profit", "money extracted"), col("T", "final temperature"), per("price", "final prices")],
    },
];

pub fn schemas() -> &'static [TableSchema] {
    SCHEMAS
}

pub fn schema(kind: TableKind) -> &'static TableSchema {
    SCHEMAS.iter().find(|s| s.kind == kind).expect("every kind has a schema")
}

impl TableSchema {
    pub fn header(&self, dim: usize) -> Vec<String> {
        let mut h = Vec::new();
        for c in self.columns {
            if c.indexed {
                h.extend((0..dim).map(|i| format!("{}_{i}", c.name)));
            } else {
                h.push(c.name.to_string());
            }
        }
        h
    }

    fn width(&self, dim: usize) -> usize {
        self.columns.iter().map(|c| if c.indexed { dim } else { 1 }).sum()
    }

    /// Checks a CSV header against the layout and returns the index
    /// dimension it implies.
    pub fn validate_header(&self, header: &[String]) -> Result<usize> {
        let indexed = self.columns.iter().filter(|c| c.indexed).count();
        let fixed = self.columns.len() - indexed;
        let dim = if indexed == 0 {
            0
        } else if header.len() >= fixed && (header.len() - fixed) % indexed == 0 {
            (header.len() - fixed) / indexed
        } else {
            return Err(Error::Parse(format!("{}: {} columns do not fit the layout", self.file, header.len())));
        };
        let expected = self.header(dim);
        if let Some((want, got)) = expected.iter().zip(header).find(|(a, b)| a != b) {
            return Err(Error::Parse(format!("{}: expected column {want}, found {got}", self.file)));
        }
        if expected.len() != header.len() {
            return Err(Error::Parse(format!("{}: expected {} columns, found {}", self.file, expected.len(), header.len())));
        }
        Ok(dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // Shortest round-trip representation: deterministic per platform.
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: TableKind,
    pub dim: usize,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(kind: TableKind, dim: usize) -> Self {
        Self { kind, dim, rows: Vec::new() }
    }

    pub fn schema(&self) -> &'static TableSchema {
        schema(self.kind)
    }

    pub fn file_name(&self) -> &'static str {
        self.schema().file
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        let w = self.schema().width(self.dim);
        if row.len() != w {
            return Err(Error::DimensionMismatch { expected: w, got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.schema().header(self.dim))?;
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Reads a CSV written by [`Table::write_csv`], validating its header.
pub fn read_table(kind: TableKind, path: &Path) -> Result<(usize, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let dim = schema(kind).validate_header(&header)?;
    let rows = r.records().map(|rec| rec.map(|x| x.iter().map(str::to_string).collect())).collect::<std::result::Result<_, _>>()?;
    Ok((dim, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn trajectory_table(rows: &[TrajectoryRow]) -> Result<Table> {
    let k = rows.first().map(|r| r.goods.len()).unwrap_or(0);
    let mut t = Table::new(TableKind::Trajectory, k);
    for r in rows {
        let mut row: Vec<Cell> = vec![r.step.into(), r.economy.into(), r.money.into()];
        row.extend(r.goods.iter().map(|&g| Cell::from(g)));
        row.push(r.t_oracle.into());
        row.push(r.s_oracle.into());
        row.extend(r.empirical_price.iter().map(|&p| Cell::from(p)));
        t.push(row)?;
    }
    Ok(t)
}

pub fn leg_trace_table(points: &[LegPoint]) -> Result<Table> {
    let mut t = Table::new(TableKind::LegTrace, 0);
    for p in points {
        t.push(vec![p.cycle.into(), p.leg.into(), p.g_boat.into(), p.m_boat.into(), p.t.into(), p.s.into(), p.mu.into(), p.trader_money.into()])?;
    }
    Ok(t)
}

pub fn area_cells_table(report: &AreaReport) -> Result<Table> {
    let mut t = Table::new(TableKind::AreaCells, 0);
    for c in &report.cells {
        t.push(vec![
            c.ti.into(),
            c.sj.into(),
            report.temperatures[c.ti].into(),
            report.temperatures[c.ti + 1].into(),
            report.entropies[c.sj].into(),
            report.entropies[c.sj + 1].into(),
            c.loop_integral.into(),
            c.rectangle.into(),
            c.residual.into(),
        ])?;
    }
    Ok(t)
}

/// `s_fit` maps `Ŝ` to the comparison entropy; NaN without a fit.
pub fn reconstruction_table(r: &ReconstructionResult) -> Result<Table> {
    let mut t = Table::new(TableKind::Reconstruction, 0);
    for (i, g) in r.goods.iter().enumerate() {
        for (j, m) in r.money.iter().enumerate() {
            let s = r.s_hat[i][j];
            let fit = r.fit.as_ref().map(|f| f.a * s + f.b).unwrap_or(f64::NAN);
            t.push(vec![(*g).into(), (*m).into(), s.into(), r.money_at_reference[i][j].into(), fit.into()])?;
        }
    }
    Ok(t)
}

pub fn relations_table(report: &DerivativeReport) -> Result<Table> {
    let mut t = Table::new(TableKind::Relations, 0);
    for r in &report.records {
        t.push(vec![
            r.state.into(),
            label(&r.relation).into(),
            label(&r.comparison).into(),
            r.good.map(|g| g as i64).unwrap_or(-1).into(),
            r.lhs.into(),
            r.rhs.into(),
            r.margin.into(),
            r.tolerance.into(),
            r.passed.into(),
        ])?;
    }
    Ok(t)
}

pub fn flexibility_table(flex: &FlexibilityMatrix) -> Result<Table> {
    let mut t = Table::new(TableKind::Flexibility, 0);
    for (i, row) in flex.matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t.push(vec![i.into(), j.into(), (*v).into(), flex.errors[i][j].into(), flex.formula[i][j].into()])?;
        }
    }
    Ok(t)
}

pub fn price_grid_table(samples: &[PriceSample]) -> Result<Table> {
    let mut t = Table::new(TableKind::PriceGrid, 0);
    for s in samples {
        t.push(vec![s.goods.into(), s.money.into(), s.price.into(), s.se.into()])?;
    }
    Ok(t)
}

pub fn onsager_table(est: &OnsagerEstimate) -> Result<Table> {
    let k = est.coordinates.len();
    let mut t = Table::new(TableKind::OnsagerDesign, k);
    for (p, d) in est.design.iter().enumerate() {
        for (r, (x, j)) in d.forces.iter().zip(&d.fluxes).enumerate() {
            let mut row: Vec<Cell> = vec![p.into(), r.into()];
            row.extend(d.perturbation.iter().map(|&v| Cell::from(v)));
            row.extend(x.iter().map(|&v| Cell::from(v)));
            row.extend(j.iter().map(|&v| Cell::from(v)));
            t.push(row)?;
        }
    }
    Ok(t)
}

pub fn fluctuation_table(report: &FluctuationReport) -> Result<Table> {
    let mut t = Table::new(TableKind::Fluctuations, 0);
    for s in &report.ships {
        t.push(vec![
            s.ship_agents.into(),
            s.temperature.into(),
            s.capacity.into(),
            s.money.value.into(),
            s.money.se.into(),
            s.thermometer.value.into(),
            s.thermometer.se.into(),
            s.thermometer_expected.into(),
            s.price_conditional.value.into(),
            s.price_conditional.se.into(),
        ])?;
    }
    Ok(t)
}

pub fn carnot_replicas_table(replicas: &[CarnotReplica]) -> Result<Table> {
    let mut t = Table::new(TableKind::CarnotReplicas, 0);
    for (i, r) in replicas.iter().enumerate() {
        t.push(vec![
            i.into(),
            r.seed.into(),
            r.efficiency.into(),
            r.money_from_hot.into(),
            r.money_to_cold.into(),
            r.trader_profit.into(),
            r.final_t_hot.into(),
            r.final_t_cold.into(),
        ])?;
    }
    Ok(t)
}

pub fn snapshots_table(out: &ScriptOutcome) -> Result<Table> {
    let k = out.snapshots.first().map(|s| s.trader_goods.len()).unwrap_or(0);
    let mut t = Table::new(TableKind::Snapshots, k);
    for (i, s) in out.snapshots.iter().enumerate() {
        for (e, st) in s.states.iter().enumerate() {
            let mut row: Vec<Cell> = vec![i.into(), s.label.as_str().into(), e.into(), st.money.into()];
            row.extend(st.goods.amounts.iter().map(|&g| Cell::from(g)));
            row.extend([s.entropies[e].into(), s.total_entropy.into(), s.sigma.into(), s.trader_money.into()]);
            t.push(row)?;
        }
    }
    Ok(t)
}

pub fn area_curves_table(points: &[CurvePoint]) -> Result<Table> {
    let mut t = Table::new(TableKind::AreaCurves, 0);
    for p in points {
        let curve = if p.isotherm { "isotherm" } else { "isentrope" };
        t.push(vec![curve.into(), p.level.into(), p.goods.into(), p.money.into(), p.price.into()])?;
    }
    Ok(t)
}

/// Oracle entropy, temperature and price of a single-good model on the
/// grid `goods × money`.
pub fn entropy_grid_table(model: &EntropyModel, goods: &[f64], money: &[f64]) -> Result<Table> {
    let mut t = Table::new(TableKind::EntropyGrid, 0);
    for &g in goods {
        for &m in money {
            let st = MacroState::new(m, &[g])?;
            t.push(vec![g.into(), m.into(), model.entropy(&st)?.into(), thermo::temperature(model, &st)?.into(), thermo::price(model, &st, 0)?.into()])?;
        }
    }
    Ok(t)
}

/// Histogram of `samples` on `bins` equal bins of `[0, hi]` against the
/// Beta(`a`, `b`) law, whose density is averaged over each bin via its CDF.
pub fn marginal_table(samples: &[f64], bins: usize, hi: f64, a: f64, b: f64) -> Result<Table> {
    let law = Beta::new(a, b).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let w = hi / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if x >= 0.0 && x < hi {
            counts[((x / w) as usize).min(bins - 1)] += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    let mut t = Table::new(TableKind::Marginal, 0);
    for (k, c) in counts.iter().enumerate() {
        let (lo, up) = (k as f64 * w, (k + 1) as f64 * w);
        t.push(vec![lo.into(), up.into(), (*c as f64 / (n * w)).into(), ((law.cdf(up) - law.cdf(lo)) / w).into()])?;
    }
    Ok(t)
}

pub fn edgeworth_tables(b: &EdgeworthBox) -> Result<Vec<Table>> {
    let mut iso = Table::new(TableKind::Isentrope, 0);
    for p in &b.isentropes {
        iso.push(vec![(p.economy + 1).into(), p.m1.into(), p.g1.into(), p.entropy.into()])?;
    }
    let mut par = Table::new(TableKind::Pareto, 0);
    for p in &b.pareto {
        par.push(vec![p.m1.into(), p.g1.into(), p.price.into(), p.t1.into(), p.t2.into(), p.total_entropy.into(), p.price_gap.into(), p.mb.into()])?;
    }
    let mut eq = Table::new(TableKind::EqualTemperature, 0);
    for p in &b.equal_temperature {
        eq.push(vec![p.m1.into(), p.g1.into(), p.temperature.into()])?;
    }
    let mut quad = Table::new(TableKind::QuadrantGrid, 0);
    for p in &b.quadrants {
        quad.push(vec![p.m1.into(), p.g1.into(), label(&p.quadrant).into()])?;
    }
    Ok(vec![iso, par, eq, quad])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_expand_indexed_columns() {
        let h = schema(TableKind::Trajectory).header(2);
        assert_eq!(h, ["step", "economy", "M", "G_0", "G_1", "T_oracle", "S_oracle", "price_0", "price_1"]);
        assert_eq!(schema(TableKind::Trajectory).validate_header(&h).unwrap(), 2);
    }

    #[test]
    fn header_validation_names_the_mismatch() {
        let mut h = schema(TableKind::LegTrace).header(0);
        h[2] = "G".into();
        let err = schema(TableKind::LegTrace).validate_header(&h).unwrap_err();
        assert!(err.to_string().contains("G_boat"), "{err}");
    }

    #[test]
    fn rows_must_fit_the_layout() {
        let mut t = Table::new(TableKind::PriceGrid, 0);
        assert!(t.push(vec![1.0.into(), 2.0.into()]).is_err());
        t.push(vec![1.0.into(), 2.0.into(), 0.5.into(), 0.01.into()]).unwrap();
        assert_eq!(t.to_csv_string().unwrap(), "G,M,price,se\n1,2,0.5,0.01\n");
    }

    #[test]
    fn every_kind_has_one_schema_and_a_distinct_file() {
        let mut files: Vec<_> = schemas().iter().map(|s| s.file).collect();
        files.sort();
        files.dedup();
        assert_eq!(files.len(), schemas().len());
    }

    #[test]
    fn tables_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(TableKind::Gains, 1);
        t.push(vec!["closed-form".into(), 1.0.into(), 0.2.into(), 0.1.into()]).unwrap();
        t.write_csv(&p).unwrap();
        let (dim, rows) = read_table(TableKind::Gains, &p).unwrap();
        assert_eq!(dim, 1);
        assert_eq!(rows[0][0], "closed-form");
        assert!(read_table(TableKind::Join, &p).is_err());
    }
}
