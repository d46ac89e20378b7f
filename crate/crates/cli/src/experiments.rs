//! Dispatch from a scenario to the library, collecting tables and metrics.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ContinuousCDF};
use thermacro::analysis::{
    derivative_relations_report, estimate_onsager, flexibility_matrix, fluctuation_report, measure_price_grid, reconstruct_entropy,
    FluctuationConfig, OnsagerConfig, PriceSurface, ProbeSettings, ReconstructOptions, Reference,
};
use thermacro::diff::DiffToolkit;
use thermacro::io::{self, Table, TableKind};
use thermacro::micro::{EncounterGraph, Engine, Population};
use thermacro::model::EntropyModel;
use thermacro::protocols::carnot::{carnot_cycle, CarnotConfig, Mainland};
use thermacro::protocols::join::{stochastic_join, StochasticJoinConfig};
use thermacro::protocols::price::{find_market_price, PriceSearchConfig};
use thermacro::protocols::script::{run_script_analytic, run_script_stochastic, ProtocolScript, ScriptOutcome, StochasticScriptOptions};
use thermacro::protocols::stochastic_carnot::{stochastic_carnot, StochasticCarnotConfig};
use thermacro::protocols::thermometer::{ship_thermometer, ship_thermometer_stochastic, Readout, ShipConfig};
use thermacro::protocols::{join_all, Economy};
use thermacro::state::MacroState;
use thermacro::stats::ks_distance;
use thermacro::thermo;
use thermacro::trade::{edgeworth_box, gains_by_protocol, gains_closed_form, gains_of_trade, Allocation};

use crate::config::{Experiment, Mode, ScenarioConfig};

/// Everything an experiment produces besides the run record itself.
#[derive(Default)]
pub struct Output {
    /// Tables keyed by file name.
    pub tables: Vec<(String, Table)>,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    /// Number of replica seeds drawn from the master seed.
    pub replicas: u64,
}

impl Output {
    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    fn table(&mut self, t: Table) {
        self.tables.push((t.file_name().to_string(), t));
    }

    fn named_table(&mut self, name: String, t: Table) {
        self.tables.push((name, t));
    }
}

/// Runs the configured experiment; relative table paths in model specs
/// resolve against `base`.
pub fn run(cfg: &ScenarioConfig, base: &Path) -> Result<Output> {
    let mut out = Output::default();
    match &cfg.experiment {
        Experiment::Stationary { economy, bins } => stationary(cfg, *economy, *bins, &mut out)?,
        Experiment::PriceSearch { economy, good, probes_per_sweep, lo, hi, rel_tol } => {
            let econ = cfg.economy(*economy, base)?;
            let oracle = econ.price(*good)?;
            out.metric("oracle_price", oracle);
            match cfg.mode {
                Mode::Analytic => out.metric("price", oracle),
                Mode::Stochastic => {
                    let agents = cfg.agents(*economy)?;
                    let pc = PriceSearchConfig {
                        seed: cfg.seed,
                        sweeps: cfg.sim.sweeps,
                        probes_per_sweep: probes_per_sweep.unwrap_or(agents.params.n_agents as u64),
                        burn_in: cfg.sim.burn_in.clone(),
                        lo: lo.unwrap_or(oracle / 100.0),
                        hi: hi.unwrap_or(oracle * 100.0),
                        rel_tol: *rel_tol,
                    };
                    let est = find_market_price(&agents, *good, &pc)?;
                    out.metric("price", est.price);
                    out.metric("price_se", est.se);
                    out.metric("rel_error", (est.price - oracle).abs() / oracle);
                }
            }
        }
        Experiment::Join {} => join(cfg, base, &mut out)?,
        Experiment::Thermometer { mainland, ship, price_good } => {
            let readout = price_good.map_or(Readout::Money, |good| Readout::Price { good });
            let reading = match cfg.mode {
                Mode::Analytic => ship_thermometer(&cfg.economy(*mainland, base)?, &cfg.economy(*ship, base)?, readout)?,
                Mode::Stochastic => {
                    let sc = ShipConfig {
                        mainland: cfg.agents(*mainland)?,
                        ship: cfg.agents(*ship)?,
                        readout,
                        cross_rate: cfg.sim.cross_rate,
                        sweeps: cfg.sim.sweeps,
                        seed: cfg.seed,
                        burn_in: cfg.sim.burn_in.clone(),
                    };
                    let series = ship_thermometer_stochastic(&sc)?;
                    out.metric("joint_temperature", series.t_joint);
                    series.reading
                }
            };
            out.metric("temperature", reading.temperature);
            out.metric("temperature_se", reading.se);
            out.metric("mainland_before", reading.mainland_before);
            out.metric("mainland_after", reading.mainland_after);
            out.metric("perturbation", reading.perturbation);
            out.warnings.extend(reading.warnings);
        }
        Experiment::Carnot { .. } => carnot(cfg, base, &mut out)?,
        Experiment::Edgeworth { n_points, grid } => {
            let (a, b) = (cfg.economy(0, base)?, cfg.economy(1, base)?);
            let alloc = Allocation::new(vec![a.state.clone(), b.state.clone()])?;
            let eb = edgeworth_box([&a.model, &b.model], &alloc, *n_points, *grid)?;
            for t in io::edgeworth_tables(&eb)? {
                out.table(t);
            }
            let goods: Vec<f64> = (1..=*n_points).map(|k| eb.goods_total * k as f64 / (*n_points + 1) as f64).collect();
            let money: Vec<f64> = (1..=*n_points).map(|k| eb.money_total * k as f64 / (*n_points + 1) as f64).collect();
            for (i, e) in [&a, &b].iter().enumerate() {
                out.named_table(format!("entropy_grid_{i}.csv"), io::entropy_grid_table(&e.model, &goods, &money)?);
            }
            out.metric("pareto_points", eb.pareto.len() as f64);
            out.metric("mb_points", eb.pareto.iter().filter(|p| p.mb).count() as f64);
            if let Some(p) = eb.equal_temperature.first() {
                out.metric("equal_temperature_money", p.m1);
            }
        }
        Experiment::Gains { rel_tol, max_rounds } => gains(cfg, base, *rel_tol, *max_rounds, &mut out)?,
        Experiment::Derivatives { economy, states, probes, spread } => {
            ensure!(*spread >= 0.0 && *spread < 1.0, "spread must lie in [0, 1)");
            let econ = cfg.economy(*economy, base)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut jitter = |x: f64| x * rng.random_range(1.0 - spread..=1.0 + spread);
            let sample: Vec<MacroState> = (0..*states)
                .map(|_| {
                    let goods: Vec<f64> = econ.state.goods.amounts.iter().map(|g| jitter(*g)).collect();
                    MacroState::new(jitter(econ.state.money), &goods)
                })
                .collect::<std::result::Result<_, _>>()?;
            let tk = DiffToolkit::default();
            let report = derivative_relations_report(&econ.model, &sample, ProbeSettings { probes: *probes, seed: cfg.seed }, &tk)?;
            let failures = report.records.iter().filter(|r| !r.passed).count();
            out.metric("relations", report.records.len() as f64);
            out.metric("failed_relations", failures as f64);
            out.table(io::relations_table(&report)?);
            let flex = flexibility_matrix(&econ.model, &econ.state, &tk)?;
            out.metric("symmetry_residual", flex.symmetry_residual);
            out.metric("max_eigenvalue", flex.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            out.table(io::flexibility_table(&flex)?);
        }
        Experiment::Reconstruct { economy, goods, money, points, reference_goods, reference_money, price_points } => {
            let econ = cfg.economy(*economy, base)?;
            ensure!(econ.state.dim() == 1, "reconstruction needs a single-good economy");
            ensure!(*points >= 2 && *price_points >= 2, "grids need at least two points per axis");
            let axis = |r: &[f64; 2], n: usize| -> Vec<f64> { (0..n).map(|i| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64).collect() };
            let (gg, mm) = (axis(goods, *points), axis(money, *points));
            let reference = Reference { goods: *reference_goods, money_low: reference_money[0], money_high: reference_money[1] };
            let opts = ReconstructOptions::default();
            let model = econ.model.clone();
            let exact = |g: f64, m: f64| model.entropy(&MacroState::new(m, &[g]).expect("grid point")).unwrap_or(f64::NAN);
            let mut res = match cfg.mode {
                Mode::Analytic => {
                    let oracle = |g: f64, m: f64| -> thermacro::error::Result<f64> { thermo::price(&econ.model, &MacroState::new(m, &[g])?, 0) };
                    reconstruct_entropy(&oracle, reference, &gg, &mm, &opts)?
                }
                Mode::Stochastic => {
                    let agents = cfg.agents(*economy)?;
                    let pc = PriceSearchConfig {
                        seed: cfg.seed,
                        sweeps: cfg.sim.sweeps,
                        probes_per_sweep: agents.params.n_agents as u64,
                        burn_in: cfg.sim.burn_in.clone(),
                        lo: 1e-3,
                        hi: 1e3,
                        rel_tol: 1e-10,
                    };
                    let samples = measure_price_grid(&agents.params, &axis(goods, *price_points), &axis(money, *price_points), &pc)?;
                    out.table(io::price_grid_table(&samples)?);
                    let surface = PriceSurface::fit(&samples)?;
                    reconstruct_entropy(&surface, reference, &gg, &mm, &opts)?
                }
            };
            let fit = res.fit_to(exact)?;
            out.metric("max_rel_deviation", fit.max_rel_deviation);
            out.metric("fit_scale", fit.a);
            out.metric("fit_offset", fit.b);
            out.table(io::reconstruction_table(&res)?);
        }
        Experiment::Onsager { a, b, channel, rel_perturbation, window_sweeps } => {
            let oc = OnsagerConfig {
                a: cfg.agents(*a)?,
                b: cfg.agents(*b)?,
                channel: *channel,
                rel_perturbation: *rel_perturbation,
                replicates: cfg.replicas.unwrap_or(5) as usize,
                cross_rate: cfg.sim.cross_rate,
                window_sweeps: *window_sweeps,
                seed: cfg.seed,
            };
            let est = estimate_onsager(&oc)?;
            for (r, row) in est.l.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    out.metric(&format!("L_{}_{}", est.coordinates[r], est.coordinates[c]), *v);
                }
            }
            out.metric("min_eigenvalue", est.min_eigenvalue);
            out.metric("min_eigenvalue_se", est.min_eigenvalue_se);
            out.metric("sigma", est.sigma);
            out.metric("sigma_se", est.sigma_se);
            out.metric("asymmetry", est.asymmetry);
            out.warnings.extend(est.warnings.iter().cloned());
            out.replicas = oc.replicates as u64;
            out.table(io::onsager_table(&est)?);
        }
        Experiment::Fluctuations { mainland, ship, ship_sizes } => {
            let fc = FluctuationConfig {
                mainland: cfg.agents(*mainland)?,
                ship: cfg.agents(*ship)?,
                ship_sizes: ship_sizes.clone(),
                cross_rate: cfg.sim.cross_rate,
                sweeps: cfg.sim.sweeps,
                seed: cfg.seed,
                burn_in: cfg.sim.burn_in.clone(),
            };
            let rep = fluctuation_report(&fc)?;
            for s in &rep.ships {
                out.metric(&format!("money_ratio_{}", s.ship_agents), s.money.value);
                out.metric(&format!("thermometer_ratio_{}", s.ship_agents), s.thermometer.value);
                out.warnings.extend(s.warnings.iter().cloned());
            }
            for (k, h) in rep.halving_ratios.iter().enumerate() {
                out.metric(&format!("halving_{k}"), h.value);
            }
            out.replicas = ship_sizes.len() as u64;
            out.table(io::fluctuation_table(&rep)?);
        }
        Experiment::Script { steps, snapshot_window, leg_sweeps } => {
            let script = ProtocolScript { steps: steps.clone() };
            let outcome: ScriptOutcome = match cfg.mode {
                Mode::Analytic => run_script_analytic(&economies(cfg, base)?, &script)?,
                Mode::Stochastic => {
                    let agents = (0..cfg.economies.len()).map(|i| cfg.agents(i)).collect::<Result<Vec<_>>>()?;
                    let opts = StochasticScriptOptions {
                        seed: cfg.seed,
                        default_sweeps: cfg.sim.sweeps,
                        snapshot_window: *snapshot_window,
                        leg_sweeps: *leg_sweeps,
                    };
                    run_script_stochastic(&agents, &script, &opts)?
                }
            };
            out.metric("snapshots", outcome.snapshots.len() as f64);
            out.metric("violations", outcome.audit.violations.len() as f64);
            out.metric("worst_margin", outcome.audit.worst_margin);
            out.table(io::snapshots_table(&outcome)?);
        }
    }
    Ok(out)
}

fn economies(cfg: &ScenarioConfig, base: &Path) -> Result<Vec<Economy>> {
    (0..cfg.economies.len()).map(|i| cfg.economy(i, base)).collect()
}

fn stationary(cfg: &ScenarioConfig, economy: usize, bins: usize, out: &mut Output) -> Result<()> {
    let agents = cfg.agents(economy)?;
    ensure!(agents.params.agent_alpha.is_none() && agents.params.agent_eta.is_none(), "the Beta marginal needs homogeneous agents");
    let mut pop = Population::new(agents.state.dim());
    for i in 0..cfg.economies.len() {
        let e = cfg.agents(i)?;
        pop.add_economy(&e.params, e.state.money, &e.state.goods.amounts)?;
    }
    let graph = EncounterGraph::complete_within_each(&pop, 1.0)?;
    let mut engine = Engine::new(pop, graph, cfg.seed)?;
    let report = engine.burn_in(&cfg.sim.burn_in);
    if !report.converged {
        out.warnings.push(format!("burn-in stopped after {} sweeps without converging", report.sweeps));
    }
    let mut shares = Vec::new();
    let mut trajectory = Vec::new();
    let range = engine.pop.agents(economy);
    engine.run(cfg.sim.sweeps, cfg.sim.thin, |e| {
        let m = e.pop.money_total(economy);
        shares.extend(e.pop.m[range.clone()].iter().map(|x| x / m));
        trajectory.extend(e.trajectory_rows());
    });
    ensure!(!shares.is_empty(), "no samples: sweeps must be at least thin");
    let n = agents.params.n_agents as f64;
    let (a, b) = (agents.params.eta, (n - 1.0) * agents.params.eta);
    let law = Beta::new(a, b).context("Beta marginal")?;
    let k = shares.len() as f64;
    let mean = shares.iter().sum::<f64>() / k;
    let var = shares.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    // Histogram up to ten standard deviations above the mean share.
    let hi = (a / (a + b) + 10.0 * (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt()).min(1.0);
    out.table(io::marginal_table(&shares, bins, hi, a, b)?);
    out.table(io::trajectory_table(&trajectory)?);
    out.metric("ks", ks_distance(&mut shares, |x| law.cdf(x)));
    out.metric("share_mean", mean);
    out.metric("share_variance", var);
    out.metric("beta_mean", a / (a + b));
    out.metric("beta_variance", a * b / ((a + b) * (a + b) * (a + b + 1.0)));
    out.metric("burn_in_sweeps", report.sweeps as f64);
    Ok(())
}

fn join(cfg: &ScenarioConfig, base: &Path, out: &mut Output) -> Result<()> {
    let econs = economies(cfg, base)?;
    ensure!(econs.len() >= 2, "join needs at least two economies");
    let analytic = join_all(&econs)?;
    out.metric("temperature", analytic.temperature);
    out.metric("entropy_gain", analytic.entropy_after - analytic.entropy_before);
    let mut t = Table::new(TableKind::Join, 0);
    match cfg.mode {
        Mode::Analytic => {
            for (i, e) in analytic.economies.iter().enumerate() {
                t.push(vec![i.into(), e.state.money.into(), e.state.money.into(), 0.0.into()])?;
                out.metric(&format!("money_{i}"), e.state.money);
            }
        }
        Mode::Stochastic => {
            let agents = (0..econs.len()).map(|i| cfg.agents(i)).collect::<Result<Vec<_>>>()?;
            let jc = StochasticJoinConfig { seed: cfg.seed, sweeps: cfg.sim.sweeps, cross_rate: cfg.sim.cross_rate, burn_in: cfg.sim.burn_in.clone() };
            let sim = stochastic_join(&agents, &jc)?;
            for (i, (s, e)) in sim.money.iter().zip(&analytic.economies).enumerate() {
                t.push(vec![i.into(), e.state.money.into(), s.mean.into(), s.se.into()])?;
                out.metric(&format!("money_{i}"), s.mean);
                out.metric(&format!("money_{i}_rel_error"), (s.mean - e.state.money).abs() / e.state.money);
            }
            out.metric("burn_in_sweeps", sim.burn_in_sweeps as f64);
        }
    }
    out.table(t);
    Ok(())
}

fn carnot(cfg: &ScenarioConfig, base: &Path, out: &mut Output) -> Result<()> {
    let Experiment::Carnot {
        hot,
        cold,
        hot_temperature,
        cold_temperature,
        boat,
        good,
        goods_ratio,
        n_steps,
        cycles,
        direction,
        sweeps_per_step,
        trades_per_sweep,
    } = &cfg.experiment
    else {
        unreachable!("dispatched on the carnot experiment")
    };
    match cfg.mode {
        Mode::Analytic => {
            let side = |index: &Option<usize>, t: &Option<f64>, label: &str| -> Result<Mainland> {
                match (index, t) {
                    (Some(i), None) => Ok(Mainland::Finite { economy: cfg.economy(*i, base)? }),
                    (None, Some(t)) => Ok(Mainland::Reservoir { temperature: *t }),
                    _ => bail!("carnot needs exactly one of {label} and {label}_temperature"),
                }
            };
            let cc = CarnotConfig {
                hot: side(hot, hot_temperature, "hot")?,
                cold: side(cold, cold_temperature, "cold")?,
                boat: cfg.economy(*boat, base)?,
                good: *good,
                goods_ratio: *goods_ratio,
                n_steps: *n_steps,
                direction: *direction,
                cycles: *cycles,
            };
            let res = carnot_cycle(&cc)?;
            out.metric("performance", res.performance);
            out.metric("ideal", res.ideal);
            out.metric("trader_profit", res.trader_profit);
            out.metric("money_from_hot", res.money_from_hot);
            out.metric("loop_mu_dg", res.loop_mu_dg);
            out.metric("loop_t_ds", res.loop_t_ds);
            out.table(io::leg_trace_table(&res.trace)?);
        }
        Mode::Stochastic => {
            let (Some(h), Some(c)) = (hot, cold) else {
                bail!("stochastic carnot needs hot and cold economies");
            };
            ensure!(*good == 0, "stochastic carnot moves good 0");
            let boat = cfg.agents(*boat)?;
            let sc = StochasticCarnotConfig {
                hot: cfg.agents(*h)?,
                cold: cfg.agents(*c)?,
                trades_per_sweep: trades_per_sweep.unwrap_or(boat.params.n_agents as u64),
                boat,
                goods_ratio: *goods_ratio,
                n_steps: *n_steps,
                sweeps_per_step: *sweeps_per_step,
                cross_rate: cfg.sim.cross_rate,
                cycles: *cycles,
                replicas: cfg.replicas.unwrap_or(8),
                seed: cfg.seed,
            };
            let res = stochastic_carnot(&sc)?;
            out.metric("performance", res.mean_efficiency);
            out.metric("performance_se", res.se);
            out.metric("ideal", res.ideal);
            out.metric("ideal_profit", res.ideal_profit);
            out.replicas = sc.replicas;
            out.table(io::carnot_replicas_table(&res.replicas)?);
        }
    }
    Ok(())
}

fn gains(cfg: &ScenarioConfig, base: &Path, rel_tol: f64, max_rounds: usize, out: &mut Output) -> Result<()> {
    let econs = economies(cfg, base)?;
    ensure!(econs.len() >= 2, "gains needs at least two economies");
    let models: Vec<EntropyModel> = econs.iter().map(|e| e.model.clone()).collect();
    let alloc = Allocation::new(econs.iter().map(|e| e.state.clone()).collect())?;
    let k = alloc.n_goods();
    let mut t = Table::new(TableKind::Gains, k);
    let mut row = |route: &str, profit: f64, temperature: f64, prices: &[f64]| -> Result<()> {
        let mut cells = vec![route.into(), profit.into(), temperature.into()];
        cells.extend(prices.iter().map(|p| (*p).into()));
        Ok(t.push(cells)?)
    };
    let numeric = gains_of_trade(&models, &alloc)?;
    row("optimizer", numeric.profit, numeric.temperature, &numeric.prices)?;
    out.metric("profit", numeric.profit);
    out.metric("temperature", numeric.temperature);
    out.metric("kkt_residual", numeric.kkt_residual);
    if models.iter().all(|m| matches!(m, EntropyModel::CobbDouglas { .. })) {
        let closed = gains_closed_form(&models, &alloc)?;
        row("closed-form", closed.profit, closed.temperature, &closed.prices)?;
        out.metric("profit_closed_form", closed.profit);
    }
    if econs.len() == 2 {
        let proto = gains_by_protocol(&econs[0], &econs[1], rel_tol, max_rounds)?;
        let prices = (0..k).map(|i| proto.a.price(i)).collect::<std::result::Result<Vec<_>, _>>()?;
        row("protocol", proto.profit, proto.a.temperature()?, &prices)?;
        out.metric("profit_protocol", proto.profit);
        out.metric("protocol_rounds", proto.rounds as f64);
    }
    out.table(t);
    Ok(())
}
