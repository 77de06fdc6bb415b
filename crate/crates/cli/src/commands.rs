use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use log::{info, warn};
use optmm::correction::{
    write_phi_csv, CorrectionProblem, PhiConfig, PhiState, TableGrid, VegaDeviationField,
};
use optmm::experiment::ExperimentConfig;
use optmm::hjb::{
    solve_with, OptionBook, QuotePolicy, QuoteSource, SolveOptions, SolverGrid, TraderConfig,
    ValueFunction,
};
use optmm::model::{
    heston_closed_form, implied_vol, price_options, MarketState, OptionKind, OptionSpec,
};
use optmm::quoting::Side;
use optmm::sim::{
    evaluate_objective, write_batch_csv, EpisodeConfig, MyopicPolicy, NoQuotes, Simulator,
};
use serde::{Deserialize, Serialize};

pub const VALUE_FUNCTION: &str = "value_function.bin";
const BOOK: &str = "book.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Quotes from the value function.
    Optimal,
    /// Expected-spread maximizer that ignores inventory.
    Myopic,
    /// Never quotes.
    Silent,
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

#[derive(Serialize, Deserialize)]
struct CachedBook {
    config: ExperimentConfig,
    book: OptionBook,
}

fn same_book_inputs(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    a.params == b.params && a.initial == b.initial && a.book == b.book
}

/// The configured book, reusing the copy saved by `solve` when its inputs match.
fn load_book(cfg: &ExperimentConfig, out: &Path) -> Result<OptionBook> {
    if let Ok(text) = fs::read_to_string(out.join(BOOK)) {
        if let Ok(cached) = serde_json::from_str::<CachedBook>(&text) {
            if same_book_inputs(&cached.config, cfg) {
                return Ok(cached.book);
            }
        }
        warn!(
            "{} was built from other inputs; rebuilding",
            out.join(BOOK).display()
        );
    }
    info!("pricing the book");
    Ok(cfg.build_book()?)
}

fn load_value_function(path: &Path, trader: &TraderConfig) -> Result<ValueFunction> {
    let vf = ValueFunction::load(path)
        .with_context(|| format!("reading {} (run `solve` first)", path.display()))?;
    if (vf.horizon() - trader.horizon).abs() > 1e-12 * trader.horizon
        || vf.vega_range().1 != trader.vega_limit
    {
        bail!(
            "{} was solved for another horizon or vega limit",
            path.display()
        );
    }
    Ok(vf)
}

/// `strike,maturity,price,stderr,implied_vol[,closed_form,z_score]`.
pub fn cmd_surface(
    cfg: &ExperimentConfig,
    out: &Path,
    oracle: bool,
    zero_strike: bool,
) -> Result<()> {
    cfg.validate()?;
    let mut options = cfg.options()?;
    if zero_strike {
        options.insert(
            0,
            OptionSpec::new(0.0, cfg.book.maturities[0], OptionKind::Call)?,
        );
    }
    let mut estimates = vec![(0.0, 0.0); options.len()];
    for &t in &cfg.book.maturities {
        let idx: Vec<usize> = (0..options.len())
            .filter(|&i| options[i].maturity == t)
            .collect();
        let group: Vec<OptionSpec> = idx.iter().map(|&i| options[i]).collect();
        let mc = cfg.surface.mc_for(t - cfg.initial.time);
        for (&i, e) in idx
            .iter()
            .zip(price_options(&group, &cfg.initial, &cfg.params, &mc)?)
        {
            estimates[i] = e;
        }
    }
    let mut w = create(out, "surface.csv")?;
    write!(w, "strike,maturity,price,stderr,implied_vol")?;
    if oracle {
        write!(w, ",closed_form,z_score")?;
    }
    writeln!(w)?;
    for (o, &(price, stderr)) in options.iter().zip(&estimates) {
        let iv = match implied_vol(price, o, cfg.initial.spot) {
            Ok(v) => format!("{v:e}"),
            Err(e) => {
                warn!("K={} T={}: {e}", o.strike, o.maturity);
                "NaN".into()
            }
        };
        write!(w, "{},{},{price:e},{stderr:e},{iv}", o.strike, o.maturity)?;
        if oracle {
            let exact = heston_closed_form(o, &cfg.initial, &cfg.params)?;
            let z = if stderr > 0.0 {
                (price - exact) / stderr
            } else {
                0.0
            };
            write!(w, ",{exact:e},{z:e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    info!(
        "wrote {} rows to {}",
        options.len(),
        out.join("surface.csv").display()
    );
    Ok(())
}

fn solve_grid(
    cfg: &ExperimentConfig,
    book: &OptionBook,
    trader: &TraderConfig,
    grid: &SolverGrid,
) -> Result<ValueFunction> {
    let options = SolveOptions {
        auto_refine: true,
        ..SolveOptions::default()
    };
    Ok(solve_with(&cfg.params, book, trader, grid, options)?)
}

/// Writes the value function, its `t = 0` slice and the priced book.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path, refine: bool) -> Result<()> {
    let book = load_book(cfg, out)?;
    let trader = cfg.trader_config(&book);
    info!("solving on {:?}", cfg.grid);
    let vf = solve_grid(cfg, &book, &trader, &cfg.grid)?;
    fs::create_dir_all(out)?;
    vf.save(out.join(VALUE_FUNCTION))?;
    let mut w = create(out, "value_t0.csv")?;
    vf.write_csv(&mut w, Some(0))?;
    w.flush()?;
    let cached = CachedBook {
        config: cfg.clone(),
        book,
    };
    fs::write(out.join(BOOK), serde_json::to_string_pretty(&cached)?)?;
    if refine {
        let fine = solve_grid(cfg, &cached.book, &trader, &cfg.grid.refined())?;
        fine.save(out.join("value_function_refined.bin"))?;
        let scale = vf
            .slice(0)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut gap = 0.0f64;
        for &nu in &vf.nu_nodes() {
            for &v in &vf.vega_nodes() {
                gap = gap.max((vf.value_at(0.0, nu, v) - fine.value_at(0.0, nu, v)).abs());
            }
        }
        println!(
            "refinement: max |v - v_fine| / max |v| at t = 0 is {:e}",
            gap / scale
        );
    }
    info!("wrote {}", out.join(VALUE_FUNCTION).display());
    Ok(())
}

/// `option,side,vega_node,quote,quote_over_price,implied_vol_of_quote` at `t = 0`, `nu = nu0`.
pub fn cmd_quotes(cfg: &ExperimentConfig, out: &Path, vf_path: &Path) -> Result<()> {
    let book = load_book(cfg, out)?;
    let trader = cfg.trader_config(&book);
    let vf = load_value_function(vf_path, &trader)?;
    let policy = QuotePolicy::new(&vf, &book, &trader);
    let nu = cfg.initial.variance;
    let mut w = create(out, "quotes.csv")?;
    writeln!(
        w,
        "option,side,vega_node,quote,quote_over_price,implied_vol_of_quote"
    )?;
    for (i, o) in book.options.iter().enumerate() {
        let price = book.reference_prices[i];
        for side in Side::BOTH {
            for &vega in &vf.vega_nodes() {
                let quote = policy.quote(i, side, 0.0, nu, vega)?;
                let Some(delta) = quote else {
                    writeln!(w, "{i},{},{vega:e},,,", side.name())?;
                    continue;
                };
                let traded = price + side.psi() * delta;
                let iv = implied_vol(traded, o, cfg.initial.spot)
                    .map_or_else(|_| String::new(), |v| format!("{v:e}"));
                writeln!(
                    w,
                    "{i},{},{vega:e},{delta:e},{:e},{iv}",
                    side.name(),
                    delta / price
                )?;
            }
        }
    }
    w.flush()?;
    info!("wrote {}", out.join("quotes.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    policy: Policy,
    hedge: optmm::sim::HedgeMode,
    n_steps: usize,
    seed: u64,
    coarse_step: bool,
    trades: usize,
    blocked: u64,
    objective: optmm::sim::ObjectiveEstimate,
}

/// Writes `episodes.csv`, the event log of the first episode and `summary.json`.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out: &Path,
    vf_path: &Path,
    policy: Policy,
) -> Result<()> {
    let book = load_book(cfg, out)?;
    let trader = cfg.trader_config(&book);
    let s = cfg.simulation;
    let mut episode = EpisodeConfig::new(s.n_steps, s.hedge);
    episode.sample_every = (s.n_steps / 100).max(1);
    let sim = Simulator::new(&cfg.params, &book, &trader, cfg.initial, episode)?;
    let vf;
    let myopic = MyopicPolicy::new(&book, trader.delta_floor);
    let quoter: &dyn QuoteSource = match policy {
        Policy::Optimal => {
            vf = load_value_function(vf_path, &trader)?;
            &QuotePolicy::new(&vf, &book, &trader)
        }
        Policy::Myopic => &myopic,
        Policy::Silent => &NoQuotes,
    };
    info!(
        "simulating {} episodes of {} steps",
        s.n_episodes, s.n_steps
    );
    let reports = sim.run_batch(quoter, s.n_episodes, s.seed)?;
    let mut w = create(out, "episodes.csv")?;
    write_batch_csv(&reports, &mut w)?;
    w.flush()?;
    if let Some(first) = reports.first() {
        let mut w = create(out, "episode_0.csv")?;
        first.write_csv(&mut w)?;
        w.flush()?;
    }
    let summary = Summary {
        policy,
        hedge: s.hedge,
        n_steps: s.n_steps,
        seed: s.seed,
        coarse_step: sim.is_coarse(),
        trades: reports.iter().map(|r| r.trades.len()).sum(),
        blocked: reports
            .iter()
            .flat_map(|r| r.counts.iter().flatten())
            .map(|c| c.blocked)
            .sum(),
        objective: evaluate_objective(&reports),
    };
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(out.join("summary.json"), &text)?;
    println!("{text}");
    Ok(())
}

/// Writes `phi.csv` for each requested state.
pub fn cmd_correct(
    cfg: &ExperimentConfig,
    out: &Path,
    vf_path: &Path,
    states: Option<&Path>,
) -> Result<()> {
    let book = load_book(cfg, out)?;
    let trader = cfg.trader_config(&book);
    let vf = load_value_function(vf_path, &trader)?;
    let states: Vec<PhiState> = match states {
        Some(p) => serde_json::from_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => vec![PhiState {
            time: 0.0,
            spot: cfg.initial.spot,
            variance: cfg.initial.variance,
            inventory: vec![0.0; book.len()],
        }],
    };
    let c = cfg.correction;
    let grid = TableGrid {
        n_t: c.n_t,
        n_spot: c.n_spot,
        n_nu: c.n_nu,
    };
    let start = MarketState {
        time: 0.0,
        ..cfg.initial
    };
    info!("tabulating vegas on {grid:?}");
    let field = VegaDeviationField::build(
        &book,
        &cfg.params,
        &start,
        trader.horizon,
        grid,
        cfg.book.vega_bump,
    )?;
    let problem = CorrectionProblem {
        vf: &vf,
        field: &field,
        params: &cfg.params,
        book: &book,
        trader: &trader,
    };
    let phi = PhiConfig {
        n_paths: c.n_paths,
        n_steps: c.n_steps,
        seed: c.seed,
        tolerance: c.tolerance,
    };
    let mut rows = Vec::with_capacity(states.len());
    for s in states {
        let e = problem.phi(&s, &phi)?;
        rows.push((s, e));
    }
    let mut w = create(out, "phi.csv")?;
    write_phi_csv(&rows, &mut w)?;
    w.flush()?;
    info!(
        "wrote {} rows to {}",
        rows.len(),
        out.join("phi.csv").display()
    );
    Ok(())
}
