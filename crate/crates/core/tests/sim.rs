mod common;

use common::oracles::{ks_critical_1pct, ks_exponential};
use optmm::hjb::{solve, OptionBook, QuotePolicy, QuoteSource, TraderConfig};
use optmm::model::{mean_stderr, CfSlice, StochVolParams};
use optmm::quoting::{optimal_quote, Side};
use optmm::sim::*;
use std::sync::OnceLock;

const ATM: usize = 2;

fn initial() -> optmm::model::MarketState {
    common::config().initial
}

fn loose_trader() -> TraderConfig {
    TraderConfig {
        vega_limit: 1e30,
        ..common::trader()
    }
}

fn hjb_policy_parts() -> &'static optmm::hjb::ValueFunction {
    static VF: OnceLock<optmm::hjb::ValueFunction> = OnceLock::new();
    VF.get_or_init(|| {
        solve(
            &common::params(),
            common::book(),
            &common::trader(),
            &common::config().grid,
        )
        .unwrap()
    })
}

fn held_atm(book: &OptionBook) -> Vec<f64> {
    let mut q = vec![0.0; book.len()];
    q[ATM] = 1e6 / book.vegas[ATM];
    q
}

#[test]
fn silent_market_maker_never_trades() {
    let params = common::equal_drift_params();
    let book = common::book();
    let trader = common::trader();
    let sim = Simulator::new(
        &params,
        book,
        &trader,
        initial(),
        EpisodeConfig::new(120, HedgeMode::Delta),
    )
    .unwrap();
    let reports = sim.run_batch(&NoQuotes, 50, 1).unwrap();
    for r in &reports {
        assert!(r.trades.is_empty());
        assert_eq!(r.pnl(), 0.0);
        assert_eq!(r.penalty_integral, 0.0);
    }
    let est = evaluate_objective(&reports);
    assert_eq!(est.objective, 0.0);
}

#[test]
fn held_position_is_a_martingale_when_drifts_coincide() {
    let params = common::equal_drift_params();
    let book = common::book();
    let mut trader = common::trader();
    trader.gamma = 0.0;
    let mut cfg = EpisodeConfig::new(120, HedgeMode::Delta);
    cfg.initial_inventory = held_atm(book);
    let sim = Simulator::new(&params, book, &trader, initial(), cfg).unwrap();
    let reports = sim.run_batch(&NoQuotes, 1000, 2).unwrap();
    let est = evaluate_objective(&reports);
    assert!(est.pnl_stderr > 0.0);
    assert!(est.mean_pnl.abs() < 3.0 * est.pnl_stderr, "{est:?}");
    assert_eq!(est.objective, est.mean_pnl);
}

#[test]
fn atm_trade_counts_match_request_rate() {
    let params = common::params();
    let book = common::book();
    let trader = loose_trader();
    let sim = Simulator::new(
        &params,
        book,
        &trader,
        initial(),
        EpisodeConfig::new(120, HedgeMode::Delta),
    )
    .unwrap();
    let quotes = ConstantQuotes::single(book.len(), ATM, 0.0);
    let n = 2000;
    let reports = sim.run_batch(&quotes, n, 3).unwrap();
    // 30 requests a day over 0.3 of a trading day, a third of which trade at zero spread
    let expected = 30.0 * 0.3 / (1.0 + 0.7f64.exp()) * (trader.horizon * 252.0 / 0.3);
    for side in Side::BOTH {
        let fills: Vec<f64> = reports
            .iter()
            .map(|r| r.counts[ATM][side.index()].filled as f64)
            .collect();
        let (mean, _) = mean_stderr(&fills);
        let stderr = (expected / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * stderr,
            "{side:?}: {mean} vs {expected}"
        );
    }
    for r in &reports {
        assert!(r.trades.iter().all(|t| t.option == ATM));
    }
}

#[test]
fn accepted_requests_form_a_poisson_stream() {
    let params = common::params();
    let book = common::book();
    let mut trader = loose_trader();
    trader.horizon = 0.5;
    let delta = 0.004;
    let quotes = ConstantQuotes::single(book.len(), ATM, delta);
    let sim = Simulator::new(
        &params,
        book,
        &trader,
        initial(),
        EpisodeConfig::new(50, HedgeMode::Delta),
    )
    .unwrap();
    assert!(sim.is_coarse());
    let mut gaps = Vec::new();
    for e in 0..12 {
        let r = sim.run_episode(&quotes, 100 + e).unwrap();
        let mut last = 0.0;
        for t in r.trades.iter().filter(|t| t.side == Side::Ask) {
            gaps.push(t.time - last);
            last = t.time;
        }
    }
    assert!(gaps.len() > 10_000);
    let rate = book.curve(ATM, Side::Ask).intensity(delta);
    assert!(ks_exponential(&gaps, rate) < ks_critical_1pct(gaps.len()));
}

#[test]
fn hedges_coincide_without_correlation() {
    let params = StochVolParams {
        rho: 0.0,
        ..common::params()
    };
    let book = common::book();
    let trader = common::trader();
    let run = |hedge| {
        let mut cfg = EpisodeConfig::new(200, hedge);
        cfg.initial_inventory = held_atm(book);
        cfg.log_hedges = true;
        simulate_episode(
            &ConstantQuotes::uniform(book.len(), 0.01),
            &params,
            book,
            &trader,
            initial(),
            cfg,
            9,
        )
        .unwrap()
    };
    let (a, b) = (run(HedgeMode::Delta), run(HedgeMode::Optimal));
    assert!(!a.trades.is_empty());
    assert_eq!(a.hedges.len(), 200);
    assert_eq!(a.hedges, b.hedges);
}

#[test]
fn optimal_hedge_removes_correlated_vega_risk() {
    let params = common::params();
    let book = common::book();
    let trader = common::trader();
    let increments = |hedge| {
        let mut cfg = EpisodeConfig::new(300, hedge);
        cfg.initial_inventory = held_atm(book);
        cfg.sample_every = 1;
        let sim = Simulator::new(&params, book, &trader, initial(), cfg).unwrap();
        let reports = sim.run_batch(&NoQuotes, 300, 21).unwrap();
        let d: Vec<f64> = reports
            .iter()
            .flat_map(|r| {
                r.samples
                    .windows(2)
                    .map(|w| w[1].mtm - w[0].mtm)
                    .collect::<Vec<_>>()
            })
            .collect();
        let (m, _) = mean_stderr(&d);
        d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (d.len() - 1) as f64
    };
    let ratio = increments(HedgeMode::Optimal) / increments(HedgeMode::Delta);
    let target = 1.0 - params.rho * params.rho;
    assert!((ratio / target - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn marked_to_market_value_reconciles_with_logs() {
    let params = common::params();
    let book = common::book();
    let trader = common::trader();
    let vf = hjb_policy_parts();
    let policy = QuotePolicy::new(vf, book, &trader);
    let mut cfg = EpisodeConfig::new(1200, HedgeMode::Optimal);
    cfg.sample_every = 1;
    cfg.log_hedges = true;
    let r = simulate_episode(&policy, &params, book, &trader, initial(), cfg, 5).unwrap();
    assert!(r.trades.len() > 10);
    assert_eq!(r.samples.len(), 1201);
    let (mut ti, mut hi) = (0, 0);
    let mut cash = 0.0;
    let mut shares = 0.0;
    let mut q = vec![0.0; book.len()];
    for s in &r.samples {
        while ti < r.trades.len() && r.trades[ti].time <= s.time {
            let t = &r.trades[ti];
            cash += t.side.psi() * t.size * t.price + t.size * t.quote;
            q[t.option] -= t.side.psi() * t.size;
            ti += 1;
        }
        while hi < r.hedges.len() && r.hedges[hi].time <= s.time {
            let h = &r.hedges[hi];
            cash -= h.traded * h.spot;
            shares += h.traded;
            hi += 1;
        }
        let mut value = cash + shares * s.spot;
        let mut gross = cash.abs() + (shares * s.spot).abs();
        for (i, o) in book.options.iter().enumerate() {
            if q[i] != 0.0 {
                let price = CfSlice::new(&params, o.maturity - s.time)
                    .price(o.kind, s.spot, o.strike, s.variance);
                value += q[i] * price;
                gross += (q[i] * price).abs();
            }
        }
        assert!(
            (value - s.mtm).abs() <= 1e-8 * s.mtm.abs().max(1e-3 * gross),
            "t={}: {value} vs {}",
            s.time,
            s.mtm
        );
        let vega: f64 = q.iter().zip(&book.vegas).map(|(a, b)| a * b).sum();
        assert!((vega - s.vega).abs() <= 1e-6 * trader.vega_limit);
    }
    assert_eq!(r.terminal_mtm, r.samples.last().unwrap().mtm);
}

#[test]
fn risk_limit_holds_for_every_trade() {
    let params = common::params();
    let book = common::book();
    let trader = TraderConfig {
        vega_limit: 3e6,
        ..common::trader()
    };
    let myopic = MyopicPolicy::new(book, trader.delta_floor);
    let sim = Simulator::new(
        &params,
        book,
        &trader,
        initial(),
        EpisodeConfig::new(120, HedgeMode::Delta),
    )
    .unwrap();
    let reports = sim.run_batch(&myopic, 40, 4).unwrap();
    let blocked: u64 = reports
        .iter()
        .flat_map(|r| r.counts.iter().flatten())
        .map(|c| c.blocked)
        .sum();
    assert!(blocked > 0);
    for r in &reports {
        assert!(r
            .trades
            .iter()
            .all(|t| t.vega.abs() <= trader.vega_limit * (1.0 + 1e-12)));
    }
}

#[test]
fn myopic_quotes_ignore_inventory() {
    let book = common::book();
    let floor = common::trader().delta_floor;
    let myopic = MyopicPolicy::new(book, floor);
    for i in 0..book.len() {
        let q = myopic.quote(i, Side::Bid, 0.0, 0.02, 5e6).unwrap();
        assert_eq!(
            q,
            Some(optimal_quote(book.curve(i, Side::Bid), 0.0, floor).unwrap())
        );
        assert_eq!(q, myopic.quote(i, Side::Bid, 0.001, 0.03, -5e6).unwrap());
    }
}

#[test]
fn batches_are_reproducible_across_thread_counts() {
    let params = common::params();
    let book = common::book();
    let trader = common::trader();
    let policy = QuotePolicy::new(hjb_policy_parts(), book, &trader);
    let sim = Simulator::new(
        &params,
        book,
        &trader,
        initial(),
        EpisodeConfig::new(60, HedgeMode::Optimal),
    )
    .unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sim.run_batch(&policy, 12, 77).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
}

#[test]
fn coarse_steps_are_flagged() {
    let params = common::params();
    let book = common::book();
    let trader = common::trader();
    let coarse = Simulator::new(
        &params,
        book,
        &trader,
        initial(),
        EpisodeConfig::new(10, HedgeMode::Delta),
    )
    .unwrap();
    let fine = Simulator::new(
        &params,
        book,
        &trader,
        initial(),
        EpisodeConfig::new(1200, HedgeMode::Delta),
    )
    .unwrap();
    assert!(coarse.is_coarse());
    assert!(!fine.is_coarse());
    assert!(coarse.run_episode(&NoQuotes, 1).unwrap().coarse_step);
}

#[test]
fn paired_comparison_and_exports() {
    let params = common::params();
    let book = common::book();
    let trader = common::trader();
    let mut cfg = EpisodeConfig::new(120, HedgeMode::Delta);
    cfg.log_hedges = true;
    cfg.sample_every = 10;
    let sim = Simulator::new(&params, book, &trader, initial(), cfg).unwrap();
    let a = sim
        .run_batch(&ConstantQuotes::uniform(book.len(), 0.02), 20, 8)
        .unwrap();
    let (diff, err) = compare_objectives(&a, &a);
    assert_eq!((diff, err), (0.0, 0.0));
    let est = evaluate_objective(&a);
    assert!(
        (est.objective - (est.mean_pnl - est.mean_penalty)).abs()
            <= 1e-9 * est.mean_pnl.abs().max(1.0)
    );
    assert!((est.mean_penalty_scaled - 0.75 * est.mean_penalty).abs() <= 1e-9 * est.mean_penalty);

    let mut out = Vec::new();
    a[0].write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("time,event_type,option_id,side,size,quote,cash,vega_portfolio,mtm")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(
        rows.len(),
        a[0].samples.len() + a[0].trades.len() + a[0].hedges.len()
    );
    assert!(rows.iter().all(|r| r.split(',').count() == 9));
    let mut batch = Vec::new();
    write_batch_csv(&a, &mut batch).unwrap();
    assert_eq!(String::from_utf8(batch).unwrap().lines().count(), 21);
}
