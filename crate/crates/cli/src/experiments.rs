//! Figure families over trust games, as sorted CSV tables.
//!
//! Grid points are solved in parallel; each one builds its own game.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::{self, Write};
use std::ops::RangeInclusive;
use std::str::FromStr;

use num_rational::Rational64;
use rayon::prelude::*;
use trustsmg::engine::{format_value, Star};
use trustsmg::rpatl::{Direction, Formula, Objective, Query};
use trustsmg::smg::{PlayerId, Smg, StateId, Strategy};
use trustsmg::trust::{
    build_trust_game, heuristic_sharing_strategy, parse_ratio, Phase, Pricing, Sharing, TrustDecrease, TrustParams,
};
use trustsmg::{Engine64, TrustGame64};

use crate::Failure;

pub const TARGET: &str = "got_k";

/// One α/td point, written `0.8/inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Config {
    pub alpha: Rational64,
    pub td: TrustDecrease,
}

impl Config {
    fn key(&self) -> (Rational64, u32) {
        (self.alpha, td_key(self.td))
    }
}

fn td_key(td: TrustDecrease) -> u32 {
    match td {
        TrustDecrease::Units(d) => d,
        TrustDecrease::Reset => u32::MAX,
    }
}

pub fn ratio_text(r: Rational64) -> String {
    let x = *r.numer() as f64 / *r.denom() as f64;
    format!("{x}")
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", ratio_text(self.alpha), self.td)
    }
}

impl FromStr for Config {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (alpha, td) = s
            .trim()
            .rsplit_once('/')
            .ok_or_else(|| format!("expected alpha/td, got `{s}`"))?;
        Ok(Config {
            alpha: parse_ratio(alpha)?,
            td: td.parse()?,
        })
    }
}

pub const FIG1_GRID: &str = "0.5/2,0.8/inf,0.8/1,0.8/2";

pub fn parse_grid(s: &str) -> Result<Vec<Config>, String> {
    s.split(',').map(str::parse).collect()
}

pub fn pricing_name(p: Pricing) -> &'static str {
    match p {
        Pricing::Original => "original",
        Pricing::MaxDifference => "max-difference",
    }
}

fn target(g: &Smg<f64>) -> Result<&[StateId], Failure> {
    g.label(TARGET)
        .ok_or_else(|| Failure::Usage(format!("game has no `{TARGET}` label")))
}

fn reward_formula(coalition: BTreeSet<String>, reward: &str, star: Star, dir: Direction) -> Formula {
    Formula {
        coalition,
        objective: Objective::Reward {
            name: reward.to_string(),
            star,
        },
        query: Query::Numeric(dir),
        target: TARGET.to_string(),
    }
}

/// Value `sigma` secures by itself: every other player optimises in the
/// opposite direction on the game with `sigma` fixed.
pub fn guaranteed_value(
    engine: &Engine64,
    g: &Smg<f64>,
    initial: StateId,
    sigma: &Strategy,
    reward: &str,
    star: Star,
    dir: Direction,
) -> Result<f64, Failure> {
    let others = (0..g.players().len())
        .filter(|&p| !sigma.coalition.contains(&PlayerId(p)))
        .map(|p| g.players()[p].clone())
        .collect();
    let opposite = match dir {
        Direction::Max => Direction::Min,
        Direction::Min => Direction::Max,
    };
    let f = reward_formula(others, reward, star, opposite);
    Ok(engine.evaluate_under(g, sigma, initial, &f)?.value)
}

/// Expected reward until the target under a profile fixing every player.
pub fn expected_under(
    engine: &Engine64,
    g: &Smg<f64>,
    initial: StateId,
    profile: &Strategy,
    reward: &str,
) -> Result<f64, Failure> {
    let f = reward_formula(BTreeSet::new(), reward, Star::Cumulative, Direction::Min);
    Ok(engine.evaluate_under(g, profile, initial, &f)?.value)
}

fn merged(a: &Strategy, b: &Strategy) -> Result<Strategy, Failure> {
    a.merge(b)
        .ok_or_else(|| Failure::Usage("strategies cannot be combined".into()))
}

fn phase_name(p: Phase) -> String {
    match p {
        Phase::Choose => "choose".into(),
        Phase::Negotiate(i) => format!("negotiate_{i}"),
        Phase::DecidePay(i) => format!("decidepay_{i}"),
        Phase::Share(i) => format!("share_{i}"),
        Phase::Done => "done".into(),
        Phase::Stuck => "stuck".into(),
    }
}

/// `state,services,phase,trust,action` for the states a full profile can
/// visit, in breadth-first order from the initial state.
pub fn strategy_trace(tg: &TrustGame64, profile: &Strategy) -> String {
    let g = &tg.game;
    let mut out = String::from("state,services,phase,trust,action\n");
    let mut seen = vec![false; g.num_states()];
    let mut queue = VecDeque::from([tg.initial]);
    seen[tg.initial] = true;
    while let Some(s) = queue.pop_front() {
        let local = profile.choice(s).unwrap_or(0);
        let a = g.action_index(s, local);
        let st = &tg.states[s];
        let trust: Vec<String> = st.trust.iter().map(u8::to_string).collect();
        writeln!(
            out,
            "{s},{},{},{},{}",
            st.services,
            phase_name(st.phase),
            trust.join(" "),
            g.action_name(a)
        )
        .unwrap();
        for &t in g.successors(a) {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    out
}

fn check_range(ks: &RangeInclusive<u32>) -> Result<(), Failure> {
    if ks.is_empty() || *ks.start() == 0 {
        return Err(Failure::Usage(format!("bad k range {}..={}", ks.start(), ks.end())));
    }
    Ok(())
}

fn build(p: &TrustParams) -> Result<TrustGame64, Failure> {
    p.validate()?;
    Ok(build_trust_game(p)?)
}

#[derive(Debug, Clone)]
pub struct Fig1Row {
    pub config: Config,
    pub k: u32,
    pub unpaid_max: f64,
    pub fraction: f64,
    /// What the synthesised strategy secures on its own.
    pub guaranteed: f64,
}

#[derive(Debug, Clone)]
pub struct Fig1 {
    pub rows: Vec<Fig1Row>,
    /// On-path strategy of each configuration at the dump k.
    pub traces: Vec<(Config, String)>,
}

/// Maximum expected number of unpaid services while obtaining k services.
pub fn run_fig1(
    engine: &Engine64,
    base: &TrustParams,
    grid: &[Config],
    ks: RangeInclusive<u32>,
    dump_k: Option<u32>,
) -> Result<Fig1, Failure> {
    check_range(&ks)?;
    let points: Vec<(Config, u32)> = grid.iter().flat_map(|&c| ks.clone().map(move |k| (c, k))).collect();
    let mut done = points
        .par_iter()
        .map(|&(config, k)| {
            let p = base.clone().with_alpha(config.alpha).with_td(config.td).with_k(k);
            let tg = build(&p)?;
            let g = &tg.game;
            let sol = engine.solve_reward(
                g,
                &tg.requester_coalition(),
                "unpaid",
                target(g)?,
                Star::Cumulative,
                Direction::Max,
            )?;
            let unpaid_max = sol.values.values[tg.initial];
            let guaranteed = guaranteed_value(
                engine,
                g,
                tg.initial,
                &sol.strategy,
                "unpaid",
                Star::Cumulative,
                Direction::Max,
            )?;
            let trace = match dump_k {
                Some(d) if d == k => Some(strategy_trace(&tg, &merged(&sol.strategy, &sol.adversary)?)),
                _ => None,
            };
            let row = Fig1Row {
                config,
                k,
                unpaid_max,
                fraction: unpaid_max / k as f64,
                guaranteed,
            };
            Ok((row, trace))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    done.sort_by_key(|(r, _)| (r.config.key(), r.k));
    let traces = done
        .iter()
        .filter_map(|(r, t)| t.clone().map(|t| (r.config, t)))
        .collect();
    Ok(Fig1 {
        rows: done.into_iter().map(|(r, _)| r).collect(),
        traces,
    })
}

pub fn fig1_csv(rows: &[Fig1Row]) -> String {
    let mut out = String::from("alpha,td,k,unpaid_max,fraction\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            ratio_text(r.config.alpha),
            r.config.td,
            r.k,
            format_value(r.unpaid_max),
            format_value(r.fraction)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SharingMode {
    Automatic,
    /// Providers share adversarially; the requester minimises against them.
    StrategicOptimal,
    /// Providers follow the sharing heuristic.
    StrategicHeuristic,
}

pub const SHARING_MODES: [SharingMode; 3] = [
    SharingMode::Automatic,
    SharingMode::StrategicOptimal,
    SharingMode::StrategicHeuristic,
];

impl fmt::Display for SharingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SharingMode::Automatic => "automatic",
            SharingMode::StrategicOptimal => "strategic-optimal",
            SharingMode::StrategicHeuristic => "strategic-heuristic",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Fig2Row {
    pub sharing: SharingMode,
    pub td: TrustDecrease,
    pub k: u32,
    pub min_cost: f64,
    /// Expected number of paid services under the minimising profile.
    pub paid_count: f64,
    pub guaranteed: f64,
}

fn fig2_point(engine: &Engine64, base: &TrustParams, mode: SharingMode, td: TrustDecrease, k: u32) -> Result<Fig2Row, Failure> {
    let mut p = base.clone().with_td(td).with_k(k);
    p.sharing = match mode {
        SharingMode::Automatic => Sharing::Automatic,
        _ => Sharing::Strategic,
    };
    let tg = build(&p)?;
    let g = &tg.game;
    let (min_cost, profile, guaranteed) = match mode {
        SharingMode::Automatic | SharingMode::StrategicOptimal => {
            let sol = engine.solve_reward(
                g,
                &tg.requester_coalition(),
                "cost",
                target(g)?,
                Star::Infinite,
                Direction::Min,
            )?;
            let guaranteed = guaranteed_value(engine, g, tg.initial, &sol.strategy, "cost", Star::Infinite, Direction::Min)?;
            (sol.values.values[tg.initial], merged(&sol.strategy, &sol.adversary)?, guaranteed)
        }
        SharingMode::StrategicHeuristic => {
            let h = heuristic_sharing_strategy(&tg)?;
            let requester: BTreeSet<String> = [g.players()[tg.requester().0].clone()].into();
            let f = reward_formula(requester, "cost", Star::Infinite, Direction::Min);
            let r = engine.evaluate_under(g, &h, tg.initial, &f)?;
            let ours = r
                .strategy
                .ok_or_else(|| Failure::Usage("no requester strategy".into()))?;
            let profile = merged(&h, &ours)?;
            let f = reward_formula(BTreeSet::new(), "cost", Star::Infinite, Direction::Min);
            let guaranteed = engine.evaluate_under(g, &profile, tg.initial, &f)?.value;
            (r.value, profile, guaranteed)
        }
    };
    let paid_count = expected_under(engine, g, tg.initial, &profile, "paid")?;
    Ok(Fig2Row {
        sharing: mode,
        td,
        k,
        min_cost,
        paid_count,
        guaranteed,
    })
}

/// Minimum expected cost of k services per sharing scheme.
pub fn run_fig2(
    engine: &Engine64,
    base: &TrustParams,
    tds: &[TrustDecrease],
    modes: &[SharingMode],
    ks: RangeInclusive<u32>,
) -> Result<Vec<Fig2Row>, Failure> {
    check_range(&ks)?;
    let mut points = Vec::new();
    for &m in modes {
        for &td in tds {
            points.extend(ks.clone().map(|k| (m, td, k)));
        }
    }
    let mut rows = points
        .par_iter()
        .map(|&(m, td, k)| fig2_point(engine, base, m, td, k))
        .collect::<Result<Vec<_>, Failure>>()?;
    rows.sort_by_key(|r| (r.sharing, td_key(r.td), r.k));
    Ok(rows)
}

pub fn fig2_csv(rows: &[Fig2Row]) -> String {
    let mut out = String::from("sharing,td,k,min_cost,paid_count\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.sharing,
            r.td,
            r.k,
            format_value(r.min_cost),
            format_value(r.paid_count)
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone)]
pub struct Fig3Row {
    pub pricing: Pricing,
    pub provider: usize,
    pub received: f64,
    pub paid: f64,
    pub unpaid: f64,
}

#[derive(Debug, Clone)]
pub struct Fig3 {
    pub rows: Vec<Fig3Row>,
    /// Per scheme: minimum cost and what the strategy secures on its own.
    pub costs: Vec<(Pricing, f64, f64)>,
}

/// Requests, payments and non-payments per provider under the requester's
/// min-cost strategy, for `base.k` services.
pub fn run_fig3(engine: &Engine64, base: &TrustParams, pricings: &[Pricing]) -> Result<Fig3, Failure> {
    let per_scheme = pricings
        .par_iter()
        .map(|&pricing| {
            let mut p = base.clone();
            p.pricing = pricing;
            let tg = build(&p)?;
            let g = &tg.game;
            let sol = engine.solve_reward(
                g,
                &tg.requester_coalition(),
                "cost",
                target(g)?,
                Star::Infinite,
                Direction::Min,
            )?;
            let cost = sol.values.values[tg.initial];
            let guaranteed = guaranteed_value(engine, g, tg.initial, &sol.strategy, "cost", Star::Infinite, Direction::Min)?;
            let count = |r: &str, i: usize| -> Result<f64, Failure> {
                let f = reward_formula(BTreeSet::new(), &format!("{r}_{i}"), Star::Cumulative, Direction::Min);
                Ok(engine.evaluate_under(g, &sol.strategy, tg.initial, &f)?.value)
            };
            let rows = (0..p.n_providers)
                .map(|i| {
                    Ok(Fig3Row {
                        pricing,
                        provider: i,
                        received: count("received", i)?,
                        paid: count("paid", i)?,
                        unpaid: count("unpaid", i)?,
                    })
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            Ok(((pricing, cost, guaranteed), rows))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let costs = per_scheme.iter().map(|(c, _)| *c).collect();
    let rows = per_scheme.into_iter().flat_map(|(_, r)| r).collect();
    Ok(Fig3 { rows, costs })
}

pub fn fig3_csv(rows: &[Fig3Row]) -> String {
    let mut out = String::from("pricing,provider,received,paid,unpaid\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            pricing_name(r.pricing),
            r.provider,
            format_value(r.received),
            format_value(r.paid),
            format_value(r.unpaid)
        )
        .unwrap();
    }
    out
}

/// Gnuplot script drawing one line per α/td series of a figure-1 CSV.
pub fn fig1_gnuplot(csv: &str, rows: &[Fig1Row]) -> String {
    let mut configs: Vec<Config> = rows.iter().map(|r| r.config).collect();
    configs.dedup();
    let mut out = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'k'\nset ylabel 'unpaid services (max)'\n",
    );
    let series: Vec<String> = configs
        .iter()
        .map(|c| {
            format!(
                "'{csv}' using 3:(strcol(1) eq '{}' && strcol(2) eq '{}' ? $4 : 1/0) with linespoints title '{c}'",
                ratio_text(c.alpha),
                c.td
            )
        })
        .collect();
    writeln!(out, "plot {}", series.join(", \\\n     ")).unwrap();
    out
}

pub fn fig2_gnuplot(csv: &str, rows: &[Fig2Row]) -> String {
    let mut series: Vec<(SharingMode, TrustDecrease)> = rows.iter().map(|r| (r.sharing, r.td)).collect();
    series.dedup();
    let mut out = String::from(
        "set datafile separator ','\nset key left top\nset xlabel 'k'\nset ylabel 'minimum cost'\n",
    );
    let lines: Vec<String> = series
        .iter()
        .map(|(m, td)| {
            format!("'{csv}' using 3:(strcol(1) eq '{m}' && strcol(2) eq '{td}' ? $4 : 1/0) with linespoints title '{m} td={td}'")
        })
        .collect();
    writeln!(out, "plot {}", lines.join(", \\\n     ")).unwrap();
    out
}

pub fn fig3_gnuplot(csv: &str, rows: &[Fig3Row]) -> String {
    let mut schemes: Vec<Pricing> = rows.iter().map(|r| r.pricing).collect();
    schemes.dedup();
    let mut out = String::from(
        "set datafile separator ','\nset style data histograms\nset style histogram rowstacked\nset style fill solid border -1\nset xlabel 'provider'\nset ylabel 'services'\n",
    );
    writeln!(out, "set multiplot layout 1,{}", schemes.len()).unwrap();
    for p in schemes {
        let name = pricing_name(p);
        writeln!(out, "set title '{name}'").unwrap();
        writeln!(
            out,
            "plot '{csv}' using (strcol(1) eq '{name}' ? $4 : 1/0):xtic(2) title 'paid', '' using (strcol(1) eq '{name}' ? $5 : 1/0) title 'unpaid'"
        )
        .unwrap();
    }
    out.push_str("unset multiplot\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text() {
        let c: Config = "0.8/inf".parse().unwrap();
        assert_eq!(c.alpha, Rational64::new(4, 5));
        assert_eq!(c.td, TrustDecrease::Reset);
        assert_eq!(c.to_string(), "0.8/inf");
        assert_eq!(parse_grid(FIG1_GRID).unwrap().len(), 4);
        assert!("0.8".parse::<Config>().is_err());
        assert!("4/5/2".parse::<Config>().unwrap().alpha == Rational64::new(4, 5));
    }
}
