use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trustsmg::engine::{format_value, Engine};
use trustsmg::rpatl::{parse_formula, Vocabulary};
use trustsmg::smg::{text, StateId, Strategy};
use trustsmg::trust::{build_trust_game, Pricing, TrustDecrease, TrustParams};
use trustsmg::{Engine64, Smg64};
use trustsmg_cli::experiments::{self, SharingMode, FIG1_GRID};
use trustsmg_cli::{read_file, write_file, Failure};

#[derive(Parser)]
#[command(name = "trustsmg", version, about = "Model checking and strategy synthesis for stochastic games")]
struct Cli {
    /// Convergence threshold of value iteration.
    #[arg(long, global = true, default_value_t = 1e-8)]
    epsilon: f64,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_iterations: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a property and print the result at the initial state.
    Check(CheckArgs),
    /// Check a property and export the coalition's witness strategy.
    Synth(CheckArgs),
    /// Fix a strategy, then check a property on the remaining game.
    Implement(ImplementArgs),
    /// Maximum unpaid services per α/td configuration.
    Fig1(Fig1Args),
    /// Minimum cost of k services per sharing scheme.
    Fig2(Fig2Args),
    /// Per-provider requests under the min-cost strategy.
    Fig3(Fig3Args),
    /// Write the trust game in the explicit-state text format.
    ExportModel(ExportArgs),
}

/// Trust game parameters; a `--config` file is applied first, then flags.
#[derive(Args, Default)]
struct TrustArgs {
    /// `key = value` parameter file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, alias = "n_providers")]
    n_providers: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Trust decrease per provider: an integer or `inf`, optionally a comma list.
    #[arg(long)]
    td: Option<String>,
    #[arg(long)]
    st: Option<String>,
    /// Negotiation cancel probability.
    #[arg(long)]
    c: Option<String>,
    #[arg(long, alias = "c_min")]
    c_min: Option<String>,
    #[arg(long, alias = "c_max")]
    c_max: Option<String>,
    #[arg(long, alias = "t_prime")]
    t_prime: Option<String>,
    #[arg(long, alias = "trust_init")]
    trust_init: Option<String>,
    #[arg(long, alias = "trust_max")]
    trust_max: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// original | max-difference
    #[arg(long)]
    pricing: Option<String>,
    /// automatic | strategic
    #[arg(long)]
    sharing: Option<String>,
    #[arg(long, alias = "state_cap")]
    state_cap: Option<String>,
}

impl TrustArgs {
    fn params(&self) -> Result<TrustParams, Failure> {
        let mut p = TrustParams::default();
        if let Some(path) = &self.config {
            p.apply_config(&read_file(path)?)?;
        }
        // n_providers first: it resizes the per-provider lists
        let flags = [
            ("n_providers", &self.n_providers),
            ("alpha", &self.alpha),
            ("td", &self.td),
            ("st", &self.st),
            ("c", &self.c),
            ("c_min", &self.c_min),
            ("c_max", &self.c_max),
            ("t_prime", &self.t_prime),
            ("trust_init", &self.trust_init),
            ("trust_max", &self.trust_max),
            ("k", &self.k),
            ("pricing", &self.pricing),
            ("sharing", &self.sharing),
            ("state_cap", &self.state_cap),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                p.set(key, v).map_err(|m| Failure::Usage(format!("--{key}: {m}")))?;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Explicit-state game file; without it a trust game is built.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    trust: TrustArgs,
}

impl ModelArgs {
    fn load(&self) -> Result<Smg64, Failure> {
        match &self.model {
            Some(path) => Ok(text::parse(&read_file(path)?)?),
            None => Ok(build_trust_game(&self.trust.params()?)?.game),
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Property, e.g. `<<requester>> R{"unpaid"}max=? [ Fc "got_k" ]`.
    #[arg(long, short)]
    property: String,
    /// Defaults to the model's initial state.
    #[arg(long)]
    initial: Option<StateId>,
    /// Write the full `state,value` vector here.
    #[arg(long)]
    values_out: Option<PathBuf>,
    /// Write the witness strategy here (`synth` prints it otherwise).
    #[arg(long)]
    strategy_out: Option<PathBuf>,
}

#[derive(Args)]
struct ImplementArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Strategy CSV as written by `synth`.
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long, short)]
    property: String,
    #[arg(long)]
    initial: Option<StateId>,
    #[arg(long)]
    values_out: Option<PathBuf>,
}

#[derive(Args)]
struct FigureOut {
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script for the CSV.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(Args)]
struct Fig1Args {
    /// alpha and td flags are taken from the grid.
    #[command(flatten)]
    trust: TrustArgs,
    /// Comma separated alpha/td points.
    #[arg(long, default_value = FIG1_GRID)]
    grid: String,
    #[arg(long, default_value_t = 1)]
    k_from: u32,
    #[arg(long, default_value_t = 30)]
    k_to: u32,
    /// Directory receiving one on-path strategy CSV per configuration.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// k of the strategy dumps; defaults to the last k.
    #[arg(long)]
    dump_k: Option<u32>,
    #[command(flatten)]
    output: FigureOut,
}

#[derive(Args)]
struct Fig2Args {
    #[command(flatten)]
    trust: TrustArgs,
    /// Trust decreases to run, comma separated.
    #[arg(long, default_value = "1,2")]
    td_grid: String,
    #[arg(long, default_value = "automatic,strategic-optimal,strategic-heuristic")]
    modes: String,
    #[arg(long, default_value_t = 1)]
    k_from: u32,
    #[arg(long, default_value_t = 13)]
    k_to: u32,
    #[command(flatten)]
    output: FigureOut,
}

#[derive(Args)]
struct Fig3Args {
    /// k defaults to 13 here.
    #[command(flatten)]
    trust: TrustArgs,
    #[arg(long, default_value = "original,max-difference")]
    pricings: String,
    #[command(flatten)]
    output: FigureOut,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    trust: TrustArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Failure::Io {
                    path: "stdout".into(),
                    source,
                })
        }
    }
}

fn list<V: std::str::FromStr<Err = String>>(flag: &str, s: &str) -> Result<Vec<V>, Failure> {
    s.split(',')
        .map(|x| x.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|m| Failure::Usage(format!("--{flag}: {m}")))
}

struct Mode(SharingMode);

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        experiments::SHARING_MODES
            .iter()
            .find(|m| m.to_string() == s)
            .map(|&m| Mode(m))
            .ok_or_else(|| format!("unknown sharing mode `{s}`"))
    }
}

struct PricingArg(Pricing);

impl std::str::FromStr for PricingArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Pricing::Original, Pricing::MaxDifference]
            .into_iter()
            .find(|&p| experiments::pricing_name(p) == s)
            .map(PricingArg)
            .ok_or_else(|| format!("unknown pricing `{s}`"))
    }
}

fn initial_of(g: &Smg64, given: Option<StateId>) -> StateId {
    given.or(g.initial()).unwrap_or(0)
}

/// Prints the outcome; 1 when a bound query fails.
fn report(value: f64, holds: Option<bool>) -> u8 {
    match holds {
        Some(h) => {
            println!("result: {h}");
            println!("value: {}", format_value(value));
            u8::from(!h)
        }
        None => {
            println!("value: {}", format_value(value));
            0
        }
    }
}

fn check(engine: &Engine64, a: &CheckArgs, synth: bool) -> Result<u8, Failure> {
    let g = a.model.load()?;
    let f = parse_formula(&a.property, &Vocabulary::of_game(&g))?;
    let r = engine.check(&g, initial_of(&g, a.initial), &f)?;
    if let Some(p) = &a.values_out {
        write_file(p, &r.values.to_csv())?;
    }
    let code = report(r.value, r.holds);
    if let Some(s) = &r.strategy {
        match &a.strategy_out {
            Some(p) => write_file(p, &s.to_csv(&g))?,
            None if synth => emit(None, &s.to_csv(&g))?,
            None => {}
        }
    }
    Ok(code)
}

fn implement(engine: &Engine64, a: &ImplementArgs) -> Result<u8, Failure> {
    let g = a.model.load()?;
    let sigma = Strategy::from_csv(&read_file(&a.strategy)?, &g, None)?;
    let f = parse_formula(&a.property, &Vocabulary::of_game(&g))?;
    let r = engine.evaluate_under(&g, &sigma, initial_of(&g, a.initial), &f)?;
    if let Some(p) = &a.values_out {
        write_file(p, &r.values.to_csv())?;
    }
    Ok(report(r.value, r.holds))
}

fn figure_output(out: &FigureOut, csv: &str, script: impl FnOnce(&str) -> String) -> Result<(), Failure> {
    emit(out.out.as_deref(), csv)?;
    if let Some(gp) = &out.gnuplot {
        let data = out
            .out
            .as_ref()
            .map_or_else(|| "data.csv".to_string(), |p| p.display().to_string());
        write_file(gp, &script(&data))?;
    }
    Ok(())
}

fn fig1(engine: &Engine64, a: &Fig1Args) -> Result<u8, Failure> {
    let base = a.trust.params()?;
    let grid = experiments::parse_grid(&a.grid).map_err(|m| Failure::Usage(format!("--grid: {m}")))?;
    let dump_k = a.traces.as_ref().map(|_| a.dump_k.unwrap_or(a.k_to));
    let fig = experiments::run_fig1(engine, &base, &grid, a.k_from..=a.k_to, dump_k)?;
    if let Some(dir) = &a.traces {
        std::fs::create_dir_all(dir).map_err(|source| Failure::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for (config, trace) in &fig.traces {
            let name = format!("strategy_{}.csv", config.to_string().replace('/', "_"));
            write_file(&dir.join(name), trace)?;
        }
    }
    figure_output(&a.output, &experiments::fig1_csv(&fig.rows), |data| {
        experiments::fig1_gnuplot(data, &fig.rows)
    })?;
    Ok(0)
}

fn fig2(engine: &Engine64, a: &Fig2Args) -> Result<u8, Failure> {
    let base = a.trust.params()?;
    let tds: Vec<TrustDecrease> = list("td-grid", &a.td_grid)?;
    let modes: Vec<SharingMode> = list::<Mode>("modes", &a.modes)?.into_iter().map(|m| m.0).collect();
    let rows = experiments::run_fig2(engine, &base, &tds, &modes, a.k_from..=a.k_to)?;
    figure_output(&a.output, &experiments::fig2_csv(&rows), |data| experiments::fig2_gnuplot(data, &rows))?;
    Ok(0)
}

fn fig3(engine: &Engine64, a: &Fig3Args) -> Result<u8, Failure> {
    let mut base = a.trust.params()?;
    if a.trust.k.is_none() && a.trust.config.is_none() {
        base.k = 13;
    }
    let pricings: Vec<Pricing> = list::<PricingArg>("pricings", &a.pricings)?
        .into_iter()
        .map(|p| p.0)
        .collect();
    let fig = experiments::run_fig3(engine, &base, &pricings)?;
    figure_output(&a.output, &experiments::fig3_csv(&fig.rows), |data| {
        experiments::fig3_gnuplot(data, &fig.rows)
    })?;
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    if !(cli.epsilon > 0.0) {
        return Err(Failure::Usage("--epsilon must be positive".into()));
    }
    let engine = Engine {
        epsilon: cli.epsilon,
        max_iterations: cli.max_iterations,
    };
    match &cli.cmd {
        Cmd::Check(a) => check(&engine, a, false),
        Cmd::Synth(a) => check(&engine, a, true),
        Cmd::Implement(a) => implement(&engine, a),
        Cmd::Fig1(a) => fig1(&engine, a),
        Cmd::Fig2(a) => fig2(&engine, a),
        Cmd::Fig3(a) => fig3(&engine, a),
        Cmd::ExportModel(a) => {
            let tg = build_trust_game::<f64>(&a.trust.params()?)?;
            emit(a.out.as_deref(), &text::write(&tg.game))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MICRO: &str = r#"
player 0 p1
player 1 p2
state 0 0
state 1 1
state 2 1
trans 0 a 1:0.3 2:0.7
trans 0 b 1:0.7 2:0.3
label "goal" 1
reward "r" 0 a 1
reward "r" 0 b 2
init 0
"#;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("trustsmg").chain(args.iter().copied())).unwrap()
    }

    fn exec(args: &[&str]) -> Result<u8, Failure> {
        run(&cli(args))
    }

    fn path(dir: &tempfile::TempDir, name: &str) -> String {
        dir.path().join(name).display().to_string()
    }

    /// Value column of a `state,value` CSV.
    fn values(file: &str) -> Vec<f64> {
        std::fs::read_to_string(file)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn micro_game_queries() {
        let dir = tempfile::tempdir().unwrap();
        let model = path(&dir, "micro.smg");
        std::fs::write(&model, MICRO).unwrap();
        let out = path(&dir, "v.csv");
        let code = exec(&["check", "--model", &model, "-p", r#"<<p1>> Pmax=? [ F "goal" ]"#, "--values-out", &out]);
        assert_eq!(code.unwrap(), 0);
        assert!((values(&out)[0] - 0.7).abs() < 1e-12);
        let bound = exec(&["check", "--model", &model, "-p", r#"<<p1>> P>=0.75 [ F<=5 "goal" ]"#]);
        assert_eq!(bound.unwrap(), 1);
        let err = exec(&["check", "--model", &model, "-p", r#"<<p1>> Pmax=? [ F goal ]"#]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("offset 18"), "{err}");
        let err = exec(&["check", "--model", &model, "-p", r#"<<p3>> Pmax=? [ F "goal" ]"#]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let missing = exec(&["check", "--model", &path(&dir, "nope.smg"), "-p", "x"]).unwrap_err();
        assert_eq!(missing.exit_code(), 2);
    }

    #[test]
    fn synthesise_then_implement() {
        let dir = tempfile::tempdir().unwrap();
        let strategy = path(&dir, "s.csv");
        let trust = ["--alpha", "0.5", "--td", "2", "--k", "13"];
        let property = r#"<<requester>> R{"unpaid"}max=? [ Fc "got_k" ]"#;
        let mut args = vec!["synth"];
        args.extend(trust);
        args.extend(["-p", property, "--strategy-out", &strategy]);
        assert_eq!(exec(&args).unwrap(), 0);
        assert!(std::fs::read_to_string(&strategy).unwrap().starts_with("state,step,action\n"));

        let synthesised = path(&dir, "synth.csv");
        let mut args = vec!["check"];
        args.extend(trust);
        args.extend(["-p", property, "--values-out", &synthesised]);
        exec(&args).unwrap();
        let implemented = path(&dir, "impl.csv");
        let mut args = vec!["implement"];
        args.extend(trust);
        args.extend([
            "--strategy",
            &strategy,
            "-p",
            r#"<<provider_0,provider_1,provider_2>> R{"unpaid"}min=? [ Fc "got_k" ]"#,
            "--values-out",
            &implemented,
        ]);
        assert_eq!(exec(&args).unwrap(), 0);
        let (a, b) = (values(&synthesised), values(&implemented));
        let g = build_trust_game::<f64>(&cli_params(&trust)).unwrap();
        assert!((a[g.initial] - b[g.initial]).abs() < 1e-6);
        assert!(a[g.initial] > 0.0 && a[g.initial] <= 13.0);
    }

    fn cli_params(flags: &[&str]) -> TrustParams {
        let mut args = vec!["export-model"];
        args.extend(flags);
        match cli(&args).cmd {
            Cmd::ExportModel(a) => a.trust.params().unwrap(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let config = path(&dir, "p.cfg");
        std::fs::write(&config, "alpha = 0.5\nk = 4\nst = 4\n").unwrap();
        let p = cli_params(&["--config", &config, "--k", "6", "--c_min", "3"]);
        assert_eq!(p.alpha, num_rational::Rational64::new(1, 2));
        assert_eq!((p.k, p.c_min, p.st[0]), (6, 3, 4));
        let p = cli_params(&["--n-providers", "2", "--td", "1,inf"]);
        assert_eq!(p.td, vec![TrustDecrease::Units(1), TrustDecrease::Reset]);
        let mut args = vec!["export-model", "--config", &config, "--alpha", "2"];
        assert_eq!(exec(&args).unwrap_err().exit_code(), 2);
        args.truncate(3);
        args.extend(["--td", "1,2"]);
        assert_eq!(exec(&args).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn exported_model_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let out = path(&dir, "trust.smg");
        exec(&["export-model", "--k", "3", "--out", &out]).unwrap();
        let g: Smg64 = text::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let built = build_trust_game::<f64>(&TrustParams::default().with_k(3)).unwrap();
        assert_eq!(g.num_states(), built.game.num_states());
        assert_eq!(g.num_transitions(), built.game.num_transitions());
        assert_eq!(g.initial(), Some(built.initial));
    }

    #[test]
    fn figure_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv = path(&dir, "fig1.csv");
        let gp = path(&dir, "fig1.gp");
        let traces = path(&dir, "traces");
        let args = [
            "fig1", "--grid", "0.5/2,0.8/inf", "--k-to", "3", "--out", &csv, "--gnuplot", &gp, "--traces", &traces,
        ];
        assert_eq!(exec(&args).unwrap(), 0);
        let text = std::fs::read_to_string(&csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "alpha,td,k,unpaid_max,fraction");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("0.5,2,1,"));
        assert!(lines[4].starts_with("0.8,inf,1,"));
        assert!(std::fs::read_to_string(&gp).unwrap().contains("fig1.csv"));
        let trace = std::fs::read_to_string(dir.path().join("traces/strategy_0.8_inf.csv")).unwrap();
        assert!(trace.starts_with("state,services,phase,trust,action\n"));

        let csv2 = path(&dir, "fig2.csv");
        exec(&["fig2", "--td-grid", "2", "--k-to", "3", "--out", &csv2]).unwrap();
        let text = std::fs::read_to_string(&csv2).unwrap();
        assert_eq!(text.lines().next(), Some("sharing,td,k,min_cost,paid_count"));
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        let first: Vec<&str> = text.lines().find(|l| l.starts_with("strategic-heuristic,2,1,")).unwrap().split(',').collect();
        assert!(first[3..].iter().all(|v| v.parse::<f64>().unwrap().abs() < 1e-6), "{text}");

        let csv3 = path(&dir, "fig3.csv");
        exec(&["fig3", "--k", "3", "--out", &csv3]).unwrap();
        let text = std::fs::read_to_string(&csv3).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.lines().nth(1).unwrap().starts_with("original,0,"));

        let bad = exec(&["fig2", "--modes", "sometimes"]).unwrap_err();
        assert_eq!(bad.exit_code(), 2);
        let bad = exec(&["fig1", "--k-from", "4", "--k-to", "3"]).unwrap_err();
        assert_eq!(bad.exit_code(), 2);
    }

    #[test]
    fn reproducible_rows() {
        let rows = |_: u8| {
            let e = Engine::default();
            let grid = experiments::parse_grid("0.8/2").unwrap();
            experiments::fig1_csv(&experiments::run_fig1(&e, &TrustParams::default(), &grid, 1..=4, None).unwrap().rows)
        };
        assert_eq!(rows(0), rows(1));
    }

    #[test]
    fn exit_codes() {
        let solver = Failure::Engine(trustsmg::engine::EngineError::NotConverged { iterations: 3 });
        assert_eq!(solver.exit_code(), 3);
        let huge = Failure::Trust(trustsmg::trust::TrustError::StateExplosion { cap: 10 });
        assert_eq!(huge.exit_code(), 3);
        assert_eq!(exec(&["export-model", "--k", "5", "--state-cap", "10"]).unwrap_err().exit_code(), 3);
        assert_eq!(exec(&["--epsilon", "0", "export-model"]).unwrap_err().exit_code(), 2);
        let usage = Cli::try_parse_from(["trustsmg", "check"]).err().unwrap();
        assert_eq!(usage.exit_code(), 2);
    }
}
