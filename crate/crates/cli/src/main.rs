//! `firesale`: clear, analyse and calibrate fire-sale scenarios from the
//! command line.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use firesale_core::calibration::{
    build_ccar_system, parse_records, parse_risk_weights, Shock, CCAR_RECORDS, CCAR_RISK_WEIGHTS,
    CCAR_THETA,
};
use firesale_core::case_study::{run_case_study, CaseStudy, Table};
use firesale_core::clearing::{clear_with_purchase, monotone_clear};
use firesale_core::policy::{Metric, PolicyAnalysis, PolicyReport, Subject};
use firesale_core::scenario::{SolverConfig, DIVERSIFICATION, TWO_BANK_HIGH, TWO_BANK_LOW};
use firesale_core::sensitivity::SensitivitySystem;
use firesale_core::sweep::{headers, row_fields, sweep, SweepParam, SweepSpec};
use firesale_core::{
    BankingSystem, ClearingResult, Direction, Error, LiquidationStrategy, ParamTag, ScenarioConfig,
    SolverOptions, StrategyChoice,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "firesale", version, about = "Fire-sale clearing under risk-weighted capital requirements")]
struct Cli {
    /// Scenario file, or one of builtin:two-bank-low, builtin:two-bank-high,
    /// builtin:diversification, builtin:ccar, builtin:ccar-shock (5% loss on
    /// non-marketable assets).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Liquidation strategy; overrides the scenario file.
    #[arg(long, global = true, value_parser = parse_strategy)]
    strategy: Option<StrategyChoice>,
    /// Clearing tolerance; overrides the scenario file.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Clearing iteration cap; overrides the scenario file.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Table)]
    output: Output,
    /// Accepted for reproducible scripting; every command is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Extremal {
    Greatest,
    Least,
}

#[derive(Subcommand)]
enum Command {
    /// Clearing prices, liquidations and solvency classes.
    Clear {
        /// Compute the greatest or least clearing prices (monotone strategies).
        #[arg(long, value_enum, conflicts_with = "purchase")]
        extremal: Option<Extremal>,
        /// Outside purchase of an asset, as ASSET=CASH. Repeatable.
        #[arg(long, value_parser = parse_purchase)]
        purchase: Vec<(usize, f64)>,
    },
    /// Derivatives of the clearing prices.
    Sensitivity {
        /// theta, alpha:K, shortfall:I, holding:J,K or purchase:K. Repeatable;
        /// every parameter when omitted.
        #[arg(long)]
        param: Vec<String>,
    },
    /// Costs of regulation and bailout values.
    Policy {
        /// cr, crl, cmi, dcb, dpb, icb or ipb; all when omitted.
        #[arg(long)]
        metric: Option<String>,
        /// Subject bank (the recipient for dcb and dpb).
        #[arg(long)]
        bank: Option<String>,
        /// Funding bank for dpb and ipb.
        #[arg(long)]
        from: Option<String>,
        /// Asset index for icb and ipb.
        #[arg(long)]
        asset: Option<usize>,
    },
    /// Build a scenario file from aggregate balance sheets.
    Calibrate {
        /// Use the bundled six-bank data.
        #[arg(long, conflicts_with_all = ["records", "risk_weights"])]
        ccar: bool,
        #[arg(long, requires = "risk_weights")]
        records: Option<PathBuf>,
        #[arg(long, requires = "records")]
        risk_weights: Option<PathBuf>,
        /// Capital threshold.
        #[arg(long, default_value_t = CCAR_THETA)]
        theta: f64,
        /// Fraction of non-marketable assets lost after calibration.
        #[arg(long, default_value_t = 0.0)]
        shock: f64,
    },
    /// Run a bundled case study and compare with its reference values.
    CaseStudy {
        #[arg(value_parser = parse_case)]
        name: CaseStudy,
    },
    /// Clear the scenario over a grid of one parameter.
    Sweep {
        /// lambda, shock or b:K.
        #[arg(long)]
        param: String,
        /// Comma-separated grid values.
        #[arg(long, conflicts_with = "range")]
        grid: Option<String>,
        /// START:STOP:STEP, inclusive.
        #[arg(long)]
        range: Option<String>,
    },
}

fn parse_strategy(s: &str) -> Result<StrategyChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_case(s: &str) -> Result<CaseStudy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_purchase(s: &str) -> Result<(usize, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected ASSET=CASH")?;
    let k = k.trim().parse().map_err(|_| format!("bad asset index `{k}`"))?;
    let v = v.trim().parse().map_err(|_| format!("bad amount `{v}`"))?;
    Ok((k, v))
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. }
            | Error::InnerSolver { .. }
            | Error::NotMonotone { .. }
            | Error::SingularSensitivity { .. }
            | Error::KinkDetected { .. } => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} accepted; no command uses randomness");
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Loaded {
    system: BankingSystem,
    strategy: StrategyChoice,
    opts: SolverOptions,
}

fn load(cli: &Cli) -> Result<Loaded, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| invalid("this command needs --config"))?;
    let cfg = match path {
        "builtin:two-bank-low" => ScenarioConfig::parse(TWO_BANK_LOW)?,
        "builtin:two-bank-high" => ScenarioConfig::parse(TWO_BANK_HIGH)?,
        "builtin:diversification" => ScenarioConfig::parse(DIVERSIFICATION)?,
        "builtin:ccar" | "builtin:ccar-shock" => ScenarioConfig::from_system(
            &firesale_core::calibration::ccar_system(if path == "builtin:ccar" { 0.0 } else { 0.05 })?,
            StrategyChoice::Proportional,
            SolverConfig::default(),
        ),
        p if p.starts_with("builtin:") => return Err(invalid(format!("unknown bundled scenario `{p}`"))),
        p => ScenarioConfig::load(p)?,
    };
    let mut opts = cfg.solver_options();
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(invalid("--tol must be positive"));
        }
        opts.tol = t;
    }
    if let Some(m) = cli.max_iter {
        if m == 0 {
            return Err(invalid("--max-iter must be positive"));
        }
        opts.max_iter = m;
    }
    Ok(Loaded {
        system: cfg.system()?,
        strategy: cli.strategy.unwrap_or(cfg.strategy),
        opts,
    })
}

fn price_taking(l: &Loaded) -> Result<LiquidationStrategy, Failure> {
    l.strategy
        .liquidation()
        .ok_or_else(|| invalid("this command needs a price-taking strategy, not pm-equilibrium"))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let mut out = Printer::new(cli.output);
    match &cli.command {
        Command::Clear { extremal, purchase } => {
            let l = load(cli)?;
            let c = if let Some(e) = extremal {
                let dir = match e {
                    Extremal::Greatest => Direction::Greatest,
                    Extremal::Least => Direction::Least,
                };
                monotone_clear(&l.system, &price_taking(&l)?, dir, &l.opts)?
            } else if !purchase.is_empty() {
                let mut beta = vec![0.0; l.system.m()];
                for &(k, v) in purchase {
                    *beta
                        .get_mut(k)
                        .ok_or_else(|| invalid(format!("asset index {k} out of range")))? += v;
                }
                clear_with_purchase(&l.system, &price_taking(&l)?, &beta, &l.opts)?
            } else {
                l.strategy.clear(&l.system, &l.opts)?
            };
            print_clearing(&mut out, &l.system, &c)?;
        }
        Command::Sensitivity { param } => {
            let l = load(cli)?;
            let strategy = price_taking(&l)?;
            let params = if param.is_empty() {
                ParamTag::all(l.system.n(), l.system.m())
            } else {
                param.iter().map(|p| p.parse()).collect::<Result<Vec<ParamTag>, Error>>()?
            };
            let c = l.strategy.clear(&l.system, &l.opts)?;
            let sens = SensitivitySystem::new(&l.system, &strategy, &c)?;
            let mut t = table("sensitivity", &["param", "asset", "dq", "dq_bar"]);
            for p in params {
                p.validate(&l.system)?;
                let r = sens.solve(p)?;
                for k in 0..l.system.m() {
                    t.rows.push(vec![p.to_string(), k.to_string(), r.dq[k].to_string(), r.dq_bar[k].to_string()]);
                }
            }
            out.table(&t)?;
            let mut info = table("system", &["item", "value"]);
            info.rows.push(vec!["condition_number".into(), sens.condition_number().to_string()]);
            let warn = firesale_core::liquidation::boundary_banks(&l.system, &c.prices);
            let names: Vec<&str> = warn.iter().map(|&i| l.system.banks[i].name.as_str()).collect();
            info.rows.push(vec!["boundary_banks".into(), names.join(" ")]);
            out.table(&info)?;
        }
        Command::Policy {
            metric,
            bank,
            from,
            asset,
        } => {
            let l = load(cli)?;
            let strategy = price_taking(&l)?;
            let c = l.strategy.clear(&l.system, &l.opts)?;
            let pa = PolicyAnalysis::new(&l.system, &strategy, &c)?;
            let index = |name: &Option<String>| -> Result<Option<usize>, Failure> {
                name.as_ref()
                    .map(|n| {
                        l.system
                            .bank_index(n)
                            .ok_or_else(|| invalid(format!("unknown bank `{n}`")))
                    })
                    .transpose()
            };
            let (bank, from) = (index(bank)?, index(from)?);
            let metrics = match metric {
                Some(m) => vec![m.parse::<Metric>()?],
                None => vec![Metric::Cr, Metric::Crl, Metric::Cmi, Metric::Dcb, Metric::Dpb, Metric::Icb, Metric::Ipb],
            };
            let mut reports = Vec::new();
            for m in metrics {
                match (m, from, bank, asset) {
                    (Metric::Dpb, Some(j), Some(i), _) => reports.push(pa.direct_private_bailout(j, i)?),
                    (Metric::Ipb, Some(j), _, Some(k)) => reports.push(pa.indirect_private_bailout(j, *k)?),
                    _ => reports.extend(
                        pa.all(m)?
                            .into_iter()
                            .filter(|r| keep(r, bank, from, *asset)),
                    ),
                }
            }
            let mut t = table("policy", &["metric", "subject", "value", "interpretation"]);
            for r in &reports {
                t.rows.push(vec![
                    r.metric.to_string(),
                    r.subject_label(&l.system),
                    r.value.to_string(),
                    r.sign_interpretation.clone(),
                ]);
            }
            out.table(&t)?;
            if metric.is_none() {
                pa.direct_vs_indirect()?;
            }
        }
        Command::Calibrate {
            ccar,
            records,
            risk_weights,
            theta,
            shock,
        } => {
            let (recs, alpha) = if *ccar {
                (parse_records(CCAR_RECORDS)?, parse_risk_weights(CCAR_RISK_WEIGHTS)?)
            } else if let (Some(r), Some(w)) = (records, risk_weights) {
                (parse_records(&read(r)?)?, parse_risk_weights(&read(w)?)?)
            } else {
                return Err(invalid("calibrate needs --ccar or --records with --risk-weights"));
            };
            let sys = build_ccar_system(&recs, &alpha, *theta, &Shock::loss(*shock)?)?;
            let solver = SolverConfig {
                tol: cli.tol.unwrap_or(SolverConfig::default().tol),
                max_iter: cli.max_iter.unwrap_or(SolverConfig::default().max_iter),
            };
            let cfg = ScenarioConfig::from_system(&sys, cli.strategy.unwrap_or(StrategyChoice::Proportional), solver);
            io::stdout().write_all(cfg.to_toml()?.as_bytes())?;
        }
        Command::CaseStudy { name } => {
            let report = run_case_study(*name)?;
            for t in &report.tables {
                out.table(t)?;
            }
            let mut checks = table("checks", &["check", "expected", "actual", "result"]);
            for c in &report.checks {
                checks.rows.push(vec![
                    c.name.clone(),
                    c.expected.clone(),
                    c.actual.clone(),
                    if c.pass { "pass" } else { "FAIL" }.into(),
                ]);
            }
            out.table(&checks)?;
            if !report.passed() {
                return Ok(EXIT_MISMATCH);
            }
        }
        Command::Sweep { param, grid, range } => {
            let l = load(cli)?;
            let p: SweepParam = param.parse()?;
            let spec = match (grid, range) {
                (Some(g), None) => {
                    let values = g
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| invalid(format!("bad grid value `{v}`"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    SweepSpec::new(p, values)?
                }
                (None, Some(r)) => {
                    let parts: Vec<f64> = r
                        .split(':')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| invalid(format!("bad range `{r}`"))))
                        .collect::<Result<_, _>>()?;
                    if parts.len() != 3 {
                        return Err(invalid("--range takes START:STOP:STEP"));
                    }
                    SweepSpec::linspace(p, parts[0], parts[1], parts[2])?
                }
                _ => return Err(invalid("sweep needs --grid or --range")),
            };
            let rows = sweep(&l.system, l.strategy, &l.opts, &spec);
            let mut t = Table {
                title: "sweep".into(),
                headers: headers(&l.system, p),
                rows: Vec::new(),
            };
            t.rows.extend(rows.iter().map(|r| row_fields(&l.system, r)));
            out.table(&t)?;
        }
    }
    Ok(0)
}

fn keep(r: &PolicyReport, bank: Option<usize>, from: Option<usize>, asset: Option<usize>) -> bool {
    let (b, f, a) = match r.subject {
        Subject::System => (None, None, None),
        Subject::Bank(i) => (Some(i), None, None),
        Subject::Asset(k) => (None, None, Some(k)),
        Subject::BankPair { from, to } => (Some(to), Some(from), None),
        Subject::BankAsset { bank, asset } => (None, Some(bank), Some(asset)),
    };
    let ok = |want: Option<usize>, have: Option<usize>| want.is_none() || have.is_none() || want == have;
    ok(bank, b) && ok(from, f) && ok(asset, a)
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn table(title: &str, headers: &[&str]) -> Table {
    Table {
        title: title.into(),
        headers: headers.iter().map(|h| h.to_string()).collect(),
        rows: Vec::new(),
    }
}

fn print_clearing(out: &mut Printer, system: &BankingSystem, c: &ClearingResult) -> Result<(), Failure> {
    let mut assets = table("assets", &["asset", "q", "q_bar", "sold"]);
    let sold = c.sold();
    for k in 0..system.m() {
        assets.rows.push(vec![
            k.to_string(),
            c.prices.q[k].to_string(),
            c.prices.q_bar[k].to_string(),
            sold[k].to_string(),
        ]);
    }
    out.table(&assets)?;
    let mut headers = vec!["bank".to_string(), "class".to_string()];
    headers.extend((0..system.m()).map(|k| format!("gamma_{k}")));
    let mut banks = Table {
        title: "banks".into(),
        headers,
        rows: Vec::new(),
    };
    for (i, b) in system.banks.iter().enumerate() {
        let mut row = vec![b.name.clone(), c.classes[i].to_string()];
        row.extend(c.gamma.row(i).iter().map(|v| v.to_string()));
        banks.rows.push(row);
    }
    out.table(&banks)?;
    let mut info = table("solver", &["item", "value"]);
    info.rows.push(vec!["iterations".into(), c.iterations.to_string()]);
    info.rows.push(vec!["residual".into(), c.residual.to_string()]);
    info.rows.push(vec!["uniqueness".into(), c.uniqueness.as_str().into()]);
    info.rows.push(vec!["market_cap".into(), system.market_cap(&c.prices.q).to_string()]);
    out.table(&info)
}

/// Writes tables to stdout. CSV mode precedes each table with a `# title`
/// line and separates tables with a blank line.
struct Printer {
    mode: Output,
    first: bool,
}

impl Printer {
    fn new(mode: Output) -> Self {
        Self { mode, first: true }
    }

    fn table(&mut self, t: &Table) -> Result<(), Failure> {
        let stdout = io::stdout();
        let mut w = stdout.lock();
        if !self.first {
            writeln!(w)?;
        }
        self.first = false;
        match self.mode {
            Output::Csv => {
                writeln!(w, "# {}", t.title)?;
                let mut csv = csv::Writer::from_writer(&mut w);
                csv.write_record(&t.headers)?;
                for r in &t.rows {
                    csv.write_record(r)?;
                }
                csv.flush()?;
            }
            Output::Table => {
                let mut width: Vec<usize> = t.headers.iter().map(|h| h.chars().count()).collect();
                for r in &t.rows {
                    for (wd, cell) in width.iter_mut().zip(r) {
                        *wd = (*wd).max(cell.chars().count());
                    }
                }
                writeln!(w, "{}", t.title)?;
                let line = |cells: &[String]| {
                    cells
                        .iter()
                        .zip(&width)
                        .map(|(c, wd)| format!("{c:<wd$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                        .trim_end()
                        .to_string()
                };
                writeln!(w, "{}", line(&t.headers))?;
                writeln!(w, "{}", width.iter().map(|wd| "-".repeat(*wd)).collect::<Vec<_>>().join("  "))?;
                for r in &t.rows {
                    writeln!(w, "{}", line(r))?;
                }
            }
        }
        Ok(())
    }
}
