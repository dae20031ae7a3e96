use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use islab::gronwall::{
    domination_suite, gron1_bound, gron1_oracle, gron1_uniform_bound, gron2_bound, gron2_oracle,
    gron2_uniform_bound, mu_star, Forcing, Gron1Problem, Gron2Problem, OracleOptions,
};
use islab::harness::{self, exit_code_for, RunReport, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_PASS};
use islab::scenario::{load_scenario, preset, preset_names, save_scenario, CheckId, ModelKind, Scenario};
use islab::Error;

// stdout writes propagate errors so a closed pipe ends the program quietly
macro_rules! outln {
    ($($t:tt)*) => { writeln!(std::io::stdout().lock(), $($t)*)? };
}

macro_rules! out {
    ($($t:tt)*) => { write!(std::io::stdout().lock(), $($t)*)? };
}

#[derive(Parser)]
#[command(name = "islab", version, about = "Inertial spin flocking laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Scenario JSON file
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Bundled preset name
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for series CSVs and report.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the generator seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

impl Source {
    fn load(&self) -> islab::Result<Scenario> {
        let mut sc = match (&self.scenario, &self.preset) {
            (Some(p), _) => load_scenario(p)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(Error::Scenario {
                    path: "--scenario".into(),
                    message: "give --scenario PATH or --preset NAME".into(),
                })
            }
        };
        if let Some(s) = self.seed {
            sc = harness::with_axis(&sc, "seed", s as f64)?;
        }
        if let Some(dt) = self.dt {
            sc = harness::with_axis(&sc, "dt", dt)?;
        }
        if let Some(t) = self.t_end {
            sc = harness::with_axis(&sc, "t_end", t)?;
        }
        Ok(sc)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its series without running checks
    Simulate(Source),
    /// Run one theorem check on a scenario
    Check {
        #[arg(value_enum)]
        which: Which,
        #[command(flatten)]
        src: Source,
    },
    /// Second-order Gronwall bounds and oracles
    Gronwall {
        #[command(subcommand)]
        cmd: GronwallCmd,
    },
    /// Compare a scenario with its reduced model
    Reduce {
        #[arg(value_enum)]
        which: Reduction,
        #[command(flatten)]
        src: Source,
    },
    /// Run a scenario once per value of a numeric field
    Sweep {
        #[command(flatten)]
        src: Source,
        /// chi, gamma, k, delta0, dt, t_end, seed or kbar
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty
        #[arg(long, default_value = "", value_parser = parse_list)]
        values: Values,
    },
    /// Run every declared check of a scenario and print the JSON report
    Report(Source),
    /// List bundled presets, or write one to a file
    Presets {
        #[arg(long, requires = "save")]
        name: Option<String>,
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Thm1,
    Thm2,
    Ha,
    Chy,
    CsFlock,
}

impl Which {
    fn id(self) -> CheckId {
        match self {
            Which::Thm1 => CheckId::Thm1,
            Which::Thm2 => CheckId::Thm2,
            Which::Ha => CheckId::Ha,
            Which::Chy => CheckId::Chy,
            Which::CsFlock => CheckId::CsFlock,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Reduction {
    Kuramoto,
    Cs,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    #[arg(long)]
    c: f64,
    /// Convolution form only: coefficient of the e^{-nu t} forcing
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Selects the convolution form
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    y0: f64,
    #[arg(long, default_value_t = 0.0)]
    y1: f64,
    /// Linear form only: forcing amplitude of g = A e^{-rate t}
    #[arg(long, default_value_t = 0.0)]
    g_amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    g_rate: f64,
}

enum Problem {
    Linear(Gron1Problem),
    Convolution(Gron2Problem),
}

impl ProblemArgs {
    fn problem(&self) -> islab::Result<Problem> {
        Ok(match self.nu {
            Some(nu) => {
                let p = Gron2Problem { a: self.a, b: self.b, c: self.c, d: self.d, nu, y0: self.y0, y1: self.y1 };
                p.validate()?;
                Problem::Convolution(p)
            }
            None => {
                let g = if self.g_amplitude == 0.0 {
                    Forcing::Zero
                } else {
                    Forcing::Exponential { amplitude: self.g_amplitude, rate: self.g_rate }
                };
                Problem::Linear(Gron1Problem::new(self.a, self.b, self.c, self.y0, self.y1, g)?)
            }
        })
    }
}

#[derive(Subcommand)]
enum GronwallCmd {
    /// Evaluate the pointwise bound at the given times, plus the uniform bound
    Eval {
        #[command(flatten)]
        p: ProblemArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,5,10")]
        times: Vec<f64>,
    },
    /// Solve the equality ODE and print t, y, bound as CSV
    Oracle {
        #[command(flatten)]
        p: ProblemArgs,
        #[arg(long = "t-end", default_value_t = 20.0)]
        t_end: f64,
    },
    /// Seeded random domination suite
    Suite {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long = "t-end", default_value_t = 20.0)]
        t_end: f64,
    },
}

#[derive(Clone, Debug)]
struct Values(Vec<f64>);

fn parse_list(text: &str) -> Result<Values, String> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Values)
}

fn print_summary(r: &RunReport) -> std::io::Result<()> {
    for (name, c) in &r.checks {
        let status = format!("{:?}", c.status).to_lowercase();
        outln!("{name}: {status} ({})", c.detail);
    }
    outln!(
        "{}: {} passed, {} failed, {} inconclusive",
        r.scenario, r.summary.passed, r.summary.failed, r.summary.inconclusive
    );
    Ok(())
}

fn run_checks(src: &Source, mut sc: Scenario, checks: Option<Vec<CheckId>>) -> anyhow::Result<i32> {
    if let Some(c) = checks {
        sc.checks = c;
    }
    let r = harness::run(&sc, src.out.as_deref())?;
    print_summary(&r)?;
    Ok(r.exit_code)
}

fn gronwall(cmd: GronwallCmd) -> anyhow::Result<i32> {
    match cmd {
        GronwallCmd::Eval { p, times } => {
            let mut out = serde_json::Map::new();
            match p.problem()? {
                Problem::Linear(q) => {
                    let vals: Vec<_> = times
                        .iter()
                        .map(|&t| gron1_bound(&q, t).map(|b| serde_json::json!({ "t": t, "bound": b })))
                        .collect::<islab::Result<_>>()?;
                    out.insert("form".into(), "linear".into());
                    out.insert("case".into(), serde_json::to_value(q.case())?);
                    out.insert("bounds".into(), vals.into());
                    match gron1_uniform_bound(&q) {
                        Ok(u) => out.insert("uniform".into(), serde_json::to_value(u)?),
                        Err(e) => out.insert("uniform".into(), e.to_string().into()),
                    };
                }
                Problem::Convolution(q) => {
                    out.insert("form".into(), "convolution".into());
                    out.insert("mu_star".into(), serde_json::to_value(mu_star(&q))?);
                    let vals: Vec<serde_json::Value> = times
                        .iter()
                        .map(|&t| match gron2_bound(&q, t) {
                            Ok(b) => serde_json::json!({ "t": t, "bound": b }),
                            Err(e) => serde_json::json!({ "t": t, "error": e.to_string() }),
                        })
                        .collect();
                    out.insert("bounds".into(), vals.into());
                    match gron2_uniform_bound(&q) {
                        Ok(u) => out.insert("uniform".into(), u.into()),
                        Err(e) => out.insert("uniform".into(), e.to_string().into()),
                    };
                }
            }
            outln!("{}", serde_json::to_string_pretty(&out)?);
            Ok(EXIT_PASS)
        }
        GronwallCmd::Oracle { p, t_end } => {
            let opts = OracleOptions::default();
            outln!("t,y,bound");
            let mut pass = true;
            match p.problem()? {
                Problem::Linear(q) => {
                    let o = gron1_oracle(&q, t_end, &opts)?;
                    for (t, y) in o.t.iter().zip(&o.y) {
                        let b = gron1_bound(&q, *t)?;
                        pass &= y[0] <= b + islab::gronwall::DOMINATION_TOL;
                        outln!("{t:.16e},{:.16e},{b:.16e}", y[0]);
                    }
                }
                Problem::Convolution(q) => {
                    let o = gron2_oracle(&q, t_end, &opts)?;
                    for (t, y) in o.t.iter().zip(&o.y) {
                        let b = gron2_bound(&q, *t)?;
                        pass &= y[0] <= b + islab::gronwall::DOMINATION_TOL;
                        outln!("{t:.16e},{:.16e},{b:.16e}", y[0]);
                    }
                }
            }
            Ok(if pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
        GronwallCmd::Suite { seed, count, t_end } => {
            let r = domination_suite(seed, count, t_end)?;
            let worst = r.rows.iter().map(|r| r.worst_gap).fold(f64::NEG_INFINITY, f64::max);
            outln!(
                "{} problems, {} rejected draws, worst oracle - bound {worst:e}, closed-form error {:e}, tail {:e}, mu* error {:e}: {}",
                r.rows.len(),
                r.rejected,
                r.closed_form_error,
                r.vanishing_tail,
                r.mu_star_error,
                if r.pass { "pass" } else { "fail" }
            );
            Ok(if r.pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Simulate(src) => {
            let sc = src.load()?;
            run_checks(&src, sc, Some(Vec::new()))
        }
        Command::Check { which, src } => {
            let sc = src.load()?;
            run_checks(&src, sc, Some(vec![which.id()]))
        }
        Command::Reduce { which, src } => {
            let sc = src.load()?;
            let (model, id) = match which {
                Reduction::Kuramoto => (ModelKind::Kuramoto, CheckId::Embedding),
                Reduction::Cs => (ModelKind::Cs, CheckId::ChiLimit),
            };
            if sc.model != model {
                return Err(Error::Scenario {
                    path: "model".into(),
                    message: format!("this reduction needs a {model:?} scenario"),
                }
                .into());
            }
            run_checks(&src, sc, Some(vec![id]))
        }
        Command::Report(src) => {
            let sc = src.load()?;
            let r = harness::run(&sc, src.out.as_deref())?;
            out!("{}", r.to_json()?);
            Ok(r.exit_code)
        }
        Command::Sweep { src, axis, values } => {
            let sc = src.load()?;
            let r = harness::sweep(&sc, &axis, &values.0, src.out.as_deref())?;
            out!("{}", r.aggregate_csv());
            Ok(r.exit_code)
        }
        Command::Gronwall { cmd } => gronwall(cmd),
        Command::Presets { name, save } => {
            match (name, save) {
                (Some(n), Some(path)) => {
                    save_scenario(&preset(&n)?, &path).with_context(|| format!("writing {}", path.display()))?
                }
                _ => {
                    for n in preset_names() {
                        outln!("{n}");
                    }
                }
            }
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are invalid input, distinct from a failed check
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID as u8) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(EXIT_CHECK_FAILED, exit_code_for);
            ExitCode::from(code as u8)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<std::io::Error>()
        .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}
