use clap::{Args, Parser, Subcommand};
use sbvp::harness::config::{BcConfig, ConfigError};
use sbvp::harness::output::{write_atomic, OUTPUT_DIR_ENV};
use sbvp::harness::run::{self, Job, RunError, RunOutcome, EXIT_CONFIG};
use sbvp::harness::{find, load_config, registry};
use sbvp::hypotheses::{HypothesisReport, Verdict};
use sbvp::kernels::{BoundarySpec, Component};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sbvp",
    version,
    about = "Solve singular systems of boundary value problems and audit their hypotheses",
    after_help = format!("Outputs without an explicit path go to ${OUTPUT_DIR_ENV} (default: the current directory).")
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the configured hypotheses, then solve and write the solution.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Audit the configured hypotheses without solving.
    #[command(alias = "check-hypotheses")]
    Check {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Tabulate a Green's function on a K×K grid as CSV.
    Kernels(KernelArgs),
    /// The worked examples.
    Examples {
        #[command(subcommand)]
        command: ExamplesCommand,
    },
}

#[derive(Args)]
struct Overrides {
    /// Override a solver or output key, e.g. `--set N=64` or `--set output.format=csv`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn apply(&self, job: &mut Job) -> Result<(), ConfigError> {
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Field {
                path: kv.clone(),
                message: "expected KEY=VALUE".into(),
            })?;
            job.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum ExamplesCommand {
    /// List the registered examples.
    List,
    /// Run one example.
    Run {
        id: String,
        /// Audit the hypotheses only.
        #[arg(long)]
        check_only: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every example, one process each.
    RunAll {
        /// Audit the hypotheses only.
        #[arg(long)]
        check_only: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print an example as a run configuration.
    Export { id: String },
}

#[derive(Args)]
struct KernelArgs {
    /// Boundary family, as in the `type` key of a config.
    #[arg(long)]
    bc: String,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    /// Points per axis, including the ends.
    #[arg(long, default_value_t = 11)]
    grid: usize,
    /// Right end for half-line families.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { config, overrides } => with_config(&config, &overrides, run::solve),
        Command::Check { config, overrides } => with_config(&config, &overrides, run::check),
        Command::Kernels(args) => kernels(&args),
        Command::Examples { command } => examples(command),
    };
    ExitCode::from(code as u8)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn with_config(path: &Path, overrides: &Overrides, action: fn(&Job) -> Result<RunOutcome, RunError>) -> i32 {
    let cfg = match load_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut job = Job::from_config(&stem(path), &cfg);
    if let Err(e) = overrides.apply(&mut job) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    execute(&job, action)
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "FAILS",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn print_reports(reports: &[HypothesisReport]) {
    for r in reports {
        println!(
            "  {:<4} {:<12} margin {:.3e}",
            r.label.to_string(),
            verdict(r.holds),
            r.margin
        );
    }
}

fn execute(job: &Job, action: fn(&Job) -> Result<RunOutcome, RunError>) -> i32 {
    match action(job) {
        Ok(out) => {
            print_reports(&out.reports);
            for p in &out.written {
                println!("wrote {}", p.display());
            }
            if out.exit_code() != 0 {
                eprintln!("{}: not converged", job.name);
            }
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn examples(command: ExamplesCommand) -> i32 {
    match command {
        ExamplesCommand::List => {
            for r in registry() {
                println!("{:<30} {:<36} {}", r.id, r.anchor, r.summary);
            }
            0
        }
        ExamplesCommand::Run {
            id,
            check_only,
            overrides,
        } => {
            let Some(rec) = find(&id) else {
                eprintln!("error: unknown example `{id}` (see `sbvp examples list`)");
                return EXIT_CONFIG;
            };
            let mut job = Job::from_record(&rec);
            if let Err(e) = overrides.apply(&mut job) {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
            execute(&job, if check_only { run::check } else { run::solve })
        }
        ExamplesCommand::RunAll { check_only, overrides } => run_all(check_only, &overrides),
        ExamplesCommand::Export { id } => match find(&id) {
            Some(rec) => {
                let mut cfg = sbvp::harness::RunConfig::from_problem(&rec.problem);
                cfg.hypotheses = rec.hypotheses.clone();
                print!("{}", cfg.to_toml());
                if rec.problem.clamp.is_some() {
                    eprintln!("note: the example's retraction bound is not part of the config schema");
                }
                0
            }
            None => {
                eprintln!("error: unknown example `{id}`");
                EXIT_CONFIG
            }
        },
    }
}

/// Runs each example in its own child process, all at once, and reports the
/// worst exit code.
fn run_all(check_only: bool, overrides: &Overrides) -> i32 {
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: locating the executable: {e}");
            return run::EXIT_NUMERIC;
        }
    };
    let mut children = Vec::new();
    for r in registry() {
        let mut cmd = std::process::Command::new(&exe);
        cmd.args(["examples", "run", r.id]);
        if check_only {
            cmd.arg("--check-only");
        }
        for kv in &overrides.set {
            cmd.args(["--set", kv]);
        }
        cmd.stdout(std::process::Stdio::piped());
        match cmd.spawn() {
            Ok(child) => children.push((r.id, child)),
            Err(e) => {
                eprintln!("error: spawning {}: {e}", r.id);
                return run::EXIT_NUMERIC;
            }
        }
    }
    let mut worst = 0;
    for (id, child) in children {
        let code = match child.wait_with_output() {
            Ok(out) => out.status.code().unwrap_or(run::EXIT_NUMERIC),
            Err(_) => run::EXIT_NUMERIC,
        };
        println!("{id:<30} exit {code}");
        worst = worst.max(code);
    }
    worst
}

fn kernels(a: &KernelArgs) -> i32 {
    let bc = BcConfig {
        kind: a.bc.clone(),
        alpha: a.alpha,
        beta: a.beta,
        xi: a.xi,
        eta: a.eta,
        a1: a.a1,
        b1: a.b1,
        a2: a.a2,
        b2: a.b2,
    };
    let spec = match bc.to_spec() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if a.grid < 2 {
        eprintln!("error: --grid needs at least 2 points");
        return EXIT_CONFIG;
    }
    let (lo, hi) = if spec.is_half_line() { (0.0, a.m) } else { spec.domain() };
    let table = kernel_table(&spec, lo, hi, a.grid);
    match &a.out {
        Some(path) => match write_atomic(path, table.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: writing {}: {e}", path.display());
                run::EXIT_NUMERIC
            }
        },
        None => {
            print!("{table}");
            0
        }
    }
}

fn kernel_table(spec: &BoundarySpec, lo: f64, hi: f64, k: usize) -> String {
    let own = [spec.own_kernel(Component::First), spec.own_kernel(Component::Second)];
    let cross = [
        spec.cross_kernel(Component::First),
        spec.cross_kernel(Component::Second),
    ];
    let mut s = String::from("t,s,k1,k2");
    if cross[0].is_some() {
        s.push_str(",c1,c2");
    }
    s.push('\n');
    let at = |i: usize| lo + (hi - lo) * i as f64 / (k - 1) as f64;
    for i in 0..k {
        for j in 0..k {
            let (t, u) = (at(i), at(j));
            s.push_str(&format!("{t:e},{u:e},{:e},{:e}", own[0].eval(t, u), own[1].eval(t, u)));
            if let [Some(c1), Some(c2)] = &cross {
                s.push_str(&format!(",{:e},{:e}", c1.eval(t, u), c2.eval(t, u)));
            }
            s.push('\n');
        }
    }
    s
}
