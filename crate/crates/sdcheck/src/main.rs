use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdcheck::instance::Source;
use sdcheck::run::{cmd_fr, cmd_gen, cmd_run, cmd_table, write_table, BDir, RunConfig};
use sdcheck::{CliError, Result};
use sdcheck_core::diagnose::{DEFAULT_TAU, TAIL_WINDOW};
use sdcheck_core::facialred::FrMode;
use sdcheck_core::pathfollow::PathConfig;

/// Eigenvalue diagnostics along the central path of a spectrahedron.
#[derive(Parser)]
#[command(name = "sdcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "SDCHECK_OUT", default_value = "sdcheck-out", global = true)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a certified instance and write it as JSON.
    Gen(GenArgs),
    /// Follow the central path and write trace.csv, curves.csv and report.json.
    Run(RunArgs),
    /// Run facial reduction and write fr.json.
    Fr(FrArgs),
    /// Aggregate report.json rows from run directories.
    Table(TableArgs),
}

#[derive(Args)]
struct GenArgs {
    /// worst-case, slater, rank-r-sd1, direct-sum, or a full spec string.
    kind: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Child spec of a direct sum; repeat for each block.
    #[arg(long = "child")]
    children: Vec<String>,
    /// Output file; defaults to `<out-dir>/<spec>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    dir: OutDir,
}

#[derive(Args)]
struct RunArgs {
    /// Generator spec (e.g. `worst_case:n=5`) or instance JSON path; repeatable.
    #[arg(long = "instance", required = true)]
    instances: Vec<String>,
    #[arg(long, default_value_t = PathConfig::default().sigma)]
    sigma: f64,
    #[arg(long, default_value_t = PathConfig::default().k_max)]
    k_max: usize,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = TAIL_WINDOW)]
    tail_window: usize,
    /// JSON file with the path direction B as a list of rows; identity if absent.
    #[arg(long = "b")]
    b: Option<PathBuf>,
    /// Overrides every generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate the forward-error oracle at every point, not only the last.
    #[arg(long)]
    oracle_every_point: bool,
    /// Newton iteration budget per grid point.
    #[arg(long, default_value_t = PathConfig::default().max_iter)]
    max_iter: usize,
    /// Instances solved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    dir: OutDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Certified,
    Numerical,
}

#[derive(Args)]
struct FrArgs {
    #[arg(long)]
    instance: String,
    #[arg(long, value_enum, default_value = "numerical")]
    mode: ModeArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; defaults to `<out-dir>/fr.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    dir: OutDir,
}

#[derive(Args)]
struct TableArgs {
    /// Run directories, each holding a report.json.
    dirs: Vec<PathBuf>,
    /// Output CSV; defaults to `<out-dir>/table.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    dir: OutDir,
}

fn gen_source(a: &GenArgs) -> Result<Source> {
    let kind = a.kind.replace('-', "_");
    if kind.contains(':') || kind.contains('(') || kind.ends_with(".json") {
        return Source::parse(&a.kind);
    }
    let text = if kind == "direct_sum" {
        format!("direct_sum({})", a.children.join(";"))
    } else {
        let mut kv = Vec::new();
        for (key, v) in [("n", a.n), ("m", a.m), ("r", a.r)] {
            if let Some(v) = v {
                kv.push(format!("{key}={v}"));
            }
        }
        if let Some(s) = a.seed {
            kv.push(format!("seed={s}"));
        }
        format!("{kind}:{}", kv.join(","))
    };
    let src = Source::parse(&text)?;
    Ok(match a.seed {
        Some(s) if kind == "direct_sum" => src.with_seed(s),
        _ => src,
    })
}

fn gen(a: GenArgs) -> Result<u8> {
    let src = gen_source(&a)?;
    let out = a.out.unwrap_or_else(|| a.dir.out_dir.join(format!("{}.json", src.slug())));
    let (path, summary) = cmd_gen(&src, &out)?;
    println!("{summary}");
    println!("wrote {}", path.display());
    Ok(0)
}

fn run(a: RunArgs) -> Result<u8> {
    let sources = a.instances.iter().map(|s| Source::parse(s)).collect::<Result<Vec<_>>>()?;
    let mut cfg = RunConfig::new(sources, a.dir.out_dir);
    cfg.sigma = a.sigma;
    cfg.k_max = a.k_max;
    cfg.tau = a.tau;
    cfg.tail_window = a.tail_window;
    cfg.b = a.b.map_or(BDir::Identity, BDir::File);
    cfg.seed = a.seed;
    cfg.oracle_every_point = a.oracle_every_point;
    cfg.max_iter = a.max_iter;
    cfg.jobs = a.jobs;
    let mut code = 0;
    for (src, res) in cfg.sources.iter().zip(cmd_run(&cfg)) {
        match res {
            Ok(out) => {
                let rep = &out.report;
                match &rep.row {
                    Some(r) => println!(
                        "{}: r̄ = {}, d̲ = {}, N_λ = {}, ε̲ = {:.3e}, ε^b = {}, ε^f = {}",
                        out.source,
                        r.r_bar,
                        r.d_lower.map_or_else(|| "-".into(), |d| d.to_string()),
                        r.n_lambda,
                        r.eps_lower,
                        r.berr_final.map_or_else(|| "-".into(), |v| format!("{v:.3e}")),
                        r.ef_oracle.map_or_else(|| "-".into(), |v| format!("{v:.3e}")),
                    ),
                    None => println!("{}: no diagnostics", out.source),
                }
                if out.truncated {
                    eprintln!(
                        "warning: {}: path truncated ({}); partial artifacts in {}",
                        out.source,
                        rep.error.as_deref().unwrap_or("unknown cause"),
                        out.dir.display()
                    );
                }
                code = code.max(out.exit_code());
            }
            Err(e) => {
                eprintln!("error: {src}: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    Ok(code)
}

fn fr(a: FrArgs) -> Result<u8> {
    let mut src = Source::parse(&a.instance)?;
    if let Some(s) = a.seed {
        src = src.with_seed(s);
    }
    let mode = match a.mode {
        ModeArg::Certified => FrMode::Certified,
        ModeArg::Numerical => FrMode::Numerical,
    };
    let out = a.out.unwrap_or_else(|| a.dir.out_dir.join("fr.json"));
    let res = cmd_fr(&src, mode, &out);
    let file = match &res {
        Ok(f) => f.clone(),
        Err(e) => {
            if out.exists() && !matches!(e, CliError::Invalid(_) | CliError::Io { .. }) {
                eprintln!("partial chain written to {}", out.display());
            }
            return Err(res.unwrap_err());
        }
    };
    for (k, s) in file.steps.iter().enumerate() {
        println!("step {}: q = {}, face dimension after = {}", k + 1, s.q, s.z.len() - s.q);
    }
    println!("{src}: d = {}, r = {} ({})", file.d, file.r, file.mode);
    Ok(0)
}

fn table(a: TableArgs) -> Result<u8> {
    let (rows, warnings) = cmd_table(&a.dirs)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let out = a.out.unwrap_or_else(|| a.dir.out_dir.join("table.csv"));
    print!("{}", write_table(&rows, &out)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Fr(a) => fr(a),
        Command::Table(a) => table(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
