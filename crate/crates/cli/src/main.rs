mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use h2reduce::balanced::BtMethod;
use h2reduce::lti::{bode_csv, bode_data, h2_error_norm, hinf_norm, HinfOptions};
use h2reduce::models::{gen_msd, load_model, load_system, save_point, save_system, ModelFile};
use h2reduce::objective::build_data_from_state_space;
use h2reduce::optimizer::trace_csv;
use h2reduce::pipeline::{reduce_with, Method, ReduceOptions, RunReport};
use h2reduce::{Error, Result};

use config::ConfigFile;

/// Stability-preserving H2 model reduction.
#[derive(Parser)]
#[command(name = "h2reduce", version)]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark model.
    Gen {
        #[command(subcommand)]
        model: GenModel,
    },
    /// Reduce a model by balanced truncation or trust-region refinement.
    Reduce(ReduceArgs),
    /// Error norms between a full and a reduced model.
    Eval(EvalArgs),
    /// Frequency response of one or more models as CSV.
    Bode(BodeArgs),
    /// Reproduce the benchmark tables.
    Bench {
        #[command(subcommand)]
        model: BenchModel,
    },
}

#[derive(Subcommand)]
enum GenModel {
    /// Mass-spring-damper chain.
    Msd {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bt,
    Riemannian,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bt => Method::Bt,
            MethodArg::Riemannian => Method::Riemannian,
        }
    }
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long, value_enum, default_value = "riemannian")]
    method: MethodArg,
    /// Reduced model output (structured schema).
    #[arg(long)]
    out: PathBuf,
    /// Report output; defaults to `<out>` with a `.report.json` suffix.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    delta_bar: Option<f64>,
    #[arg(long)]
    gamma_prime: Option<f64>,
    /// Per-iteration optimizer trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Start the trust-region run from this structured model instead of BT.
    #[arg(long)]
    init: Option<PathBuf>,
    /// `key=value` file with optimizer settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// How balanced truncation removes weak states: matchdc or truncate.
    #[arg(long)]
    bt_variant: Option<String>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum NormArg {
    H2,
    Hinf,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    full: PathBuf,
    #[arg(long)]
    reduced: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    norm: NormArg,
}

#[derive(Args)]
struct BodeArgs {
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-2)]
    wmin: f64,
    #[arg(long, default_value_t = 1e2)]
    wmax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchModel {
    /// Mass-spring-damper chain benchmark.
    Msd {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [4, 6, 8, 10, 30])]
        orders: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_validation() { 2 } else { 3 };
            eprintln!("error: {e}");
            if json {
                let kind = if code == 2 { "validation" } else { "numerical" };
                println!("{}", json!({ "error": e.to_string(), "kind": kind }));
            }
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { model: GenModel::Msd { n, out } } => {
            let (sys, _) = gen_msd(n)?;
            save_system(&sys, &out)?;
            emit(cli.json, json!({ "n": n, "out": out }), || {
                format!("wrote {n}-state MSD model to {}", out.display())
            });
            Ok(())
        }
        Command::Reduce(args) => cmd_reduce(args, cli.json),
        Command::Eval(args) => cmd_eval(args),
        Command::Bode(args) => cmd_bode(args, cli.json),
        Command::Bench { model: BenchModel::Msd { n, orders, out } } => cmd_bench(n, &orders, &out, cli.json),
    }
}

fn emit(json: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    if json {
        println!("{value}");
    } else {
        println!("{}", text());
    }
}

fn reduce_options(args: &ReduceArgs) -> Result<ReduceOptions> {
    let cfg = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut opts = ReduceOptions::new(args.order, args.method.into());
    let tr = &mut opts.trust_region;
    if let Some(v) = args.max_iter.or(cfg.get("max_iter")?) {
        tr.max_iters = v;
    }
    tr.grad_tol = args.grad_tol.or(cfg.get("grad_tol")?);
    tr.delta0 = args.delta0.or(cfg.get("delta0")?);
    tr.delta_bar = args.delta_bar.or(cfg.get("delta_bar")?);
    if let Some(v) = args.gamma_prime.or(cfg.get("gamma_prime")?) {
        tr.gamma_prime = v;
    }
    tr.tcg_max_inner = cfg.get("tcg_max_inner")?;
    if let Some(v) = cfg.get("tcg_kappa")? {
        tr.tcg_kappa = v;
    }
    if let Some(v) = cfg.get("tcg_theta")? {
        tr.tcg_theta = v;
    }
    if let Some(v) = cfg.get("restarts")? {
        tr.restarts = v;
    }
    if let Some(v) = cfg.get("hinf_tol")? {
        opts.hinf = HinfOptions { tol: v, ..HinfOptions::default() };
    }
    let variant = args.bt_variant.clone().or(cfg.get("bt_variant")?);
    if let Some(v) = variant {
        opts.bt_method = v.parse::<BtMethod>()?;
    }
    if let Some(path) = &args.init {
        match load_model(path)? {
            ModelFile::Structured(p) => opts.init = Some(p),
            ModelFile::Full(_) => {
                return Err(Error::Domain("--init expects a structured {J,R,B,C} model".into()));
            }
        }
    }
    Ok(opts)
}

fn default_report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.report.json"))
}

fn cmd_reduce(args: ReduceArgs, json: bool) -> Result<()> {
    let opts = reduce_options(&args)?;
    let full = load_system(&args.input)?;
    full.ensure_stable()?;
    let data = build_data_from_state_space(&full)?;
    let red = reduce_with(&full, &data, &opts)?;

    save_point(&red.point, &args.out)?;
    let report_path = args.report.clone().unwrap_or_else(|| default_report_path(&args.out));
    let report_json = serde_json::to_string_pretty(&red.report).expect("report serializes");
    fs::write(&report_path, report_json + "\n")?;
    if let Some(path) = &args.trace {
        fs::write(path, trace_csv(&red.trace))?;
    }

    let status = red.status.map(|s| format!("{s:?}"));
    let r = &red.report;
    emit(json, json!({ "report": r, "status": status, "out": args.out, "report_path": report_path }), || {
        let mut s = format!(
            "{} r={}: h2 error {:.6e}, hinf error {:.6e}, sigma_(r+1) {:.6e}, grad norm {:.3e}, {} iterations",
            r.method, r.r, r.h2_error, r.hinf_error, r.sigma_next, r.grad_norm_final, r.iterations
        );
        if let Some(st) = &status {
            let _ = write!(s, " ({st})");
        }
        s
    });
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let full = load_system(&args.full)?;
    let reduced = load_system(&args.reduced)?;
    if (full.inputs(), full.outputs()) != (reduced.inputs(), reduced.outputs()) {
        return Err(Error::DimensionMismatch(format!(
            "full model is {}x{}, reduced is {}x{}",
            full.outputs(),
            full.inputs(),
            reduced.outputs(),
            reduced.inputs()
        )));
    }
    let identical = full.a == reduced.a && full.b == reduced.b && full.c == reduced.c;
    let mut out = serde_json::Map::new();
    if args.norm != NormArg::Hinf {
        let h2 = if identical { 0.0 } else { h2_error_norm(&full, &reduced)? };
        out.insert("h2".into(), json!(h2));
    }
    if args.norm != NormArg::H2 {
        let hinf = if identical {
            0.0
        } else {
            hinf_norm(&full.difference(&reduced)?, HinfOptions::default())?.value
        };
        out.insert("hinf".into(), json!(hinf));
    }
    println!("{}", serde_json::Value::Object(out));
    Ok(())
}

fn cmd_bode(args: BodeArgs, json: bool) -> Result<()> {
    let responses = args
        .input
        .iter()
        .map(|p| bode_data(&load_system(p)?, args.wmin, args.wmax, args.points))
        .collect::<Result<Vec<_>>>()?;
    let csv = bode_csv(&responses)?;
    fs::write(&args.out, &csv)?;
    let columns = csv.lines().next().map_or(0, |h| h.split(',').count());
    emit(json, json!({ "out": args.out, "columns": columns, "rows": args.points }), || {
        format!("wrote {} rows x {columns} columns to {}", args.points, args.out.display())
    });
    Ok(())
}

struct BenchRow {
    bt: RunReport,
    proposed: RunReport,
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("H2REDUCE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Domain(format!("H2REDUCE_THREADS must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Domain(format!("could not start worker threads: {e}")))
}

fn cmd_bench(n: usize, orders: &[usize], out: &Path, json: bool) -> Result<()> {
    let (sys, _) = gen_msd(n)?;
    let data = build_data_from_state_space(&sys)?;
    fs::create_dir_all(out)?;
    save_system(&sys, out.join(format!("msd{n}.json")))?;

    let run_order = |r: usize| -> Result<BenchRow> {
        let bt = reduce_with(&sys, &data, &ReduceOptions::new(r, Method::Bt))?;
        let proposed = reduce_with(&sys, &data, &ReduceOptions::new(r, Method::Riemannian))?;
        save_point(&bt.point, out.join(format!("bt_r{r}.json")))?;
        save_point(&proposed.point, out.join(format!("riemannian_r{r}.json")))?;
        fs::write(out.join(format!("trace_r{r}.csv")), trace_csv(&proposed.trace))?;
        Ok(BenchRow { bt: bt.report, proposed: proposed.report })
    };
    let rows = thread_pool()?.install(|| orders.par_iter().map(|&r| run_order(r)).collect::<Result<Vec<_>>>())?;

    let mut t1 = String::from("r,bt_h2,proposed_h2\n");
    let mut t2 = String::from("r,sigma_next,bt_hinf,proposed_hinf\n");
    let mut t3 = String::from("r,bt_grad_norm,proposed_grad_norm,iterations\n");
    for row in &rows {
        let r = row.bt.r;
        let _ = writeln!(t1, "{r},{:.6e},{:.6e}", row.bt.h2_error, row.proposed.h2_error);
        let _ = writeln!(
            t2,
            "{r},{:.6e},{:.6e},{:.6e}",
            row.bt.sigma_next, row.bt.hinf_error, row.proposed.hinf_error
        );
        let _ = writeln!(
            t3,
            "{r},{:.6e},{:.6e},{}",
            row.bt.grad_norm_final, row.proposed.grad_norm_final, row.proposed.iterations
        );
    }
    fs::write(out.join("table1_h2.csv"), &t1)?;
    fs::write(out.join("table2_hinf.csv"), &t2)?;
    fs::write(out.join("table3_grad.csv"), &t3)?;

    let reports: Vec<_> = rows.iter().map(|r| json!({ "bt": r.bt, "riemannian": r.proposed })).collect();
    emit(json, json!({ "out": out, "rows": reports }), || {
        let mut s = format!("{:>4} {:>12} {:>12} {:>12} {:>12}\n", "r", "BT H2", "proposed H2", "sigma_r+1", "grad");
        for row in &rows {
            let _ = writeln!(
                s,
                "{:>4} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.2e}",
                row.bt.r, row.bt.h2_error, row.proposed.h2_error, row.bt.sigma_next, row.proposed.grad_norm_final
            );
        }
        let _ = write!(s, "tables written to {}", out.display());
        s
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_path_default() {
        assert_eq!(default_report_path(Path::new("/tmp/red.json")), PathBuf::from("/tmp/red.report.json"));
        assert_eq!(default_report_path(Path::new("red")), PathBuf::from("red.report.json"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
