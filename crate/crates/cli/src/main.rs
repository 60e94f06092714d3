use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use subdiff::harness::{
    export_plot_data, make_example, run_convergence_study, run_fixed_point, run_reconstruction,
    run_table, validate_example, ConvergenceConfig, ExampleId, ExperimentConfig, Isp, TableSpec,
};
use subdiff::inversion::{FixedPointOptions, ReconstructionReport};
use subdiff::{ForwardModel, Result};

#[derive(Parser)]
#[command(
    name = "subdiff",
    version,
    about = "Lateral-data source reconstruction for subdiffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single reconstruction: report JSON, iteration history and plot data.
    Run {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long, value_enum, default_value_t = Method::Cg)]
        method: Method,
        /// Fixed-point iteration limit.
        #[arg(long, default_value_t = 50)]
        fp_iters: usize,
    },
    /// Sweep over α and ε and print the "e (k*)" table.
    Table {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },
    /// Manufactured-solution convergence study of the forward solver.
    Converge {
        #[arg(long, value_enum, default_value_t = Kind::Space)]
        kind: Kind,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Check the coefficient assumptions of the examples.
    Validate {
        #[command(flatten)]
        opts: Overrides,
        /// Validate every example instead of the selected one.
        #[arg(long)]
        all: bool,
    },
    /// Rebuild plot CSVs from a saved report JSON.
    Export {
        report: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        prefix: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Cg,
    FixedPoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Space,
    Time,
}

/// Configuration file plus flag overrides.
#[derive(Args)]
struct Overrides {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    isp: Option<Isp>,
    #[arg(long)]
    example: Option<ExampleId>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cdp: Option<f64>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    allow_inverse_crime: bool,
    #[arg(long)]
    mollify: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        set!(example => example, alpha => alpha, m => m, n => n, t_final => t_final, eps => epsilon,
             seed => seed, cdp => c_dp, kmax => k_max, refine => refinement, mollify => mollify,
             out_dir => out_dir);
        if let Some(isp) = self.isp {
            cfg.isp = Some(isp);
        }
        cfg.allow_inverse_crime |= self.allow_inverse_crime;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_json(path: &Path, value: serde_json::Result<String>) -> Result<()> {
    let text = value.map_err(|e| subdiff::Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            opts,
            method,
            fp_iters,
        } => {
            let cfg = opts.resolve()?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            match method {
                Method::Cg => {
                    let out = run_reconstruction(&cfg)?;
                    let report = &out.report;
                    std::fs::write(cfg.out_dir.join("report.json"), report.to_json()?)?;
                    let grid = *out.model.grid();
                    let files = export_plot_data(
                        report,
                        &out.data.f_dagger,
                        &out.model.trace_coords(),
                        &grid,
                        &cfg.out_dir,
                        "run",
                    )?;
                    println!(
                        "{} example {} alpha {} eps {:e}: e (k*) = {}  delta = {:.3e}",
                        cfg.isp(),
                        cfg.example,
                        cfg.alpha,
                        cfg.epsilon,
                        report.summary(),
                        out.data.delta
                    );
                    println!("wrote {}", files.history.display());
                }
                Method::FixedPoint => {
                    let fp_opts = FixedPointOptions {
                        max_iter: fp_iters,
                        ..Default::default()
                    };
                    let out = run_fixed_point(&cfg, &fp_opts)?;
                    write_json(
                        &cfg.out_dir.join("fixed_point.json"),
                        serde_json::to_string_pretty(&out),
                    )?;
                    println!(
                        "fixed point: {} iterations, converged = {}, e = {:.3e}, relative = {:.3e}",
                        out.report.iterations, out.report.converged, out.error, out.relative_error
                    );
                }
            }
        }
        Command::Table {
            opts,
            alphas,
            epsilons,
        } => {
            let cfg = opts.resolve()?;
            let mut spec = TableSpec::default();
            if let Some(a) = alphas {
                spec.alphas = a;
            }
            if let Some(e) = epsilons {
                spec.epsilons = e;
            }
            let table = run_table(&cfg, &spec)?;
            table.write(&cfg.out_dir)?;
            print!("{}", table.to_table_csv());
            for c in &table.cells {
                if let Err(msg) = &c.outcome {
                    eprintln!("cell alpha={} eps={:e} failed: {msg}", c.alpha, c.epsilon);
                }
            }
        }
        Command::Converge {
            kind,
            alpha,
            sizes,
            out_dir,
        } => {
            let mut cfg = match kind {
                Kind::Space => ConvergenceConfig::space(alpha),
                Kind::Time => ConvergenceConfig::time(alpha),
            };
            if let Some(s) = sizes {
                match kind {
                    Kind::Space => cfg.ms = s,
                    Kind::Time => cfg.ns = s,
                }
            }
            let rep = run_convergence_study(&cfg)?;
            std::fs::create_dir_all(&out_dir)?;
            let name = match kind {
                Kind::Space => "convergence_space.csv",
                Kind::Time => "convergence_time.csv",
            };
            rep.write_csv(&out_dir.join(name))?;
            println!("h,tau,error,order");
            for r in &rep.rows {
                let order = r
                    .order
                    .map(|p| format!("{p:.3}"))
                    .unwrap_or_else(|| "-".into());
                println!("{:.4e},{:.4e},{:.4e},{order}", r.h, r.tau, r.error);
            }
            if let Some(p) = rep.fitted_order {
                println!("fitted order {p:.3}");
            }
        }
        Command::Validate { opts, all } => {
            let cfg = opts.resolve()?;
            let ids: Vec<ExampleId> = if all {
                ExampleId::ALL.to_vec()
            } else {
                vec![cfg.example]
            };
            let mut failed = None;
            for id in ids {
                match validate_example(&ExperimentConfig {
                    example: id,
                    ..cfg.clone()
                }) {
                    Ok(r) => println!("{id}: ok {}", serde_json::to_string(&r).unwrap_or_default()),
                    Err(e) => {
                        println!("{id}: {e}");
                        failed = Some(e);
                    }
                }
            }
            if let Some(e) = failed {
                return Err(e);
            }
        }
        Command::Export {
            report,
            out_dir,
            prefix,
        } => {
            let rep = ReconstructionReport::from_json(&std::fs::read_to_string(&report)?)?;
            let echo = rep
                .config
                .clone()
                .ok_or_else(|| subdiff::Error::Config("report carries no configuration".into()))?;
            let cfg: ExperimentConfig =
                serde_json::from_value(echo).map_err(|e| subdiff::Error::Config(e.to_string()))?;
            let example = make_example(cfg.example, cfg.t_final)?;
            let model =
                ForwardModel::build(cfg.m, cfg.n, cfg.t_final, cfg.alpha, example.coeffs.clone())?;
            let dir = out_dir.unwrap_or_else(|| cfg.out_dir.clone());
            let files = export_plot_data(
                &rep,
                &example.f_dagger(&model),
                &model.trace_coords(),
                model.grid(),
                &dir,
                &prefix,
            )?;
            println!(
                "wrote {}, {}, {}",
                files.reconstruction.display(),
                files.error.display(),
                files.history.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
