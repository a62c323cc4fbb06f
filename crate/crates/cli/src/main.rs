//! `hpvpinn` command-line experiment runner.
//!
//! `run` trains one configuration (for each of its seeds) and writes the
//! artifacts described in the README; `sweep` runs the cross product of one or
//! more `key=v1,v2,...` overrides and merges the per-cell metrics into
//! `summary.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use hpvpinn::experiment::{
    apply_override, mean, parse_axis, sweep_cells, Experiment, ExperimentConfig, RunOutput,
};
use hpvpinn::optimizer::TraceEntry;
use hpvpinn::{Error, Result};

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_UNKNOWN_PROBLEM: u8 = 4;
const EXIT_NON_FINITE: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Parser)]
#[command(name = "hpvpinn", version, about = "Train hp-VPINN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Train this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the problem named in the configuration.
    #[arg(long)]
    problem: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration.
    Run(Common),
    /// Train the cross product of override axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Override axis `section.key=v1,v2,...`; repeat for a cross product.
        #[arg(long, required = true)]
        axis: Vec<String>,
    },
}

enum Failure {
    Usage(String),
    Core(Error),
    /// Training stopped on a non-finite loss; artifacts were still written.
    Diverged(Vec<u64>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep { common, axis } => cmd_sweep(common, axis),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nUsage: hpvpinn <run|sweep> --config <FILE> [--out <DIR>]");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Diverged(seeds)) => {
            eprintln!("error: training diverged (non-finite loss) for seeds {seeds:?}");
            ExitCode::from(EXIT_NON_FINITE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_CONFIG,
                Error::UnknownProblem(_) => EXIT_UNKNOWN_PROBLEM,
                Error::NonFinite(_) | Error::NonFiniteLoss { .. } => EXIT_NON_FINITE,
                Error::Io(_) | Error::Json(_) => EXIT_IO,
                _ => 1,
            })
        }
    }
}

/// Reads the configuration file and applies the command-line overrides.
fn load_base(c: &Common) -> std::result::Result<toml::Table, Failure> {
    let text = fs::read_to_string(&c.config)
        .map_err(|e| Failure::Usage(format!("cannot read config `{}`: {e}", c.config.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if let Some(p) = &c.problem {
        apply_override(&mut table, "problem.name", &format!("\"{p}\""))?;
    }
    if let Some(s) = c.seed {
        apply_override(&mut table, "optimizer.seeds", &s.to_string())?;
    }
    Ok(table)
}

fn cmd_run(c: &Common) -> std::result::Result<(), Failure> {
    let table = load_base(c)?;
    let config: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let exp = Experiment::new(&config)?;
    fs::create_dir_all(&c.out)?;
    let seeds = exp.seeds().to_vec();
    let single = seeds.len() == 1;
    let outputs: Vec<RunOutput> = seeds
        .par_iter()
        .map(|&s| {
            let dir = if single {
                c.out.clone()
            } else {
                c.out.join(format!("seed_{s}"))
            };
            run_seed(&exp, s, &dir)
        })
        .collect::<Result<_>>()?;
    write_summary(
        &c.out.join("summary.csv"),
        &[],
        &[(Vec::new(), outputs.as_slice())],
    )?;
    report(&outputs);
    check_diverged(outputs.iter())
}

fn cmd_sweep(c: &Common, axes: &[String]) -> std::result::Result<(), Failure> {
    let table = load_base(c)?;
    let axes = axes
        .iter()
        .map(|a| parse_axis(a))
        .collect::<Result<Vec<_>>>()?;
    let cells = sweep_cells(&table.to_string(), &axes)?;
    let experiments = cells
        .iter()
        .map(|cell| Experiment::new(&cell.config))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&c.out)?;
    let jobs: Vec<(usize, u64)> = experiments
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.seeds().iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<(usize, RunOutput)> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let dir = c.out.join(format!("cell_{i:03}")).join(format!("seed_{s}"));
            run_seed(&experiments[i], s, &dir).map(|o| (i, o))
        })
        .collect::<Result<_>>()?;
    let mut grouped: Vec<Vec<RunOutput>> = vec![Vec::new(); cells.len()];
    for (i, o) in results {
        grouped[i].push(o);
    }
    let keys: Vec<String> = axes.iter().map(|(k, _)| k.clone()).collect();
    let rows: Vec<(Vec<String>, &[RunOutput])> = cells
        .iter()
        .zip(&grouped)
        .map(|(cell, outs)| {
            let values = cell.assignment.iter().map(|(_, v)| v.clone()).collect();
            (values, outs.as_slice())
        })
        .collect();
    write_summary(&c.out.join("summary.csv"), &keys, &rows)?;
    for (values, outs) in &rows {
        let linf = mean(outs.iter().map(|o| o.evaluation.metrics.linf));
        println!("{} mean L_inf {linf:.3e}", values.join(" "));
    }
    check_diverged(grouped.iter().flatten())
}

fn check_diverged<'a>(
    outputs: impl Iterator<Item = &'a RunOutput>,
) -> std::result::Result<(), Failure> {
    let failed: Vec<u64> = outputs
        .filter(|o| o.trace.failed())
        .map(|o| o.seed)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Diverged(failed))
    }
}

fn report(outputs: &[RunOutput]) {
    for o in outputs {
        let m = &o.evaluation.metrics;
        let mut line = format!(
            "seed {} loss {:.3e} L_inf {:.3e}",
            o.seed, m.final_loss, m.linf
        );
        if let Some(h) = m.h1_semi {
            line += &format!(" H1 {h:.3e}");
        }
        for p in &m.physical {
            line += &format!(" physical {p:.6e}");
        }
        println!("{line}");
    }
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

/// Trains one seed, streaming `trace.csv` and checkpoints into `dir`.
fn run_seed(exp: &Experiment, seed: u64, dir: &Path) -> Result<RunOutput> {
    fs::create_dir_all(dir)?;
    let mut manifest = exp.config.clone();
    manifest.optimizer.seeds = Some(vec![seed]);
    let grid = manifest.output.grid.unwrap();
    let header = format!(
        "# Resolved configuration of a single run; pass it back with --config to reproduce.\n\
         # Errors are evaluated on {} uniform points per axis over the problem's bounding box\n\
         # (points outside the domain are skipped).\n",
        grid
    );
    fs::write(dir.join("run_manifest.toml"), header + &manifest.to_toml()?)?;

    let physical_names: Vec<String> = if exp.config.inverse.kappa_init.is_some() {
        vec!["kappa".into()]
    } else {
        Vec::new()
    };
    let mut trace = BufWriter::new(File::create(dir.join("trace.csv"))?);
    let mut cols = vec![
        "iteration",
        "total",
        "variational",
        "boundary",
        "initial",
        "data",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    cols.extend(physical_names.iter().cloned());
    writeln!(trace, "{}", cols.join(","))?;

    let arch = exp.architecture();
    let every = exp.config.output.checkpoint_every.unwrap();
    let mut io_error: Option<std::io::Error> = None;
    let mut observer = |e: &TraceEntry, params: &hpvpinn::diffengine::ParamVector| {
        let l = &e.loss;
        let mut row = vec![
            e.iteration.to_string(),
            num(l.total),
            num(l.variational),
            num(l.boundary),
            num(l.initial),
            num(l.data),
        ];
        row.extend(e.physical.iter().map(|&p| num(p)));
        let written = writeln!(trace, "{}", row.join(","))
            .and_then(|_| trace.flush())
            .and_then(|_| {
                if e.iteration.is_multiple_of(every) {
                    write_checkpoint(
                        &arch,
                        params.as_slice(),
                        &e.physical,
                        &dir.join("checkpoint.json"),
                    )
                } else {
                    Ok(())
                }
            });
        if let Err(err) = written {
            io_error.get_or_insert(err);
        }
    };
    let out = exp.run(seed, &mut observer)?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    fs::write(dir.join("checkpoint.json"), out.snapshot().to_json()?)?;
    write_solution(
        &dir.join("solution.csv"),
        &out,
        exp.architecture().layer_sizes[0],
    )?;
    if let Some(spec) = &out.evaluation.spectrum {
        let mut w = BufWriter::new(File::create(dir.join("spectrum.csv"))?);
        writeln!(w, "k,exact,prediction")?;
        for (k, e, p) in spec {
            writeln!(w, "{k},{},{}", num(*e), num(*p))?;
        }
        w.flush()?;
    }
    if let Some(f) = &out.trace.failure {
        fs::write(dir.join("FAILED"), format!("{f}\n"))?;
    }
    Ok(out)
}

fn write_checkpoint(
    arch: &hpvpinn::loss::Architecture,
    params: &[f64],
    physical: &[f64],
    path: &Path,
) -> std::io::Result<()> {
    let to_io = |e: Error| std::io::Error::other(e.to_string());
    let n = hpvpinn::network::param_count(&arch.layer_sizes);
    let net = hpvpinn::network::Mlp::from_params(&arch.layer_sizes, arch.activation, &params[..n])
        .map_err(to_io)?;
    let mut snap = net.snapshot();
    snap.physical = physical.to_vec();
    fs::write(path, snap.to_json().map_err(to_io)?)
}

fn write_solution(path: &Path, out: &RunOutput, dim: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let coords: &[&str] = if dim == 1 { &["x"] } else { &["x", "y"] };
    writeln!(w, "{},prediction,reference,abs_error", coords.join(","))?;
    for p in &out.evaluation.points {
        let mut row: Vec<String> = p.coords.iter().map(|&c| num(c)).collect();
        row.extend([num(p.prediction), num(p.reference), num(p.error)]);
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per cell: the axis values, seed count and seed-averaged metrics.
fn write_summary(path: &Path, keys: &[String], rows: &[(Vec<String>, &[RunOutput])]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let n_phys = rows
        .iter()
        .flat_map(|(_, o)| o.iter())
        .map(|o| o.evaluation.metrics.physical.len())
        .max()
        .unwrap_or(0);
    let mut header: Vec<String> = keys.to_vec();
    header.extend(
        [
            "seeds",
            "failed",
            "mean_linf",
            "mean_h1_semi",
            "mean_linf_mesh",
            "mean_final_loss",
        ]
        .map(String::from),
    );
    header.extend((0..n_phys).map(|i| format!("mean_physical_{i}")));
    writeln!(w, "{}", header.join(","))?;
    for (values, outs) in rows {
        let m = |f: &dyn Fn(&RunOutput) -> f64| num(mean(outs.iter().map(f)));
        let mut row = values.clone();
        row.push(outs.len().to_string());
        row.push(outs.iter().filter(|o| o.trace.failed()).count().to_string());
        row.push(m(&|o| o.evaluation.metrics.linf));
        row.push(m(&|o| o.evaluation.metrics.h1_semi.unwrap_or(f64::NAN)));
        row.push(m(&|o| o.evaluation.metrics.linf_mesh));
        row.push(m(&|o| o.evaluation.metrics.final_loss));
        for i in 0..n_phys {
            row.push(m(&|o| {
                o.evaluation
                    .metrics
                    .physical
                    .get(i)
                    .copied()
                    .unwrap_or(f64::NAN)
            }));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
