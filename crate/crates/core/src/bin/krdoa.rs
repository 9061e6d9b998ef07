use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use krdoa::config::ExperimentConfig;
use krdoa::experiment::{
    format_dof_table, run_bench, run_dof_table, run_rmse, run_spectrum, write_manifest,
    write_rmse_csv, write_spectrum_outputs,
};
use krdoa::plot::{emit_plot, PlotSpec};
use krdoa::AngleGrid;

#[derive(Parser)]
#[command(name = "krdoa", version, about = "Real-valued Khatri-Rao subspace DOA estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spatial spectra of the multi-source scenario for every geometry and method.
    Spectrum(RunArgs),
    /// Single-source RMSE against SNR.
    Rmse(RunArgs),
    /// Time the SVD and the spectral search of each method.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Timed repeats per stage (at least 30).
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Degrees of freedom of the supported array families.
    DofTable {
        /// Directory for dof_table.csv; the table is printed either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render spectrum or RMSE CSV files as SVG.
    Plot {
        /// CSV files written by `spectrum` or `rmse`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory; defaults to the directory of each input.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file overriding the defaults of the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Search grid step in degrees.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => base
                .merge_file(path)
                .with_context(|| format!("loading {}", path.display()))?,
            None => base,
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(step) = self.grid_step {
            cfg.grid = AngleGrid::new(cfg.grid.start, cfg.grid.stop, step)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn spectrum(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve(ExperimentConfig::spectrum_default())?;
    let run = run_spectrum(&cfg)?;
    let outputs = write_spectrum_outputs(&run, &args.out)?;
    for e in &run.entries {
        let peaks: Vec<String> = e.result.peaks.iter().map(|p| format!("{:.2}", p.angle)).collect();
        println!("{:<12} {:<11} peaks: {}", e.geometry, e.method.tag(), peaks.join(" "));
    }
    write_manifest(&args.out, "spectrum", &cfg, &outputs)?;
    println!("wrote {} files to {}", outputs.len() + 1, args.out.display());
    Ok(())
}

fn rmse(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve(ExperimentConfig::rmse_default())?;
    let rows = run_rmse(&cfg)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("rmse.csv");
    write_rmse_csv(&rows, create(&path)?)?;
    for r in &rows {
        println!("{:>6.1} dB  {:<12} {:<11} {:.5} deg", r.snr_db, r.geometry, r.method.tag(), r.rmse_deg);
    }
    write_manifest(&args.out, "rmse", &cfg, &[path])?;
    Ok(())
}

fn bench(args: &RunArgs, repeats: Option<usize>) -> Result<()> {
    let mut cfg = args.resolve(ExperimentConfig::bench_default())?;
    if let Some(r) = repeats {
        cfg.bench.repeats = r;
    }
    let report = run_bench(&cfg)?;
    fs::create_dir_all(&args.out)?;
    let csv = args.out.join("bench.csv");
    report.write_csv(create(&csv)?)?;
    let json = args.out.join("bench.json");
    fs::write(&json, serde_json::to_string_pretty(&report)? + "\n")?;
    print!("{}", report.format_table());
    write_manifest(&args.out, "bench", &cfg, &[csv, json])?;
    Ok(())
}

fn dof_table(out: Option<&Path>) -> Result<()> {
    let rows = run_dof_table()?;
    print!("{}", format_dof_table(&rows));
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let path = dir.join("dof_table.csv");
        let mut s = String::from("n1,n2,mra,coprime,ula_kr,pal,proposed,proposed_enumerated\n");
        for r in &rows {
            s += &format!(
                "{},{},{},{},{},{},{},{}\n",
                r.n1, r.n2, r.mra, r.coprime, r.ula_kr, r.pal, r.proposed, r.proposed_enumerated
            );
        }
        fs::write(&path, s)?;
    }
    Ok(())
}

fn plot(inputs: &[PathBuf], out: Option<&Path>, title: Option<String>) -> Result<()> {
    let spec = PlotSpec {
        title,
        ..PlotSpec::default()
    };
    for input in inputs {
        let dir = match out {
            Some(d) => d.to_path_buf(),
            None => input.parent().unwrap_or(Path::new(".")).to_path_buf(),
        };
        let svg = emit_plot(input, &dir, &spec).with_context(|| format!("plotting {}", input.display()))?;
        println!("{}", svg.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spectrum(args) => spectrum(args),
        Command::Rmse(args) => rmse(args),
        Command::Bench { run, repeats } => bench(run, *repeats),
        Command::DofTable { out } => dof_table(out.as_deref()),
        Command::Plot { inputs, out, title } => plot(inputs, out.as_deref(), title.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
