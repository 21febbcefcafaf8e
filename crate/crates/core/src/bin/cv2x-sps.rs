use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cv2x_sps::channel::Simulation;
use cv2x_sps::config::ScenarioConfig;
use cv2x_sps::sweep::{self, emit_table, find_preset, Format, SweepSpec};
use cv2x_sps::trace::TraceWriter;

/// Environment variable setting the worker count when `--parallel` is absent.
const WORKERS_ENV: &str = "CV2X_SPS_WORKERS";

#[derive(Parser)]
#[command(name = "cv2x-sps", version, about = "C-V2X SPS / one-shot simulator under smart DoS attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run all replications of one scenario.
    Simulate {
        /// TOML scenario file; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config field, e.g. `--set num_targets=30`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
        /// Write a per-agent trace of replication 0 to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, env = WORKERS_ENV)]
        parallel: Option<usize>,
    },
    /// Run an experiment grid.
    Sweep {
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// TOML sweep spec file.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        reps: Option<u32>,
        /// Override a base config field for every cell.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = WORKERS_ENV)]
        parallel: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
    },
    /// List the builtin sweeps.
    Presets,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            overrides,
            seed,
            out,
            format,
            trace,
            parallel,
        } => {
            let mut cfg = match &config {
                Some(path) => ScenarioConfig::load(path)?,
                None => ScenarioConfig::default(),
            };
            for o in &overrides {
                cfg.apply_override(o)?;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let cfg = cfg.validate()?;

            if let Some(path) = &trace {
                let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                let mut writer = TraceWriter::new(BufWriter::new(file));
                Simulation::new(&cfg, 0)?.run_with(&mut writer);
                writer.finish().with_context(|| format!("writing {}", path.display()))?;
            }

            let spec = sweep::scenario_spec("simulate", &cfg);
            run_and_emit(&spec, parallel, &out, format.into())
        }
        Command::Sweep {
            preset,
            spec,
            reps,
            overrides,
            seed,
            parallel,
            out,
            format,
        } => {
            let mut spec: SweepSpec = match (preset, spec) {
                (Some(name), None) => find_preset(&name)?,
                (None, Some(path)) => SweepSpec::load(&path)?,
                _ => bail!("exactly one of --preset or --spec is required"),
            };
            for o in &overrides {
                spec.base.apply_override(o)?;
            }
            if let Some(r) = reps {
                spec.base.replications = r;
            }
            if let Some(s) = seed {
                spec.base.master_seed = s;
            }
            run_and_emit(&spec, parallel, &out, format.into())
        }
        Command::Presets => {
            for s in sweep::builtin_sweeps() {
                let variants: Vec<&str> = s.variants.iter().map(|v| v.label.as_str()).collect();
                println!("{:<16} {}", s.name, s.description);
                println!(
                    "{:<16} axis {} = {:?}; variants {}",
                    "",
                    s.axis.field,
                    s.axis.values.iter().map(sweep::axis_label).collect::<Vec<_>>(),
                    variants.join(", ")
                );
            }
            Ok(())
        }
    }
}

fn run_and_emit(spec: &SweepSpec, parallel: Option<usize>, out: &Path, format: Format) -> Result<()> {
    if parallel == Some(0) {
        bail!("worker count must be at least 1");
    }
    let table = sweep::run_sweep(spec, parallel)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let dest = out.join(format!("{}.{}", spec.name, format.extension()));
    emit_table(&table, format, &dest)?;
    print!("{}", table.render_means());
    eprintln!("wrote {}", dest.display());
    Ok(())
}
