use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use debris_twin_cli::{exit, with_threads, Pipeline, StageError, StageReport};
use debris_twin_core::synth::{generate, occlusion_fixture, random_fixture, unit_box_fixture, SceneSpec};

#[derive(Parser)]
#[command(name = "debris-twin", version, about = "Wind-borne debris risk from a labelled jobsite reconstruction")]
struct Cli {
    /// Worker threads for data-parallel stages; default uses every core.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..=1024))]
    threads: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Run {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `paths.outdir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    UnitBox,
    Occlusion,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Build per-camera depth maps.
    Depth(Run),
    /// Project mask labels onto the cloud with the visibility test.
    Fuse(Run),
    /// Volumes, kinetic energy maps, heatmaps and the summary.
    Risk(Run),
    /// depth, fuse and risk in sequence, plus timing.json.
    All(Run),
    /// Write a synthetic scene with a ready-to-run config.toml.
    Synth {
        /// Scene description (TOML).
        #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        fixture: Option<Fixture>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_outputs(reports: &[StageReport]) {
    for r in reports {
        for p in &r.outputs {
            println!("{}", p.display());
        }
    }
}

fn run(cli: Cli, threads: usize) -> Result<(), StageError> {
    match cli.command {
        Command::Synth { spec, fixture, seed, out } => {
            let spec = match (spec, fixture) {
                (Some(path), _) => SceneSpec::load(&path).map_err(|e| StageError::new("synth", e))?,
                (None, Some(Fixture::UnitBox)) => unit_box_fixture(seed),
                (None, Some(Fixture::Occlusion)) => occlusion_fixture(),
                (None, Some(Fixture::Random)) => random_fixture(seed, 2000.0),
                (None, None) => unreachable!("clap requires --spec or --fixture"),
            };
            let scene = generate(&spec).map_err(|e| StageError::new("synth", e))?;
            scene.write_to_dir(&out).map_err(|e| StageError::new("synth", e))?;
            println!("{}", out.join("config.toml").display());
            Ok(())
        }
        Command::Depth(r) => Pipeline::load(&r.config, r.out)?.depth().map(|s| print_outputs(&[s])),
        Command::Fuse(r) => Pipeline::load(&r.config, r.out)?.fuse().map(|s| print_outputs(&[s])),
        Command::Risk(r) => Pipeline::load(&r.config, r.out)?.risk().map(|s| print_outputs(&[s])),
        Command::All(r) => {
            let p = Pipeline::load(&r.config, r.out)?;
            let reports = p.all(threads)?;
            print_outputs(&reports);
            println!("{}", p.out.join(debris_twin_cli::pipeline::TIMING).display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let threads = cli.threads.map_or_else(rayon::current_num_threads, |n| n as usize);
    match with_threads(threads, || run(cli, threads)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
