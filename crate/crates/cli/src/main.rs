use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tacsim::metrics::DEFAULT_MAX_SHIFT;
use tacsim::render::Image;
use tacsim::scenario::{
    compare_command, parse_scenario, render_depth, run_pipeline_with, PipelineOptions, ScenarioConfig, ScenarioError,
};
use tacsim::surface::DepthMap;

/// Environment variable that fixes the worker thread count.
const THREADS_ENV: &str = "TACSIM_THREADS";

#[derive(Parser)]
#[command(name = "tacsim", version, about = "Optical tactile sensor simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write depth maps and meshes only.
    Simulate(RunArgs),
    /// Render one depth map to a sensor image.
    Render(RenderArgs),
    /// Score matching PNGs of two directories.
    Compare(CompareArgs),
    /// Simulate, extract, mesh and render every capture of a scenario.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Plain MPM: one transfer cycle per step, no pinning.
    #[arg(long)]
    no_rest_check: bool,
    /// Overrides the configured output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    run: RunArgs,
    /// List the planned captures without simulating.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct RenderArgs {
    depth: PathBuf,
    #[arg(long, default_value = "gelsight")]
    profile: String,
    /// Direct lighting only, no sampling.
    #[arg(long)]
    phong: bool,
    #[arg(long, default_value_t = 32)]
    spp: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    max_bounces: usize,
    /// Albedo texture; a seeded procedural grain otherwise.
    #[arg(long)]
    texture: Option<PathBuf>,
    /// Output PNG; the depth file with a `.png` extension by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    dir_a: PathBuf,
    dir_b: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Largest alignment shift tried, pixels.
    #[arg(long, default_value_t = DEFAULT_MAX_SHIFT)]
    max_shift: usize,
}

fn configure_threads() -> Result<(), ScenarioError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ScenarioError::invalid(THREADS_ENV, format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ScenarioError::invalid(THREADS_ENV, e.to_string()))
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg = parse_scenario(&args.config)?;
    if args.no_rest_check {
        cfg.sim.rest_check = false;
    }
    if let Some(out) = &args.output {
        cfg.output = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_scenario(args: &RunArgs, opts: PipelineOptions) -> Result<(), ScenarioError> {
    let cfg = load_config(args)?;
    let mut last_run = usize::MAX;
    let out = run_pipeline_with(&cfg, &opts, &mut |run, ev, _| {
        if run != last_run {
            log::info!("run {run}");
            last_run = run;
        }
        log::debug!(
            "phase {} step {}: {} iterations, ratio {:?}",
            ev.phase,
            ev.step,
            ev.outcome.iterations,
            ev.outcome.ratio
        );
        Ok(())
    })?;
    let m = &out.manifest;
    if opts.dry_run {
        for c in &m.captures {
            println!("{}\t{}\t{:03}\t{:?}\t{}", c.run, c.shape, c.index, c.kind, c.label);
        }
        println!("{} runs, {} captures", m.runs, m.captures.len());
    } else {
        println!(
            "{}: {} runs, {} captures, {} files",
            out.root.display(),
            m.runs,
            m.captures.len(),
            m.files.len()
        );
    }
    Ok(())
}

fn render(args: &RenderArgs) -> Result<(), ScenarioError> {
    let file = std::fs::File::open(&args.depth).map_err(|e| ScenarioError::io(&args.depth, e))?;
    let depth = DepthMap::read_from(std::io::BufReader::new(file))?;
    let texture = match &args.texture {
        Some(p) => Some(load_png(p)?),
        None => None,
    };
    let image = render_depth(
        &depth,
        &args.profile,
        texture.as_ref(),
        args.spp,
        args.max_bounces,
        args.seed,
        args.phong,
    )?;
    let out = args.out.clone().unwrap_or_else(|| args.depth.with_extension("png"));
    image.save_png(&out)?;
    println!("{}", out.display());
    Ok(())
}

fn load_png(path: &Path) -> Result<Image, ScenarioError> {
    Ok(Image::load_png(path)?)
}

fn compare(args: &CompareArgs) -> Result<(), ScenarioError> {
    let outcome = compare_command(&args.dir_a, &args.dir_b, &args.out, args.max_shift)?;
    println!(
        "{}: {} pairs, {} unmatched",
        args.out.display(),
        outcome.rows.len(),
        outcome.unmatched.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate(a) => run_scenario(
            a,
            PipelineOptions {
                dry_run: false,
                skip_render: true,
            },
        ),
        Command::Pipeline(a) => run_scenario(
            &a.run,
            PipelineOptions {
                dry_run: a.dry_run,
                skip_render: false,
            },
        ),
        Command::Render(a) => render(a),
        Command::Compare(a) => compare(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
