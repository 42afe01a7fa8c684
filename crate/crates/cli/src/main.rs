use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use hrpp::bvh::{build_bvh, Bvh, DEFAULT_MAX_LEAF_SIZE};
use hrpp::hash::HashConfig;
use hrpp::predictor::DEFAULT_CAPACITY;
use hrpp::scene::{Scene, SceneError};
use hrpp::sweep::{self, report_rows, run_config, RunParams, SweepAxis, SweepSpec};
use hrpp::tracer::{Mode, RenderConfig, Sampling};

const CAPACITY_ENV: &str = "HRPP_MAX_TABLE_ENTRIES";

#[derive(Parser)]
#[command(name = "hrpp", version, about = "Hash-based ray path prediction limit-study workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one configuration and write image + stats.
    Render(RenderArgs),
    /// Run one render per value of a parameter axis and write a CSV report.
    Sweep(SweepArgs),
    /// Render in limit mode and dump a trained predictor table.
    DumpTable(DumpArgs),
    /// Print triangle count and BVH shape.
    SceneInfo(SceneInfoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    Limit,
    Live,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Jittered,
    StratumCenter,
    PixelCenter,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Precision,
    GoUp,
    Spp,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Closest,
    HitAny,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scene config (JSON).
    scene: PathBuf,
    #[arg(long, value_enum, default_value = "limit")]
    mode: ModeArg,
    /// Hash precision bits per float (1..=7).
    #[arg(long, default_value_t = 6)]
    precision: u8,
    /// Parent links between a hit leaf and the predicted node.
    #[arg(long = "go-up", default_value_t = 0)]
    go_up: u32,
    #[arg(long, default_value_t = 8)]
    spp: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// WIDTHxHEIGHT; defaults to the scene file's resolution.
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<[u32; 2]>,
    #[arg(long, default_value_t = 2)]
    max_reflection_depth: u32,
    #[arg(long, value_enum, default_value = "jittered")]
    sampling: SamplingArg,
    /// Worker threads; 1 keeps runs bit-reproducible.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_LEAF_SIZE)]
    max_leaf_size: usize,
    /// In live mode, only hit-any rays use predictions.
    #[arg(long)]
    no_live_closest: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, short, default_value = ".")]
    out_dir: PathBuf,
    /// In limit mode, also render the baseline and require identical images.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated axis values, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<u32>,
    /// CSV report path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Omit the timestamp comment line so reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "closest")]
    table: TableArg,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SceneInfoArgs {
    scene: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_LEAF_SIZE)]
    max_leaf_size: usize,
}

fn parse_resolution(s: &str) -> Result<[u32; 2], String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| e.to_string());
    let res = [parse(w)?, parse(h)?];
    if res.contains(&0) {
        return Err("resolution must be at least 1x1".into());
    }
    Ok(res)
}

/// Input problems (missing or malformed scene) exit with 2.
#[derive(Debug)]
struct InputError(SceneError);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_not_found() {
            write!(f, "file not found: {}", self.0)
        } else {
            self.0.fmt(f)
        }
    }
}

impl std::error::Error for InputError {}

fn table_capacity() -> Result<usize> {
    match std::env::var(CAPACITY_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{CAPACITY_ENV}={v} is not a count")),
        Err(_) => Ok(DEFAULT_CAPACITY),
    }
}

impl RunArgs {
    fn load(&self) -> Result<(Scene, Bvh)> {
        let mut scene = Scene::load(&self.scene).map_err(InputError)?;
        if let Some(res) = self.resolution {
            scene.camera.resolution = res;
        }
        let start = Instant::now();
        let bvh = build_bvh(scene.triangles.clone(), self.max_leaf_size)?;
        info!(
            "built BVH: {} triangles, {} nodes, depth {} in {:.2?}",
            bvh.triangle_count(),
            bvh.node_count(),
            bvh.max_depth(),
            start.elapsed()
        );
        Ok((scene, bvh))
    }

    fn params(&self) -> Result<RunParams> {
        let render = RenderConfig {
            spp: self.spp,
            max_reflection_depth: self.max_reflection_depth,
            mode: match self.mode {
                ModeArg::Baseline => Mode::Baseline,
                ModeArg::Limit => Mode::Limit,
                ModeArg::Live => Mode::Live,
            },
            rng_seed: self.seed,
            sampling: match self.sampling {
                SamplingArg::Jittered => Sampling::Jittered,
                SamplingArg::StratumCenter => Sampling::StratumCenter,
                SamplingArg::PixelCenter => Sampling::PixelCenter,
            },
            threads: self.threads,
            live_closest_hit: !self.no_live_closest,
        };
        render.validate()?;
        Ok(RunParams {
            hash: HashConfig::new(self.precision)?,
            go_up_level: self.go_up,
            render,
            table_capacity: table_capacity()?,
        })
    }

    fn scene_name(&self) -> String {
        self.scene.file_stem().map_or_else(|| "scene".into(), |s| s.to_string_lossy().into_owned())
    }
}

fn cmd_render(args: &RenderArgs) -> Result<ExitCode> {
    let (scene, bvh) = args.run.load()?;
    let params = args.run.params()?;
    let start = Instant::now();
    let run = run_config(&scene, &bvh, &params)?;
    info!("rendered in {:.2?}", start.elapsed());

    let name = args.run.scene_name();
    fs::create_dir_all(&args.out_dir)?;
    let image_path = args.out_dir.join(format!("{name}.ppm"));
    run.output.write_ppm(io::BufWriter::new(fs::File::create(&image_path)?))?;

    let rows = report_rows(&name, &run);
    let stats = serde_json::json!({
        "scene": name,
        "triangles": bvh.triangle_count(),
        "bvh_nodes": bvh.node_count(),
        "max_bvh_depth": bvh.max_depth(),
        "params": params,
        "closest_table": run.closest_table,
        "hit_any_table": run.hit_any_table,
        "rows": rows,
    });
    let stats_path = args.out_dir.join(format!("{name}.stats.json"));
    fs::write(&stats_path, serde_json::to_string_pretty(&stats)?)?;
    println!("wrote {} and {}", image_path.display(), stats_path.display());
    for row in &rows {
        println!(
            "{:<10} rays={:<9} tp={:<9} fp={:<8} neg={:<9} savings={}",
            row.ray_kind,
            row.rays,
            row.tp,
            row.fp,
            row.neg,
            row.savings_pct.map_or("-".into(), |v| format!("{v:.2}%")),
        );
    }

    if args.verify {
        if params.render.mode != Mode::Limit {
            bail!("--verify is only meaningful with --mode limit");
        }
        let mut baseline_params = params.clone();
        baseline_params.render.mode = Mode::Baseline;
        let baseline = run_config(&scene, &bvh, &baseline_params)?;
        if baseline.output.to_rgb8() != run.output.to_rgb8() {
            eprintln!("verify FAILED: limit-mode image differs from baseline");
            return Ok(ExitCode::FAILURE);
        }
        println!("verify ok: limit-mode image identical to baseline");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let (scene, bvh) = args.run.load()?;
    let spec = SweepSpec {
        scene_name: args.run.scene_name(),
        axis: match args.axis {
            AxisArg::Precision => SweepAxis::Precision,
            AxisArg::GoUp => SweepAxis::GoUpLevel,
            AxisArg::Spp => SweepAxis::Spp,
        },
        values: args.values.clone(),
        fixed: args.run.params()?,
    };
    let rows = sweep::run_sweep(&scene, &bvh, &spec)?;
    let timestamp = (!args.no_timestamp).then(|| {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!("unix={secs}")
    });
    match &args.out {
        Some(path) => sweep::write_csv(&rows, fs::File::create(path)?, timestamp.as_deref())?,
        None => sweep::write_csv(&rows, io::stdout().lock(), timestamp.as_deref())?,
    }
    if let Some(path) = &args.json {
        sweep::write_json(&rows, fs::File::create(path)?)?;
    }
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} report rows failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump(args: &DumpArgs) -> Result<ExitCode> {
    let (scene, bvh) = args.run.load()?;
    let mut params = args.run.params()?;
    if params.render.mode == Mode::Baseline {
        params.render.mode = Mode::Limit;
    }
    let run = run_config(&scene, &bvh, &params)?;
    let table = match args.table {
        TableArg::Closest => &run.tables.closest,
        TableArg::HitAny => &run.tables.hit_any,
    };
    let dump = table.dump();
    match &args.out {
        Some(path) => fs::write(path, dump)?,
        None => io::stdout().lock().write_all(dump.as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scene_info(args: &SceneInfoArgs) -> Result<ExitCode> {
    let scene = Scene::load(&args.scene).map_err(InputError)?;
    let bvh = build_bvh(scene.triangles.clone(), args.max_leaf_size)?;
    println!("scene: {}", args.scene.display());
    println!("number of triangles: {}", bvh.triangle_count());
    println!("max BVH depth: {}", bvh.max_depth());
    println!("BVH nodes: {}", bvh.node_count());
    println!("leaves: {}", bvh.leaves().count());
    println!("lights: {}", scene.lights.len());
    Ok(ExitCode::SUCCESS)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Render(a) => cmd_render(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::DumpTable(a) => cmd_dump(a),
        Command::SceneInfo(a) => cmd_scene_info(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
