//! Command implementations behind the `fskimg` binary.
//!
//! Every failure ends in one stderr line of the form
//! `error code=<exit code> kind=<kind> message="<text>"`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use fskimg_core::fsk::{run_broadband, run_narrowband_sota};
use fskimg_core::io::{
    read_cloud_csv, read_cube, read_depth_map_csv, write_cloud_csv, write_cloud_ply, write_cube,
    write_depth_map_csv, write_file, write_scene_csv,
};
use fskimg_core::metrics::{comparison_csv, summarize, summary_text};
use fskimg_core::{
    accuracy, add_noise, compare_methods, run_2fsk, run_3fsk, simulate, DataCube, Error, FskOutput,
    Method, RunConfig,
};

#[derive(Debug, Parser)]
#[command(name = "fskimg", version, about = "Near-field radar surface imaging from a few CW tones")]
pub struct Cli {
    /// Config file (sectioned key = value); absent keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Start from the desk-scale defaults (4.8 cm aperture, ±3 cm grid).
    #[arg(long, global = true)]
    pub desk: bool,

    /// Cap the worker threads used by reconstruction.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a measurement and write the cube plus ground-truth sidecars.
    Simulate(SimulateArgs),
    /// Reconstruct a point cloud from a cube file.
    Reconstruct(ReconstructArgs),
    /// Score estimated clouds against a ground-truth depth map.
    Evaluate(EvaluateArgs),
    /// Time the three-tone pipeline against broadband volume reconstruction.
    Bench(BenchArgs),
    /// Run every method over an SNR and seed matrix.
    Sweep(SweepArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output cube path; defaults to `<output dir>/cube.fskcube`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Method whose tones are transmitted; defaults to the configured one.
    #[arg(long)]
    pub method: Option<Method>,
    /// Run index for the seed splitting rule.
    #[arg(long, default_value_t = 0)]
    pub run: usize,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Input cube file.
    pub cube: PathBuf,
    #[arg(long)]
    pub method: Option<Method>,
    /// Output directory; defaults to the configured one.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth depth map CSV (x_m, y_m, z_m, amplitude).
    #[arg(long)]
    pub truth: PathBuf,
    /// Estimated cloud CSV files.
    #[arg(required = true)]
    pub estimates: Vec<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated SNR values in dB; `inf` is noiseless.
    #[arg(long, default_value = "inf,30,20,10")]
    pub snr: String,
    /// Number of seeded runs per SNR.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Comma-separated methods; defaults to all.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Exit status for an error: 2 configuration, 3 data format or I/O,
/// 4 empty scene, 5 internal invariant.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::RoleMismatch { .. }
        | Error::SingularGeometry(_)
        | Error::InsufficientData(_) => 2,
        Error::Format { .. } | Error::Parse { .. } | Error::Io { .. } | Error::NoOverlap => 3,
        Error::EmptyScene(_) | Error::UndefinedSnr => 4,
        Error::Invariant(_) => 5,
    }
}

pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidArgument(_) => "invalid-argument",
        Error::SingularGeometry(_) => "singular-geometry",
        Error::UndefinedSnr => "undefined-snr",
        Error::RoleMismatch { .. } => "role-mismatch",
        Error::EmptyScene(_) => "empty-scene",
        Error::NoOverlap => "no-overlap",
        Error::InsufficientData(_) => "insufficient-data",
        Error::Config(_) => "config",
        Error::Format { .. } => "format",
        Error::Parse { .. } => "parse",
        Error::Io { .. } => "io",
        Error::Invariant(_) => "invariant",
    }
}

/// The single stderr line reported for `err`.
pub fn error_line(err: &Error) -> String {
    let message = err.to_string().replace(['\n', '\r'], " ").replace('"', "'");
    format!("error code={} kind={} message=\"{message}\"", exit_code(err), error_kind(err))
}

/// The single stderr line for a command-line parse failure (exit 2).
pub fn usage_error_line(err: &clap::Error) -> String {
    let text = err.to_string();
    let first = text.lines().next().unwrap_or("").trim_start_matches("error: ").replace('"', "'");
    format!("error code=2 kind=usage message=\"{first}\"")
}

/// Resolves the effective configuration from the flags.
pub fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let base = if cli.desk { RunConfig::desk() } else { RunConfig::default() };
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_ini_str_with_base(&text, base)?
        }
        None => base,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the parsed command; returns what goes to stdout.
pub fn run(cli: Cli) -> Result<String, Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, which keeps the earlier cap
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&cfg, &a),
        Command::Reconstruct(a) => cmd_reconstruct(&cfg, &a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Bench(a) => cmd_bench(&cfg, &a),
        Command::Sweep(a) => cmd_sweep(&cfg, &a),
        Command::Config => Ok(cfg.to_ini_string()),
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// `cube.fskcube` -> `cube.truth.csv`.
pub fn sidecar(cube_path: &Path, suffix: &str) -> PathBuf {
    let stem = cube_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    cube_path.with_file_name(format!("{stem}.{suffix}.csv"))
}

pub fn cmd_simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<String, Error> {
    let method = args.method.unwrap_or(cfg.method);
    let scene = cfg.scene.build()?;
    let clean = simulate(&scene, &cfg.array()?, &cfg.plan_for(method)?, cfg.amplitude_model)?;
    let seed = cfg.seed_for_run(args.run);
    let cube = match cfg.snr_db {
        Some(snr) => add_noise(&clean, snr, seed)?,
        None => clean,
    };
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.join("cube.fskcube"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_cube(&out, &cube)?;
    write_scene_csv(&sidecar(&out, "scene"), &scene)?;
    if let Some(truth) = scene.ground_truth() {
        write_depth_map_csv(&sidecar(&out, "truth"), truth)?;
    }
    let (n_tx, n_rx, n_f) = cube.dims();
    let snr = cfg.snr_db.map_or_else(|| "none".to_string(), |s| s.to_string());
    Ok(format!(
        "cube={}\nn_tx={n_tx}\nn_rx={n_rx}\nn_f={n_f}\nrole={}\nscatterers={}\nsnr_db={snr}\nseed={seed}\n",
        out.display(),
        cube.plan().role(),
        scene.scatterers().len()
    ))
}

fn reconstruct_with(cfg: &RunConfig, cube: &DataCube, method: Method) -> Result<FskOutput, Error> {
    match method {
        Method::Fsk2 => run_2fsk(cube, &cfg.image_grid()?, &cfg.fsk),
        Method::Fsk3 => run_3fsk(cube, &cfg.image_grid()?, &cfg.fsk),
        Method::Broadband => run_broadband(cube, &cfg.volume()?, cfg.sota_threshold_db),
        Method::NarrowbandSota => run_narrowband_sota(cube, &cfg.volume()?, cfg.sota_threshold_db),
    }
}

pub fn cmd_reconstruct(cfg: &RunConfig, args: &ReconstructArgs) -> Result<String, Error> {
    let method = args.method.unwrap_or(cfg.method);
    let cube = read_cube(&args.cube)?;
    let out = reconstruct_with(cfg, &cube, method)?;
    let dir = args.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    create_dir(&dir)?;
    let name = method.name();
    let csv = dir.join(format!("{name}.csv"));
    let ply = dir.join(format!("{name}.ply"));
    let telemetry = dir.join(format!("{name}.telemetry.txt"));
    write_cloud_csv(&csv, &out.cloud)?;
    write_cloud_ply(&ply, &out.cloud)?;
    let report = format!("method={name}\npoints={}\n{}", out.cloud.len(), out.telemetry.to_key_value());
    write_file(&telemetry, |w| std::io::Write::write_all(w, report.as_bytes()))?;
    Ok(format!("cloud_csv={}\ncloud_ply={}\ntelemetry={}\n{report}", csv.display(), ply.display(), telemetry.display()))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String, Error> {
    let truth = read_depth_map_csv(&args.truth)?;
    let mut scored = Vec::new();
    let mut out = String::new();
    for path in &args.estimates {
        let cloud = read_cloud_csv(path)?;
        let m = accuracy(&cloud, &truth)?;
        let _ = write!(out, "file={}\nmethod={}\n{}\n", path.display(), cloud.method(), m.to_key_value());
        scored.push((path.clone(), cloud.method(), m));
    }
    scored.sort_by(|a, b| a.2.mae_mm.total_cmp(&b.2.mae_mm));
    out.push_str("# ordering by MAE\n");
    let _ = writeln!(out, "{:<4} {:<16} {:>9} {:>13} {:>10}  file", "rank", "method", "MAE(mm)", "MAX of AE(mm)", "acc(%)");
    for (i, (path, method, m)) in scored.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<4} {:<16} {:>9.3} {:>13.3} {:>10.3}  {}",
            i + 1,
            method.name(),
            m.mae_mm,
            m.max_ae_mm,
            m.relative_accuracy,
            path.display()
        );
    }
    if let Some(path) = &args.out {
        write_file(path, |w| std::io::Write::write_all(w, out.as_bytes()))?;
    }
    Ok(out)
}

fn timed<T>(f: impl FnOnce() -> Result<T, Error>) -> Result<(T, Duration), Error> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed()))
}

pub fn cmd_bench(cfg: &RunConfig, args: &BenchArgs) -> Result<String, Error> {
    let scene = cfg.scene.build()?;
    let array = cfg.array()?;
    let channels = array.channels() as u64;
    let fsk_plan = cfg.plan_for(Method::Fsk3)?;
    let bb_plan = cfg.plan_for(Method::Broadband)?;
    let grid = cfg.image_grid()?;
    let volume = cfg.volume()?;

    let (fsk_cube, t_sim_fsk) = timed(|| simulate(&scene, &array, &fsk_plan, cfg.amplitude_model))?;
    let (bb_cube, t_sim_bb) = timed(|| simulate(&scene, &array, &bb_plan, cfg.amplitude_model))?;
    let (fsk, t_fsk) = timed(|| run_3fsk(&fsk_cube, &grid, &cfg.fsk))?;
    let (bb, t_bb) = timed(|| run_broadband(&bb_cube, &volume, cfg.sota_threshold_db))?;

    let t = &fsk.telemetry;
    let pixels = grid.lateral.len() as u64;
    let fsk_terms = (t.image_reconstructions as u64 * pixels + t.fine_point_backprojections as u64) * channels;
    let voxels = volume.len() as u64;
    let bb_terms = voxels * bb_plan.len() as u64 * channels;

    let mut out = String::new();
    let _ = writeln!(out, "channels={channels}");
    let _ = writeln!(out, "pixels={pixels}");
    let _ = writeln!(out, "voxels={voxels}");
    let _ = writeln!(out, "broadband_frequencies={}", bb_plan.len());
    let _ = writeln!(out, "fsk3_n_t={}", t.n_t);
    let _ = writeln!(out, "fsk3_image_reconstructions={}", t.image_reconstructions);
    let _ = writeln!(out, "fsk3_point_backprojections={}", t.fine_point_backprojections);
    let _ = writeln!(out, "fsk3_backprojection_terms={fsk_terms}");
    let _ = writeln!(out, "broadband_backprojection_terms={bb_terms}");
    let _ = writeln!(out, "op_count_ratio={:.3}", bb_terms as f64 / fsk_terms as f64);
    let _ = writeln!(out, "time_simulate_fsk3_s={:.6}", t_sim_fsk.as_secs_f64());
    let _ = writeln!(out, "time_simulate_broadband_s={:.6}", t_sim_bb.as_secs_f64());
    let _ = writeln!(out, "time_fsk3_s={:.6}", t_fsk.as_secs_f64());
    for (stage, d) in &t.stages {
        let _ = writeln!(out, "time_fsk3_{stage}_s={:.6}", d.as_secs_f64());
    }
    let _ = writeln!(out, "time_broadband_s={:.6}", t_bb.as_secs_f64());
    let _ = writeln!(out, "speedup={:.3}", t_bb.as_secs_f64() / t_fsk.as_secs_f64());
    let _ = writeln!(out, "fsk3_points={}", fsk.cloud.len());
    let _ = writeln!(out, "broadband_points={}", bb.cloud.len());
    if let Some(path) = &args.out {
        write_file(path, |w| std::io::Write::write_all(w, out.as_bytes()))?;
    }
    Ok(out)
}

fn parse_snrs(text: &str) -> Result<Vec<Option<f64>>, Error> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "inf" | "none" => Ok(None),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::Config(format!("bad SNR value '{v}'"))),
        })
        .collect()
}

fn parse_methods(text: Option<&str>) -> Result<Vec<Method>, Error> {
    match text {
        None => Ok(Method::ALL.to_vec()),
        Some(t) => t.split(',').map(|s| s.trim().parse::<Method>().map_err(|e| Error::Config(e.to_string()))).collect(),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, args: &SweepArgs) -> Result<String, Error> {
    let snrs = parse_snrs(&args.snr)?;
    if snrs.is_empty() {
        return Err(Error::Config("no SNR values given".into()));
    }
    let methods = parse_methods(args.methods.as_deref())?;
    let runs = args.runs.unwrap_or(cfg.seeds.len());
    let seeds: Vec<u64> = (0..runs).map(|i| cfg.seed_for_run(i)).collect();
    let scene = cfg.scene.build()?;
    let rows = compare_methods(&scene, &cfg.comparison_setup(methods)?, &snrs, &seeds)?;
    let dir = args.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    create_dir(&dir)?;
    let csv = comparison_csv(&rows);
    let text = summary_text(&summarize(&rows));
    write_file(&dir.join("comparison.csv"), |w| std::io::Write::write_all(w, csv.as_bytes()))?;
    write_file(&dir.join("summary.txt"), |w| std::io::Write::write_all(w, text.as_bytes()))?;
    Ok(text)
}
