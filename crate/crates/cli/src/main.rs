//! `eipc`: run scenes, convergence studies, intersection audits and the
//! built-in verification suite.
//!
//! Exit codes: 0 success, 1 error (message on stderr), 2 the run finished but
//! some steps ended with a solver diagnostic (line-search stall or Newton
//! iteration cap).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use embedded_ipc::mesh::io::read_obj;
use embedded_ipc::scene::{self, audit_intersections, RunOptions, Scene, SceneSpec};
use embedded_ipc::verify::{self, VerifyOptions};

const EXIT_ERROR: u8 = 1;
const EXIT_DIAGNOSTIC: u8 = 2;

#[derive(Parser)]
#[command(name = "eipc", version, about = "Embedded barrier-contact simulator")]
#[command(after_help = "Exit codes: 0 success, 1 error, 2 solver diagnostics during the run.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Shared {
    /// Scene description (JSON).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time step override (s).
    #[arg(long)]
    h: Option<f64>,
    /// Simulated duration override (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene and write forces.csv, stats.csv and config_effective.json.
    Run {
        #[command(flatten)]
        shared: Shared,
        /// Also write frame_%06d.obj surface snapshots.
        #[arg(long)]
        frames: bool,
        /// Skip the per-frame exact intersection audit.
        #[arg(long)]
        no_audit: bool,
    },
    /// Step-size study against a fine reference; writes convergence.csv.
    Convergence {
        #[command(flatten)]
        shared: Shared,
        /// Comma-separated step sizes (s).
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.01,0.005")]
        h_list: Vec<f64>,
        /// Reference step size (s).
        #[arg(long, default_value_t = 1e-3)]
        h_ref: f64,
    },
    /// Check a scene's initial state, or every frame_*.obj in a directory,
    /// for intersecting triangles.
    Audit {
        #[command(flatten)]
        shared: Shared,
        /// Directory of frame_%06d.obj snapshots of the scene.
        #[arg(long)]
        frames_dir: Option<PathBuf>,
    },
    /// Finite-difference, distance-oracle, equivalence and statics checks.
    Verify {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    command: &'a str,
    scene_path: Option<&'a Path>,
    threads: Option<usize>,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_list: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_ref: Option<f64>,
    scene: &'a SceneSpec,
}

type CliResult = Result<u8, String>;

fn scene_path(shared: &Shared) -> Result<&Path, String> {
    shared.scene.as_deref().ok_or_else(|| "missing --scene PATH".to_string())
}

fn out_dir(shared: &Shared) -> Result<&Path, String> {
    shared.out.as_deref().ok_or_else(|| "missing --out DIR".to_string())
}

/// Scene file with command-line overrides applied.
fn effective_spec(shared: &Shared) -> Result<(SceneSpec, PathBuf), String> {
    let path = scene_path(shared)?;
    let mut spec = scene::load_spec(path).map_err(|e| e.to_string())?;
    if let Some(h) = shared.h {
        spec.solver.h = h;
    }
    if let Some(t) = shared.duration {
        spec.duration = t;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((spec, base))
}

fn write_config(dir: &Path, config: &EffectiveConfig) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = dir.join("config_effective.json");
    let text = serde_json::to_string_pretty(config).map_err(|e| e.to_string())?;
    std::fs::write(&path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(shared: &Shared, frames: bool, audit: bool) -> CliResult {
    let (spec, base) = effective_spec(shared)?;
    let out = out_dir(shared)?;
    let scene = Scene::build(spec, &base).map_err(|e| e.to_string())?;
    write_config(
        out,
        &EffectiveConfig {
            command: "run",
            scene_path: shared.scene.as_deref(),
            threads: shared.threads,
            seed: shared.seed,
            h_list: None,
            h_ref: None,
            scene: &scene.spec,
        },
    )?;
    let log = scene::run(
        &scene,
        &RunOptions {
            out_dir: Some(out.to_path_buf()),
            write_frames: frames,
            audit,
            ..RunOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    if let Some((frame, pairs)) = log.intersections.first() {
        return Err(format!(
            "frame {frame}: {} intersecting triangle pairs, first {:?}",
            pairs.len(),
            pairs[0]
        ));
    }
    let diagnostics = log.diagnostics();
    println!(
        "{} steps, {} with diagnostics, {} newton iterations",
        log.frames.len(),
        diagnostics,
        log.frames.iter().map(|f| f.stats.newton_iters).sum::<usize>()
    );
    Ok(if diagnostics > 0 { EXIT_DIAGNOSTIC } else { 0 })
}

fn cmd_convergence(shared: &Shared, h_list: &[f64], h_ref: f64) -> CliResult {
    let (spec, base) = effective_spec(shared)?;
    let out = out_dir(shared)?;
    write_config(
        out,
        &EffectiveConfig {
            command: "convergence",
            scene_path: shared.scene.as_deref(),
            threads: shared.threads,
            seed: shared.seed,
            h_list: Some(h_list),
            h_ref: Some(h_ref),
            scene: &spec,
        },
    )?;
    let report = scene::convergence(&spec, &base, h_list, h_ref).map_err(|e| e.to_string())?;
    let path = out.join("convergence.csv");
    std::fs::write(&path, report.to_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
    for r in &report.rows {
        println!("h = {:<8} error = {:.6e} m  wall = {:.1} ms", r.h, r.error, r.wall_ms);
    }
    match report.slope {
        Some(s) => println!("log-log slope: {s:.4}"),
        None => println!("log-log slope: absent (fewer than two step sizes)"),
    }
    Ok(if report.diagnostics > 0 { EXIT_DIAGNOSTIC } else { 0 })
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".obj"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_audit(shared: &Shared, frames_dir: Option<&Path>) -> CliResult {
    let (spec, base) = effective_spec(shared)?;
    // building the scene audits the initial configuration
    let scene = Scene::build(spec, &base).map_err(|e| e.to_string())?;
    let surface = &scene.assembly.surface;
    let Some(dir) = frames_dir else {
        println!("initial configuration: no intersections");
        return Ok(0);
    };
    let files = frame_files(dir)?;
    if files.is_empty() {
        return Err(format!("{}: no frame_*.obj files", dir.display()));
    }
    let mut failed = 0;
    for f in &files {
        let (x, tris) = read_obj(f).map_err(|e| e.to_string())?;
        if x.len() != surface.num_vertices || tris != surface.triangles {
            return Err(format!("{}: mesh does not match the scene surface", f.display()));
        }
        let hits = audit_intersections(&x, surface);
        if !hits.is_empty() {
            failed += 1;
            eprintln!("{}: {} intersecting triangle pairs", f.display(), hits.len());
        }
    }
    println!("{} frames audited, {} with intersections", files.len(), failed);
    if failed > 0 {
        Err(format!("{failed} frames intersect"))
    } else {
        Ok(0)
    }
}

fn cmd_verify(shared: &Shared, inject_fault: Option<String>) -> CliResult {
    let report = verify::run_suite(&VerifyOptions {
        seed: shared.seed,
        inject_fault,
        ..VerifyOptions::default()
    })
    .map_err(|e| e.to_string())?;
    print!("{}", report.table());
    if report.passed() {
        Ok(0)
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(format!("failed checks: {}", failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the generic error code; 2 means diagnostics
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let shared = match &cli.command {
        Command::Run { shared, .. }
        | Command::Convergence { shared, .. }
        | Command::Audit { shared, .. }
        | Command::Verify { shared, .. } => shared.clone(),
    };
    if let Some(n) = shared.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let result = match cli.command {
        Command::Run { frames, no_audit, .. } => cmd_run(&shared, frames, !no_audit),
        Command::Convergence { h_list, h_ref, .. } => cmd_convergence(&shared, &h_list, h_ref),
        Command::Audit { frames_dir, .. } => cmd_audit(&shared, frames_dir.as_deref()),
        Command::Verify { inject_fault, .. } => cmd_verify(&shared, inject_fault),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
