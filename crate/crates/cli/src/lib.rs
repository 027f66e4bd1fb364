//! Command implementations behind the `splatdyn` binary, and the viewer
//! server.

use std::net::TcpListener;
use std::path::{Path, PathBuf};

use splatdyn::embedding::build_embedding;
use splatdyn::meshgen::{build_cage, marching_cubes, read_tetmesh, write_obj, write_tetmesh, CageOptions};
use splatdyn::pipeline::{apply_frame_fixture, load_script, run_headless, AssetResolver, RunOptions, Scene, Simulation};
use splatdyn::script::{parse, print, validate};
use splatdyn::splat::save_splats;
use splatdyn::synth::SynthKind;
use splatdyn::{Error, Result};

pub mod server;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCRIPT: i32 = 2;
pub const EXIT_ASSET: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Script(_) => EXIT_SCRIPT,
        Error::Asset { .. } | Error::Ply(_) => EXIT_ASSET,
        _ => EXIT_RUNTIME,
    }
}

/// Caps the global thread pool. `None` reads `SPLATDYN_THREADS`.
pub fn configure_threads(threads: Option<usize>) {
    let n = threads.or_else(|| std::env::var("SPLATDYN_THREADS").ok()?.parse().ok());
    if let Some(n) = n.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// `synth:<kind>` or a PLY path.
fn load_asset(uri: &str, seed: u64) -> Result<splatdyn::SplatScene> {
    AssetResolver::new(".", seed).load(uri, 0)
}

pub fn synth(kind: &str, seed: u64, out: &Path) -> Result<()> {
    let k = SynthKind::from_name(kind).ok_or_else(|| Error::Asset {
        uri: kind.into(),
        message: format!(
            "unknown kind; expected one of {}",
            SynthKind::ALL.map(|k| k.name()).join(", ")
        ),
    })?;
    let scene = k.generate(seed);
    write(out, save_splats(&scene))?;
    println!("{} splats -> {}", scene.len(), out.display());
    Ok(())
}

pub struct MeshgenArgs {
    pub input: String,
    pub out: PathBuf,
    pub cell: Option<f64>,
    pub band: (usize, usize),
    pub dilation: usize,
    pub surface: Option<PathBuf>,
    pub seed: u64,
}

pub fn meshgen(a: &MeshgenArgs) -> Result<()> {
    let scene = load_asset(&a.input, a.seed)?;
    let cage = build_cage(
        &scene.means(),
        &CageOptions {
            cell_size: a.cell,
            vertex_band: a.band,
            dilation: a.dilation,
        },
    )?;
    write(&a.out, write_tetmesh(&cage.mesh))?;
    if let Some(obj) = &a.surface {
        write(obj, write_obj(&marching_cubes(&cage.filled)))?;
    }
    println!(
        "cell {:.5}: {} vertices, {} tets -> {}",
        cage.cell_size,
        cage.mesh.vertex_count(),
        cage.mesh.tets.len(),
        a.out.display()
    );
    Ok(())
}

pub fn embed(input: &str, cage: &Path, k: f64, out: &Path, seed: u64) -> Result<()> {
    let scene = load_asset(input, seed)?;
    let text = String::from_utf8_lossy(&read(cage)?).into_owned();
    let mesh = read_tetmesh(&text)?;
    let table = build_embedding(&scene, &mesh, k)?;
    write(out, table.to_emb1())?;
    println!(
        "{} splats, {} extrapolated bindings -> {}",
        table.len(),
        table.flagged_vertices(),
        out.display()
    );
    Ok(())
}

/// Parses and validates a script, printing every diagnostic.
pub fn check(path: &Path) -> Result<()> {
    let text = String::from_utf8_lossy(&read(path)?).into_owned();
    let script = parse(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolver = AssetResolver::new(base, 0);
    let diagnostics = validate(&script, |u| resolver.exists(u));
    if diagnostics.is_empty() {
        println!("{}: ok", path.display());
        Ok(())
    } else {
        Err(splatdyn::script::ScriptError { diagnostics }.into())
    }
}

pub fn fmt(path: &Path) -> Result<()> {
    let text = String::from_utf8_lossy(&read(path)?).into_owned();
    print!("{}", print(&parse(&text)?));
    Ok(())
}

pub struct SimulateArgs {
    pub script: PathBuf,
    pub out: PathBuf,
    pub frames: Option<usize>,
    pub ply: bool,
    pub ppm: bool,
    pub no_images: bool,
    pub timing: bool,
    pub seed: u64,
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let (script, resolver) = load_script(&a.script, a.seed)?;
    let options = RunOptions {
        out_dir: a.out.clone(),
        frames: a.frames,
        write_images: !a.no_images,
        ppm: a.ppm,
        write_ply: a.ply,
        write_timing: a.timing,
    };
    let s = run_headless(&script, &resolver, &options)?;
    let total = |f: fn(&splatdyn::pipeline::FrameTiming) -> f64| s.timings.iter().map(f).sum::<f64>();
    let n = s.frames.max(1) as f64;
    println!(
        "{} frames ({} substeps each), {} splats, cage {} vertices / {} tets -> {}",
        s.frames,
        s.substeps_per_frame,
        s.splats,
        s.cage_vertices,
        s.cage_tets,
        a.out.display()
    );
    println!(
        "mean ms/frame: sim {:.1}, deform {:.1}, render {:.1}, write {:.1}",
        total(|t| t.sim_ms) / n,
        total(|t| t.deform_ms) / n,
        total(|t| t.render_ms) / n,
        total(|t| t.write_ms) / n
    );
    Ok(())
}

/// Renders frame 0 of a script.
pub fn render(script_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let (script, resolver) = load_script(script_path, seed)?;
    let sim = Simulation::new(Scene::load(&script, &resolver)?, &script)?;
    let light = script.light.as_ref().map(|l| l.to_light());
    let image = sim.render(&script.camera.to_camera(), light.as_ref())?;
    image.save(out)?;
    println!("{}x{} -> {}", image.width, image.height, out.display());
    Ok(())
}

/// Runs `frames` frames of a script and writes an apply-frame fixture with
/// the rest state and every frame.
pub fn fixture(script_path: &Path, out: &Path, frames: usize, seed: u64) -> Result<()> {
    let (script, resolver) = load_script(script_path, seed)?;
    let mut sim = Simulation::new(Scene::load(&script, &resolver)?, &script)?;
    let mut positions = vec![sim.state.x.clone()];
    for _ in 0..frames {
        sim.step_frame()?;
        positions.push(sim.state.x.clone());
    }
    let json = apply_frame_fixture(&sim.scene.table, &sim.scene.cage, &positions)?;
    let text = serde_json::to_string_pretty(&json).expect("json values serialize");
    write(out, text)?;
    println!(
        "{} splats, {} frames -> {}",
        sim.scene.table.len(),
        positions.len(),
        out.display()
    );
    Ok(())
}

pub struct ServeArgs {
    pub script: PathBuf,
    pub addr: String,
    pub seed: u64,
    pub max_frames: Option<u64>,
    pub realtime: bool,
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let (script, resolver) = load_script(&a.script, a.seed)?;
    let sim = Simulation::new(Scene::load(&script, &resolver)?, &script)?;
    let listener = TcpListener::bind(&a.addr).map_err(|e| Error::io(format!("bind {}", a.addr), e))?;
    let handle = server::spawn(
        listener,
        sim,
        server::ServerOptions {
            realtime: a.realtime,
            max_frames: a.max_frames,
            ..Default::default()
        },
    )
    .map_err(|e| Error::io("server", e))?;
    println!("listening on {}", handle.addr);
    let stats = handle.join()?;
    println!(
        "{} frames, {} clients, {} frames dropped",
        stats.frames, stats.clients, stats.dropped
    );
    Ok(())
}
