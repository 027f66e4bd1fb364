use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{AssetResolver, Scene, Simulation};
use crate::script::{parse, validate, InteractionScript, ScriptError};
use crate::splat::save_splats;
use crate::{Error, Result};

/// Reads, parses and validates a script. Assets resolve relative to the
/// script's directory.
pub fn load_script(path: &Path, seed: u64) -> Result<(InteractionScript, AssetResolver)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let script = parse(&text)?;
    let diagnostics = validate(&script, |_| true);
    if !diagnostics.is_empty() {
        return Err(ScriptError { diagnostics }.into());
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolver = AssetResolver::new(base, seed);
    for o in &script.objects {
        if !resolver.exists(&o.splats) {
            return Err(Error::Asset {
                uri: o.splats.clone(),
                message: format!("object {:?}: not found", o.name),
            });
        }
    }
    Ok((script, resolver))
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Frame count; defaults to `round(duration · fps)`.
    pub frames: Option<usize>,
    pub write_images: bool,
    /// PPM instead of PNG.
    pub ppm: bool,
    /// Also write the deformed kernels of every frame as PLY.
    pub write_ply: bool,
    /// Write `timing.csv`. Off by default: wall-clock times differ between
    /// runs while every other output is reproducible.
    pub write_timing: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            frames: None,
            write_images: true,
            ppm: false,
            write_ply: false,
            write_timing: false,
        }
    }
}

/// Wall-clock milliseconds per stage of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameTiming {
    pub sim_ms: f64,
    pub deform_ms: f64,
    pub render_ms: f64,
    pub write_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub frames: usize,
    pub substeps_per_frame: u32,
    pub splats: usize,
    pub cage_vertices: usize,
    pub cage_tets: usize,
    pub timings: Vec<FrameTiming>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs a script to completion, writing per-frame images and optional PLYs
/// plus `frames.csv`, `objects.csv` and optionally `timing.csv` into `out_dir`. Frame 0 is
/// the state after the events at time 0; frame `k` follows `k` frame steps.
pub fn run_headless(
    script: &InteractionScript,
    resolver: &AssetResolver,
    options: &RunOptions,
) -> Result<RunSummary> {
    let out = &options.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let camera = script.camera.to_camera();
    camera.validate()?;
    let light = script.light.as_ref().map(|l| l.to_light());
    if let Some(l) = &light {
        l.validate()?;
    }
    let frames = options
        .frames
        .unwrap_or_else(|| (script.duration() * script.sim.fps).round().max(1.0) as usize);

    let scene = Scene::load(script, resolver)?;
    let mut sim = Simulation::new(scene, script)?;
    let mut summary = RunSummary {
        frames,
        substeps_per_frame: script.sim.substeps_per_frame(),
        splats: sim.scene.splats.len(),
        cage_vertices: sim.scene.cage.vertex_count(),
        cage_tets: sim.scene.cage.tets.len(),
        timings: Vec::with_capacity(frames),
    };
    log::info!(
        "{} frames, {} substeps each, {} splats, cage {}/{}",
        frames,
        summary.substeps_per_frame,
        summary.splats,
        summary.cage_vertices,
        summary.cage_tets
    );

    let mut frames_csv = String::from("frame,time,kinetic_energy,track_x,track_y,track_z,degenerate\n");
    let mut objects_csv = String::from("frame,object,x,y,z\n");
    let mut timing_csv = String::from("frame,sim_ms,deform_ms,render_ms,write_ms\n");
    for k in 0..frames {
        let mut timing = FrameTiming::default();
        if k > 0 {
            let t = Instant::now();
            sim.step(script.sim.substeps_per_frame() as usize)?;
            timing.sim_ms = ms(t);
            let t = Instant::now();
            sim.update_splats()?;
            sim.frame += 1;
            timing.deform_ms = ms(t);
        }
        let image = if options.write_images {
            let t = Instant::now();
            let img = sim.render(&camera, light.as_ref())?;
            timing.render_ms = ms(t);
            Some(img)
        } else {
            None
        };

        let t = Instant::now();
        if let Some(img) = image {
            let ext = if options.ppm { "ppm" } else { "png" };
            img.save(&out.join(format!("frame_{k:04}.{ext}")))?;
        }
        if options.write_ply {
            let ply = save_splats(&super::deformed_scene(&sim.scene.splats, &sim.deformed));
            write(&out.join(format!("frame_{k:04}.ply")), &ply)?;
        }
        let (tx, ty, tz) = match sim.tracked_mean() {
            Some(m) => (m.x.to_string(), m.y.to_string(), m.z.to_string()),
            None => Default::default(),
        };
        let _ = writeln!(
            frames_csv,
            "{k},{},{},{tx},{ty},{tz},{}",
            sim.time(),
            sim.state.kinetic_energy(),
            sim.deformed.degenerate_count()
        );
        for (i, o) in sim.scene.objects.iter().enumerate() {
            let c = sim.object_centroid(i);
            let _ = writeln!(objects_csv, "{k},{},{},{},{}", o.name, c.x, c.y, c.z);
        }
        timing.write_ms = ms(t);
        let _ = writeln!(
            timing_csv,
            "{k},{:.3},{:.3},{:.3},{:.3}",
            timing.sim_ms, timing.deform_ms, timing.render_ms, timing.write_ms
        );
        summary.timings.push(timing);
    }
    write(&out.join("frames.csv"), frames_csv.as_bytes())?;
    write(&out.join("objects.csv"), objects_csv.as_bytes())?;
    if options.write_timing {
        write(&out.join("timing.csv"), timing_csv.as_bytes())?;
    }
    Ok(summary)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}
