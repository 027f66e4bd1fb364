use std::path::{Path, PathBuf};

use splatdyn::pipeline::{AssetResolver, Scene, Simulation};
use splatdyn::render::render_scene;
use splatdyn::script::{parse, print, validate};

fn scripts_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/scripts")
}

fn corpus() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(scripts_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "vrgs"))
        .collect();
    v.push(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/bar_grab.vrgs"));
    v.sort();
    v
}

/// Scripts whose assets are deliberately absent.
const UNRUNNABLE: &[&str] = &["escapes.vrgs"];

fn runnable() -> impl Iterator<Item = PathBuf> {
    corpus()
        .into_iter()
        .filter(|p| !UNRUNNABLE.contains(&p.file_name().unwrap().to_str().unwrap()))
}

#[test]
fn every_script_round_trips_through_the_printer() {
    for path in corpus() {
        let text = std::fs::read_to_string(&path).unwrap();
        let script = parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let printed = print(&script);
        assert_eq!(parse(&printed).unwrap(), script, "{}", path.display());
        assert_eq!(print(&parse(&printed).unwrap()), printed);
    }
}

#[test]
fn runnable_scripts_validate_clean() {
    for path in runnable() {
        let script = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let resolver = AssetResolver::new(path.parent().unwrap(), 0);
        let d = validate(&script, |u| resolver.exists(u));
        assert!(d.is_empty(), "{}: {d:?}", path.display());
    }
}

#[test]
fn missing_asset_is_diagnosed() {
    let path = scripts_dir().join("escapes.vrgs");
    let script = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let resolver = AssetResolver::new(scripts_dir(), 0);
    let d = validate(&script, |u| resolver.exists(u));
    assert_eq!(d.len(), 1, "{d:?}");
    assert!(d[0].message.contains("with space.ply"), "{}", d[0].message);
}

#[test]
fn rest_render_matches_undeformed_render() {
    for path in runnable() {
        let script = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let resolver = AssetResolver::new(path.parent().unwrap(), 0);
        let sim = Simulation::new(Scene::load(&script, &resolver).unwrap(), &script).unwrap();
        let mut camera = script.camera.to_camera();
        camera.width = camera.width.min(96);
        camera.height = camera.height.min(72);
        let light = script.light.as_ref().map(|l| l.to_light());
        let deformed = sim.render(&camera, light.as_ref()).unwrap();
        let direct = render_scene(sim.visible(), &camera, light.as_ref()).unwrap();
        let diff = deformed.max_lsb_diff(&direct);
        assert!(diff <= 1, "{}: {diff} LSB", path.display());
    }
}
