use super::*;
use crate::protocol::decode;
use crate::script::parse;

fn resolver() -> AssetResolver {
    AssetResolver::new(".", 0)
}

const TWO: &str = r#"
object "ground" { splats "synth:ground"; static; }
object "ball" { splats "synth:blob"; pose t [0 0.3 0]; }
sim { cell 0.04; gravity [0 0 0]; fps 25; duration 0.2; }
camera { size 48 36; eye [0 0.4 1.5]; target [0 0.2 0]; }
"#;

#[test]
fn assembles_static_and_dynamic_objects() {
    let script = parse(TWO).unwrap();
    let scene = Scene::load(&script, &resolver()).unwrap();
    assert_eq!(scene.objects.len(), 2);
    let (g, b) = (&scene.objects[0], &scene.objects[1]);
    assert_eq!(g.splats, 0..1600);
    assert_eq!(g.body, None);
    assert!(g.vertices.is_empty() && g.rows.is_empty());
    assert_eq!(b.body, Some(0));
    assert_eq!(b.splats.start, 1600);
    assert_eq!(b.vertices, 0..scene.cage.vertex_count());
    assert_eq!(scene.table.len(), b.splats.len());
    assert_eq!(scene.row_splat[0], 1600);
    assert!(scene.collisions.sdf.is_some());
    assert!(scene.splats.splats[b.splats.clone()].iter().all(|s| s.segment_label == 1));
    let lowest = scene.splats.splats[b.splats.clone()]
        .iter()
        .map(|s| s.mean[1])
        .fold(f32::INFINITY, f32::min);
    assert!(lowest > 0.15, "pose applied");
}

#[test]
fn tables_of_several_bodies_bind_to_their_own_cage() {
    let text = r#"
object "a" { splats "synth:blob"; pose t [-0.3 0 0]; }
object "b" { splats "synth:blob"; pose t [0.3 0 0]; }
sim { cell 0.05; }
"#;
    let scene = Scene::load(&parse(text).unwrap(), &resolver()).unwrap();
    let body_of_tet = |t: u32| scene.tet_body[t as usize];
    for (r, bind) in scene.table.bindings.iter().enumerate() {
        let want = if r < scene.objects[0].rows.end { 0 } else { 1 };
        assert!(bind.iter().all(|b| body_of_tet(b.tet) == want));
    }
    let rest = crate::embedding::deform_splats(&scene.table, &scene.embedded_splats(), &scene.cage, &scene.cage.vertices).unwrap();
    for (r, &s) in scene.row_splat.iter().enumerate() {
        assert!((rest.means[r] - scene.splats.splats[s as usize].mean()).norm() < 1e-6);
    }
}

#[test]
fn empty_timeline_without_gravity_stays_at_rest() {
    let script = parse(TWO).unwrap();
    let mut sim = Simulation::new(Scene::load(&script, &resolver()).unwrap(), &script).unwrap();
    let start = sim.deformed.clone();
    for _ in 0..3 {
        sim.step_frame().unwrap();
    }
    assert_eq!(sim.frame, 3);
    assert!((sim.time() - 0.12).abs() < 1e-9);
    for (a, b) in start.means.iter().zip(&sim.deformed.means) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn scripted_drag_moves_the_grabbed_kernels_monotonically() {
    let text = r#"
object "bar" { splats "synth:bar"; youngs 2e4; }
sim { cell 0.08; gravity [0 0 0]; fps 50; }
timeline {
  at 0 pin "bar" box [-0.5 -0.2 -0.2] [-0.3 0.2 0.2];
  at 0.02 grab "bar" point [0.4 0 0] radius 0.1;
  at 0.04 drag to [0.4 0.15 0];
  at 0.2 release;
}
"#;
    let script = parse(text).unwrap();
    let mut sim = Simulation::new(Scene::load(&script, &resolver()).unwrap(), &script).unwrap();
    let mut ys = Vec::new();
    for _ in 0..10 {
        sim.step_frame().unwrap();
        if let Some(m) = sim.tracked_mean() {
            ys.push(m.y);
        }
    }
    assert!(ys.len() >= 8);
    for w in ys.windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "{ys:?}");
    }
    assert!(ys.last().unwrap() - ys[0] > 0.1, "{ys:?}");
}

#[test]
fn remove_hides_kernels_and_freezes_dynamic_body() {
    let text = r#"
object "ball" { splats "synth:blob"; }
sim { cell 0.05; fps 25; }
timeline { at 0.04 remove "ball"; }
"#;
    let script = parse(text).unwrap();
    let mut sim = Simulation::new(Scene::load(&script, &resolver()).unwrap(), &script).unwrap();
    sim.step_frame().unwrap();
    assert!(sim.is_removed(0));
    assert!(sim.visible().splats.iter().all(|s| s.opacity() == 0.0));
    let x = sim.state.x.clone();
    sim.step_frame().unwrap();
    assert_eq!(x, sim.state.x);
}

#[test]
fn empty_grab_is_an_error() {
    let text = r#"
object "ball" { splats "synth:blob"; }
sim { cell 0.05; }
timeline { at 0 grab "ball" point [5 5 5] radius 0.01; }
"#;
    let script = parse(text).unwrap();
    let err = Simulation::new(Scene::load(&script, &resolver()).unwrap(), &script).unwrap_err();
    assert!(err.to_string().contains("empty grab"), "{err}");
}

#[test]
fn scene_init_describes_the_scene() {
    let script = parse(TWO).unwrap();
    let scene = Scene::load(&script, &resolver()).unwrap();
    let bytes = crate::protocol::encode(&scene.scene_init());
    let (msg, used) = decode(&bytes).unwrap();
    assert_eq!(used, bytes.len());
    let Message::SceneInit {
        splats,
        tetmesh,
        emb1,
        objects,
    } = msg
    else {
        panic!("wrong message");
    };
    assert_eq!(load_splats(&splats).unwrap().len(), scene.splats.len());
    let (v, t) = crate::protocol::decode_tetmesh(&tetmesh).unwrap();
    assert_eq!((v.len(), t.len()), (scene.cage.vertex_count(), scene.cage.tets.len()));
    assert_eq!(EmbeddingTable::from_emb1(&emb1).unwrap().len(), scene.table.len());
    assert_eq!(objects[1].splat_range, (1600, scene.splats.len() as u32));
    assert!(!objects[0].dynamic && objects[1].dynamic);
}

#[test]
fn deformed_scene_refactors_covariances() {
    let script = parse(TWO).unwrap();
    let scene = Scene::load(&script, &resolver()).unwrap();
    let mut d = crate::embedding::DeformedSplats::from_scene(&scene.splats);
    let f = crate::Mat3::new(1.3, 0.2, 0.0, -0.1, 0.8, 0.3, 0.0, 0.1, 1.1);
    for c in &mut d.covariances {
        *c = f * *c * f.transpose();
    }
    let out = deformed_scene(&scene.splats, &d);
    for (s, want) in out.splats.iter().zip(&d.covariances) {
        let got = s.covariance();
        assert!((got - want).norm() <= 1e-5 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn headless_writes_one_frame_per_tick() {
    let script = parse(TWO).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_headless(&script, &resolver(), &RunOptions::new(dir.path())).unwrap();
    assert_eq!(summary.frames, 5);
    for k in 0..5 {
        assert!(dir.path().join(format!("frame_{k:04}.png")).is_file());
    }
    assert!(!dir.path().join("frame_0005.png").exists());
    let csv = std::fs::read_to_string(dir.path().join("frames.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let objects = std::fs::read_to_string(dir.path().join("objects.csv")).unwrap();
    assert_eq!(objects.lines().count(), 11);
}
