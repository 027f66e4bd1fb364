use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::math::barycentric;
use crate::meshgen::{build_cage, CageOptions};

fn random_splats(rng: &mut ChaCha8Rng, n: usize, half: f64) -> SplatScene {
    let splats = (0..n)
        .map(|_| {
            let q = crate::math::quat_wxyz([
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            GaussianSplat {
                mean: std::array::from_fn(|_| rng.random_range(-half..half) as f32),
                rotation: [q.w as f32, q.i as f32, q.j as f32, q.k as f32],
                log_scale: std::array::from_fn(|_| rng.random_range(-4.0..-2.5) as f32),
                segment_label: 1,
                ..GaussianSplat::default()
            }
        })
        .collect();
    SplatScene::from_splats(splats, 0)
}

fn cage_for(scene: &SplatScene, cell: f64) -> TetMesh {
    build_cage(
        &scene.means(),
        &CageOptions {
            cell_size: Some(cell),
            ..CageOptions::default()
        },
    )
    .unwrap()
    .mesh
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    crate::math::quat_wxyz(std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .to_rotation_matrix()
        .into_inner()
}

fn sorted_eigenvalues(m: &Mat3) -> [f64; 3] {
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    [e[0], e[1], e[2]]
}

#[test]
fn gradient_identity_and_scaling() {
    let rest = reference_tet();
    let f = deformation_gradient(&rest, &rest).unwrap();
    assert!((f - Mat3::identity()).abs().max() < 1e-15);
    let doubled = rest.map(|v| rest[0] + (v - rest[0]) * 2.0);
    let f = deformation_gradient(&rest, &doubled).unwrap();
    assert!((f - Mat3::identity() * 2.0).abs().max() < 1e-14);
}

#[test]
fn gradient_recovers_affine_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let rest: [Vec3; 4] =
            std::array::from_fn(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
        if edge_basis(&rest).determinant().abs() < 1e-3 {
            continue;
        }
        let a = Mat3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let b = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
        let cur = rest.map(|v| a * v + b);
        let f = deformation_gradient(&rest, &cur).unwrap();
        assert!((f - a).abs().max() < 1e-9);
    }
}

#[test]
fn gradient_rejects_flat_rest() {
    let flat = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::x() + Vec3::y()];
    assert!(matches!(
        deformation_gradient(&flat, &flat),
        Err(EmbeddingError::SingularRest { .. })
    ));
}

#[test]
fn unit_local_tet_has_unit_insphere() {
    let t = build_local_tet(&GaussianSplat::default(), 1.0).unwrap();
    assert_eq!(t.rest_vertices, reference_tet());
    assert_eq!(t.rest_barycentric_of_mean, [0.25; 4]);
    // Distance from the centroid to each face plane.
    for skip in 0..4 {
        let f: Vec<Vec3> = (0..4).filter(|&i| i != skip).map(|i| t.rest_vertices[i]).collect();
        let n = (f[1] - f[0]).cross(&(f[2] - f[0])).normalize();
        assert!((n.dot(&f[0]).abs() - 1.0).abs() < 1e-12);
    }
    // Circumradius 3 for insphere 1.
    assert!(t.rest_vertices.iter().all(|v| (v.norm() - 3.0).abs() < 1e-12));
}

#[test]
fn ellipsoid_is_inside_local_tet() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scene = random_splats(&mut rng, 50, 1.0);
    for s in &scene.splats {
        let k = 2.0;
        let t = build_local_tet(s, k).unwrap();
        let w = barycentric(&t.rest_vertices, &s.mean()).unwrap();
        assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-9));
        let r = s.rotation().to_rotation_matrix().into_inner();
        for _ in 0..200 {
            let u = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            let p = s.mean() + r * (s.scale().component_mul(&u) * k);
            let w = barycentric(&t.rest_vertices, &p).unwrap();
            assert!(w.iter().all(|&x| x >= -1e-9), "{w:?}");
        }
    }
}

#[test]
fn single_big_tet_binds_everything() {
    let v = vec![
        Vec3::new(-10.0, -10.0, -10.0),
        Vec3::new(30.0, -10.0, -10.0),
        Vec3::new(-10.0, 30.0, -10.0),
        Vec3::new(-10.0, -10.0, 30.0),
    ];
    let cage = TetMesh::new(v, vec![[0, 1, 2, 3]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scene = random_splats(&mut rng, 100, 1.0);
    let table = build_embedding(&scene, &cage, 2.0).unwrap();
    for b in table.bindings.iter().flatten() {
        assert_eq!(b.tet, 0);
        assert!(!b.flagged);
        assert!((b.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn shared_face_tie_goes_to_lowest_index() {
    // Two tets sharing the face (1, 2, 3).
    let v = vec![
        Vec3::zeros(),
        Vec3::x(),
        Vec3::y(),
        Vec3::z(),
        Vec3::new(1.0, 1.0, 1.0),
    ];
    let cage = TetMesh::new(v, vec![[4, 1, 3, 2], [0, 1, 2, 3]]).unwrap();
    let loc = TetLocator::new(&cage);
    let on_face = Vec3::new(1.0, 1.0, 1.0) / 3.0;
    assert_eq!(loc.locate(&on_face).unwrap().0, 0);
    let cage = TetMesh::new(cage.vertices.clone(), vec![[0, 1, 2, 3], [4, 1, 3, 2]]).unwrap();
    let loc = TetLocator::new(&cage);
    assert_eq!(loc.locate(&on_face).unwrap().0, 0);
}

#[test]
fn bindings_reconstruct_local_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scene = random_splats(&mut rng, 500, 1.0);
    let cage = cage_for(&scene, 0.2);
    let table = build_embedding(&scene, &cage, 2.0).unwrap();
    for s in 0..table.len() {
        for j in 0..4 {
            let b = &table.bindings[s][j];
            assert!((b.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((b.tet as usize) < cage.tets.len());
            let p = table.local_vertex(&cage, &cage.vertices, s, j);
            assert!((p - table.local[s].rest_vertices[j]).norm() < 1e-6);
        }
    }
}

#[test]
fn mean_outside_cage_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut scene = random_splats(&mut rng, 20, 1.0);
    let cage = cage_for(&scene, 0.3);
    scene.splats[7].mean = [50.0, 0.0, 0.0];
    assert_eq!(
        build_embedding(&scene, &cage, 2.0),
        Err(EmbeddingError::MeanOutsideCage { splat: 7 })
    );
}

#[test]
fn out_of_cage_vertices_are_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut scene = random_splats(&mut rng, 30, 1.0);
    // A very wide kernel pokes far out of the cage.
    scene.splats[0].log_scale = [0.0; 3];
    let cage = cage_for(&scene, 0.3);
    let table = build_embedding(&scene, &cage, 2.0).unwrap();
    assert!(table.bindings[0].iter().any(|b| b.flagged));
    for j in 0..4 {
        let p = table.local_vertex(&cage, &cage.vertices, 0, j);
        assert!((p - table.local[0].rest_vertices[j]).norm() < 1e-6);
    }
}

fn setup(seed: u64, n: usize) -> (SplatScene, TetMesh, EmbeddingTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = random_splats(&mut rng, n, 1.0);
    let cage = cage_for(&scene, 0.25);
    let table = build_embedding(&scene, &cage, 2.0).unwrap();
    (scene, cage, table)
}

#[test]
fn identity_deformation_is_identity() {
    let (scene, cage, table) = setup(13, 300);
    let d = deform_splats(&table, &scene, &cage, &cage.vertices).unwrap();
    for (s, splat) in scene.splats.iter().enumerate() {
        assert!((d.means[s] - splat.mean()).norm() < 1e-9);
        assert!((d.covariances[s] - splat.covariance()).abs().max() < 1e-9);
        assert!(!d.degenerate[s]);
    }
}

#[test]
fn rigid_rotation_preserves_spectra() {
    let (scene, cage, table) = setup(17, 300);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let q = random_rotation(&mut rng);
    let moved: Vec<Vec3> = cage.vertices.iter().map(|v| q * v).collect();
    let d = deform_splats(&table, &scene, &cage, &moved).unwrap();
    for s in 0..scene.len() {
        let a = sorted_eigenvalues(&d.covariances[s]);
        let b = sorted_eigenvalues(&table.sigma0[s]);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() <= 1e-6 * b[i]);
        }
        assert!((d.means[s] - q * scene.splats[s].mean()).norm() < 1e-6);
        assert!((d.rotations[s] - q).abs().max() < 1e-6);
    }
}

#[test]
fn uniform_scale_quadruples_eigenvalues() {
    let (scene, cage, table) = setup(19, 200);
    let moved: Vec<Vec3> = cage.vertices.iter().map(|v| v * 2.0).collect();
    let d = deform_splats(&table, &scene, &cage, &moved).unwrap();
    for s in 0..scene.len() {
        assert!((d.covariances[s] - table.sigma0[s] * 4.0).abs().max() < 1e-9);
        assert!((d.means[s] - scene.splats[s].mean() * 2.0).norm() < 1e-6);
    }
}

#[test]
fn deform_is_rigid_equivariant() {
    let (scene, cage, table) = setup(23, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bent: Vec<Vec3> = cage
        .vertices
        .iter()
        .map(|v| v + Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05)))
        .collect();
    let q = random_rotation(&mut rng);
    let t = Vec3::new(0.3, -1.0, 2.0);
    let moved: Vec<Vec3> = bent.iter().map(|v| q * v + t).collect();
    let a = deform_splats(&table, &scene, &cage, &bent).unwrap();
    let b = deform_splats(&table, &scene, &cage, &moved).unwrap();
    for s in 0..scene.len() {
        assert!((q * a.means[s] + t - b.means[s]).norm() < 1e-9);
        let c = q * a.covariances[s] * q.transpose();
        assert!((c - b.covariances[s]).abs().max() < 1e-9 * c.abs().max().max(1e-12));
    }
}

#[test]
fn inverted_local_tet_freezes_covariance() {
    let (scene, cage, table) = setup(29, 50);
    let mut out = DeformedSplats::rest(&table);
    let squash: Vec<Vec3> = cage.vertices.iter().map(|v| Vec3::new(v.x, v.y, 1.5 * v.z)).collect();
    deform_into(&table, &cage, &squash, DeformOptions::default(), &mut out).unwrap();
    let held = out.covariances.clone();
    let mirrored: Vec<Vec3> = cage.vertices.iter().map(|v| Vec3::new(v.x, v.y, -v.z)).collect();
    deform_into(&table, &cage, &mirrored, DeformOptions::default(), &mut out).unwrap();
    assert_eq!(out.degenerate_count(), scene.len());
    assert_eq!(out.covariances, held);
}

#[test]
fn sh_rotation_flag() {
    let (_, cage, table) = setup(31, 20);
    let q = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let moved: Vec<Vec3> = cage.vertices.iter().map(|v| q * v).collect();
    let mut out = DeformedSplats::rest(&table);
    let off = DeformOptions { sh_rotation: false };
    deform_into(&table, &cage, &moved, off, &mut out).unwrap();
    assert!(out.rotations.iter().all(|r| *r == Mat3::identity()));
}

#[test]
fn count_mismatch_is_reported() {
    let (scene, cage, table) = setup(37, 10);
    let err = deform_splats(&table, &scene, &cage, &cage.vertices[1..]).unwrap_err();
    assert!(matches!(err, EmbeddingError::CountMismatch { .. }));
}

#[test]
fn embedding_is_deterministic() {
    let (scene, cage, table) = setup(41, 400);
    let again = build_embedding(&scene, &cage, 2.0).unwrap();
    assert_eq!(table.to_emb1(), again.to_emb1());
    assert_eq!(table, again);
}

#[test]
fn emb1_round_trip() {
    let (_, _, table) = setup(43, 100);
    let bytes = table.to_emb1();
    assert_eq!(&bytes[..4], b"EMB1");
    assert_eq!(bytes.len(), emb1_len(table.len()));
    let back = EmbeddingTable::from_emb1(&bytes).unwrap();
    assert_eq!(back.len(), table.len());
    assert_eq!(back.to_emb1(), bytes);
    for s in 0..table.len() {
        for j in 0..4 {
            let (a, b) = (&back.bindings[s][j], &table.bindings[s][j]);
            assert_eq!(a.tet, b.tet);
            assert_eq!(a.flagged, b.flagged);
            for i in 0..4 {
                assert!((a.weights[i] - b.weights[i]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn emb1_rejects_bad_input() {
    let (_, _, table) = setup(47, 5);
    let bytes = table.to_emb1();
    assert!(EmbeddingTable::from_emb1(&bytes[..bytes.len() - 1]).is_err());
    assert!(EmbeddingTable::from_emb1(b"EMB2\0\0\0\0\0\0\0\0").is_err());
    let mut huge = bytes.clone();
    huge[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(EmbeddingTable::from_emb1(&huge).is_err());
    let mut bad_tet = bytes;
    let off = 12 + 5 * 16 * 4;
    bad_tet[off..off + 4].copy_from_slice(&u32::MAX.to_le_bytes());
    assert!(EmbeddingTable::from_emb1(&bad_tet).is_err());
}
