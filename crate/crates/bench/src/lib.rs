//! Shared inputs for the benches.

use splatdyn::meshgen::{build_cage, CageOptions};
use splatdyn::synth::SynthKind;
use splatdyn::{build_embedding, Camera, EmbeddingTable, SplatScene, TetMesh, Vec3};

pub struct BarScene {
    pub splats: SplatScene,
    pub cage: TetMesh,
    pub table: EmbeddingTable,
}

/// The synthetic bar caged at `cell` and embedded with k = 2.
pub fn bar(cell: f64) -> BarScene {
    let splats = SynthKind::Bar.generate(0);
    let cage = build_cage(
        &splats.means(),
        &CageOptions {
            cell_size: Some(cell),
            ..CageOptions::default()
        },
    )
    .expect("bar cage")
    .mesh;
    let table = build_embedding(&splats, &cage, 2.0).expect("bar embedding");
    BarScene { splats, cage, table }
}

/// Cage positions under a quarter twist about the bar axis.
pub fn twisted(cage: &TetMesh) -> Vec<Vec3> {
    cage.vertices
        .iter()
        .map(|v| {
            let (s, c) = ((v.x + 0.4) / 0.8 * std::f64::consts::FRAC_PI_2).sin_cos();
            Vec3::new(v.x, c * v.y - s * v.z, s * v.y + c * v.z)
        })
        .collect()
}

pub fn camera(width: usize, height: usize) -> Camera {
    Camera {
        position: Vec3::new(0.0, 0.4, 1.6),
        look_at: Vec3::zeros(),
        width,
        height,
        ..Camera::default()
    }
}
