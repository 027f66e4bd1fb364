//! JSON fixtures for viewer-side implementations of the per-frame kernel
//! update. Binary blobs are hex encoded.

use serde_json::{json, Value};

use crate::embedding::{deform_into, DeformOptions, DeformedSplats, EmbeddingTable};
use crate::meshgen::TetMesh;
use crate::protocol::{encode, encode_tetmesh, Message};
use crate::{Mat3, Result, Vec3};

fn v3(v: &Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

fn m3(m: &Mat3) -> Value {
    json!([m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]])
}

/// Builds a fixture: the rest embedding, and for each cage frame the `FRAME`
/// message plus the expected means and covariances (row-major). Frames are
/// evaluated at `f32` precision, as they arrive on the wire.
pub fn apply_frame_fixture(table: &EmbeddingTable, cage: &TetMesh, frames: &[Vec<Vec3>]) -> Result<Value> {
    let to_f32 = |x: &[Vec3]| -> Vec<[f32; 3]> { x.iter().map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect() };
    let rest32 = to_f32(&cage.vertices);
    let splats: Vec<Value> = (0..table.len())
        .map(|s| {
            let l = &table.local[s];
            json!({
                "local": l.rest_vertices.iter().map(v3).collect::<Vec<_>>(),
                "mean_weights": l.rest_barycentric_of_mean,
                "bindings": table.bindings[s].iter().map(|b| json!({"tet": b.tet, "weights": b.weights})).collect::<Vec<_>>(),
                "sigma0": m3(&table.sigma0[s]),
            })
        })
        .collect();
    let mut out_frames = Vec::new();
    let mut deformed = DeformedSplats::rest(table);
    for (id, x) in frames.iter().enumerate() {
        let wire = to_f32(x);
        let exact: Vec<Vec3> = wire.iter().map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)).collect();
        deform_into(table, cage, &exact, DeformOptions::default(), &mut deformed)?;
        let message = encode(&Message::Frame {
            id: id as u64,
            positions: wire.clone(),
        });
        out_frames.push(json!({
            "id": id,
            "message": hex::encode(&message),
            "positions": wire,
            "means": deformed.means.iter().map(v3).collect::<Vec<_>>(),
            "covariances": deformed.covariances.iter().map(m3).collect::<Vec<_>>(),
            "degenerate": deformed.degenerate,
        }));
    }
    Ok(json!({
        "format": "splatdyn-apply-frame/1",
        "splat_count": table.len(),
        "vertex_count": cage.vertex_count(),
        "emb1": hex::encode(&table.to_emb1()),
        "tetmesh": hex::encode(&encode_tetmesh(&rest32, &cage.tets)),
        "cage": {
            "rest": rest32,
            "tets": cage.tets,
        },
        "splats": splats,
        "frames": out_frames,
    }))
}
