//! Scene assembly from a script, the interactive runtime, and the headless
//! runner.

use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion};

use crate::embedding::{build_embedding, EmbeddingTable};
use crate::meshgen::{build_cage, fill_interior, voxelize, CageOptions, TetMesh};
use crate::protocol::{encode_tetmesh, Message, ObjectEntry};
use crate::script::{InteractionScript, Motion, SimSpec};
use crate::sim::{CollisionEnv, Ground, Material, SimConfig, Solver, StaticSdf};
use crate::splat::{load_splats, save_splats, ObjectInfo, ObjectKind, SplatScene};
use crate::synth::SynthKind;
use crate::{Error, Result, Vec3};

mod fixture;
mod headless;
mod runtime;

pub use fixture::apply_frame_fixture;
pub use headless::{load_script, run_headless, FrameTiming, RunOptions, RunSummary};
pub use runtime::{deformed_scene, Simulation};

/// Resolves `splats` URIs: `synth:<kind>` or a PLY path relative to `base`.
#[derive(Debug, Clone)]
pub struct AssetResolver {
    pub base: PathBuf,
    /// Seed for synthetic assets; object `i` uses `seed + i`.
    pub seed: u64,
}

impl AssetResolver {
    pub fn new(base: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            base: base.into(),
            seed,
        }
    }

    fn path(&self, uri: &str) -> PathBuf {
        let p = Path::new(uri);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn exists(&self, uri: &str) -> bool {
        SynthKind::from_uri(uri).is_some() || self.path(uri).is_file()
    }

    pub fn load(&self, uri: &str, index: usize) -> Result<SplatScene> {
        if let Some(kind) = SynthKind::from_uri(uri) {
            return Ok(kind.generate(self.seed.wrapping_add(index as u64)));
        }
        if uri.starts_with("synth:") {
            return Err(Error::Asset {
                uri: uri.into(),
                message: "unknown synthetic asset".into(),
            });
        }
        let path = self.path(uri);
        let bytes = std::fs::read(&path).map_err(|e| Error::Asset {
            uri: uri.into(),
            message: format!("{}: {e}", path.display()),
        })?;
        load_splats(&bytes).map_err(|e| Error::Asset {
            uri: uri.into(),
            message: e.to_string(),
        })
    }
}

/// One declared object after assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub motion: Motion,
    /// Splat indices in [`Scene::splats`].
    pub splats: Range<usize>,
    /// Solver body, for dynamic objects.
    pub body: Option<u32>,
    /// Cage vertex indices (empty for static objects).
    pub vertices: Range<usize>,
    /// Rows of [`Scene::table`] (empty for static objects).
    pub rows: Range<usize>,
}

/// Everything needed to simulate and render a script, before any stepping.
#[derive(Debug, Clone)]
pub struct Scene {
    /// All objects' kernels, posed, in declaration order. The segment label
    /// of a kernel is its object index.
    pub splats: SplatScene,
    pub objects: Vec<SceneObject>,
    /// Cages of the dynamic objects, concatenated.
    pub cage: TetMesh,
    pub tet_body: Vec<u32>,
    pub materials: Vec<Material>,
    /// Embedding of the dynamic kernels against `cage`.
    pub table: EmbeddingTable,
    /// Splat index of each table row.
    pub row_splat: Vec<u32>,
    pub collisions: CollisionEnv,
    /// Cell size used for static colliders.
    pub static_cell: f64,
}

fn pose_rotation(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

impl Scene {
    /// Loads every object's asset through `resolver` and assembles the scene.
    pub fn load(script: &InteractionScript, resolver: &AssetResolver) -> Result<Scene> {
        let assets = script
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| resolver.load(&o.splats, i))
            .collect::<Result<Vec<_>>>()?;
        Self::build(script, assets)
    }

    /// Assembles a scene from one loaded asset per declared object.
    pub fn build(script: &InteractionScript, assets: Vec<SplatScene>) -> Result<Scene> {
        assert_eq!(assets.len(), script.objects.len(), "one asset per object");
        let sim = &script.sim;
        let mut all = SplatScene {
            sh_degree: 0,
            ..SplatScene::default()
        };
        let mut objects = Vec::new();
        let mut cages = Vec::new();
        let mut tables = Vec::new();
        let mut materials = Vec::new();
        let mut tet_body = Vec::new();
        let mut row_splat = Vec::new();
        let mut vertex_count = 0;
        let mut row_count = 0;
        let mut cell_sizes = Vec::new();

        for (i, (decl, mut asset)) in script.objects.iter().zip(assets).enumerate() {
            if asset.is_empty() {
                return Err(Error::Asset {
                    uri: decl.splats.clone(),
                    message: "asset has no splats".into(),
                });
            }
            asset.transform(&pose_rotation(decl.pose.rotation), &decl.pose.translation);
            for s in &mut asset.splats {
                s.segment_label = i as i32;
            }
            all.sh_degree = all.sh_degree.max(asset.sh_degree);
            let start = all.len();
            let mut obj = SceneObject {
                name: decl.name.clone(),
                motion: decl.motion,
                splats: start..start + asset.len(),
                body: None,
                vertices: vertex_count..vertex_count,
                rows: row_count..row_count,
            };
            if decl.motion == Motion::Dynamic {
                let opts = CageOptions {
                    cell_size: sim.cell_size,
                    vertex_band: (sim.cell_band.0 as usize, sim.cell_band.1 as usize),
                    ..CageOptions::default()
                };
                let cage = build_cage(&asset.means(), &opts)?;
                let table = build_embedding(&asset, &cage.mesh, sim.k_sigma)?;
                let body = materials.len() as u32;
                log::info!(
                    "object {:?}: {} splats, cage {} vertices / {} tets at cell {:.4}",
                    decl.name,
                    asset.len(),
                    cage.mesh.vertex_count(),
                    cage.mesh.tets.len(),
                    cage.cell_size
                );
                obj.body = Some(body);
                obj.vertices = vertex_count..vertex_count + cage.mesh.vertex_count();
                obj.rows = row_count..row_count + table.len();
                vertex_count += cage.mesh.vertex_count();
                row_count += table.len();
                row_splat.extend((start..start + asset.len()).map(|s| s as u32));
                tet_body.extend(std::iter::repeat_n(body, cage.mesh.tets.len()));
                materials.push(decl.material);
                cell_sizes.push(cage.cell_size);
                cages.push(cage.mesh);
                tables.push(table);
            }
            all.objects.insert(
                i as i32,
                ObjectInfo {
                    name: decl.name.clone(),
                    kind: match decl.motion {
                        Motion::Static => ObjectKind::Static,
                        Motion::Dynamic => ObjectKind::Dynamic,
                    },
                },
            );
            all.splats.extend(asset.splats);
            objects.push(obj);
        }

        let cage = TetMesh::concat(&cages);
        let table = concat_tables(&cages, tables);
        let static_cell = sim
            .cell_size
            .or_else(|| cell_sizes.iter().copied().reduce(f64::min))
            .unwrap_or(0.05);
        let mut scene = Scene {
            splats: all,
            objects,
            cage,
            tet_body,
            materials,
            table,
            row_splat,
            collisions: CollisionEnv {
                ground: sim.ground.map(|height| Ground {
                    height,
                    friction: sim.friction,
                }),
                sdf: None,
                repulsion_radius: sim.repulsion,
            },
            static_cell,
        };
        scene.collisions.sdf = scene.static_sdf(&vec![false; scene.objects.len()])?;
        Ok(scene)
    }

    /// Distance field of the static objects not flagged in `removed`.
    pub fn static_sdf(&self, removed: &[bool]) -> Result<Option<StaticSdf>> {
        let points: Vec<Vec3> = self
            .objects
            .iter()
            .zip(removed)
            .filter(|(o, &r)| o.motion == Motion::Static && !r)
            .flat_map(|(o, _)| self.splats.splats[o.splats.clone()].iter().map(|s| s.mean()))
            .collect();
        if points.is_empty() || self.cage.tets.is_empty() {
            return Ok(None);
        }
        let grid = fill_interior(&voxelize(&points, self.static_cell)?);
        Ok(Some(StaticSdf::from_occupancy(&grid)))
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    pub fn sim_config(&self, sim: &SimSpec) -> SimConfig {
        SimConfig {
            dt: sim.dt,
            iterations: sim.iterations as usize,
            gravity: sim.gravity,
            collisions: self.collisions.clone(),
        }
    }

    pub fn solver(&self, sim: &SimSpec) -> Result<Solver> {
        Ok(Solver::with_bodies(
            self.cage.clone(),
            self.tet_body.clone(),
            self.materials.clone(),
            self.sim_config(sim),
        )?)
    }

    /// The kernels of the dynamic objects, in table row order.
    pub fn embedded_splats(&self) -> SplatScene {
        SplatScene::from_splats(
            self.row_splat.iter().map(|&s| self.splats.splats[s as usize].clone()).collect(),
            self.splats.sh_degree,
        )
    }

    /// The `SCENE_INIT` message for this scene. EMB1 rows follow the dynamic
    /// objects' splat ranges in declaration order.
    pub fn scene_init(&self) -> Message {
        let positions: Vec<[f32; 3]> = self
            .cage
            .vertices
            .iter()
            .map(|v| [v.x as f32, v.y as f32, v.z as f32])
            .collect();
        let range = |r: &Range<usize>| (r.start as u32, r.end as u32);
        Message::SceneInit {
            splats: save_splats(&self.splats),
            tetmesh: encode_tetmesh(&positions, &self.cage.tets),
            emb1: self.table.to_emb1(),
            objects: self
                .objects
                .iter()
                .enumerate()
                .map(|(i, o)| ObjectEntry {
                    id: i as u32,
                    name: o.name.clone(),
                    dynamic: o.motion == Motion::Dynamic,
                    splat_range: range(&o.splats),
                    vertex_range: range(&o.vertices),
                })
                .collect(),
        }
    }
}

/// Joins per-object tables, shifting tet indices into the concatenated cage.
fn concat_tables(cages: &[TetMesh], tables: Vec<EmbeddingTable>) -> EmbeddingTable {
    let mut out = EmbeddingTable {
        local: Vec::new(),
        bindings: Vec::new(),
        sigma0: Vec::new(),
        cage_tets: cages.iter().map(|c| c.tets.len()).sum(),
    };
    let mut offset = 0u32;
    for (cage, t) in cages.iter().zip(tables) {
        out.local.extend(t.local);
        out.sigma0.extend(t.sigma0);
        out.bindings.extend(t.bindings.into_iter().map(|b| {
            b.map(|mut v| {
                v.tet += offset;
                v
            })
        }));
        offset += cage.tets.len() as u32;
    }
    out
}

#[cfg(test)]
mod tests;
