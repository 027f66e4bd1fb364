//! `EMB1` binary embedding table.
//!
//! Little-endian, after the 4-byte magic:
//!
//! | field            | type | count      |
//! |------------------|------|------------|
//! | n_splats         | u32  | 1          |
//! | n_cage_tets      | u32  | 1          |
//! | local rest verts | f32  | n · 4 · 3  |
//! | mean weights     | f32  | n · 4      |
//! | vertex tet index | u32  | n · 4      |
//! | vertex weights   | f32  | n · 4 · 4  |
//! | Σ₀ (xx xy xz yy yz zz) | f32 | n · 6 |
//! | vertex flags     | u8   | n · 4      |
//!
//! Flag bit 0 marks an extrapolated (out-of-cage) binding.

use super::{EmbeddingError, EmbeddingTable, LocalTet, VertexBinding};
use crate::math::{sym_from_array, sym_to_array};
use crate::Vec3;

pub const MAGIC: &[u8; 4] = b"EMB1";

pub fn encoded_len(n: usize) -> usize {
    12 + n * (4 * (12 + 4 + 4 + 16 + 6) + 4)
}

impl EmbeddingTable {
    pub fn to_emb1(&self) -> Vec<u8> {
        let n = self.len();
        let mut out = Vec::with_capacity(encoded_len(n));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(self.cage_tets as u32).to_le_bytes());
        let f = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
        for l in &self.local {
            for v in &l.rest_vertices {
                for c in v.iter() {
                    f(&mut out, *c);
                }
            }
        }
        for l in &self.local {
            for w in l.rest_barycentric_of_mean {
                f(&mut out, w);
            }
        }
        for b in &self.bindings {
            for v in b {
                out.extend_from_slice(&v.tet.to_le_bytes());
            }
        }
        for b in &self.bindings {
            for v in b {
                for w in v.weights {
                    f(&mut out, w);
                }
            }
        }
        for s in &self.sigma0 {
            for v in sym_to_array(s) {
                f(&mut out, v);
            }
        }
        for b in &self.bindings {
            for v in b {
                out.push(v.flagged as u8);
            }
        }
        out
    }

    /// Decodes an `EMB1` blob. Values come back at `f32` precision.
    pub fn from_emb1(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let bad = |m: &str| EmbeddingError::Format(m.to_string());
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing EMB1 magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let n = u32_at(4) as usize;
        let cage_tets = u32_at(8) as usize;
        let needed = (n as u128) * (4 * (12 + 4 + 4 + 16 + 6) + 4) + 12;
        if (bytes.len() as u128) != needed {
            return Err(bad(&format!(
                "expected {needed} bytes for {n} splats, got {}",
                bytes.len()
            )));
        }
        let mut cur = Cursor { bytes, at: 12 };
        let rest = cur.f32s(n * 12);
        let mean_w = cur.f32s(n * 4);
        let tets = cur.u32s(n * 4);
        let vw = cur.f32s(n * 16);
        let sig = cur.f32s(n * 6);
        let o = cur.at;
        let flags = &bytes[o..o + 4 * n];

        let mut local = Vec::with_capacity(n);
        let mut bindings = Vec::with_capacity(n);
        let mut sigma0 = Vec::with_capacity(n);
        for s in 0..n {
            let verts: [Vec3; 4] = std::array::from_fn(|j| {
                let b = s * 12 + j * 3;
                Vec3::new(rest[b], rest[b + 1], rest[b + 2])
            });
            let w: [f64; 4] = std::array::from_fn(|j| mean_w[s * 4 + j]);
            local.push(LocalTet::from_parts(verts, w)?);
            let mut bind = [VertexBinding::default(); 4];
            for (j, b) in bind.iter_mut().enumerate() {
                let tet = tets[s * 4 + j];
                if tet as usize >= cage_tets {
                    return Err(bad(&format!("splat {s} binds to tet {tet} out of range")));
                }
                b.tet = tet;
                b.weights = std::array::from_fn(|i| vw[s * 16 + j * 4 + i]);
                b.flagged = flags[s * 4 + j] & 1 != 0;
            }
            bindings.push(bind);
            let a: [f64; 6] = std::array::from_fn(|i| sig[s * 6 + i]);
            sigma0.push(sym_from_array(&a));
        }
        Ok(EmbeddingTable {
            local,
            bindings,
            sigma0,
            cage_tets,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, count: usize) -> &[u8] {
        let s = &self.bytes[self.at..self.at + 4 * count];
        self.at += 4 * count;
        s
    }

    fn f32s(&mut self, count: usize) -> Vec<f64> {
        self.take(count)
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect()
    }

    fn u32s(&mut self, count: usize) -> Vec<u32> {
        self.take(count)
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    }
}
