//! Binary little-endian PLY reader/writer for splat assets.

use std::collections::HashMap;

use thiserror::Error;

use super::{GaussianSplat, SplatScene};

#[derive(Debug, Error, PartialEq)]
pub enum PlyError {
    #[error("malformed header at byte {offset}: {message}")]
    Header { offset: usize, message: String },
    #[error("unsupported PLY format `{0}` (expected binary_little_endian)")]
    Format(String),
    #[error("missing required vertex property `{0}`")]
    MissingProperty(String),
    #[error("invalid property layout: {0}")]
    Schema(String),
    #[error("truncated body: need {needed} bytes at byte {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("vertex {index}: {message}")]
    InvalidValue { index: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

fn header_err(offset: usize, message: impl Into<String>) -> PlyError {
    PlyError::Header {
        offset,
        message: message.into(),
    }
}

/// Parses the header, returning the elements and the byte offset of the body.
fn parse_header(bytes: &[u8]) -> Result<(Vec<Element>, usize), PlyError> {
    let mut offset = 0;
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    let mut first = true;
    loop {
        let Some(rel_end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(header_err(offset, "unterminated header line"));
        };
        let raw = &bytes[offset..offset + rel_end];
        let line = std::str::from_utf8(raw)
            .map_err(|_| header_err(offset, "header is not ASCII"))?
            .trim_end_matches('\r');
        let line_start = offset;
        offset += rel_end + 1;
        let mut words = line.split_ascii_whitespace();
        let keyword = words.next().unwrap_or("");
        if first {
            if line != "ply" {
                return Err(header_err(line_start, "missing `ply` magic"));
            }
            first = false;
            continue;
        }
        match keyword {
            "format" => {
                let fmt = words.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(PlyError::Format(fmt.to_string()));
                }
                saw_format = true;
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let name = words
                    .next()
                    .ok_or_else(|| header_err(line_start, "element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| header_err(line_start, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| header_err(line_start, "property before any element"))?;
                let ty = words
                    .next()
                    .ok_or_else(|| header_err(line_start, "property without type"))?;
                let prop = if ty == "list" {
                    let count = words.next().and_then(ScalarType::parse);
                    let item = words.next().and_then(ScalarType::parse);
                    match (count, item, words.next()) {
                        (Some(count), Some(item), Some(_)) => Property::List { count, item },
                        _ => return Err(header_err(line_start, "malformed list property")),
                    }
                } else {
                    let ty = ScalarType::parse(ty)
                        .ok_or_else(|| header_err(line_start, format!("unknown type `{ty}`")))?;
                    let name = words
                        .next()
                        .ok_or_else(|| header_err(line_start, "property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                element.properties.push(prop);
            }
            "end_header" => break,
            other => {
                return Err(header_err(line_start, format!("unexpected keyword `{other}`")));
            }
        }
    }
    if !saw_format {
        return Err(header_err(0, "missing format line"));
    }
    Ok((elements, offset))
}

fn need(bytes: &[u8], offset: usize, n: usize) -> Result<(), PlyError> {
    if bytes.len() < offset.saturating_add(n) {
        Err(PlyError::Truncated { offset, needed: n })
    } else {
        Ok(())
    }
}

/// Skips one instance of an element that is not the vertex element.
fn skip_row(bytes: &[u8], mut offset: usize, el: &Element) -> Result<usize, PlyError> {
    for p in &el.properties {
        match p {
            Property::Scalar { ty, .. } => {
                need(bytes, offset, ty.size())?;
                offset += ty.size();
            }
            Property::List { count, item } => {
                need(bytes, offset, count.size())?;
                let n = count.read(&bytes[offset..]);
                offset += count.size();
                if !(0.0..=1e9).contains(&n) {
                    return Err(PlyError::Schema("negative or huge list length".into()));
                }
                let len = n as usize * item.size();
                need(bytes, offset, len)?;
                offset += len;
            }
        }
    }
    Ok(offset)
}

/// Number of `f_rest_*` properties for an SH degree.
fn rest_count(degree: usize) -> usize {
    3 * ((degree + 1) * (degree + 1) - 1)
}

/// Parses a binary little-endian 3DGS PLY payload.
pub fn load_splats(bytes: &[u8]) -> Result<SplatScene, PlyError> {
    let (elements, mut offset) = parse_header(bytes)?;
    let vertex_idx = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| PlyError::Schema("no `vertex` element".into()))?;

    let mut splats = Vec::new();
    let mut sh_degree = 0;
    for (ei, el) in elements.iter().enumerate() {
        if ei != vertex_idx {
            for _ in 0..el.count {
                offset = skip_row(bytes, offset, el)?;
            }
            continue;
        }

        let mut slots: HashMap<&str, (usize, ScalarType)> = HashMap::new();
        let mut stride = 0;
        for p in &el.properties {
            match p {
                Property::Scalar { name, ty } => {
                    slots.insert(name.as_str(), (stride, *ty));
                    stride += ty.size();
                }
                Property::List { .. } => {
                    return Err(PlyError::Schema("list property on vertex element".into()));
                }
            }
        }

        let slot = |name: &str| -> Result<(usize, ScalarType), PlyError> {
            slots
                .get(name)
                .copied()
                .ok_or_else(|| PlyError::MissingProperty(name.to_string()))
        };
        let mut required = Vec::new();
        for name in [
            "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1",
            "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
        ] {
            required.push(slot(name)?);
        }
        let n_rest = (0..).take_while(|k| slots.contains_key(format!("f_rest_{k}").as_str())).count();
        sh_degree = (0..=3)
            .find(|&d| rest_count(d) == n_rest)
            .ok_or_else(|| {
                PlyError::Schema(format!("{n_rest} f_rest properties do not match an SH degree"))
            })?;
        let rest: Vec<_> = (0..n_rest)
            .map(|k| slots[format!("f_rest_{k}").as_str()])
            .collect();
        let label = slots.get("segment_label").copied();
        let per_channel = n_rest / 3;

        need(bytes, offset, el.count.saturating_mul(stride))?;
        splats.reserve(el.count);
        for index in 0..el.count {
            let row = &bytes[offset..offset + stride];
            let get = |(o, ty): (usize, ScalarType)| ty.read(&row[o..]);
            let v: Vec<f64> = required.iter().map(|&s| get(s)).collect();
            let mut s = GaussianSplat {
                mean: [v[0] as f32, v[1] as f32, v[2] as f32],
                opacity_logit: v[6] as f32,
                log_scale: [v[7] as f32, v[8] as f32, v[9] as f32],
                ..GaussianSplat::default()
            };
            if !v.iter().all(|x| x.is_finite()) {
                return Err(PlyError::InvalidValue {
                    index,
                    message: "non-finite attribute".into(),
                });
            }
            if s.log_scale.iter().any(|l| (*l as f64).exp() == f64::INFINITY || *l > 80.0) {
                return Err(PlyError::InvalidValue {
                    index,
                    message: "scale overflows".into(),
                });
            }
            s.rotation = normalize_quaternion([v[10], v[11], v[12], v[13]]).ok_or_else(|| {
                PlyError::InvalidValue {
                    index,
                    message: "zero rotation quaternion".into(),
                }
            })?;
            for c in 0..3 {
                s.sh[c][0] = v[3 + c] as f32;
                for k in 0..per_channel {
                    let value = get(rest[c * per_channel + k]);
                    if !value.is_finite() {
                        return Err(PlyError::InvalidValue {
                            index,
                            message: "non-finite SH coefficient".into(),
                        });
                    }
                    s.sh[c][1 + k] = value as f32;
                }
            }
            if let Some(l) = label {
                s.segment_label = get(l) as i32;
            }
            splats.push(s);
            offset += stride;
        }
    }
    Ok(SplatScene::from_splats(splats, sh_degree))
}

/// Keeps quaternions already within 1e-6 of unit norm untouched, so a saved
/// scene reloads bit-exactly.
fn normalize_quaternion(q: [f64; 4]) -> Option<[f32; 4]> {
    let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > 1e-12) {
        return None;
    }
    if (norm - 1.0).abs() <= 1e-6 {
        return Some(q.map(|c| c as f32));
    }
    let mut out = q.map(|c| (c / norm) as f32);
    // Rounding to f32 can leave the norm just outside the tolerance.
    let n32 = out.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
    if (n32 - 1.0).abs() > 1e-6 {
        out = out.map(|c| (c as f64 / n32) as f32);
    }
    Some(out)
}

/// Serializes a scene to binary little-endian PLY.
///
/// `segment_label` is written only when some splat has a nonzero label.
pub fn save_splats(scene: &SplatScene) -> Vec<u8> {
    let degree = scene.sh_degree.min(3);
    let n_rest = rest_count(degree);
    let per_channel = n_rest / 3;
    let with_label = scene.splats.iter().any(|s| s.segment_label != 0);

    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", scene.splats.len()));
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        header.push_str(&format!("property float {name}\n"));
    }
    for k in 0..n_rest {
        header.push_str(&format!("property float f_rest_{k}\n"));
    }
    for name in [
        "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
    ] {
        header.push_str(&format!("property float {name}\n"));
    }
    if with_label {
        header.push_str("property int segment_label\n");
    }
    header.push_str("end_header\n");

    let stride = 4 * (17 + n_rest) + if with_label { 4 } else { 0 };
    let mut out = Vec::with_capacity(header.len() + stride * scene.splats.len());
    out.extend_from_slice(header.as_bytes());
    let put = |out: &mut Vec<u8>, v: f32| out.extend_from_slice(&v.to_le_bytes());
    for s in &scene.splats {
        for v in s.mean {
            put(&mut out, v);
        }
        for _ in 0..3 {
            put(&mut out, 0.0);
        }
        for c in 0..3 {
            put(&mut out, s.sh[c][0]);
        }
        for c in 0..3 {
            for k in 0..per_channel {
                put(&mut out, s.sh[c][1 + k]);
            }
        }
        put(&mut out, s.opacity_logit);
        for v in s.log_scale {
            put(&mut out, v);
        }
        for v in s.rotation {
            put(&mut out, v);
        }
        if with_label {
            out.extend_from_slice(&s.segment_label.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_vertex(rot: [f32; 4]) -> Vec<u8> {
        let mut s = GaussianSplat::default();
        s.rotation = rot;
        let scene = SplatScene::from_splats(vec![s], 3);
        // Bypass load-time normalization by writing raw values.
        save_splats(&scene)
    }

    #[test]
    fn identity_vertex() {
        let scene = load_splats(&one_vertex([1.0, 0.0, 0.0, 0.0])).unwrap();
        let s = &scene.splats[0];
        assert_eq!(s.rotation, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.scale(), crate::Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(s.opacity(), 0.5);
        assert_eq!(s.segment_label, 0);
    }

    #[test]
    fn quaternion_is_normalized() {
        let scene = load_splats(&one_vertex([2.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(scene.splats[0].rotation, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_scene_is_valid_ply() {
        let bytes = save_splats(&SplatScene::default());
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("element vertex 0\n"));
        assert!(load_splats(&bytes).unwrap().is_empty());
    }

    #[test]
    fn labels_emit_property() {
        let mut a = GaussianSplat::default();
        let mut b = a.clone();
        a.segment_label = 0;
        b.segment_label = 1;
        let bytes = save_splats(&SplatScene::from_splats(vec![a.clone()], 3));
        assert!(!String::from_utf8_lossy(&bytes).contains("segment_label"));
        let bytes = save_splats(&SplatScene::from_splats(vec![a, b], 3));
        let header_end = bytes.windows(11).position(|w| w == b"end_header\n").unwrap();
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
        assert!(header.ends_with("property int segment_label\n"));
        let back = load_splats(&bytes).unwrap();
        assert_eq!(back.splats[1].segment_label, 1);
        assert_eq!(back.objects.len(), 2);
    }

    #[test]
    fn missing_property_is_named() {
        let bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\nend_header\n";
        assert_eq!(
            load_splats(bytes),
            Err(PlyError::MissingProperty("z".into()))
        );
    }

    #[test]
    fn malformed_header_reports_offset() {
        let bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex many\n";
        match load_splats(bytes) {
            Err(PlyError::Header { offset, .. }) => assert_eq!(offset, 36),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_splats(b"PLY\n"),
            Err(PlyError::Header { offset: 0, .. })
        ));
        assert!(matches!(
            load_splats(b"ply\nformat ascii 1.0\nend_header\n"),
            Err(PlyError::Format(_))
        ));
    }

    #[test]
    fn truncated_body() {
        let mut bytes = one_vertex([1.0, 0.0, 0.0, 0.0]);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(load_splats(&bytes), Err(PlyError::Truncated { .. })));
    }

    #[test]
    fn skips_foreign_elements_and_lower_degree() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\ncomment test\nelement meta 1\nproperty list uchar int ids\n\
element vertex 1\nproperty double x\nproperty float y\nproperty float z\n\
property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\n\
property float opacity\nproperty float scale_0\nproperty float scale_1\nproperty float scale_2\n\
property float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\nend_header\n",
        );
        bytes.push(2);
        bytes.extend_from_slice(&7i32.to_le_bytes());
        bytes.extend_from_slice(&8i32.to_le_bytes());
        bytes.extend_from_slice(&1.5f64.to_le_bytes());
        for v in [2.0f32, 3.0, 0.1, 0.2, 0.3, 1.0, -1.0, -2.0, -3.0, 0.0, 0.0, 0.0, 1.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let scene = load_splats(&bytes).unwrap();
        assert_eq!(scene.sh_degree, 0);
        let s = &scene.splats[0];
        assert_eq!(s.mean, [1.5, 2.0, 3.0]);
        assert_eq!(s.rotation, [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.sh[2][0], 0.3);
    }

    fn arb_splat() -> impl Strategy<Value = GaussianSplat> {
        (
            prop::array::uniform3(-10.0f32..10.0),
            prop::array::uniform4(-1.0f32..1.0),
            prop::array::uniform3(-6.0f32..1.0),
            -8.0f32..8.0,
            prop::collection::vec(-2.0f32..2.0, 48),
            0i32..4,
        )
            .prop_filter("non-degenerate rotation", |(_, q, ..)| {
                q.iter().map(|c| c * c).sum::<f32>() > 1e-2
            })
            .prop_map(|(mean, q, log_scale, opacity_logit, sh, label)| {
                let mut s = GaussianSplat {
                    mean,
                    rotation: normalize_quaternion(q.map(|c| c as f64)).unwrap(),
                    log_scale,
                    opacity_logit,
                    segment_label: label,
                    ..GaussianSplat::default()
                };
                for c in 0..3 {
                    s.sh[c].copy_from_slice(&sh[c * 16..(c + 1) * 16]);
                }
                s
            })
    }

    proptest! {
        #[test]
        fn round_trip_identity(splats in prop::collection::vec(arb_splat(), 0..20)) {
            let scene = SplatScene::from_splats(splats, 3);
            let back = load_splats(&save_splats(&scene)).unwrap();
            prop_assert_eq!(back, scene);
        }

        #[test]
        fn loader_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
            let mut input = b"ply\nformat binary_little_endian 1.0\n".to_vec();
            input.extend_from_slice(&bytes);
            let _ = load_splats(&input);
        }
    }
}
