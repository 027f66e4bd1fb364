//! Binary wire messages shared with the viewer.
//!
//! Every frame is `[u8 type][u32 payload length][payload]`, little-endian.
//! Unknown types and malformed payloads are reported with the full frame
//! length so a reader can skip them and keep the connection.

use thiserror::Error;

pub const PROTOCOL_VERSION: u16 = 1;
/// Largest accepted payload.
pub const MAX_PAYLOAD: usize = 256 << 20;
pub const HEADER_LEN: usize = 5;

pub mod kind {
    pub const HELLO: u8 = 0;
    pub const SCENE_INIT: u8 = 1;
    pub const FRAME: u8 = 2;
    pub const GRAB: u8 = 3;
    pub const DRAG: u8 = 4;
    pub const RELEASE: u8 = 5;
    pub const SET_PARAM: u8 = 6;
    pub const LIGHT: u8 = 7;
    pub const ERROR: u8 = 8;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    /// At least `needed` bytes are required before a frame can be decoded.
    #[error("incomplete frame: need {needed} bytes")]
    Incomplete { needed: usize },
    #[error("unknown message type {ty}")]
    UnknownType { ty: u8, frame_len: usize },
    #[error("malformed message type {ty}: {reason}")]
    Malformed {
        ty: u8,
        frame_len: usize,
        reason: String,
    },
    #[error("payload of {len} bytes exceeds the limit")]
    TooLarge { len: usize },
}

impl ProtocolError {
    /// Bytes to drop to get past the offending frame, when recoverable.
    pub fn skip_len(&self) -> Option<usize> {
        match self {
            Self::UnknownType { frame_len, .. } | Self::Malformed { frame_len, .. } => {
                Some(*frame_len)
            }
            _ => None,
        }
    }
}

/// Static or dynamic, as carried in the object table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectEntry {
    pub id: u32,
    pub name: String,
    pub dynamic: bool,
    /// Range of this object's splats in the splat blob.
    pub splat_range: (u32, u32),
    /// Range of this object's cage vertices.
    pub vertex_range: (u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        version: u16,
    },
    SceneInit {
        /// Binary PLY of the rest splats.
        splats: Vec<u8>,
        /// See [`encode_tetmesh`].
        tetmesh: Vec<u8>,
        emb1: Vec<u8>,
        objects: Vec<ObjectEntry>,
    },
    Frame {
        id: u64,
        positions: Vec<[f32; 3]>,
    },
    Grab {
        object: u32,
        point: [f32; 3],
        radius: f32,
    },
    Drag {
        target: [f32; 3],
    },
    Release,
    SetParam {
        object: u32,
        field: u8,
        value: f32,
    },
    Light {
        direction: [f32; 3],
        strength: f32,
    },
    Error(String),
}

impl Message {
    pub fn type_code(&self) -> u8 {
        match self {
            Self::Hello { .. } => kind::HELLO,
            Self::SceneInit { .. } => kind::SCENE_INIT,
            Self::Frame { .. } => kind::FRAME,
            Self::Grab { .. } => kind::GRAB,
            Self::Drag { .. } => kind::DRAG,
            Self::Release => kind::RELEASE,
            Self::SetParam { .. } => kind::SET_PARAM,
            Self::Light { .. } => kind::LIGHT,
            Self::Error(_) => kind::ERROR,
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend(v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend(v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend(v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend(v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        for &x in v {
            self.f32(x);
        }
    }
    fn blob(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
}

/// Serializes one message with its header.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    match msg {
        Message::Hello { version } => w.u16(*version),
        Message::SceneInit {
            splats,
            tetmesh,
            emb1,
            objects,
        } => {
            w.blob(splats);
            w.blob(tetmesh);
            w.blob(emb1);
            w.u32(objects.len() as u32);
            for o in objects {
                w.u32(o.id);
                w.u8(o.dynamic as u8);
                w.u32(o.splat_range.0);
                w.u32(o.splat_range.1);
                w.u32(o.vertex_range.0);
                w.u32(o.vertex_range.1);
                w.blob(o.name.as_bytes());
            }
        }
        Message::Frame { id, positions } => {
            w.u64(*id);
            for p in positions {
                w.f32s(p);
            }
        }
        Message::Grab {
            object,
            point,
            radius,
        } => {
            w.u32(*object);
            w.f32s(point);
            w.f32(*radius);
        }
        Message::Drag { target } => w.f32s(target),
        Message::Release => {}
        Message::SetParam {
            object,
            field,
            value,
        } => {
            w.u32(*object);
            w.u8(*field);
            w.f32(*value);
        }
        Message::Light {
            direction,
            strength,
        } => {
            w.f32s(direction);
            w.f32(*strength);
        }
        Message::Error(text) => w.0.extend_from_slice(text.as_bytes()),
    }
    let payload = w.0;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.push(msg.type_code());
    out.extend((payload.len() as u32).to_le_bytes());
    out.extend(payload);
    out
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.b.len() - self.at < n {
            return Err(format!("payload ends at byte {} of {}", self.b.len(), self.at + n));
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32, String> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn vec3(&mut self) -> Result<[f32; 3], String> {
        Ok([self.f32()?, self.f32()?, self.f32()?])
    }
    fn blob(&mut self) -> Result<Vec<u8>, String> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }
    fn finish(&self) -> Result<(), String> {
        if self.at == self.b.len() {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.b.len() - self.at))
        }
    }
}

/// Decodes the frame at the start of `bytes`, returning it and its length.
pub fn decode(bytes: &[u8]) -> Result<(Message, usize), ProtocolError> {
    if bytes.len() < HEADER_LEN {
        return Err(ProtocolError::Incomplete { needed: HEADER_LEN });
    }
    let ty = bytes[0];
    let len = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(ProtocolError::TooLarge { len });
    }
    let frame_len = HEADER_LEN + len;
    if bytes.len() < frame_len {
        return Err(ProtocolError::Incomplete { needed: frame_len });
    }
    let payload = &bytes[HEADER_LEN..frame_len];
    let msg = decode_payload(ty, payload).map_err(|reason| match reason {
        None => ProtocolError::UnknownType { ty, frame_len },
        Some(reason) => ProtocolError::Malformed {
            ty,
            frame_len,
            reason,
        },
    })?;
    Ok((msg, frame_len))
}

fn decode_payload(ty: u8, payload: &[u8]) -> Result<Message, Option<String>> {
    let mut r = Reader { b: payload, at: 0 };
    let msg = match ty {
        kind::HELLO => Message::Hello { version: r.u16()? },
        kind::SCENE_INIT => {
            let splats = r.blob()?;
            let tetmesh = r.blob()?;
            let emb1 = r.blob()?;
            let n = r.u32()? as usize;
            // Each entry takes at least 25 bytes; reject counts that cannot fit.
            if n > payload.len() / 25 {
                return Err(Some(format!("object count {n} exceeds payload")));
            }
            let mut objects = Vec::with_capacity(n);
            for _ in 0..n {
                let id = r.u32()?;
                let dynamic = match r.u8()? {
                    0 => false,
                    1 => true,
                    k => return Err(Some(format!("object kind {k}"))),
                };
                let splat_range = (r.u32()?, r.u32()?);
                let vertex_range = (r.u32()?, r.u32()?);
                let name = String::from_utf8(r.blob()?).map_err(|_| "object name is not utf-8".to_string())?;
                objects.push(ObjectEntry {
                    id,
                    name,
                    dynamic,
                    splat_range,
                    vertex_range,
                });
            }
            Message::SceneInit {
                splats,
                tetmesh,
                emb1,
                objects,
            }
        }
        kind::FRAME => {
            if payload.len() < 8 || (payload.len() - 8) % 12 != 0 {
                return Err(Some(format!("frame payload {} is not 8 + 12N", payload.len())));
            }
            let id = r.u64()?;
            let n = (payload.len() - 8) / 12;
            let mut positions = Vec::with_capacity(n);
            for _ in 0..n {
                positions.push(r.vec3()?);
            }
            Message::Frame { id, positions }
        }
        kind::GRAB => Message::Grab {
            object: r.u32()?,
            point: r.vec3()?,
            radius: r.f32()?,
        },
        kind::DRAG => Message::Drag { target: r.vec3()? },
        kind::RELEASE => Message::Release,
        kind::SET_PARAM => Message::SetParam {
            object: r.u32()?,
            field: r.u8()?,
            value: r.f32()?,
        },
        kind::LIGHT => Message::Light {
            direction: r.vec3()?,
            strength: r.f32()?,
        },
        kind::ERROR => {
            let text = std::str::from_utf8(r.take(payload.len())?).map_err(|_| "error text is not utf-8".to_string())?;
            Message::Error(text.to_string())
        }
        _ => return Err(None),
    };
    r.finish()?;
    Ok(msg)
}

/// Incremental decoder over a byte stream.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
}

impl StreamDecoder {
    pub fn feed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete message. Recoverable errors drop the offending frame;
    /// `TooLarge` clears the buffer since framing is lost.
    pub fn next_message(&mut self) -> Option<Result<Message, ProtocolError>> {
        match decode(&self.buf) {
            Ok((m, n)) => {
                self.buf.drain(..n);
                Some(Ok(m))
            }
            Err(ProtocolError::Incomplete { .. }) => None,
            Err(e) => {
                match e.skip_len() {
                    Some(n) => drop(self.buf.drain(..n)),
                    None => self.buf.clear(),
                }
                Some(Err(e))
            }
        }
    }
}

/// Cage blob: `u32 V, u32 T, f32×3V positions, u32×4T indices`.
pub fn encode_tetmesh(positions: &[[f32; 3]], tets: &[[u32; 4]]) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(8 + 12 * positions.len() + 16 * tets.len()));
    w.u32(positions.len() as u32);
    w.u32(tets.len() as u32);
    for p in positions {
        w.f32s(p);
    }
    for t in tets {
        for &i in t {
            w.u32(i);
        }
    }
    w.0
}

#[allow(clippy::type_complexity)]
pub fn decode_tetmesh(bytes: &[u8]) -> Result<(Vec<[f32; 3]>, Vec<[u32; 4]>), String> {
    let mut r = Reader { b: bytes, at: 0 };
    let v = r.u32()? as usize;
    let t = r.u32()? as usize;
    if (v as u128) * 12 + (t as u128) * 16 + 8 != bytes.len() as u128 {
        return Err(format!("tetmesh blob length {} does not match {v} vertices and {t} tets", bytes.len()));
    }
    let positions = (0..v).map(|_| r.vec3()).collect::<Result<Vec<_>, _>>()?;
    let tets = (0..t)
        .map(|_| Ok([r.u32()?, r.u32()?, r.u32()?, r.u32()?]))
        .collect::<Result<Vec<_>, String>>()?;
    if let Some(bad) = tets.iter().flatten().find(|&&i| i as usize >= v) {
        return Err(format!("tet index {bad} out of range"));
    }
    Ok((positions, tets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples() -> Vec<Message> {
        vec![
            Message::Hello { version: 1 },
            Message::SceneInit {
                splats: b"ply\nformat binary_little_endian 1.0\n".to_vec(),
                tetmesh: encode_tetmesh(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], &[[0, 1, 2, 3]]),
                emb1: b"EMB1\0\0\0\0".to_vec(),
                objects: vec![
                    ObjectEntry {
                        id: 0,
                        name: "ground".into(),
                        dynamic: false,
                        splat_range: (0, 10),
                        vertex_range: (0, 0),
                    },
                    ObjectEntry {
                        id: 1,
                        name: "ünïcode".into(),
                        dynamic: true,
                        splat_range: (10, 5),
                        vertex_range: (0, 4),
                    },
                ],
            },
            Message::Frame {
                id: 42,
                positions: vec![[1.0, 2.0, 3.0], [-0.5, 0.25, 1e-3]],
            },
            Message::Frame {
                id: u64::MAX,
                positions: vec![],
            },
            Message::Grab {
                object: 7,
                point: [0.1, 0.2, 0.3],
                radius: 0.05,
            },
            Message::Drag {
                target: [1.0, -1.0, 0.5],
            },
            Message::Release,
            Message::SetParam {
                object: 1,
                field: 0,
                value: 1e4,
            },
            Message::Light {
                direction: [0.0, -1.0, 0.0],
                strength: 0.35,
            },
            Message::Error("empty grab".into()),
        ]
    }

    #[test]
    fn hello_layout() {
        assert_eq!(encode(&Message::Hello { version: 1 }), vec![0, 2, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn frame_payload_length() {
        let b = encode(&Message::Frame {
            id: 3,
            positions: vec![[0.0; 3]; 2],
        });
        assert_eq!(u32::from_le_bytes(b[1..5].try_into().unwrap()), 8 + 24);
        assert_eq!(b.len(), 5 + 32);
    }

    #[test]
    fn round_trip_all_types() {
        for m in samples() {
            let b = encode(&m);
            assert_eq!(decode(&b), Ok((m.clone(), b.len())));
        }
    }

    #[test]
    fn truncated_frames_ask_for_more() {
        for m in samples() {
            let b = encode(&m);
            for cut in 0..b.len() {
                match decode(&b[..cut]) {
                    Err(ProtocolError::Incomplete { needed }) => assert!(needed > cut),
                    other => panic!("{other:?} at cut {cut}"),
                }
            }
        }
    }

    #[test]
    fn unknown_type_is_skippable() {
        let mut s = StreamDecoder::default();
        s.feed(&[99, 3, 0, 0, 0, 1, 2, 3]);
        s.feed(&encode(&Message::Release));
        let err = s.next_message().unwrap().unwrap_err();
        assert_eq!(err, ProtocolError::UnknownType { ty: 99, frame_len: 8 });
        assert_eq!(s.next_message(), Some(Ok(Message::Release)));
        assert_eq!(s.next_message(), None);
    }

    #[test]
    fn malformed_payloads() {
        let bad_frame = [2, 9, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 7];
        assert!(matches!(decode(&bad_frame), Err(ProtocolError::Malformed { ty: 2, frame_len: 14, .. })));
        let long_hello = [0, 3, 0, 0, 0, 1, 0, 0];
        assert!(matches!(decode(&long_hello), Err(ProtocolError::Malformed { .. })));
        let bad_utf8 = [8, 1, 0, 0, 0, 0xff];
        assert!(matches!(decode(&bad_utf8), Err(ProtocolError::Malformed { .. })));
        let huge = [2, 0xff, 0xff, 0xff, 0xff];
        assert!(matches!(decode(&huge), Err(ProtocolError::TooLarge { .. })));
    }

    #[test]
    fn stream_decoder_reassembles_split_input() {
        let all: Vec<u8> = samples().iter().flat_map(encode).collect();
        let mut s = StreamDecoder::default();
        let mut got = Vec::new();
        for chunk in all.chunks(3) {
            s.feed(chunk);
            while let Some(m) = s.next_message() {
                got.push(m.unwrap());
            }
        }
        assert_eq!(got, samples());
        assert_eq!(s.buffered(), 0);
    }

    #[test]
    fn tetmesh_blob_round_trip() {
        let p = vec![[0.0, 1.0, 2.0], [3.0, 4.0, 5.0], [6.0; 3], [7.0; 3]];
        let t = vec![[0, 1, 2, 3], [3, 2, 1, 0]];
        let b = encode_tetmesh(&p, &t);
        assert_eq!(decode_tetmesh(&b), Ok((p, t)));
        assert!(decode_tetmesh(&b[..b.len() - 1]).is_err());
        let bad = encode_tetmesh(&[[0.0; 3]], &[[0, 0, 0, 1]]);
        assert!(decode_tetmesh(&bad).is_err());
    }

    #[test]
    fn decoder_survives_fuzzing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let corpus: Vec<Vec<u8>> = samples().iter().map(encode).collect();
        let mut ok = 0;
        for i in 0..1_000_000 {
            let bytes: Vec<u8> = if i % 2 == 0 {
                let n = rng.random_range(0..40);
                let mut b: Vec<u8> = (0..n).map(|_| rng.random()).collect();
                if n > 0 {
                    b[0] %= 10;
                }
                if n >= 5 && rng.random_bool(0.7) {
                    let len = (n - 5) as u32;
                    b[1..5].copy_from_slice(&len.to_le_bytes());
                }
                b
            } else {
                let mut b = corpus[rng.random_range(0..corpus.len())].clone();
                for _ in 0..rng.random_range(1..4) {
                    let at = rng.random_range(0..b.len());
                    b[at] = rng.random();
                }
                b
            };
            if let Ok((m, n)) = decode(&bytes) {
                // Accepted input re-encodes to the same bytes.
                assert_eq!(encode(&m), bytes[..n]);
                ok += 1;
            }
        }
        assert!(ok > 1000);
    }
}
