use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::meshgen::MeshError;
use crate::protocol::ProtocolError;
use crate::render::RenderError;
use crate::script::ScriptError;
use crate::sim::SimError;
use crate::splat::PlyError;

/// Crate-wide error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ply: {0}")]
    Ply(#[from] PlyError),
    #[error("meshgen: {0}")]
    Mesh(#[from] MeshError),
    #[error("embedding: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("render: {0}")]
    Render(#[from] RenderError),
    #[error("script: {0}")]
    Script(#[from] ScriptError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("asset \"{uri}\": {message}")]
    Asset { uri: String, message: String },
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
