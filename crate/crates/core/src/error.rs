use std::path::PathBuf;

/// Errors produced by mesh loading, scene assembly and the time stepper.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("collision vertex {0} is not inside any embedding tetrahedron")]
    UnboundVertex(usize),

    #[error("degenerate tetrahedron (signed volume {volume:e} m^3)")]
    DegenerateTet { volume: f64 },

    #[error("degenerate triangle")]
    DegenerateTriangle,

    #[error("degenerate edge")]
    DegenerateEdge,

    #[error("non-positive contact distance {0:e} m")]
    NonpositiveDistance(f64),

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("initial configuration intersects: {0}")]
    InitialIntersection(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("reference trajectory has no sample at t = {0} s")]
    MissingSample(f64),

    #[error("sparse SPD solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("frame {frame}: {source}")]
    Step {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
