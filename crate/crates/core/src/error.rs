use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("temperature {temperature} °C is outside the WLF validity range (C2 + T - T_G = {denominator})")]
    TemperatureOutOfRange { temperature: f64, denominator: f64 },

    #[error("singular collocation system: {0}")]
    SingularSystem(String),

    #[error("Newton iteration did not converge at t = {time} s after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
