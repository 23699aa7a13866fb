use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A species or run configuration did not match the expected schema.
    #[error("schema error at key `{key}`: {message}")]
    Schema { key: String, message: String },

    /// A physical parameter was outside its allowed range.
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    /// The field has a π component, which the shift formulas do not cover.
    #[error("unsupported geometry: π-polarized amplitude {eps_pi_sq:.3e} must vanish when the beam is parallel to B")]
    UnsupportedGeometry { eps_pi_sq: f64 },

    /// A comb line sits exactly on the hyperfine splitting.
    #[error("comb factor is singular at comb index offset k = {k}")]
    CombSingularity { k: i64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit did not converge: {0}")]
    FitNotConverged(String),
}

impl Error {
    pub(crate) fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn schema(key: &str, message: impl Into<String>) -> Self {
        Error::Schema {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
