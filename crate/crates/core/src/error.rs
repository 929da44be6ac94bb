//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A point left the domain an operation is defined on (upper half-plane,
    /// unit interval, ...). `what` names the violated condition.
    #[error("domain error: {what}")]
    Domain { what: String },

    /// Raising zero to a half-integral power.
    #[error("nonzero base required")]
    ZeroBase,

    /// A matrix failed a group membership test.
    #[error("matrix not in {group}: ({a} {b}; {c} {d})")]
    NotInGroup {
        group: String,
        a: i64,
        b: i64,
        c: i64,
        d: i64,
    },

    /// Integer arithmetic would overflow `i64`.
    #[error("integer overflow in {op}")]
    Overflow { op: &'static str },

    /// Levels must be positive multiples of 4.
    #[error("level must be a positive multiple of 4, got {level}")]
    BadLevel { level: i64 },

    /// `ε_d` is only defined for odd `d`.
    #[error("odd integer required, got {d}")]
    EvenArgument { d: i64 },

    /// Only even Dirichlet characters are admissible here.
    #[error("character mod {modulus} with index {index} is odd")]
    OddCharacter { modulus: i64, index: usize },

    /// Character construction / lookup failures.
    #[error("character error: {what}")]
    Character { what: String },

    /// A slice argument had the wrong length.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Fourier sampling below the Nyquist-like floor.
    #[error("need at least {required} samples for {nmax} coefficients, got {got}")]
    InsufficientSamples {
        required: usize,
        nmax: usize,
        got: usize,
    },

    /// A q-expansion was too short for the requested operation.
    #[error("q-expansion too short: need length {required}, got {got}")]
    ExpansionTooShort { required: usize, got: usize },

    /// A mesh with the wrong coverage was passed to an integral.
    #[error("mesh coverage mismatch: expected {expected}, got {got}")]
    MeshCoverage { expected: String, got: String },

    /// Invalid weight (the wire format carries `2m`, an odd integer).
    #[error("invalid weight 2m = {two_m}: {why}")]
    BadWeight { two_m: i64, why: String },

    /// Invalid truncation budget or grid parameter.
    #[error("invalid parameter {name}: {why}")]
    BadParameter { name: &'static str, why: String },

    /// An evaluator passed in by the caller failed; the node where it
    /// failed is attached for quadrature debugging.
    #[error("evaluator failed at z = {at}: {source}")]
    Evaluator {
        at: num_complex::Complex64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(what: impl Into<String>) -> Self {
        Error::Domain { what: what.into() }
    }

    pub fn at_node(self, z: num_complex::Complex64) -> Self {
        Error::Evaluator {
            at: z,
            source: Box::new(self),
        }
    }
}
