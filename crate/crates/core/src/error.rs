use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid ring descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("operands live in different rings ({left} vs {right})")]
    RingMismatch { left: String, right: String },
    #[error("no canonical ring map from {from} to {to}")]
    NoCanonicalMap { from: String, to: String },
    #[error("element {0} is not integral in the target ring")]
    NonIntegralElement(String),
    #[error("Laurent exponent {exponent} outside the window [-{window}, {window}]")]
    ExponentOverflow { exponent: i64, window: i64 },

    #[error("homogeneous degrees {left} and {right} differ")]
    DegreeMismatch { left: i64, right: i64 },
    #[error("substituted series has a nonzero constant term")]
    NonzeroConstantTerm,
    #[error("constant term is not a unit")]
    NonUnitConstantTerm,
    #[error("series is not divisible")]
    NotDivisible,
    #[error("lowest coefficient of the divisor is a zero divisor")]
    ZeroDivisorPivot,

    #[error("beta must be a unit (of degree 2 in a graded ring)")]
    NonUnitBeta,
    #[error("formal group law coefficient {0} is not p-integral")]
    NonIntegralCoefficient(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("unknown formal group law name `{0}`")]
    UnknownFgl(String),

    #[error("bad orbit requires an even multiplicity, got {0}")]
    BadOrbitOddMultiplicity(u32),
    #[error("cannot certify the localization of [{multiple}](u) at truncation {truncation}")]
    UnknownLocalization { multiple: u32, truncation: usize },
    #[error("tower does not stabilize by its final level")]
    NonStabilizingTower,
    #[error("malformed tower: {0}")]
    InvalidTower(String),

    #[error("orbit length must be positive")]
    NonpositiveLength,
    #[error("Atiyah-Hirzebruch degeneration fails: 2(p^m-1) = {period} vs dim {dim} (weinstein: {weinstein})")]
    DegenerationHypothesisFails { period: i64, dim: u32, weinstein: bool },
    #[error("slope {0} coincides with an orbit length")]
    SlopeHitsOrbitLength(String),
    #[error("invalid manifold model: {0}")]
    InvalidModel(String),
    #[error("tower values do not stabilize in k: {0}")]
    NonStabilizing(String),
    #[error("no abelian group produces the observed tower: {0}")]
    InconsistentPattern(String),
    #[error("malformed completed module: {0}")]
    MalformedCompletedModule(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
