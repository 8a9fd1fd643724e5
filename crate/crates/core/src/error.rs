use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PvError {
    #[error("diode solver did not converge after {iterations} iterations (V = {voltage} V, G = {irradiance} W/m2, T = {temperature} degC)")]
    NonConvergence { voltage: f64, irradiance: f64, temperature: f64, iterations: usize },
    #[error("terminal voltage must be finite and non-negative, got {0} V")]
    InvalidVoltage(f64),
    #[error("invalid PV parameters: {0}")]
    InvalidParams(String),
    #[error("invalid environment: {0}")]
    InvalidEnv(String),
    #[error("invalid sweep: v_min = {v_min}, v_max = {v_max}, n_points = {n_points}")]
    InvalidSweep { v_min: f64, v_max: f64, n_points: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InverterError {
    #[error("grid d-axis voltage is zero; reactive power reference cannot be mapped to current")]
    ZeroGridVoltage,
    #[error("DC bus collapse: voltage fell to {v_dc:.3} V (guard {guard} V)")]
    BusCollapse { v_dc: f64, guard: f64 },
}

/// Scenario invariant violated.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid scenario: {0}")]
pub struct ScenarioError(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("events out of order: t={t} after t={previous}")]
    UnsortedEvents { t: f64, previous: f64 },
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("{0}")]
    Invalid(String),
}

/// Scenario file parse failure with 1-based location.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SummaryError {
    #[error("no records fall inside the trailing {window} s window")]
    EmptyWindow { window: f64 },
    #[error("window {window} s exceeds the record span {span} s")]
    WindowTooLong { window: f64, span: f64 },
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
}
