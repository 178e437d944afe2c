use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge indices ({a1}, {b1}) are not coprime")]
    NotCoprime { a1: i64, b1: i64 },
    #[error("amplitude must be nonzero")]
    ZeroAmplitude,
    #[error("plane-wave cutoff {cutoff} is below the potential cutoff {needed}")]
    CutoffTooSmall { cutoff: usize, needed: usize },
    #[error("eigensolver failed: {0}")]
    SolverFailure(String),
    #[error("potential is not a honeycomb potential: {op} residual {residual:e}")]
    NotHoneycomb { op: &'static str, residual: f64 },
    #[error("no two-fold degenerate pair at K below band {max_band}")]
    NoDiracPoint { max_band: usize },
    #[error("degenerate pair at band {band} is not conical (anisotropy {anisotropy:.3e})")]
    NotConical { band: usize, anisotropy: f64 },
    #[error("cone anisotropy {0:.3e} exceeds tolerance")]
    AnisotropyTooLarge(f64),
    #[error("degenerate eigenspace at K does not split into rotation eigenvectors: {0}")]
    RotationSortFailure(String),
    #[error("{which} coupling {value:e} vanishes; nondegeneracy hypothesis fails")]
    NondegeneracyFailure { which: &'static str, value: f64 },
    #[error("spectral gap closed: lower edge {lower} >= upper edge {upper}")]
    GapClosed { lower: f64, upper: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("zero mode is not normalizable")]
    NotNormalizable,
    #[error("branch tracking ambiguous near parameter {at} (overlap {overlap:.3})")]
    TrackingAmbiguity { at: f64, overlap: f64 },
    #[error("prerequisite {0} failed")]
    PrerequisiteFailure(String),
    #[error("ribbon too narrow: L_cells * delta = {0} < 10")]
    RibbonTooNarrow(f64),
    #[error("residuals are not monotone in delta: {0:?}")]
    NonMonotoneResiduals(Vec<f64>),
    #[error("in-gap count {found} differs from expected {expected}")]
    CountMismatch { expected: usize, found: usize },
    #[error("fitted order {0:.3} below required")]
    OrderTooLow(f64),
    #[error("armchair pair identification failed: {0}")]
    PairIdentificationFailure(String),
    #[error("supplied modes are not in the frame gauge (residual {0:e})")]
    GaugeMismatch(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
