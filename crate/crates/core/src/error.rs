use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("potential is not strictly subharmonic: Laplacian {value:e} at r = {radius}")]
    NotSubharmonic { radius: f64, value: f64 },

    #[error("unsupported droplet geometry: r q'(r) is not increasing near r = {radius}")]
    UnsupportedDroplet { radius: f64 },

    #[error("unsupported potential: {0}")]
    UnsupportedPotential(String),

    #[error(
        "divergent norm at degree {degree}: the weight is integrable only when n/m < rho \
         (n/m = {ratio}, rho = {rho})"
    )]
    DivergentNorm { degree: usize, ratio: f64, rho: f64 },

    #[error(
        "numerical rank loss at degree {degree}: pivot {pivot:e} against leading {leading:e}; \
         use a smaller n or higher precision accumulation"
    )]
    RankLoss { degree: usize, pivot: f64, leading: f64 },

    #[error("one-point density is negative ({value:e}) at z = {z}")]
    NegativeDensity { z: Complex64, value: f64 },

    #[error("quadrature grid too coarse: trace {trace} differs from n = {n}")]
    GridTooCoarse { trace: f64, n: usize },

    #[error("cumulant order {0} exceeds the cap of 6; enable the high-order override")]
    OrderCap(usize),

    #[error("rejection envelope re-estimated {0} times without success")]
    EnvelopeExhausted(usize),

    #[error("eigenvalue solver did not converge for a {0}x{0} matrix")]
    EigenSolver(usize),

    #[error("test function not bulk-supported: {0}")]
    NotBulkSupported(String),

    #[error("one-point density underflows at anchor {0}; use log-domain diagnostics")]
    AnchorUnderflow(Complex64),

    #[error("anchor {anchor} is within {distance} of the droplet boundary")]
    AnchorNearBoundary { anchor: Complex64, distance: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
