use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "chirp undersampled: instantaneous frequency reaches {max_freq_mhz:.3} MHz, \
         sample period must be <= {max_period_ns:.3} ns ({required_rate_msps:.1} MS/s)"
    )]
    UndersampledChirp {
        max_freq_mhz: f64,
        max_period_ns: f64,
        required_rate_msps: f64,
    },

    #[error(
        "comb unresolvable: {what} spans {have_bins:.2} grid bins, at least {min_bins} required"
    )]
    CombUnresolvable {
        what: &'static str,
        have_bins: f64,
        min_bins: usize,
    },

    #[error(
        "pulse bandwidth exceeds profile grid: {outside_fraction:.3e} of the spectral energy \
         lies outside ±{half_span_mhz} MHz"
    )]
    BandwidthExceedsGrid {
        outside_fraction: f64,
        half_span_mhz: f64,
    },

    #[error("time step {dt_ns:.3} ns too coarse, required dt <= {required_ns:.3} ns")]
    StepTooLarge { dt_ns: f64, required_ns: f64 },

    #[error("{what} weights sum to {sum}, expected 1")]
    WeightsNotNormalized { what: &'static str, sum: f64 },

    #[error(
        "background target not reached: OD_B = {achieved_od:.4} after {segments} segments \
         (target {target_od})"
    )]
    BackgroundNotReached {
        achieved_od: f64,
        target_od: f64,
        segments: usize,
    },

    #[error("feature target OD {target_od} unreachable, maximum achievable {max_od:.4}")]
    FeatureUnreachable { target_od: f64, max_od: f64 },

    #[error("no transparency window prepared")]
    PitMissing,

    #[error("feature width {feature_mhz} MHz exceeds the prepared window {pit_mhz} MHz")]
    FeatureWiderThanPit { feature_mhz: f64, pit_mhz: f64 },

    #[error("{what} overlaps {other}")]
    Overlap { what: String, other: String },

    #[error("value `{name}` = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("csv: line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
