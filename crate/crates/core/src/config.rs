//! Configuration schema, validation and the flat `key = value` file
//! format. Unknown keys are errors; every key maps 1:1 onto a field.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Fixed LeakyReLU slope used by every activation in the network.
pub const LEAKY_SLOPE: f64 = 0.1;

/// Which flow estimator backs the interpolation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// Always-zero flow; interpolation degenerates to frame blending.
    Zero,
    /// Small trainable coarse-to-fine flow network.
    PyramidLite,
}

impl FlowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowKind::Zero => "zero",
            FlowKind::PyramidLite => "pyramid-lite",
        }
    }
}

/// Phase of the sub-sampling grid used by the degradation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradePhase {
    /// Sample at cell centers (r*j + (r-1)/2). Commutes with flips and
    /// rotations, which the augmentation consistency contract requires.
    Center,
    /// Sample the top-left corner of each r x r cell.
    TopLeft,
}

impl DegradePhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            DegradePhase::Center => "center",
            DegradePhase::TopLeft => "topleft",
        }
    }
}

/// Architectural and loss hyperparameters plus the data-pipeline knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Spatial upscaling factor r.
    pub scale_r: usize,
    /// Number of input frames per window (odd).
    pub window_size: usize,
    /// Encoder/decoder dense block count B.
    pub num_blocks: usize,
    /// Feature width of every block output.
    pub base_channels: usize,
    /// Loss weights for the motion, spatial and interpolation terms.
    pub lambda_m: f64,
    pub lambda_s: f64,
    pub lambda_f: f64,
    /// Ablation: bypass everything after early fusion.
    pub disable_efst: bool,
    /// Ablation: feed fused features instead of decoded features to the
    /// intermediate-frame decoding passes.
    pub use_fused_skips: bool,
    pub flow_estimator: FlowKind,
    /// Gaussian sigma of the degradation blur.
    pub degrade_sigma: f64,
    pub degrade_phase: DegradePhase,
    /// Temporal sampling stride reserving intermediate ground truth.
    pub stride: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scale_r: 4,
            window_size: 7,
            num_blocks: 3,
            base_channels: 64,
            lambda_m: 1.0,
            lambda_s: 1.0,
            lambda_f: 1.0,
            disable_efst: false,
            use_fused_skips: false,
            flow_estimator: FlowKind::PyramidLite,
            degrade_sigma: 1.5,
            degrade_phase: DegradePhase::Center,
            stride: 2,
        }
    }
}

/// Configuration error naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Invalid { field: &'static str, reason: String },
    UnknownKey(String),
    Parse { line: usize, reason: String },
}

impl core::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ConfigError::Invalid { field, reason } => write!(f, "invalid `{field}`: {reason}"),
            ConfigError::UnknownKey(k) => write!(f, "unknown config key `{k}`"),
            ConfigError::Parse { line, reason } => write!(f, "config line {line}: {reason}"),
        }
    }
}

impl core::error::Error for ConfigError {}

/// A [`ModelConfig`] whose invariants have been checked. Construction
/// goes through [`ModelConfig::validate`] only.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig(ModelConfig);

impl core::ops::Deref for ValidatedConfig {
    type Target = ModelConfig;
    fn deref(&self) -> &ModelConfig {
        &self.0
    }
}

impl ValidatedConfig {
    pub fn into_inner(self) -> ModelConfig {
        self.0
    }
}

impl ModelConfig {
    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        fn bad(field: &'static str, reason: String) -> ConfigError {
            ConfigError::Invalid { field, reason }
        }
        if self.scale_r != 2 && self.scale_r != 4 {
            return Err(bad("scale_r", format!("must be 2 or 4, got {}", self.scale_r)));
        }
        if self.window_size < 3 || self.window_size % 2 == 0 {
            return Err(bad(
                "window_size",
                format!("must be odd and >= 3, got {}", self.window_size),
            ));
        }
        if self.num_blocks < 1 {
            return Err(bad("num_blocks", "must be >= 1".to_string()));
        }
        if self.base_channels < 1 {
            return Err(bad("base_channels", "must be >= 1".to_string()));
        }
        for (name, v) in [
            ("lambda_m", self.lambda_m),
            ("lambda_s", self.lambda_s),
            ("lambda_f", self.lambda_f),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::Invalid {
                    field: match name {
                        "lambda_m" => "lambda_m",
                        "lambda_s" => "lambda_s",
                        _ => "lambda_f",
                    },
                    reason: format!("must be a finite value >= 0, got {v}"),
                });
            }
        }
        if !(self.degrade_sigma > 0.0) || !self.degrade_sigma.is_finite() {
            return Err(bad(
                "degrade_sigma",
                format!("must be > 0, got {}", self.degrade_sigma),
            ));
        }
        if self.stride < 2 {
            return Err(bad("stride", format!("must be >= 2, got {}", self.stride)));
        }
        Ok(ValidatedConfig(self))
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: core::str::FromStr>(
            field: &'static str,
            value: &str,
        ) -> Result<T, ConfigError> {
            value.trim().parse().map_err(|_| ConfigError::Invalid {
                field,
                reason: format!("cannot parse `{value}`"),
            })
        }
        match key {
            "scale_r" => self.scale_r = parse("scale_r", value)?,
            "window_size" => self.window_size = parse("window_size", value)?,
            "num_blocks" => self.num_blocks = parse("num_blocks", value)?,
            "base_channels" => self.base_channels = parse("base_channels", value)?,
            "lambda_m" => self.lambda_m = parse("lambda_m", value)?,
            "lambda_s" => self.lambda_s = parse("lambda_s", value)?,
            "lambda_f" => self.lambda_f = parse("lambda_f", value)?,
            "disable_efst" => self.disable_efst = parse("disable_efst", value)?,
            "use_fused_skips" => self.use_fused_skips = parse("use_fused_skips", value)?,
            "flow.estimator" => {
                self.flow_estimator = match value.trim() {
                    "zero" => FlowKind::Zero,
                    "pyramid-lite" => FlowKind::PyramidLite,
                    other => {
                        return Err(ConfigError::Invalid {
                            field: "flow.estimator",
                            reason: format!("expected `zero` or `pyramid-lite`, got `{other}`"),
                        })
                    }
                }
            }
            "degrade_sigma" => self.degrade_sigma = parse("degrade_sigma", value)?,
            "degrade_phase" => {
                self.degrade_phase = match value.trim() {
                    "center" => DegradePhase::Center,
                    "topleft" => DegradePhase::TopLeft,
                    other => {
                        return Err(ConfigError::Invalid {
                            field: "degrade_phase",
                            reason: format!("expected `center` or `topleft`, got `{other}`"),
                        })
                    }
                }
            }
            "stride" => self.stride = parse("stride", value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a flat UTF-8 `key = value` document on top of the defaults.
    /// Empty lines and `#` comments are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<ModelConfig, ConfigError> {
        let mut cfg = ModelConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Apply a document to an existing config.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: no + 1,
                reason: "expected `key = value`".to_string(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Canonical serialization; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        format!(
            "scale_r = {}\nwindow_size = {}\nnum_blocks = {}\nbase_channels = {}\n\
             lambda_m = {}\nlambda_s = {}\nlambda_f = {}\ndisable_efst = {}\n\
             use_fused_skips = {}\nflow.estimator = {}\ndegrade_sigma = {}\n\
             degrade_phase = {}\nstride = {}\n",
            self.scale_r,
            self.window_size,
            self.num_blocks,
            self.base_channels,
            self.lambda_m,
            self.lambda_s,
            self.lambda_f,
            self.disable_efst,
            self.use_fused_skips,
            self.flow_estimator.as_str(),
            self.degrade_sigma,
            self.degrade_phase.as_str(),
            self.stride,
        )
    }

    /// The fields that determine the parameter set, as (name, value)
    /// pairs. Checkpoints refuse to load when these differ.
    pub fn fingerprint(&self) -> Vec<(&'static str, String)> {
        alloc::vec![
            ("scale_r", self.scale_r.to_string()),
            ("window_size", self.window_size.to_string()),
            ("num_blocks", self.num_blocks.to_string()),
            ("base_channels", self.base_channels.to_string()),
            ("disable_efst", self.disable_efst.to_string()),
            ("flow.estimator", self.flow_estimator.as_str().to_string()),
        ]
    }

    /// Fields differing between two fingerprints: (name, self, other).
    pub fn fingerprint_diff(&self, other: &ModelConfig) -> Vec<(&'static str, String, String)> {
        self.fingerprint()
            .into_iter()
            .zip(other.fingerprint())
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, b)| (a.0, a.1, b.1))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.scale_r, 4);
        assert_eq!(cfg.window_size, 7);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unsupported_scale() {
        let cfg = ModelConfig {
            scale_r: 3,
            ..Default::default()
        };
        match cfg.validate().unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "scale_r"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_even_window() {
        let cfg = ModelConfig {
            window_size: 6,
            ..Default::default()
        };
        match cfg.validate().unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "window_size"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let v1 = ModelConfig::default().validate().unwrap();
        let v2 = v1.clone().into_inner().validate().unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn parse_emit_roundtrip() {
        let mut cfg = ModelConfig::default();
        cfg.set("scale_r", "2").unwrap();
        cfg.set("flow.estimator", "zero").unwrap();
        cfg.set("lambda_f", "0.5").unwrap();
        let parsed = ModelConfig::parse(&cfg.emit()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ModelConfig::parse("bogus_key = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("bogus_key".into()));
    }

    #[test]
    fn fingerprint_diff_names_fields() {
        let a = ModelConfig::default();
        let b = ModelConfig {
            base_channels: 32,
            disable_efst: true,
            ..Default::default()
        };
        let diff = a.fingerprint_diff(&b);
        let names: Vec<_> = diff.iter().map(|d| d.0).collect();
        assert_eq!(names, alloc::vec!["base_channels", "disable_efst"]);
    }
}
