use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ModelError, Result};

/// Cost-volume regularizer variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Regularizer {
    /// Single long encoder-decoder.
    Sled,
    /// Four stride-1 3-D convolutions.
    Scc,
    /// `k` stacked hourglasses, `k` in 1..=3.
    Hourglass(usize),
}

impl Regularizer {
    pub const ALL: [Regularizer; 5] =
        [Regularizer::Scc, Regularizer::Hourglass(1), Regularizer::Hourglass(2), Regularizer::Hourglass(3), Regularizer::Sled];

    /// Row label used in comparison tables.
    pub fn label(self) -> String {
        match self {
            Regularizer::Sled => "SLED-Net".into(),
            Regularizer::Scc => "SCC-Net".into(),
            Regularizer::Hourglass(1) => "1 HG".into(),
            Regularizer::Hourglass(k) => format!("{k} HGs"),
        }
    }

    /// Number of supervised disparity outputs.
    pub fn num_outputs(self) -> usize {
        match self {
            Regularizer::Sled | Regularizer::Scc => 2,
            Regularizer::Hourglass(k) => k + 1,
        }
    }

    /// Required divisor of the 1/4-scale volume extents.
    pub fn volume_divisor(self) -> usize {
        match self {
            Regularizer::Sled => 8,
            Regularizer::Scc => 1,
            Regularizer::Hourglass(_) => 16,
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Sled => f.write_str("sled"),
            Regularizer::Scc => f.write_str("scc"),
            Regularizer::Hourglass(k) => write!(f, "hg{k}"),
        }
    }
}

impl FromStr for Regularizer {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match norm.as_str() {
            "sled" | "slednet" => Ok(Regularizer::Sled),
            "scc" | "sccnet" => Ok(Regularizer::Scc),
            "hg1" | "1hg" | "1hgs" => Ok(Regularizer::Hourglass(1)),
            "hg2" | "2hg" | "2hgs" => Ok(Regularizer::Hourglass(2)),
            "hg3" | "3hg" | "3hgs" => Ok(Regularizer::Hourglass(3)),
            _ => Err(ModelError::Parameter(format!(
                "unknown regularizer variant {s:?} (expected sled, scc, hg1, hg2 or hg3)"
            ))),
        }
    }
}

impl TryFrom<String> for Regularizer {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Regularizer> for String {
    fn from(r: Regularizer) -> String {
        r.to_string()
    }
}

/// Architectural hyperparameters.
///
/// Widths: the backbone runs at `backbone_channels` and emits
/// `feat_channels`; the regularizer runs at `reg_channels` at 1/4 scale
/// and twice that from 1/8 scale down; hourglass interiors run at
/// `hg_channels`. With `paper_scale` set, [`ModelConfig::resolved`]
/// replaces all widths with the full-size preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Disparity search range in full-resolution pixels.
    pub max_disp: usize,
    pub feat_channels: usize,
    pub backbone_channels: usize,
    pub reg_channels: usize,
    pub hg_channels: usize,
    pub regularizer: Regularizer,
    /// Residual blocks at 1/4, 1/8, 1/16 and 1/32 scale.
    pub encoder_block_layout: [usize; 4],
    pub atrous_dilation: usize,
    pub paper_scale: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_disp: 32,
            feat_channels: 4,
            backbone_channels: 8,
            reg_channels: 8,
            hg_channels: 13,
            regularizer: Regularizer::Sled,
            encoder_block_layout: [2, 2, 2, 2],
            atrous_dilation: 2,
            paper_scale: false,
        }
    }
}

impl ModelConfig {
    pub fn desk(regularizer: Regularizer) -> Self {
        ModelConfig { regularizer, ..Default::default() }
    }

    /// Full-width preset sized for parameter accounting.
    pub fn paper(regularizer: Regularizer) -> Self {
        ModelConfig { regularizer, paper_scale: true, ..Default::default() }.resolved()
    }

    /// Applies the full-size width preset when `paper_scale` is set.
    pub fn resolved(&self) -> Self {
        if !self.paper_scale {
            return self.clone();
        }
        ModelConfig {
            max_disp: 192,
            feat_channels: 32,
            backbone_channels: 32,
            reg_channels: 32,
            hg_channels: 52,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(ModelError::Parameter(m));
        if self.max_disp == 0 || self.max_disp % 4 != 0 {
            return err(format!("max_disp must be a positive multiple of 4, got {}", self.max_disp));
        }
        for (name, v) in [
            ("feat_channels", self.feat_channels),
            ("backbone_channels", self.backbone_channels),
            ("reg_channels", self.reg_channels),
            ("hg_channels", self.hg_channels),
            ("atrous_dilation", self.atrous_dilation),
        ] {
            if v == 0 {
                return err(format!("{name} must be > 0"));
            }
        }
        match self.regularizer {
            Regularizer::Sled => {
                let total: usize = self.encoder_block_layout.iter().sum();
                if total != 8 {
                    return err(format!("SLED encoder needs 8 residual blocks in total, layout sums to {total}"));
                }
            }
            Regularizer::Hourglass(k) if !(1..=3).contains(&k) => {
                return err(format!("hourglass count must be 1, 2 or 3, got {k}"));
            }
            _ => {}
        }
        Ok(())
    }

    /// First 8 bytes of SHA-256 over the canonical JSON of the resolved config.
    pub fn digest(&self) -> u64 {
        let json = serde_json::to_string(&self.resolved()).expect("config serialises");
        let hash = Sha256::digest(json.as_bytes());
        u64::from_le_bytes(hash[..8].try_into().expect("8 bytes"))
    }

    /// Channel width at encoder scale index 0..4 (1/4 .. 1/32).
    pub fn encoder_channels(&self, scale: usize) -> usize {
        if scale == 0 {
            self.reg_channels
        } else {
            2 * self.reg_channels
        }
    }

    /// Required divisor of the full-resolution image height/width.
    pub fn image_divisor(&self) -> usize {
        match self.regularizer {
            Regularizer::Hourglass(_) => 64,
            _ => 32,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_variant_names() {
        assert_eq!("SLED-Net".parse::<Regularizer>().unwrap(), Regularizer::Sled);
        assert_eq!("2HGs".parse::<Regularizer>().unwrap(), Regularizer::Hourglass(2));
        assert_eq!("hg3".parse::<Regularizer>().unwrap(), Regularizer::Hourglass(3));
        assert!("hg4".parse::<Regularizer>().is_err());
        assert!("unet".parse::<Regularizer>().is_err());
    }

    #[test]
    fn validation_rules() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad_disp = ModelConfig { max_disp: 30, ..Default::default() };
        assert!(bad_disp.validate().is_err());
        let bad_layout = ModelConfig { encoder_block_layout: [2, 2, 2, 1], ..Default::default() };
        assert!(bad_layout.validate().is_err());
        let scc_layout = ModelConfig { regularizer: Regularizer::Scc, ..bad_layout };
        assert!(scc_layout.validate().is_ok());
        let bad_hg = ModelConfig::desk(Regularizer::Hourglass(4));
        assert!(bad_hg.validate().is_err());
        let zero = ModelConfig { reg_channels: 0, ..Default::default() };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cfg = ModelConfig::desk(Regularizer::Hourglass(2));
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"hg2\""));
        let back: ModelConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"max_disp": 32, "bogus": 1}"#).is_err());
    }

    #[test]
    fn digest_tracks_architecture() {
        let a = ModelConfig::desk(Regularizer::Sled);
        let b = ModelConfig::desk(Regularizer::Scc);
        assert_eq!(a.digest(), a.clone().digest());
        assert_ne!(a.digest(), b.digest());
    }
}
