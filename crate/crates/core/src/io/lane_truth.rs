use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane::{build_lane_model, LaneModel, LanePolynomial};

/// Boundary coefficients `[a, b, c]` for `x(y) = a*y^2 + b*y + c`. Without a
/// `domain` the provider's default row range applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneEntry {
    pub left: [f64; 3],
    pub right: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
}

/// Ground-truth lane geometry, either fixed or keyed by frame.
#[derive(Debug, Clone, PartialEq)]
pub enum LaneTruth {
    Constant(LaneEntry),
    Frames(BTreeMap<u64, LaneEntry>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneTruthFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant: Option<LaneEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<BTreeMap<String, LaneEntry>>,
}

impl LaneTruth {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LaneTruthFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("lane truth: {e}")))?;
        match (file.constant, file.frames) {
            (Some(c), None) => Ok(LaneTruth::Constant(c)),
            (None, Some(frames)) => frames
                .into_iter()
                .map(|(k, v)| {
                    k.parse::<u64>()
                        .map(|f| (f, v))
                        .map_err(|_| Error::Schema(format!("lane truth: frame key {k:?} is not a frame index")))
                })
                .collect::<Result<_>>()
                .map(LaneTruth::Frames),
            _ => Err(Error::Schema(
                "lane truth must contain exactly one of \"constant\" or \"frames\"".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            LaneTruth::Constant(c) => LaneTruthFile {
                constant: Some(c.clone()),
                frames: None,
            },
            LaneTruth::Frames(m) => LaneTruthFile {
                constant: None,
                frames: Some(m.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()),
            },
        };
        serde_json::to_string_pretty(&file).expect("lane truth serializes") + "\n"
    }
}

pub fn read_lane_truth(path: impl AsRef<Path>) -> Result<LaneTruth> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LaneTruth::from_json(&text)
}

fn entry_model(entry: &LaneEntry, default_domain: [f64; 2], frame: u64) -> Result<LaneModel> {
    let domain = entry.domain.unwrap_or(default_domain);
    let build = || -> Result<LaneModel> {
        let left = LanePolynomial::new(entry.left, domain)?;
        let right = LanePolynomial::new(entry.right, domain)?;
        build_lane_model(left, right, frame)
    };
    build().map_err(|e| Error::Schema(format!("lane truth entry for frame {frame}: {e}")))
}

/// Answers "which lane applies at frame n" from ground truth.
///
/// A frame without its own entry reuses the latest earlier entry for at most
/// `max_carry` frames; frames before the first entry have no lane.
#[derive(Debug, Clone)]
pub struct LaneTruthProvider {
    models: BTreeMap<u64, LaneModel>,
    constant: bool,
    max_carry: u64,
}

impl LaneTruthProvider {
    /// Builds every entry up front so geometry errors surface before any
    /// frame is processed.
    pub fn new(truth: &LaneTruth, default_domain: [f64; 2], max_carry: u32) -> Result<Self> {
        let (models, constant) = match truth {
            LaneTruth::Constant(e) => (BTreeMap::from([(0, entry_model(e, default_domain, 0)?)]), true),
            LaneTruth::Frames(m) => (
                m.iter()
                    .map(|(&f, e)| entry_model(e, default_domain, f).map(|model| (f, model)))
                    .collect::<Result<_>>()?,
                false,
            ),
        };
        Ok(Self {
            models,
            constant,
            max_carry: u64::from(max_carry),
        })
    }

    pub fn model_at(&self, frame: u64) -> Option<LaneModel> {
        let (&source, model) = if self.constant {
            self.models.iter().next()?
        } else {
            self.models.range(..=frame).next_back()?
        };
        if !self.constant && frame - source > self.max_carry {
            return None;
        }
        Some(LaneModel {
            frame,
            ..model.clone()
        })
    }
}
