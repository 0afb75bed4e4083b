//! JSON documents exchanged with the outside world: the recognition result
//! printed by the CLI, returned by the service and the C API.

use serde::{Deserialize, Serialize};

use crate::alphabet::alphabet_hash;
use crate::error::{Error, Result};
use crate::ink::{parse_strokes_json, InkSample};
use crate::model::{Checkpoint, Classifier, ModelParams, OneDSrt, OracleClassifier};
use crate::srt::{to_latex, Srt};
use crate::tree_build::{recognize, Recognition, RecognizeOptions, StageTimes, TraceEvent};

/// Version stamped into every JSON document as `"v"`.
pub const API_VERSION: u32 = 1;

/// Probability mass the oracle leaves for the other labels.
pub const ORACLE_EPS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedFragment {
    pub latex: String,
    pub srt: Srt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub v: u32,
    pub latex: String,
    pub srt: Srt,
    pub oned: OneDSrt,
    pub dropped_fragments: Vec<DroppedFragment>,
    pub timing_ms: StageTimes,
    pub trace: Vec<TraceEvent>,
}

impl From<Recognition> for RecognitionResult {
    fn from(r: Recognition) -> Self {
        RecognitionResult {
            v: API_VERSION,
            latex: to_latex(&r.srt),
            dropped_fragments: r
                .dropped
                .into_iter()
                .map(|srt| DroppedFragment { latex: to_latex(&srt), srt })
                .collect(),
            srt: r.srt,
            oned: r.oned,
            timing_ms: r.timing_ms,
            trace: r.trace,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub v: u32,
    pub status: String,
    pub alphabet_hash: String,
}

impl Health {
    pub fn ok() -> Self {
        Health { v: API_VERSION, status: "ok".into(), alphabet_hash: alphabet_hash() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphabetListing {
    pub v: u32,
    pub alphabet_hash: String,
    pub labels: Vec<String>,
}

impl AlphabetListing {
    pub fn current() -> Self {
        AlphabetListing {
            v: API_VERSION,
            alphabet_hash: alphabet_hash(),
            labels: crate::alphabet::all_label_names().into_iter().map(String::from).collect(),
        }
    }
}

/// A loaded checkpoint ready to recognize ink. Immutable, so one instance
/// can serve concurrent requests.
#[derive(Clone, Debug)]
pub struct Recognizer {
    params: ModelParams,
    opts: RecognizeOptions,
}

impl Recognizer {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let opts = RecognizeOptions { spacing: ck.spacing, off_stroke: ck.off_stroke, ..RecognizeOptions::default() };
        Ok(Recognizer { params: ck.params()?, opts })
    }

    pub fn with_options(mut self, opts: RecognizeOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn options(&self) -> &RecognizeOptions {
        &self.opts
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn recognize(&self, sample: &InkSample) -> Result<RecognitionResult> {
        recognize_sample(&self.params, sample, &self.opts)
    }

    /// Recognize a `{"strokes": ...}` document.
    pub fn recognize_json(&self, bytes: &[u8]) -> Result<RecognitionResult> {
        self.recognize(&parse_strokes_json("request", bytes)?)
    }
}

pub fn recognize_sample(
    classifier: &dyn Classifier,
    sample: &InkSample,
    opts: &RecognizeOptions,
) -> Result<RecognitionResult> {
    if sample.strokes.is_empty() {
        return Err(Error::Empty("no strokes".into()));
    }
    Ok(recognize(classifier, sample, opts)?.into())
}

/// Recognize with a classifier that reads the sample's own ground truth.
/// Useful for checking everything downstream of the network.
pub fn recognize_with_oracle(sample: &InkSample, opts: &RecognizeOptions) -> Result<RecognitionResult> {
    let truth = sample.ground_truth.clone().ok_or_else(|| Error::MissingGroundTruth(sample.source_id.clone()))?;
    let oracle = OracleClassifier::new(truth, ORACLE_EPS)?;
    recognize_sample(&oracle, sample, opts)
}
