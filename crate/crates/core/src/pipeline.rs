//! Glue between the stages: manifests from samples, and scoring a
//! classifier over a labelled set.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::extract::{extract_sample, ExtractConfig, ManifestRecord};
use crate::ink::{load_inkml_file, normalize, InkSample};
use crate::model::Classifier;
use crate::srt::Srt;
use crate::tree_build::{recognize, RecognizeOptions};

/// Every `.inkml` file under `dir`, recursively, in path order.
pub fn inkml_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("inkml")) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Load every InkML file under `dir`. Files that fail to parse are returned
/// separately so callers can warn and carry on.
pub fn load_inkml_dir(dir: &Path) -> Result<(Vec<InkSample>, Vec<(PathBuf, Error)>)> {
    let mut samples = Vec::new();
    let mut failed = Vec::new();
    for path in inkml_files(dir)? {
        match load_inkml_file(&path) {
            Ok(s) => samples.push(s),
            Err(e) => failed.push((path, e)),
        }
    }
    Ok((samples, failed))
}

/// Normalize and extract every sample. Samples that cannot be used are
/// returned separately with the reason.
pub fn build_manifest(
    samples: &[InkSample],
    cfg: &ExtractConfig,
    spacing: f64,
) -> (Vec<ManifestRecord>, Vec<(String, Error)>) {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for s in samples {
        let res = normalize(s, spacing).and_then(|n| {
            let paths = extract_sample(&n, cfg)?;
            Ok(paths.iter().map(|p| ManifestRecord::new(&n, p)).collect::<Vec<_>>())
        });
        match res {
            Ok(r) => records.extend(r),
            Err(e) => skipped.push((s.source_id.clone(), e)),
        }
    }
    (records, skipped)
}

/// Recognize every sample with ground truth; `None` marks a failed
/// recognition. The second value counts samples without ground truth.
pub fn predict_all(
    classifier: &dyn Classifier,
    samples: &[InkSample],
    opts: &RecognizeOptions,
) -> (Vec<(Option<Srt>, Srt)>, usize) {
    let labelled: Vec<&InkSample> = samples.iter().filter(|s| s.ground_truth.is_some()).collect();
    let pairs = labelled
        .par_iter()
        .map(|s| {
            let pred = recognize(classifier, s, opts).ok().map(|r| r.srt);
            (pred, s.ground_truth.clone().expect("filtered"))
        })
        .collect();
    (pairs, samples.len() - labelled.len())
}

pub fn evaluate(classifier: &dyn Classifier, samples: &[InkSample], opts: &RecognizeOptions) -> EvalReport {
    let (pairs, excluded) = predict_all(classifier, samples, opts);
    let refs: Vec<(Option<&Srt>, &Srt)> = pairs.iter().map(|(p, t)| (p.as_ref(), t)).collect();
    EvalReport::from_pairs(&refs, excluded)
}

/// Fraction of samples recognized exactly.
pub fn expression_rate(classifier: &dyn Classifier, samples: &[InkSample], opts: &RecognizeOptions) -> Result<f64> {
    let (pairs, _) = predict_all(classifier, samples, opts);
    if pairs.is_empty() {
        return Err(Error::Empty("no labelled samples".into()));
    }
    let ok = pairs.iter().filter(|(p, t)| p.as_ref().is_some_and(|p| p.same_structure(t))).count();
    Ok(ok as f64 / pairs.len() as f64)
}
