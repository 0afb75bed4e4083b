use serde_json::{json, Value};

use hme_core::alphabet::{NOREL_ID, NUM_LABELS, SYMBOLS};
use hme_core::api::{recognize_sample, recognize_with_oracle, RecognitionResult, Recognizer};
use hme_core::eval::EvalReport;
use hme_core::ink::{FeatureSequence, FrameKind};
use hme_core::model::{Checkpoint, Classifier, Hyper, ModelParams};
use hme_core::srt::Srt;
use hme_core::synth::{render, showcase};
use hme_core::tree_build::RecognizeOptions;

fn validator(name: &str) -> jsonschema::Validator {
    let path = format!("{}/../../schemas/{name}.schema.json", env!("CARGO_MANIFEST_DIR"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn oracle_results_match_schema() {
    let v = validator("recognition_result");
    for (id, layout) in showcase() {
        let sample = render(id, &layout, 0.02, 3).unwrap();
        let res = recognize_with_oracle(&sample, &RecognizeOptions::default()).unwrap();
        assert_valid(&v, &serde_json::to_value(&res).unwrap());
    }
}

/// Says "x" on every pen-down frame and NoRel on every pen-up, so no
/// sub-tree can be attached to another.
struct NoRelEverywhere;

impl Classifier for NoRelEverywhere {
    fn classify(&self, feats: &FeatureSequence) -> hme_core::Result<Vec<Vec<f64>>> {
        let x = SYMBOLS.iter().position(|s| *s == "x").unwrap();
        Ok(feats
            .kinds
            .iter()
            .map(|k| {
                let mut row = vec![1e-4; NUM_LABELS];
                row[if matches!(k, FrameKind::Stroke(_)) { x } else { NOREL_ID }] = 1.0;
                let sum: f64 = row.iter().sum();
                row.iter().map(|p| p / sum).collect()
            })
            .collect())
    }
}

#[test]
fn results_with_dropped_fragments_match_schema() {
    let (id, layout) = &showcase()[0];
    let sample = render(id, layout, 0.0, 0).unwrap();
    let res = recognize_sample(&NoRelEverywhere, &sample, &RecognizeOptions::default()).unwrap();
    assert_eq!(res.srt.len() + res.dropped_fragments.len(), sample.strokes.len());
    assert!(!res.dropped_fragments.is_empty());
    assert!(res.dropped_fragments.iter().all(|f| f.srt.nodes()[0].bbox.is_some()));
    assert_valid(&validator("recognition_result"), &serde_json::to_value(&res).unwrap());
}

#[test]
fn model_results_match_schema() {
    let params = ModelParams::init(Hyper { layers: 1, hidden: 6, ..Hyper::default() });
    let rec = Recognizer::from_checkpoint(&Checkpoint::with_defaults(&params)).unwrap();
    let (id, layout) = &showcase()[5];
    let res = rec.recognize(&render(id, layout, 0.02, 1).unwrap()).unwrap();
    let doc = serde_json::to_value(&res).unwrap();
    assert_valid(&validator("recognition_result"), &doc);
    let back: RecognitionResult = serde_json::from_value(doc).unwrap();
    assert_eq!(back, res);
}

#[test]
fn eval_reports_match_schema() {
    let v = validator("eval_report");
    assert_valid(&v, &serde_json::to_value(EvalReport::from_pairs(&[], 0)).unwrap());
    let truths: Vec<Srt> =
        showcase().iter().map(|(id, l)| render(id, l, 0.0, 0).unwrap().ground_truth.unwrap()).collect();
    let pairs: Vec<(Option<&Srt>, &Srt)> = truths
        .iter()
        .enumerate()
        .map(|(i, t)| match i % 3 {
            0 => (Some(t), t),
            1 => (None, t),
            _ => (Some(&truths[(i + 1) % truths.len()]), t),
        })
        .collect();
    assert_valid(&v, &serde_json::to_value(EvalReport::from_pairs(&pairs, 4)).unwrap());
}

#[test]
fn schemas_reject_unversioned_documents() {
    let v = validator("eval_report");
    let mut doc = serde_json::to_value(EvalReport::from_pairs(&[], 0)).unwrap();
    doc.as_object_mut().unwrap().remove("v");
    assert!(!v.is_valid(&doc));
}

#[test]
fn stroke_requests() {
    let v = validator("strokes");
    assert!(v.is_valid(&json!({"strokes": [[[0, 0], [1.5, 2]], [[3, 3]]]})));
    assert!(v.is_valid(&json!({"v": 1, "strokes": []})));
    assert!(!v.is_valid(&json!({"strokes": [[[0, 0, 1]]]})));
    assert!(!v.is_valid(&json!({"strokes": [[]]})));
    assert!(!v.is_valid(&json!({"points": []})));
}
