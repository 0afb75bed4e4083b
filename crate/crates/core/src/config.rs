//! Experiment configuration as `key = value` text.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, so an
//! empty file is a valid config. [`Config::to_text`] writes a complete,
//! commented file that parses back to the same values.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::extract::{ExtractConfig, PeRule};
use crate::ink::OffStrokeFeature;
use crate::model::{Aggregation, TrainConfig};
use crate::srt::ShuffleScope;
use crate::tree_build::RecognizeOptions;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub extract: ExtractConfig,
    pub train: TrainConfig,
    pub recognize: RecognizeOptions,
}

/// Keys with a short description of the accepted values.
pub const KEYS: &[(&str, &str)] = &[
    ("spacing", "resampling step as a fraction of ink height (> 0)"),
    ("off_stroke", "pen-up feature: delta | midpoint"),
    ("aggregation", "symbol score over a segment: max | geomean"),
    ("sort_subtrees", "sort sub-trees by position before connecting: true | false"),
    ("rules", "path sources, comma separated: PE1, PE2, PE3, CQ"),
    ("pe3_count", "shuffled paths per sample (integer)"),
    ("shuffle_scope", "which children PE3 shuffles: root | all"),
    ("connection_negatives", "NoRel connection-query paths per sample (integer)"),
    ("extract_seed", "seed for path extraction (integer)"),
    ("layers", "stacked bidirectional layers (integer >= 1)"),
    ("hidden", "LSTM width per direction (integer >= 1)"),
    ("init_seed", "seed for weight initialization (integer)"),
    ("epochs", "training epochs (integer, 0 writes the initial weights)"),
    ("batch_size", "paths per update (integer >= 1)"),
    ("learning_rate", "Adam step size (> 0)"),
    ("clip_norm", "global gradient-norm clip (> 0)"),
    ("validation_fraction", "fraction of samples held out, in [0, 1)"),
    ("rule_weights", "loss weight per source PE1,PE2,PE3,CQ (4 numbers >= 0)"),
    ("constrain_intra_symbol", "penalize relations at pen-ups inside a symbol: true | false"),
    ("offstroke_weight", "weight of the symbol penalty at pen-ups (>= 0)"),
    ("seed", "seed for batch order and the validation split (integer)"),
];

fn parse_num<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("'{key}' expects {what}, got '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("'{key}' expects true or false, got '{value}'"))),
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn off_stroke_name(o: OffStrokeFeature) -> &'static str {
    match o {
        OffStrokeFeature::Delta => "delta",
        OffStrokeFeature::Midpoint => "midpoint",
    }
}

impl Config {
    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        let t = &mut self.train;
        match key {
            "spacing" => self.recognize.spacing = parse_num(key, value, "a number")?,
            "off_stroke" => {
                self.recognize.off_stroke = match value.to_ascii_lowercase().as_str() {
                    "delta" => OffStrokeFeature::Delta,
                    "midpoint" => OffStrokeFeature::Midpoint,
                    _ => return Err(Error::Config(format!("'off_stroke' expects delta or midpoint, got '{value}'"))),
                }
            }
            "aggregation" => self.recognize.aggregation = value.parse::<Aggregation>()?,
            "sort_subtrees" => self.recognize.sort = parse_bool(key, value)?,
            "rules" => {
                let rules = list(value).map(PeRule::from_str).collect::<Result<Vec<_>>>()?;
                if rules.is_empty() {
                    return Err(Error::Config("'rules' needs at least one rule".into()));
                }
                self.extract.rules = rules;
            }
            "pe3_count" => self.extract.pe3_count = parse_num(key, value, "a non-negative integer")?,
            "shuffle_scope" => {
                self.extract.scope = match value.to_ascii_lowercase().as_str() {
                    "root" => ShuffleScope::Root,
                    "all" => ShuffleScope::AllNodes,
                    _ => return Err(Error::Config(format!("'shuffle_scope' expects root or all, got '{value}'"))),
                }
            }
            "connection_negatives" => {
                self.extract.connection_negatives = parse_num(key, value, "a non-negative integer")?
            }
            "extract_seed" => self.extract.seed = parse_num(key, value, "an integer")?,
            "layers" => t.hyper.layers = parse_num(key, value, "a positive integer")?,
            "hidden" => t.hyper.hidden = parse_num(key, value, "a positive integer")?,
            "init_seed" => t.hyper.seed = parse_num(key, value, "an integer")?,
            "epochs" => t.epochs = parse_num(key, value, "a non-negative integer")?,
            "batch_size" => t.batch_size = parse_num(key, value, "a positive integer")?,
            "learning_rate" => t.learning_rate = parse_num(key, value, "a number")?,
            "clip_norm" => t.clip_norm = parse_num(key, value, "a number")?,
            "validation_fraction" => t.validation_fraction = parse_num(key, value, "a number")?,
            "rule_weights" => {
                let w = list(value)
                    .map(|v| parse_num::<f64>(key, v, "numbers"))
                    .collect::<Result<Vec<_>>>()?;
                t.rule_weights = w.try_into().map_err(|w: Vec<f64>| {
                    Error::Config(format!("'rule_weights' expects 4 numbers, got {}", w.len()))
                })?;
            }
            "constrain_intra_symbol" => t.constrain_intra_symbol = parse_bool(key, value)?,
            "offstroke_weight" => t.offstroke_weight = parse_num(key, value, "a number")?,
            "seed" => t.seed = parse_num(key, value, "an integer")?,
            other => {
                let known: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
                return Err(Error::Config(format!("unknown key '{other}'; known keys: {}", known.join(", "))));
            }
        }
        Ok(())
    }

    /// Apply a `key=value` override, as given to `--set`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        self.set(k, v)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.recognize.spacing;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("'spacing' must be positive, got {s}")));
        }
        self.train.validate()
    }

    /// Write every key with its current value.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let e = &self.extract;
        let r = &self.recognize;
        let rules: Vec<&str> = e.rules.iter().map(|r| r.name()).collect();
        let weights: Vec<String> = t.rule_weights.iter().map(|w| w.to_string()).collect();
        let values = [
            r.spacing.to_string(),
            off_stroke_name(r.off_stroke).to_string(),
            match r.aggregation {
                Aggregation::Max => "max",
                Aggregation::GeometricMean => "geomean",
            }
            .to_string(),
            r.sort.to_string(),
            rules.join(","),
            e.pe3_count.to_string(),
            match e.scope {
                ShuffleScope::Root => "root",
                ShuffleScope::AllNodes => "all",
            }
            .to_string(),
            e.connection_negatives.to_string(),
            e.seed.to_string(),
            t.hyper.layers.to_string(),
            t.hyper.hidden.to_string(),
            t.hyper.seed.to_string(),
            t.epochs.to_string(),
            t.batch_size.to_string(),
            t.learning_rate.to_string(),
            t.clip_norm.to_string(),
            t.validation_fraction.to_string(),
            weights.join(","),
            t.constrain_intra_symbol.to_string(),
            t.offstroke_weight.to_string(),
            t.seed.to_string(),
        ];
        let mut out = String::new();
        for ((key, help), value) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "# {help}\n{key} = {value}");
        }
        out
    }
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", i + 1)))?;
            cfg.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!("".parse::<Config>().unwrap(), Config::default());
    }

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.apply_override("epochs=7").unwrap();
        c.apply_override("rules = PE1, CQ").unwrap();
        c.apply_override("rule_weights=1,0.5,0,2").unwrap();
        c.apply_override("shuffle_scope=all").unwrap();
        c.apply_override("learning_rate=0.003").unwrap();
        c.apply_override("off_stroke=midpoint").unwrap();
        c.apply_override("constrain_intra_symbol=true").unwrap();
        let back: Config = c.to_text().parse().unwrap();
        assert_eq!(back, c);
        assert_eq!(back.train.epochs, 7);
        assert_eq!(back.extract.rules, vec![PeRule::RootToLeaf, PeRule::Connection]);
    }

    #[test]
    fn every_key_is_written() {
        let text = Config::default().to_text();
        for (k, _) in KEYS {
            assert!(text.contains(&format!("\n{k} = ")), "{k}");
        }
    }

    #[test]
    fn diagnostics_name_the_line_and_key() {
        let err = "epochs = 3\nepochz = 4\n".parse::<Config>().unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("epochz") && err.contains("known keys"), "{err}");
        let err = "hidden = wide".parse::<Config>().unwrap_err().to_string();
        assert!(err.contains("'hidden'") && err.contains("wide"), "{err}");
        let err = "rule_weights = 1,2".parse::<Config>().unwrap_err().to_string();
        assert!(err.contains("4 numbers"), "{err}");
        assert!("no equals sign".parse::<Config>().is_err());
    }

    #[test]
    fn comments_are_ignored() {
        let c: Config = "# note\nbatch_size = 4 # inline\n\n".parse().unwrap();
        assert_eq!(c.train.batch_size, 4);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = Config::default();
        c.set("spacing", "0").unwrap();
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.set("batch_size", "0").unwrap();
        assert!(c.validate().is_err());
    }
}
