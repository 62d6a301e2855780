//! JSON model documents and built-in presets.
//!
//! ```json
//! {
//!   "alphabet": ["a", "b", "c"],
//!   "transition": [[1, 1, 1], [1, 1, 1], [1, 1, 1]],
//!   "potential": {"depth": 2, "entries": [{"word": ["a", "a"], "value": -2.9957}, ...]},
//!   "step": {"depth": 1, "entries": [{"word": ["a"], "value": 1}, ...]}
//! }
//! ```
//!
//! `potential` must list every allowed word of its depth exactly once; so must
//! `step` when present. Validation errors carry the JSON path of the offending
//! field.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gibbs::{GibbsError, GibbsMarkov, Potential, StepFunction, SubshiftSpec, WordTable};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ModelError {
    pub path: String,
    pub message: String,
}

impl ModelError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry<T> {
    pub word: Vec<String>,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDoc<T> {
    pub depth: usize,
    pub entries: Vec<Entry<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub alphabet: Vec<String>,
    pub transition: Vec<Vec<u8>>,
    pub potential: TableDoc<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<TableDoc<i64>>,
}

/// A validated model: the shift, its Gibbs–Markov measure, and the step.
#[derive(Debug, Clone)]
pub struct Model {
    pub doc: ModelDoc,
    pub spec: SubshiftSpec,
    pub potential: Potential,
    pub gibbs: GibbsMarkov,
    pub step: Option<StepFunction>,
}

impl Model {
    pub fn step(&self) -> Result<&StepFunction, ModelError> {
        self.step.as_ref().ok_or_else(|| ModelError::new("step", "this model has no step function"))
    }
}

impl ModelDoc {
    /// Hex SHA-256 of the compact JSON serialization.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model documents serialize");
        hex(&Sha256::digest(bytes))
    }

    fn table<T: Clone>(
        &self,
        spec: &SubshiftSpec,
        index: &HashMap<&str, usize>,
        doc: &TableDoc<T>,
        field: &str,
        finite: impl Fn(&T) -> bool,
    ) -> Result<WordTable<T>, ModelError> {
        if doc.depth == 0 {
            return Err(ModelError::new(format!("{field}.depth"), "depth must be positive"));
        }
        let mut entries = BTreeMap::new();
        for (i, e) in doc.entries.iter().enumerate() {
            let path = format!("{field}.entries[{i}]");
            if e.word.len() != doc.depth {
                return Err(ModelError::new(
                    format!("{path}.word"),
                    format!("word has length {}, expected depth {}", e.word.len(), doc.depth),
                ));
            }
            let mut w = Vec::with_capacity(e.word.len());
            for (j, name) in e.word.iter().enumerate() {
                let s = index
                    .get(name.as_str())
                    .ok_or_else(|| ModelError::new(format!("{path}.word[{j}]"), format!("unknown symbol {name:?}")))?;
                w.push(*s);
            }
            if !spec.word_allowed(&w) {
                return Err(ModelError::new(format!("{path}.word"), "word is not allowed by the transition matrix"));
            }
            if !finite(&e.value) {
                return Err(ModelError::new(format!("{path}.value"), "value must be finite"));
            }
            if entries.insert(w, e.value.clone()).is_some() {
                return Err(ModelError::new(format!("{path}.word"), "duplicate word"));
            }
        }
        WordTable::new(spec, doc.depth, entries).map_err(|e| ModelError::new(format!("{field}.entries"), e.to_string()))
    }

    /// Validate and construct the measure and step function.
    pub fn build(&self) -> Result<Model, ModelError> {
        if self.alphabet.is_empty() {
            return Err(ModelError::new("alphabet", "alphabet is empty"));
        }
        let mut index = HashMap::new();
        for (i, name) in self.alphabet.iter().enumerate() {
            if index.insert(name.as_str(), i).is_some() {
                return Err(ModelError::new(format!("alphabet[{i}]"), format!("duplicate symbol {name:?}")));
            }
        }
        let a = self.alphabet.len();
        if self.transition.len() != a {
            return Err(ModelError::new(
                "transition",
                format!("{} rows for an alphabet of {a} symbols", self.transition.len()),
            ));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != a {
                return Err(ModelError::new(format!("transition[{i}]"), format!("row has {} entries, expected {a}", row.len())));
            }
            if let Some(j) = row.iter().position(|&v| v > 1) {
                return Err(ModelError::new(format!("transition[{i}][{j}]"), "entries must be 0 or 1"));
            }
        }
        let spec = SubshiftSpec::new(self.transition.clone()).map_err(|e| ModelError::new("transition", e.to_string()))?;
        let potential = self.table(&spec, &index, &self.potential, "potential", |v: &f64| v.is_finite())?;
        let step_table = match &self.step {
            Some(doc) => Some(self.table(&spec, &index, doc, "step", |_| true)?),
            None => None,
        };
        let depth = step_table.as_ref().map_or(2, |t| t.depth());
        let gibbs = GibbsMarkov::build_at_depth(&spec, &potential, depth)
            .map_err(|e| ModelError::new("potential", e.to_string()))?;
        let step = match step_table {
            Some(t) => Some(StepFunction::new(&gibbs, t).map_err(|e| match e {
                GibbsError::NotCentered { residual } => ModelError::new(
                    "step.entries",
                    format!("step function is not centered: ∫φ dν = {residual:e} (reject, integer φ cannot be recentered)"),
                ),
                other => ModelError::new("step", other.to_string()),
            })?),
            None => None,
        };
        Ok(Model { doc: self.clone(), spec, potential, gibbs, step })
    }

    /// Symbol names to indices, for words given by name.
    pub fn word(&self, names: &[&str]) -> Result<Vec<usize>, ModelError> {
        names
            .iter()
            .map(|n| {
                self.alphabet
                    .iter()
                    .position(|a| a == n)
                    .ok_or_else(|| ModelError::new("word", format!("unknown symbol {n:?}")))
            })
            .collect()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Step depth and the step as a function of the word.
type StepSpec<'a> = (usize, &'a dyn Fn(&[usize]) -> i64);

fn names(a: usize) -> Vec<String> {
    (0..a).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
}

fn doc_from_fns(
    alphabet: Vec<String>,
    transition: Vec<Vec<u8>>,
    pot: impl Fn(usize, usize) -> f64,
    step: Option<StepSpec<'_>>,
) -> ModelDoc {
    let spec = SubshiftSpec::new(transition.clone()).expect("preset transition is primitive");
    let name = |w: &[usize]| w.iter().map(|&s| alphabet[s].clone()).collect::<Vec<_>>();
    let potential = TableDoc {
        depth: 2,
        entries: spec
            .allowed_words(2)
            .iter()
            .map(|w| Entry { word: name(w), value: pot(w[0], w[1]) })
            .collect(),
    };
    let step = step.map(|(depth, f)| TableDoc {
        depth,
        entries: spec.allowed_words(depth).iter().map(|w| Entry { word: name(w), value: f(w) }).collect(),
    });
    ModelDoc { alphabet, transition, potential, step }
}

/// i.i.d. letters with probabilities `q` and a letter-valued step.
fn bernoulli_doc(q: &[f64], step: Option<StepSpec<'_>>) -> ModelDoc {
    let a = q.len();
    doc_from_fns(names(a), vec![vec![1; a]; a], |_, b| q[b].ln(), step)
}

/// Built-in model names.
pub const PRESETS: &[&str] = &[
    "lazy-walk",
    "lazy-walk-q25",
    "uniform-pm1",
    "uniform-2shift",
    "golden-mean",
    "golden-markov",
    "bernoulli-37",
    "lattice10",
];

/// A built-in model document by name.
///
/// * `lazy-walk`: i.i.d. `(0.05, 0.05, 0.9)`, `φ = +1, −1, 0`.
/// * `lazy-walk-q25`: i.i.d. `(0.25, 0.25, 0.5)`, same `φ`.
/// * `uniform-pm1`: uniform 2-shift, `φ = ±1` (arithmetic, span 2).
/// * `uniform-2shift`: uniform 2-shift, `φ(aa)=2, φ(ab)=−1, φ(ba)=0, φ(bb)=−1`.
/// * `golden-mean`: golden-mean shift with its measure of maximal entropy, no step.
/// * `golden-markov`: golden-mean shift with `π(a,·) = (½, ½)`, `φ(aa)=1, φ(ab)=0, φ(ba)=−1`.
/// * `bernoulli-37`: i.i.d. `(0.3, 0.7)`, `φ(aa)=7, φ(ab)=−3`, 0 otherwise.
/// * `lattice10`: i.i.d. `(0.9, 0.1)`, `φ = +1, −9` (arithmetic, span 10).
pub fn preset(name: &str) -> Result<ModelDoc, ModelError> {
    let golden = vec![vec![1, 1], vec![1, 0]];
    Ok(match name {
        "lazy-walk" => bernoulli_doc(&[0.05, 0.05, 0.9], Some((1, &|w| [1, -1, 0][w[0]]))),
        "lazy-walk-q25" => bernoulli_doc(&[0.25, 0.25, 0.5], Some((1, &|w| [1, -1, 0][w[0]]))),
        "uniform-pm1" => bernoulli_doc(&[0.5, 0.5], Some((1, &|w| [1, -1][w[0]]))),
        "uniform-2shift" => bernoulli_doc(&[0.5, 0.5], Some((2, &|w| [[2, -1], [0, -1]][w[0]][w[1]]))),
        "golden-mean" => doc_from_fns(names(2), golden, |_, _| 0.0, None),
        "golden-markov" => doc_from_fns(
            names(2),
            golden,
            |a, _| if a == 0 { 0.5f64.ln() } else { 0.0 },
            Some((2, &|w| [[1, 0], [-1, 0]][w[0]][w[1]])),
        ),
        "bernoulli-37" => bernoulli_doc(&[0.3, 0.7], Some((2, &|w| [[7, -3], [0, 0]][w[0]][w[1]]))),
        "lattice10" => bernoulli_doc(&[0.9, 0.1], Some((1, &|w| [1, -9][w[0]]))),
        other => {
            return Err(ModelError::new(
                "preset",
                format!("unknown preset {other:?}; available: {}", PRESETS.join(", ")),
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build() {
        for name in PRESETS {
            let m = preset(name).unwrap().build().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(m.gibbs.stationarity_residual() < 1e-12, "{name}");
        }
    }

    #[test]
    fn lazy_walk_entropy() {
        let m = preset("lazy-walk").unwrap().build().unwrap();
        assert!((m.gibbs.entropy() - 0.394_398_628).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip_and_hash() {
        let d = preset("bernoulli-37").unwrap();
        let s = serde_json::to_string_pretty(&d).unwrap();
        let back: ModelDoc = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.sha256(), d.sha256());
        assert_eq!(d.sha256().len(), 64);
        assert_ne!(d.sha256(), preset("lattice10").unwrap().sha256());
    }

    #[test]
    fn errors_carry_paths() {
        let mut d = preset("lazy-walk").unwrap();
        d.potential.entries[3].word[1] = "z".into();
        assert_eq!(d.build().unwrap_err().path, "potential.entries[3].word[1]");

        let mut d = preset("lazy-walk").unwrap();
        d.transition[1] = vec![1, 1];
        assert_eq!(d.build().unwrap_err().path, "transition[1]");

        let mut d = preset("lazy-walk").unwrap();
        d.step.as_mut().unwrap().entries[0].value = 2;
        let e = d.build().unwrap_err();
        assert_eq!(e.path, "step.entries");
        assert!(e.message.contains("not centered"));

        let mut d = preset("golden-mean").unwrap();
        d.transition = vec![vec![0, 1], vec![1, 0]];
        assert_eq!(d.build().unwrap_err().path, "transition");

        let mut d = preset("lazy-walk").unwrap();
        d.potential.entries.pop();
        assert_eq!(d.build().unwrap_err().path, "potential.entries");

        assert!(preset("nope").is_err());
    }
}
