use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sim::Observation;
use crate::world::{AffordanceCategory, ClassKind, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictState {
    Available,
    Unavailable(AffordanceCategory),
    NotVisible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub state: VerdictState,
    pub confidence: f64,
}

impl Verdict {
    pub fn certain(state: VerdictState) -> Self {
        Verdict { state, confidence: 1.0 }
    }
}

/// One affordance question about a target object.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub episode: &'a str,
    pub step: u32,
    pub target: ObjectId,
    pub class: ClassKind,
    /// What the agent sees.
    pub observation: &'a Observation,
    /// The same view with latent attributes revealed; read only by
    /// ground-truth reasoners.
    pub latent: &'a Observation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReasonerError {
    #[error("reasoner did not answer within {0:?}")]
    Timeout(Duration),
    #[error("malformed reasoner response: {0}")]
    MalformedResponse(String),
    #[error("reasoner transport failed: {0}")]
    Transport(String),
}

pub trait Reasoner: Send {
    fn label(&self) -> String;
    fn reason(&mut self, query: &Query<'_>) -> Result<Verdict, ReasonerError>;
}

/// Ground-truth verdict from revealed attributes. Precedence: occupied,
/// used, dirty.
pub fn oracle_verdict(target: ObjectId, latent: &Observation) -> Verdict {
    let Some(v) = latent.lookup(target) else {
        return Verdict::certain(VerdictState::NotVisible);
    };
    let state = if v.busy_remaining.unwrap_or(0) > 0 {
        VerdictState::Unavailable(AffordanceCategory::Occupied)
    } else if v.used == Some(true) {
        VerdictState::Unavailable(AffordanceCategory::Used)
    } else if v.clean == Some(false) {
        VerdictState::Unavailable(AffordanceCategory::Dirty)
    } else {
        VerdictState::Available
    };
    Verdict::certain(state)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleReasoner;

impl Reasoner for OracleReasoner {
    fn label(&self) -> String {
        "oracle".into()
    }

    fn reason(&mut self, q: &Query<'_>) -> Result<Verdict, ReasonerError> {
        if q.observation.lookup(q.target).is_none() {
            return Ok(Verdict::certain(VerdictState::NotVisible));
        }
        Ok(oracle_verdict(q.target, q.latent))
    }
}

/// Per-class verdict accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyMap {
    pub default: f64,
    #[serde(default)]
    pub per_class: BTreeMap<ClassKind, f64>,
}

impl AccuracyMap {
    pub const MICROWAVE: f64 = 0.9562;
    pub const PAN: f64 = 0.9040;
    pub const OVERALL: f64 = 0.7539;

    /// Microwave and pan accuracies as measured for the fine-tuned
    /// reasoner; every other class uses the overall accuracy.
    pub fn reference() -> Self {
        AccuracyMap {
            default: Self::OVERALL,
            per_class: [(ClassKind::Microwave, Self::MICROWAVE), (ClassKind::Pan, Self::PAN)].into_iter().collect(),
        }
    }

    pub fn uniform(accuracy: f64) -> Self {
        AccuracyMap { default: accuracy, per_class: BTreeMap::new() }
    }

    pub fn get(&self, class: ClassKind) -> f64 {
        self.per_class.get(&class).copied().unwrap_or(self.default)
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |a: f64| a > 0.5 && a <= 1.0;
        if !ok(self.default) {
            return Err(format!("default accuracy {} is outside (0.5, 1]", self.default));
        }
        match self.per_class.iter().find(|(_, &a)| !ok(a)) {
            Some((c, a)) => Err(format!("accuracy {a} for {c} is outside (0.5, 1]")),
            None => Ok(()),
        }
    }
}

impl Default for AccuracyMap {
    fn default() -> Self {
        Self::reference()
    }
}

/// Oracle verdicts flipped with probability 1 - accuracy(class), drawn from
/// an RNG keyed by (seed, episode, step, object).
#[derive(Debug, Clone)]
pub struct NoisyReasoner {
    pub accuracy: AccuracyMap,
    pub seed: u64,
}

fn keyed_rng(seed: u64, episode: &str, step: u32, target: ObjectId) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(episode.as_bytes());
    h.update([0]);
    h.update(step.to_le_bytes());
    h.update(target.0.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

impl NoisyReasoner {
    pub fn new(accuracy: AccuracyMap, seed: u64) -> Self {
        NoisyReasoner { accuracy, seed }
    }
}

impl Reasoner for NoisyReasoner {
    fn label(&self) -> String {
        if self.accuracy.per_class.is_empty() {
            format!("noisy@{}", self.accuracy.default)
        } else {
            "noisy".into()
        }
    }

    fn reason(&mut self, q: &Query<'_>) -> Result<Verdict, ReasonerError> {
        if q.observation.lookup(q.target).is_none() {
            return Ok(Verdict::certain(VerdictState::NotVisible));
        }
        let truth = oracle_verdict(q.target, q.latent).state;
        let accuracy = self.accuracy.get(q.class);
        let mut rng = keyed_rng(self.seed, q.episode, q.step, q.target);
        let state = if rng.gen::<f64>() < accuracy {
            truth
        } else {
            match truth {
                VerdictState::Available => {
                    let cats = q.class.applicable_categories();
                    if cats.is_empty() {
                        truth
                    } else {
                        VerdictState::Unavailable(cats[rng.gen_range(0..cats.len())])
                    }
                }
                VerdictState::Unavailable(_) => VerdictState::Available,
                VerdictState::NotVisible => truth,
            }
        };
        Ok(Verdict { state, confidence: accuracy })
    }
}
