//! Plan-following agents, affordance reasoners and the episode runner.

mod external;
mod policy;
mod reasoner;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{
    parse_response, serve_lines, serve_tcp, spawn_tcp_stub, stub_reply, Endpoint, ExternalReasoner, StubMode,
    WireReferences, WireRequest, WireResponse, WireTarget, DEFAULT_TIMEOUT, PROTOCOL_VERSION,
};
pub use policy::{
    AdaptConfig, AdaptPolicy, BaselinePolicy, Deferred, PendingActionMemory, PlanCursor, Policy, PolicyContext,
    PolicyError,
};
pub use reasoner::{
    oracle_verdict, AccuracyMap, NoisyReasoner, OracleReasoner, Query, Reasoner, ReasonerError, Verdict, VerdictState,
};

use crate::eval::{AbortCode, EpisodeResult};
use crate::household::{to_sim_action, TranslateError};
use crate::sim::{reset_with_budget, Action, SimError, TrajectoryRecord, DEFAULT_MAX_STEPS};
use crate::task::EpisodeSpec;
use crate::world::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Literal execution of the static-twin expert plan.
    Vanilla,
    Adapt,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Vanilla => "vanilla",
            PolicyKind::Adapt => "adapt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vanilla" | "baseline" => Some(PolicyKind::Vanilla),
            "adapt" => Some(PolicyKind::Adapt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub policy: PolicyKind,
    /// Attempts of a failed planned action before moving past it.
    pub retries: u32,
    pub adapt: AdaptConfig,
    pub max_steps: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            policy: PolicyKind::Adapt,
            retries: 2,
            adapt: AdaptConfig::default(),
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl AgentConfig {
    pub fn with_policy(policy: PolicyKind) -> Self {
        AgentConfig { policy, ..AgentConfig::default() }
    }
}

/// How to construct a reasoner for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum ReasonerConfig {
    Oracle,
    Noisy { accuracy: AccuracyMap, seed: u64 },
    External { endpoint: Endpoint, timeout: Duration, share_latent: bool },
}

impl ReasonerConfig {
    pub fn build(&self) -> Result<Box<dyn Reasoner>, String> {
        Ok(match self {
            ReasonerConfig::Oracle => Box::new(OracleReasoner),
            ReasonerConfig::Noisy { accuracy, seed } => {
                accuracy.validate()?;
                Box::new(NoisyReasoner::new(accuracy.clone(), *seed))
            }
            ReasonerConfig::External { endpoint, timeout, share_latent } => {
                Box::new(ExternalReasoner::new(endpoint.clone(), *timeout).sharing_latent(*share_latent))
            }
        })
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("reference plan step {step} cannot be translated: {source}")]
    Translate { step: usize, source: TranslateError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub trajectory: Vec<TrajectoryRecord>,
}

/// The episode's reference plan as simulator actions.
pub fn reference_actions(scene: &Scene, spec: &EpisodeSpec) -> Result<Vec<Action>, AgentError> {
    spec.reference_plan
        .iter()
        .enumerate()
        .map(|(step, s)| {
            to_sim_action(scene, &s.action, &s.args).map_err(|source| AgentError::Translate { step, source })
        })
        .collect()
}

fn abort_code(e: &PolicyError) -> AbortCode {
    match e {
        PolicyError::Reasoner(ReasonerError::Timeout(_)) => AbortCode::Timeout,
        PolicyError::Reasoner(ReasonerError::MalformedResponse(_)) => AbortCode::Malformed,
        PolicyError::Reasoner(ReasonerError::Transport(_)) => AbortCode::Transport,
        PolicyError::ResolutionLoop { .. } => AbortCode::ResolutionLoop,
    }
}

/// Runs one episode to completion, abort or budget exhaustion.
pub fn run_episode(
    scene: &Scene,
    spec: &EpisodeSpec,
    config: &AgentConfig,
    reasoner: &mut dyn Reasoner,
) -> Result<EpisodeRun, AgentError> {
    let plan = reference_actions(scene, spec)?;
    let mut policy: Box<dyn Policy> = match config.policy {
        PolicyKind::Vanilla => Box::new(BaselinePolicy::new(plan, config.retries)),
        PolicyKind::Adapt => Box::new(AdaptPolicy::new(scene, plan, config.retries, config.adapt)),
    };
    let mut state = reset_with_budget(scene, spec, config.max_steps)?;
    let mut trajectory = Vec::new();
    let mut abort = AbortCode::None;
    loop {
        let observation = state.observe(false);
        let latent = state.observe(true);
        let ctx =
            PolicyContext { episode: &spec.id, step: state.step_count, observation: &observation, latent: &latent };
        let action = match policy.next_action(&ctx, reasoner) {
            Ok(Some(a)) => a,
            Ok(None) => break,
            Err(e) => {
                abort = abort_code(&e);
                break;
            }
        };
        if state.budget_exhausted() {
            abort = AbortCode::Budget;
            break;
        }
        let t = state.step_count;
        let outcome = state.step(&action);
        policy.notify(outcome.status());
        trajectory.push(TrajectoryRecord { t, action, outcome, observation_digest: state.observe(false).digest() });
    }
    let score = state.score_goal()?;
    let reasoner_label = match config.policy {
        PolicyKind::Vanilla => "none".to_string(),
        PolicyKind::Adapt => reasoner.label(),
    };
    let result = EpisodeResult {
        episode_id: spec.id.clone(),
        success: abort == AbortCode::None && score.success,
        gc_satisfied: score.satisfied,
        gc_total: score.total,
        agent_steps: state.step_count,
        expert_steps: spec.expert_steps,
        policy: policy.label().to_string(),
        reasoner: reasoner_label,
        abort,
        scene_split: spec.scene_split,
        partition: spec.partition,
        mode: spec.mode,
        difficulty: spec.difficulty,
    };
    Ok(EpisodeRun { result, trajectory })
}

#[cfg(test)]
mod tests;
