//! Benchmark generation: task sampling, violation injection, templated
//! instructions and dataset assembly.

mod dataset;
mod instructions;
mod tasks;

use thiserror::Error;

use crate::planner::PlanError;
use crate::world::WorldError;

pub use dataset::{
    build_dataset, load_config, load_dataset, write_dataset, CellCount, CellKey, Dataset, DatasetConfig, Manifest,
    PartitionFractions, Totals, UNSEEN_SEED_OFFSET,
};
pub use instructions::{render_instructions, MAX_ANNOTATIONS, MIN_ANNOTATIONS};
pub use tasks::{candidate_tasks, inject_affordance, sample_task, sample_task_with, task_relevant_dynamic, TaskFilter};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("scene {0} has no compatible objects for any task")]
    NoCompatibleObjects(String),
    #[error("no task-relevant dynamic object to inject")]
    NoDynamicObject,
    #[error("slot {slot} failed after {attempts} attempts (last: {last})")]
    TargetCountUnreachable { slot: usize, attempts: u32, last: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
}

#[cfg(test)]
mod tests;
