use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instructions::render_instructions;
use super::tasks::{inject_affordance, sample_task_with, TaskFilter};
use super::GenError;
use crate::household;
use crate::planner::{generate_demonstration, Plan, PlanError, PlannerConfig};
use crate::task::{Difficulty, EpisodeSpec, Mode, Partition, SceneSplit, TaskType};
use crate::world::{build_scene, ClassKind, RoomType, Scene, SizeParams};

/// Offset separating unseen scene seeds from seen ones.
pub const UNSEEN_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_scenes_seen: u32,
    pub n_scenes_unseen: u32,
    pub n_demos: u32,
    pub static_fraction: f64,
    /// Share of dynamic episodes generated at Advanced difficulty.
    pub advanced_fraction: f64,
    /// Share of episodes drawn from unseen scenes.
    pub unseen_fraction: f64,
    pub seed: u64,
    pub task_weights: BTreeMap<TaskType, f64>,
    /// Inclusive range for occupancy durations.
    pub occupancy_range: (u32, u32),
    /// Inclusive range for annotations per episode.
    pub annotations: (usize, usize),
    pub seen_partitions: PartitionFractions,
    pub unseen_partitions: PartitionFractions,
    pub retry_budget: u32,
    pub planner: PlannerConfig,
    pub kitchen: SizeParams,
    pub bathroom: SizeParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_scenes_seen: 8,
            n_scenes_unseen: 4,
            n_demos: 100,
            static_fraction: 0.5,
            advanced_fraction: 0.5,
            unseen_fraction: 0.25,
            seed: 0,
            task_weights: TaskType::ALL.iter().map(|&t| (t, 1.0)).collect(),
            occupancy_range: (5, 30),
            annotations: (3, 6),
            seen_partitions: PartitionFractions { train: 0.8, valid: 0.1, test: 0.1 },
            unseen_partitions: PartitionFractions { train: 0.0, valid: 0.5, test: 0.5 },
            retry_budget: 20,
            planner: PlannerConfig::default(),
            kitchen: SizeParams::default_for(RoomType::Kitchen),
            bathroom: SizeParams::default_for(RoomType::Bathroom),
        }
    }
}

impl DatasetConfig {
    fn check(&self) -> Result<(), GenError> {
        let frac = |x: f64| (0.0..=1.0).contains(&x);
        let parts = |p: &PartitionFractions| {
            [p.train, p.valid, p.test].iter().all(|&x| x >= 0.0) && p.train + p.valid + p.test > 0.0
        };
        let problem = if self.n_scenes_seen + self.n_scenes_unseen == 0 {
            Some("at least one scene is required")
        } else if !(frac(self.static_fraction) && frac(self.advanced_fraction) && frac(self.unseen_fraction)) {
            Some("fractions must lie in [0, 1]")
        } else if self.occupancy_range.0 == 0 || self.occupancy_range.0 > self.occupancy_range.1 {
            Some("occupancy range must be a nonempty range of positive durations")
        } else if self.annotations.0 < 3 || self.annotations.1 > 6 || self.annotations.0 > self.annotations.1 {
            Some("annotation range must lie within 3..=6")
        } else if !parts(&self.seen_partitions) || !parts(&self.unseen_partitions) {
            Some("partition fractions must be nonnegative with a positive sum")
        } else {
            None
        };
        match problem {
            Some(p) => Err(GenError::Config(p.into())),
            None => Ok(()),
        }
    }

    fn size_for(&self, room: RoomType) -> &SizeParams {
        match room {
            RoomType::Kitchen => &self.kitchen,
            RoomType::Bathroom => &self.bathroom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub split: SceneSplit,
    pub partition: Partition,
    pub mode: Mode,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    #[serde(flatten)]
    pub key: CellKey,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub episodes: usize,
    pub annotations: usize,
    pub scenes: usize,
    #[serde(rename = "static")]
    pub static_episodes: usize,
    pub dynamic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub domain: String,
    pub seen_scenes: Vec<String>,
    pub unseen_scenes: Vec<String>,
    pub episodes: Vec<String>,
    pub cells: Vec<CellCount>,
    pub totals: Totals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub scenes: BTreeMap<String, Scene>,
    pub episodes: Vec<EpisodeSpec>,
    /// Expert plan per episode id, computed with the episode's injections.
    pub experts: BTreeMap<String, Plan>,
}

impl Dataset {
    pub fn scene_of(&self, spec: &EpisodeSpec) -> Option<&Scene> {
        self.scenes.get(&spec.scene_id)
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    mode: Mode,
    difficulty: Difficulty,
    split: SceneSplit,
    partition: Partition,
}

fn scene_pool(cfg: &DatasetConfig, split: SceneSplit) -> Result<Vec<Scene>, GenError> {
    let (n, base) = match split {
        SceneSplit::Seen => (cfg.n_scenes_seen, cfg.seed),
        SceneSplit::Unseen => (cfg.n_scenes_unseen, cfg.seed.wrapping_add(UNSEEN_SEED_OFFSET)),
    };
    (0..n as u64)
        .map(|k| {
            let room = if k % 2 == 0 { RoomType::Kitchen } else { RoomType::Bathroom };
            Ok(build_scene(base.wrapping_add(k), room, cfg.size_for(room))?)
        })
        .collect()
}

/// Marks exactly `count` of `n` positions, chosen by a seeded shuffle.
fn choose_exact(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut marks = vec![false; n];
    for &i in idx.iter().take(count.min(n)) {
        marks[i] = true;
    }
    marks
}

fn partition_counts(n: usize, p: &PartitionFractions) -> [usize; 3] {
    let total = p.train + p.valid + p.test;
    let train = ((n as f64) * p.train / total).round() as usize;
    let valid = (((n as f64) * p.valid / total).round() as usize).min(n - train.min(n));
    [train.min(n), valid, n - train.min(n) - valid]
}

fn plan_slots(cfg: &DatasetConfig) -> Vec<Slot> {
    let n = cfg.n_demos as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_static = (n as f64 * cfg.static_fraction).round() as usize;
    let statics = choose_exact(n, n_static, &mut rng);
    let n_unseen = match (cfg.n_scenes_seen, cfg.n_scenes_unseen) {
        (_, 0) => 0,
        (0, _) => n,
        _ => (n as f64 * cfg.unseen_fraction).round() as usize,
    };
    let unseen = choose_exact(n, n_unseen, &mut rng);
    let dynamic_idx: Vec<usize> = (0..n).filter(|&i| !statics[i]).collect();
    let n_adv = (dynamic_idx.len() as f64 * cfg.advanced_fraction).round() as usize;
    let adv = choose_exact(dynamic_idx.len(), n_adv, &mut rng);
    let mut advanced = vec![false; n];
    for (k, &i) in dynamic_idx.iter().enumerate() {
        advanced[i] = adv[k];
    }
    let mut partition = vec![Partition::Train; n];
    for (is_unseen, fractions) in [(false, &cfg.seen_partitions), (true, &cfg.unseen_partitions)] {
        let mut members: Vec<usize> = (0..n).filter(|&i| unseen[i] == is_unseen).collect();
        members.shuffle(&mut rng);
        let [tr, va, _] = partition_counts(members.len(), fractions);
        for (k, &i) in members.iter().enumerate() {
            partition[i] = if k < tr {
                Partition::Train
            } else if k < tr + va {
                Partition::Valid
            } else {
                Partition::Test
            };
        }
    }
    (0..n)
        .map(|i| Slot {
            mode: if statics[i] { Mode::Static } else { Mode::Dynamic },
            difficulty: if advanced[i] { Difficulty::Advanced } else { Difficulty::Basic },
            split: if unseen[i] { SceneSplit::Unseen } else { SceneSplit::Seen },
            partition: partition[i],
        })
        .collect()
}

fn has_appliance(scene: &Scene) -> bool {
    scene.classes().iter().any(|c| matches!(c, ClassKind::Microwave | ClassKind::Fridge))
}

/// Outcome of one generation attempt: an episode or the reason to retry.
fn attempt(
    cfg: &DatasetConfig,
    slot: &Slot,
    pool: &[Scene],
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Result<(EpisodeSpec, Plan), String>, GenError> {
    let advanced = slot.difficulty == Difficulty::Advanced;
    let eligible: Vec<&Scene> = pool.iter().filter(|s| !advanced || has_appliance(s)).collect();
    let Some(&scene) = eligible.choose(rng) else {
        return Ok(Err("no eligible scene".into()));
    };
    let filter = if advanced { TaskFilter::NeedsAppliance } else { TaskFilter::Any };
    let task = match sample_task_with(scene, rng, &cfg.task_weights, filter) {
        Ok(t) => t,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let k = rng.gen_range(cfg.annotations.0..=cfg.annotations.1);
    let mut spec = EpisodeSpec {
        id: format!("ep-{index:05}"),
        scene_id: scene.id.clone(),
        goal: household::goal_text(&task),
        annotations: render_instructions(&task, k, rng.gen()),
        task,
        injections: Vec::new(),
        mode: slot.mode,
        difficulty: slot.difficulty,
        scene_split: slot.split,
        partition: slot.partition,
        expert_steps: 0,
        reference_plan: Vec::new(),
    };
    let reference = match generate_demonstration(scene, &spec, &cfg.planner) {
        Ok(d) if !d.plan.is_empty() => d,
        Ok(_) => return Ok(Err("goal already satisfied".into())),
        Err(e @ (PlanError::Unsolvable | PlanError::Budget { .. })) => return Ok(Err(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    spec.reference_plan = reference.plan.steps.clone();
    spec.injections =
        match inject_affordance(scene, &reference.plan, slot.mode, slot.difficulty, cfg.occupancy_range, rng) {
            Ok(i) => i,
            Err(e) => return Ok(Err(e.to_string())),
        };
    let expert = if spec.injections.is_empty() {
        reference
    } else {
        match generate_demonstration(scene, &spec, &cfg.planner) {
            Ok(d) => d,
            Err(e @ (PlanError::Unsolvable | PlanError::Budget { .. })) => return Ok(Err(e.to_string())),
            Err(e) => return Err(e.into()),
        }
    };
    spec.expert_steps = expert.expert_steps;
    Ok(Ok((spec, expert.plan)))
}

fn generate_slot(
    cfg: &DatasetConfig,
    slot: &Slot,
    pool: &[Scene],
    index: usize,
) -> Result<(EpisodeSpec, Plan), GenError> {
    let mut last = String::from("empty scene pool");
    for a in 0..cfg.retry_budget {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(((index as u64) << 16) | a as u64);
        match attempt(cfg, slot, pool, index, &mut rng)? {
            Ok(ep) => return Ok(ep),
            Err(reason) => last = reason,
        }
    }
    Err(GenError::TargetCountUnreachable { slot: index, attempts: cfg.retry_budget, last })
}

fn cells(episodes: &[EpisodeSpec]) -> Vec<CellCount> {
    let mut counts: BTreeMap<CellKey, usize> = BTreeMap::new();
    for split in [SceneSplit::Seen, SceneSplit::Unseen] {
        for partition in [Partition::Train, Partition::Valid, Partition::Test] {
            for mode in [Mode::Static, Mode::Dynamic] {
                for difficulty in [Difficulty::Basic, Difficulty::Advanced] {
                    counts.insert(CellKey { split, partition, mode, difficulty }, 0);
                }
            }
        }
    }
    for e in episodes {
        let key = CellKey { split: e.scene_split, partition: e.partition, mode: e.mode, difficulty: e.difficulty };
        *counts.entry(key).or_default() += 1;
    }
    counts.into_iter().map(|(key, episodes)| CellCount { key, episodes }).collect()
}

/// Generates a dataset in memory. Slots are generated in parallel; the
/// result does not depend on the thread count.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset, GenError> {
    cfg.check()?;
    let seen = scene_pool(cfg, SceneSplit::Seen)?;
    let unseen = scene_pool(cfg, SceneSplit::Unseen)?;
    let slots = plan_slots(cfg);
    let generated: Vec<(EpisodeSpec, Plan)> = slots
        .par_iter()
        .enumerate()
        .map(|(i, slot)| {
            let pool = match slot.split {
                SceneSplit::Seen => &seen,
                SceneSplit::Unseen => &unseen,
            };
            generate_slot(cfg, slot, pool, i)
        })
        .collect::<Result<_, _>>()?;
    let (episodes, plans): (Vec<EpisodeSpec>, Vec<Plan>) = generated.into_iter().unzip();
    let experts = episodes.iter().map(|e| e.id.clone()).zip(plans).collect();
    let totals = Totals {
        episodes: episodes.len(),
        annotations: episodes.iter().map(|e| e.annotations.len()).sum(),
        scenes: seen.len() + unseen.len(),
        static_episodes: episodes.iter().filter(|e| e.mode == Mode::Static).count(),
        dynamic: episodes.iter().filter(|e| e.mode == Mode::Dynamic).count(),
    };
    let manifest = Manifest {
        config: cfg.clone(),
        domain: "domain.pddl".into(),
        seen_scenes: seen.iter().map(|s| s.id.clone()).collect(),
        unseen_scenes: unseen.iter().map(|s| s.id.clone()).collect(),
        episodes: episodes.iter().map(|e| e.id.clone()).collect(),
        cells: cells(&episodes),
        totals,
    };
    let scenes = seen.into_iter().chain(unseen).map(|s| (s.id.clone(), s)).collect();
    Ok(Dataset { manifest, scenes, episodes, experts })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenError + '_ {
    move |source| GenError::Io { path: path.display().to_string(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), GenError> {
    let text = serde_json::to_string_pretty(value).expect("dataset values serialize");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, GenError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| GenError::Json { path: path.display().to_string(), message: e.to_string() })
}

/// Reads and validates a JSON dataset config. Unknown or mistyped keys are
/// reported with their path.
pub fn load_config(path: &Path) -> Result<DatasetConfig, GenError> {
    let cfg: DatasetConfig = read_json(path)?;
    cfg.check()?;
    Ok(cfg)
}

/// Writes `manifest.json`, `domain.pddl`, `scenes/`, `episodes/` and
/// `experts/` under `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(), GenError> {
    for sub in ["scenes", "episodes", "experts"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    write_json(&dir.join("manifest.json"), &dataset.manifest)?;
    let domain = dir.join(&dataset.manifest.domain);
    fs::write(&domain, household::DOMAIN_PDDL).map_err(io_err(&domain))?;
    for (id, scene) in &dataset.scenes {
        let p = dir.join("scenes").join(format!("{id}.json"));
        fs::write(&p, scene.to_canonical_json() + "\n").map_err(io_err(&p))?;
    }
    for e in &dataset.episodes {
        write_json(&dir.join("episodes").join(format!("{}.json", e.id)), e)?;
        let plan = &dataset.experts[&e.id];
        let p = dir.join("experts").join(format!("{}.json", e.id));
        fs::write(&p, plan.to_json() + "\n").map_err(io_err(&p))?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, GenError> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    let mut scenes = BTreeMap::new();
    for id in manifest.seen_scenes.iter().chain(&manifest.unseen_scenes) {
        let scene: Scene = read_json(&dir.join("scenes").join(format!("{id}.json")))?;
        scenes.insert(id.clone(), scene);
    }
    let mut episodes = Vec::new();
    let mut experts = BTreeMap::new();
    for id in &manifest.episodes {
        let spec: EpisodeSpec = read_json(&dir.join("episodes").join(format!("{id}.json")))?;
        let p = dir.join("experts").join(format!("{id}.json"));
        let text = fs::read_to_string(&p).map_err(io_err(&p))?;
        let plan = Plan::from_json(&text)
            .map_err(|e| GenError::Json { path: p.display().to_string(), message: e.to_string() })?;
        experts.insert(id.clone(), plan);
        episodes.push(spec);
    }
    Ok(Dataset { manifest, scenes, episodes, experts })
}
