//! FF heuristic: relaxed planning graph plus relaxed plan extraction.

use fixedbitset::FixedBitSet;

use super::compile::{CompiledTask, GoalNode};

const INF: u32 = u32::MAX;

/// Layered relaxed planning graph from one state.
#[derive(Debug, Clone)]
pub struct RelaxedPlanningGraph {
    /// First layer at which each fact appears.
    pub fact_level: Vec<u32>,
    /// First layer at which each action becomes applicable.
    pub action_level: Vec<u32>,
    /// The action that first added each fact.
    pub achiever: Vec<Option<usize>>,
    /// Number of fact layers built.
    pub layers: u32,
}

impl RelaxedPlanningGraph {
    /// Expands layers until a fixpoint or until `goal` is reached.
    pub fn build(task: &CompiledTask, state: &FixedBitSet, goal: &GoalNode) -> Self {
        let n_facts = task.facts.len();
        let n_actions = task.actions.len();
        let mut fact_level = vec![INF; n_facts];
        let mut action_level = vec![INF; n_actions];
        let mut achiever = vec![None; n_facts];
        let mut missing: Vec<usize> = task.actions.iter().map(|a| a.pre.len()).collect();

        let mut frontier: Vec<usize> = state.ones().collect();
        for &f in &frontier {
            fact_level[f] = 0;
        }
        let mut ready: Vec<usize> = (0..n_actions).filter(|&a| missing[a] == 0).collect();
        let mut layer = 0u32;
        loop {
            for &f in &frontier {
                for &a in &task.consumers[f] {
                    missing[a] -= 1;
                    if missing[a] == 0 {
                        ready.push(a);
                    }
                }
            }
            if level_of(goal, &fact_level) != INF {
                break;
            }
            ready.sort_unstable();
            let mut next = Vec::new();
            for &a in &ready {
                action_level[a] = layer;
                for &f in &task.actions[a].add {
                    if fact_level[f] == INF {
                        fact_level[f] = layer + 1;
                        achiever[f] = Some(a);
                        next.push(f);
                    }
                }
            }
            ready.clear();
            if next.is_empty() {
                break;
            }
            layer += 1;
            frontier = next;
        }
        RelaxedPlanningGraph { fact_level, action_level, achiever, layers: layer + 1 }
    }

    pub fn goal_level(&self, goal: &GoalNode) -> Option<u32> {
        let l = level_of(goal, &self.fact_level);
        (l != INF).then_some(l)
    }
}

fn level_of(g: &GoalNode, levels: &[u32]) -> u32 {
    match g {
        GoalNode::True => 0,
        GoalNode::False => INF,
        GoalNode::Fact(f) => levels[*f],
        GoalNode::And(v) => v.iter().map(|c| level_of(c, levels)).max().unwrap_or(0),
        GoalNode::Or(v) => v.iter().map(|c| level_of(c, levels)).min().unwrap_or(INF),
    }
}

fn mark_goals(g: &GoalNode, levels: &[u32], out: &mut Vec<usize>) {
    match g {
        GoalNode::True | GoalNode::False => {}
        GoalNode::Fact(f) => out.push(*f),
        GoalNode::And(v) => v.iter().for_each(|c| mark_goals(c, levels, out)),
        GoalNode::Or(v) => {
            // Cheapest disjunct; first one on ties.
            if let Some(best) = v.iter().min_by_key(|c| level_of(c, levels)) {
                mark_goals(best, levels, out);
            }
        }
    }
}

/// Relaxed plan length, or `None` when the goal is unreachable even without
/// delete effects.
pub fn h_ff(task: &CompiledTask, state: &FixedBitSet) -> Option<u32> {
    h_ff_goal(task, state, &task.goal)
}

pub fn h_ff_goal(task: &CompiledTask, state: &FixedBitSet, goal: &GoalNode) -> Option<u32> {
    relaxed_plan(task, state, goal).map(|r| r.length)
}

/// Result of relaxed plan extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaxedPlan {
    pub length: u32,
    /// Relaxed plan actions applicable in the evaluated state, ascending.
    pub helpful: Vec<usize>,
}

pub fn relaxed_plan(task: &CompiledTask, state: &FixedBitSet, goal: &GoalNode) -> Option<RelaxedPlan> {
    if goal.holds(state) {
        return Some(RelaxedPlan { length: 0, helpful: Vec::new() });
    }
    let rpg = RelaxedPlanningGraph::build(task, state, goal);
    let top = rpg.goal_level(goal)?;
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); top as usize + 1];
    let mut roots = Vec::new();
    mark_goals(goal, &rpg.fact_level, &mut roots);
    let mut marked = FixedBitSet::with_capacity(task.facts.len());
    for f in roots {
        let l = rpg.fact_level[f];
        if l > 0 && !marked.put(f) {
            by_level[l as usize].push(f);
        }
    }
    let mut selected = FixedBitSet::with_capacity(task.actions.len());
    let mut length = 0;
    let mut helpful = Vec::new();
    for level in (1..=top as usize).rev() {
        let mut goals = std::mem::take(&mut by_level[level]);
        goals.sort_unstable();
        for g in goals {
            let a = rpg.achiever[g].expect("reached facts above layer 0 have an achiever");
            if selected.put(a) {
                continue;
            }
            length += 1;
            if rpg.action_level[a] == 0 {
                helpful.push(a);
            }
            for &f in &task.actions[a].add {
                marked.insert(f);
            }
            for &p in &task.actions[a].pre {
                let l = rpg.fact_level[p];
                if l > 0 && !marked.put(p) {
                    by_level[l as usize].push(p);
                }
            }
        }
    }
    helpful.sort_unstable();
    Some(RelaxedPlan { length, helpful })
}
