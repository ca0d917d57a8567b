use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use fixedbitset::FixedBitSet;

use super::compile::CompiledTask;
use super::heuristic::relaxed_plan;
use super::PlanError;

struct Node {
    state: FixedBitSet,
    parent: Option<(usize, usize)>,
}

fn trace(nodes: &[Node], mut idx: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some((p, a)) = nodes[idx].parent {
        out.push(a);
        idx = p;
    }
    out.reverse();
    out
}

/// Expansions granted to the preferred queue each time h improves.
const PREFERRED_BOOST: u32 = 1000;

/// Greedy best-first search on h_ff with a second open list for successors
/// reached by helpful actions. Every successor enters the regular list, so
/// the search stays complete. Ties are broken by insertion order.
pub fn gbfs(task: &CompiledTask, max_expansions: usize) -> Result<Vec<usize>, PlanError> {
    if task.goal.holds(&task.init) {
        return Ok(Vec::new());
    }
    let root = relaxed_plan(task, &task.init, &task.goal).ok_or(PlanError::Unsolvable)?;
    let mut best_h = root.length;
    let mut nodes = vec![Node { state: task.init.clone(), parent: None }];
    let mut helpful = vec![root.helpful];
    let mut closed = vec![false];
    let mut seen: HashSet<FixedBitSet> = HashSet::new();
    seen.insert(task.init.clone());
    let mut open = [BinaryHeap::new(), BinaryHeap::new()];
    let mut counter = 0u64;
    open[0].push(Reverse((best_h, counter, 0usize)));
    let mut boost = 0u32;
    let mut turn = 0usize;
    let mut expansions = 0;
    loop {
        let q = if boost > 0 && !open[1].is_empty() {
            boost -= 1;
            1
        } else {
            turn ^= 1;
            if open[turn].is_empty() {
                turn ^= 1;
            }
            turn
        };
        let Some(Reverse((_, _, idx))) = open[q].pop() else {
            return Err(PlanError::Unsolvable);
        };
        if std::mem::replace(&mut closed[idx], true) {
            continue;
        }
        if expansions >= max_expansions {
            return Err(PlanError::Budget { expansions });
        }
        expansions += 1;
        let preferred = std::mem::take(&mut helpful[idx]);
        for a in 0..task.actions.len() {
            if !task.applicable(&nodes[idx].state, a) {
                continue;
            }
            let next = task.successor(&nodes[idx].state, a);
            if !seen.insert(next.clone()) {
                continue;
            }
            let goal = task.goal.holds(&next);
            let eval = if goal { None } else { relaxed_plan(task, &next, &task.goal) };
            nodes.push(Node { state: next, parent: Some((idx, a)) });
            let child = nodes.len() - 1;
            if goal {
                return Ok(trace(&nodes, child));
            }
            let Some(rp) = eval else {
                helpful.push(Vec::new());
                closed.push(true);
                continue;
            };
            let h = rp.length;
            helpful.push(rp.helpful);
            closed.push(false);
            counter += 1;
            open[0].push(Reverse((h, counter, child)));
            if preferred.binary_search(&a).is_ok() {
                open[1].push(Reverse((h, counter, child)));
            }
            if h < best_h {
                best_h = h;
                boost += PREFERRED_BOOST;
            }
        }
    }
}

/// Uniform-cost search (A* with h = 0); returns a cost-optimal plan.
pub fn uniform_cost(task: &CompiledTask, max_expansions: usize) -> Result<Vec<usize>, PlanError> {
    let mut nodes = vec![Node { state: task.init.clone(), parent: None }];
    let mut best: HashMap<FixedBitSet, u64> = HashMap::new();
    best.insert(task.init.clone(), 0);
    let mut open = BinaryHeap::new();
    let mut counter = 0u64;
    open.push(Reverse((0u64, counter, 0usize)));
    let mut expansions = 0;
    while let Some(Reverse((g, _, idx))) = open.pop() {
        if best.get(&nodes[idx].state).is_some_and(|&b| b < g) {
            continue;
        }
        if task.goal.holds(&nodes[idx].state) {
            return Ok(trace(&nodes, idx));
        }
        if expansions >= max_expansions {
            return Err(PlanError::Budget { expansions });
        }
        expansions += 1;
        for a in 0..task.actions.len() {
            if !task.applicable(&nodes[idx].state, a) {
                continue;
            }
            let next = task.successor(&nodes[idx].state, a);
            let ng = g + u64::from(task.actions[a].cost);
            if best.get(&next).is_some_and(|&b| b <= ng) {
                continue;
            }
            best.insert(next.clone(), ng);
            nodes.push(Node { state: next, parent: Some((idx, a)) });
            counter += 1;
            open.push(Reverse((ng, counter, nodes.len() - 1)));
        }
    }
    Err(PlanError::Unsolvable)
}
