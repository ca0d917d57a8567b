pub mod agent;
pub mod eval;
pub mod genbench;
pub mod household;
pub mod pddl;
pub mod planner;
pub mod sim;
pub mod task;
pub mod world;

#[cfg(test)]
mod testing;
