//! Exact solvers on tabular worlds: goal-conditioned and task-level value
//! iteration, plus transition-graph reachability. These produce the ground
//! truth every learned table and composed table is checked against.
//!
//! With deterministic dynamics the Bellman optimality backup specializes to
//! `Q(s, g, a) = r(s, g, a, s') + gamma * V(s', g)` with `V = 0` at
//! absorbing successors. Because every non-terminal step of the shipped
//! worlds carries a negative reward and termination is always available,
//! the undiscounted iteration reaches its fixed point in finitely many
//! sweeps.

use crate::table::{QTable, TableMeta, WVFTable};
use crate::world::{ComposedTask, ExtendedRewardConfig, TaskSpec, WorldSpec};
use crate::{Error, Result, State};

/// Value-iteration parameters. Defaults: undiscounted, tolerance 1e-9,
/// sweep cap `10 * |S|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViParams {
    pub discount: f64,
    pub tolerance: f64,
    /// Sweep cap as a multiple of the state count.
    pub sweep_cap_factor: usize,
}

impl Default for ViParams {
    fn default() -> Self {
        Self {
            discount: 1.0,
            tolerance: 1e-9,
            sweep_cap_factor: 10,
        }
    }
}

impl ViParams {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            )));
        }
        Ok(())
    }
}

/// Jacobi value iteration on V for one reward view. Initialized at zero;
/// errors with the remaining residual when the sweep cap is exceeded.
fn solve_values(
    world: &WorldSpec,
    reward: impl Fn(State, usize, State, bool) -> f64,
    params: &ViParams,
) -> Result<(Vec<f64>, u64)> {
    let n = world.state_count();
    let cap = params.sweep_cap_factor.saturating_mul(n).max(1);
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for sweep in 1..=cap {
        let mut residual = 0.0f64;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..world.action_count() {
                let (succ, absorbing) = world.transition(s, a);
                let future = if absorbing { 0.0 } else { v[succ] };
                let q = reward(s, a, succ, absorbing) + params.discount * future;
                if q > best {
                    best = q;
                }
            }
            residual = residual.max((best - v[s]).abs());
            next[s] = best;
        }
        std::mem::swap(&mut v, &mut next);
        if residual <= params.tolerance {
            return Ok((v, sweep as u64));
        }
    }
    // one more application to report the true residual
    let mut residual = 0.0f64;
    for s in 0..n {
        let mut best = f64::NEG_INFINITY;
        for a in 0..world.action_count() {
            let (succ, absorbing) = world.transition(s, a);
            let future = if absorbing { 0.0 } else { v[succ] };
            best = best.max(reward(s, a, succ, absorbing) + params.discount * future);
        }
        residual = residual.max((best - v[s]).abs());
    }
    Err(Error::NoConvergence {
        sweeps: cap,
        residual,
    })
}

/// Solves the optimal WVF for a task under the extended reward, one goal
/// slice at a time. `penalty` must lie strictly below the world's
/// `reward_min`; `goals` must be non-empty, strictly ascending state
/// ordinals.
pub fn vi_wvf(
    world: &WorldSpec,
    task: &TaskSpec,
    goals: &[State],
    penalty: f64,
    params: &ViParams,
) -> Result<WVFTable> {
    params.validate()?;
    let ext = ExtendedRewardConfig::new(world, penalty)?;
    let ct = ComposedTask::new(world, task, ext);
    let meta = TableMeta::new(task.name(), penalty, params.discount, 0);
    let mut table = WVFTable::zeros(world.state_count(), world.action_count(), goals.to_vec(), meta)?;
    let mut total_sweeps = 0u64;
    for (gi, &g) in goals.iter().enumerate() {
        let (v, sweeps) = solve_values(
            world,
            |s, a, succ, absorbing| ct.extended_reward_unchecked(s, g, a, succ, absorbing),
            params,
        )?;
        total_sweeps += sweeps;
        for s in 0..world.state_count() {
            for a in 0..world.action_count() {
                let (succ, absorbing) = world.transition(s, a);
                let future = if absorbing { 0.0 } else { v[succ] };
                let q = ct.extended_reward_unchecked(s, g, a, succ, absorbing)
                    + params.discount * future;
                table.set(s, gi, a, q);
            }
        }
    }
    table.meta.iterations = total_sweeps;
    Ok(table)
}

/// Solves the optimal task-level Q table (no goal conditioning).
pub fn vi_task(world: &WorldSpec, task: &TaskSpec, params: &ViParams) -> Result<QTable> {
    params.validate()?;
    let (v, sweeps) = solve_values(
        world,
        |s, a, succ, absorbing| {
            crate::world::compose_task_reward(world, task, s, a, succ, absorbing)
        },
        params,
    )?;
    let meta = TableMeta::new(task.name(), 0.0, params.discount, sweeps);
    let mut table = QTable::zeros(world.state_count(), world.action_count(), meta)?;
    for s in 0..world.state_count() {
        for a in 0..world.action_count() {
            let (succ, absorbing) = world.transition(s, a);
            let future = if absorbing { 0.0 } else { v[succ] };
            let q = crate::world::compose_task_reward(world, task, s, a, succ, absorbing)
                + params.discount * future;
            table.set(s, a, q);
        }
    }
    Ok(table)
}

/// States reachable from `s` through non-terminal transitions (including
/// `s` itself).
pub fn reachable_states(world: &WorldSpec, s: State) -> Vec<bool> {
    let mut seen = vec![false; world.state_count()];
    seen[s] = true;
    let mut stack = vec![s];
    while let Some(u) = stack.pop() {
        for a in 0..world.action_count() {
            let (v, absorbing) = world.transition(u, a);
            if !absorbing && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Goals from `goals` reachable from `s` in the transition graph. `s` is
/// itself included whenever it belongs to the goal set.
pub fn reachable_goals(world: &WorldSpec, s: State, goals: &[State]) -> Result<Vec<State>> {
    world.check_state(s)?;
    let seen = reachable_states(world, s);
    Ok(goals.iter().copied().filter(|&g| seen[g]).collect())
}

/// Max-norm Bellman residual of a WVF table under its extended reward: one
/// extra operator application.
pub fn wvf_bellman_residual(table: &WVFTable, ct: &ComposedTask, discount: f64) -> f64 {
    let world = ct.world;
    let mut residual = 0.0f64;
    for s in 0..world.state_count() {
        for (gi, &g) in table.goals().iter().enumerate() {
            for a in 0..world.action_count() {
                let (succ, absorbing) = world.transition(s, a);
                let future = if absorbing {
                    0.0
                } else {
                    table.state_value(succ, gi)
                };
                let backup = ct.extended_reward_unchecked(s, g, a, succ, absorbing)
                    + discount * future;
                residual = residual.max((table.get(s, gi, a) - backup).abs());
            }
        }
    }
    residual
}

/// Max-norm Bellman residual of a task-level Q table.
pub fn task_bellman_residual(
    table: &QTable,
    world: &WorldSpec,
    task: &TaskSpec,
    discount: f64,
) -> f64 {
    let mut residual = 0.0f64;
    for s in 0..world.state_count() {
        for a in 0..world.action_count() {
            let (succ, absorbing) = world.transition(s, a);
            let future = if absorbing { 0.0 } else { table.state_value(succ) };
            let backup = crate::world::compose_task_reward(world, task, s, a, succ, absorbing)
                + discount * future;
            residual = residual.max((table.get(s, a) - backup).abs());
        }
    }
    residual
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{canonical_four_rooms, Cell, TERMINAL_ACTION};
    use approx::assert_abs_diff_eq;

    #[test]
    fn terminal_entries_of_the_wvf() {
        let env = canonical_four_rooms();
        let world = env.world();
        let goals: Vec<State> = (0..world.state_count()).collect();
        let penalty = world.default_min_penalty();
        let table = vi_wvf(world, env.task(), &goals, penalty, &ViParams::default()).unwrap();

        let g = env.state_at(Cell::new(3, 3)).unwrap();
        let gi = table.goal_ordinal(g).unwrap();
        // immediate terminal reward at the intended task goal
        assert_abs_diff_eq!(table.get(g, gi, TERMINAL_ACTION), 2.0, epsilon = 1e-9);

        // one step away: step cost plus terminal reward
        let s = env.state_at(Cell::new(3, 2)).unwrap();
        assert_abs_diff_eq!(table.state_value(s, gi), 1.9, epsilon = 1e-9);

        // terminating anywhere else earns the penalty
        assert_abs_diff_eq!(table.get(s, gi, TERMINAL_ACTION), penalty, epsilon = 1e-9);
    }

    #[test]
    fn residual_after_convergence_is_within_tolerance() {
        let env = canonical_four_rooms();
        let world = env.world();
        let goals: Vec<State> = (0..world.state_count()).collect();
        let params = ViParams::default();
        let penalty = world.default_min_penalty();
        let table = vi_wvf(world, env.task(), &goals, penalty, &params).unwrap();
        let ct = ComposedTask::new(
            world,
            env.task(),
            ExtendedRewardConfig::new(world, penalty).unwrap(),
        );
        assert!(wvf_bellman_residual(&table, &ct, params.discount) <= params.tolerance);

        let q = vi_task(world, env.task(), &params).unwrap();
        assert!(task_bellman_residual(&q, world, env.task(), params.discount) <= params.tolerance);
    }

    #[test]
    fn task_values_near_goal() {
        let env = canonical_four_rooms();
        let q = vi_task(env.world(), env.task(), &ViParams::default()).unwrap();
        let adj = env.state_at(Cell::new(3, 2)).unwrap();
        assert_abs_diff_eq!(q.state_value(adj), 1.9, epsilon = 1e-9);
    }

    #[test]
    fn vi_rejects_bad_parameters() {
        let env = canonical_four_rooms();
        let world = env.world();
        let goals: Vec<State> = (0..world.state_count()).collect();
        // penalty not strictly below reward_min
        assert!(vi_wvf(world, env.task(), &goals, 0.0, &ViParams::default()).is_err());
        // zero tolerance
        let bad = ViParams {
            tolerance: 0.0,
            ..ViParams::default()
        };
        assert!(vi_wvf(world, env.task(), &goals, -218.4, &bad).is_err());
        // empty goal set
        assert!(vi_wvf(world, env.task(), &[], -218.4, &ViParams::default()).is_err());
    }

    #[test]
    fn reachability_on_connected_and_sealed_maps() {
        let env = canonical_four_rooms();
        let world = env.world();
        let goals: Vec<State> = (0..world.state_count()).collect();
        let from = env.state_at(Cell::new(1, 1)).unwrap();
        let reach = reachable_goals(world, from, &goals).unwrap();
        assert_eq!(reach.len(), 104, "connected map: every free cell reachable");
        assert!(reach.contains(&from), "zero-step reachability of s itself");

        // a wall splits the map into a left column and a right block
        let split = crate::grid::parse_map(
            "WVFMAP 1
7 5
#######
#.#...#
#.#...#
#.#...#
#######
",
        )
        .unwrap();
        let env = crate::grid::four_rooms(split, &[], crate::grid::RewardParams::default()).unwrap();
        let world = env.world();
        let all: Vec<State> = (0..world.state_count()).collect();
        let left = env.state_at(Cell::new(1, 1)).unwrap();
        let right = env.state_at(Cell::new(1, 3)).unwrap();
        let from_left = reachable_goals(world, left, &all).unwrap();
        assert_eq!(from_left.len(), 3, "left column only");
        assert!(!from_left.contains(&right));
    }
}
