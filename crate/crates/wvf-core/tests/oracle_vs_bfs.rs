//! Exhaustive checks of the value-iteration solvers against an independent
//! breadth-first oracle computed straight from the grid layout: with unit
//! step cost -0.1 and terminal reward r at a goal cell, the optimal
//! goal-conditioned value is `r - 0.1 * d(s, g)` and the optimal task value
//! is the best such expression over terminal cells.

use std::collections::HashMap;

use wvf_core::grid::{
    canonical_four_rooms, canonical_pickup, Cell, GridEnv, GridLayout, TERMINAL_ACTION,
};
use wvf_core::oracle::{vi_task, vi_wvf, ViParams};
use wvf_core::State;

/// Wall-aware shortest-path distances from one cell, derived from the
/// layout alone (no WorldSpec involved).
fn bfs_distances(layout: &GridLayout, from: Cell) -> HashMap<Cell, usize> {
    let mut dist = HashMap::new();
    dist.insert(from, 0usize);
    let mut frontier = vec![from];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for c in frontier {
            let d = dist[&c];
            let mut push = |cell: Cell| {
                if layout.is_free(cell) && !dist.contains_key(&cell) {
                    dist.insert(cell, d + 1);
                    next.push(cell);
                }
            };
            if c.row > 0 {
                push(Cell::new(c.row - 1, c.col));
            }
            push(Cell::new(c.row + 1, c.col));
            if c.col > 0 {
                push(Cell::new(c.row, c.col - 1));
            }
            push(Cell::new(c.row, c.col + 1));
        }
        frontier = next;
    }
    dist
}

/// Terminal reward available at each terminal-capable cell, per the task.
fn terminal_rewards(env: &GridEnv) -> HashMap<Cell, f64> {
    let mut out = HashMap::new();
    for s in 0..env.state_count() {
        if (0..env.action_count()).any(|a| env.world().is_terminal(s, a)) {
            let r = env
                .task()
                .max_terminal_reward(env.world(), s)
                .expect("terminal-capable");
            out.insert(env.cell_of(s), r);
        }
    }
    out
}

fn expected_wvf_value(
    dist_from_goal: &HashMap<Cell, usize>,
    cell: Cell,
    goal_reward: f64,
    penalty: f64,
    nearest_terminal_steps: usize,
) -> f64 {
    match dist_from_goal.get(&cell) {
        Some(&d) => goal_reward - 0.1 * d as f64,
        // unreachable goal: walk to the closest place that can terminate
        // and accept the penalty
        None => penalty - 0.1 * nearest_terminal_steps as f64,
    }
}

fn check_wvf_against_bfs(env: &GridEnv, goals: &[State]) {
    let world = env.world();
    let penalty = world.default_min_penalty();
    let params = ViParams::default();
    let table = vi_wvf(world, env.task(), goals, penalty, &params).unwrap();
    let term_rewards = terminal_rewards(env);

    // distance from every state to its nearest terminal-capable cell
    let nearest_terminal: Vec<usize> = (0..env.state_count())
        .map(|s| {
            let d = bfs_distances(env.layout(), env.cell_of(s));
            term_rewards
                .keys()
                .filter_map(|c| d.get(c))
                .copied()
                .min()
                .expect("some terminal cell reachable")
        })
        .collect();

    for (gi, &g) in table.goals().iter().enumerate() {
        let g_cell = env.cell_of(g);
        let dist = bfs_distances(env.layout(), g_cell);
        let r_g = term_rewards[&g_cell];
        for s in 0..env.state_count() {
            let expected = expected_wvf_value(
                &dist,
                env.cell_of(s),
                r_g,
                penalty,
                nearest_terminal[s],
            );
            let got = table.state_value(s, gi);
            assert!(
                (got - expected).abs() <= 1e-9,
                "V(s={s}, g={g}) = {got}, bfs oracle says {expected}"
            );
        }
        // terminal entries: task reward on the goal itself, penalty elsewhere
        for s in 0..env.state_count() {
            if !world.is_terminal(s, TERMINAL_ACTION) {
                continue;
            }
            let q = table.get(s, gi, TERMINAL_ACTION);
            if s == g {
                assert!((q - r_g).abs() <= 1e-9);
            } else {
                assert!((q - penalty).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn four_rooms_wvf_matches_bfs_oracle_exhaustively() {
    let env = canonical_four_rooms();
    let goals: Vec<State> = (0..env.state_count()).collect();
    check_wvf_against_bfs(&env, &goals);
}

#[test]
fn pickup_wvf_matches_bfs_oracle_exhaustively() {
    let env = canonical_pickup();
    let env = env.with_task(env.pickup_task_by_attribute("blue").unwrap());
    let goals: Vec<State> = env.terminal_capable_states();
    assert_eq!(goals.len(), 4);
    check_wvf_against_bfs(&env, &goals);
}

#[test]
fn four_rooms_task_values_match_bfs_oracle() {
    let env = canonical_four_rooms();
    let q = vi_task(env.world(), env.task(), &ViParams::default()).unwrap();
    let term_rewards = terminal_rewards(&env);
    for s in 0..env.state_count() {
        let dist = bfs_distances(env.layout(), env.cell_of(s));
        let expected = term_rewards
            .iter()
            .filter_map(|(c, &r)| dist.get(c).map(|&d| r - 0.1 * d as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        let got = q.state_value(s);
        assert!(
            (got - expected).abs() <= 1e-9,
            "V({s}) = {got}, bfs oracle says {expected}"
        );
    }

    // frozen spot values: both task goals are 10 steps from the
    // top-right corner, and 4 steps from the bottom-right corner
    let corner = env.state_at(Cell::new(1, 11)).unwrap();
    assert!((q.state_value(corner) - 1.0).abs() <= 1e-9);
    let corner = env.state_at(Cell::new(11, 11)).unwrap();
    assert!((q.state_value(corner) - 1.6).abs() <= 1e-9);
}

#[test]
fn max_over_goals_of_wvf_equals_task_values() {
    let env = canonical_four_rooms();
    let world = env.world();
    let goals: Vec<State> = (0..world.state_count()).collect();
    let params = ViParams::default();
    let table = vi_wvf(world, env.task(), &goals, world.default_min_penalty(), &params).unwrap();
    let q = vi_task(world, env.task(), &params).unwrap();
    for s in 0..world.state_count() {
        for a in 0..world.action_count() {
            let recovered = table.max_over_goals(s, a);
            assert!(
                (recovered - q.get(s, a)).abs() <= 2.0 * params.tolerance,
                "Q(s={s}, a={a}): {recovered} vs {}",
                q.get(s, a)
            );
        }
    }
}

#[test]
fn world_policy_is_shared_across_tasks() {
    let env = canonical_four_rooms();
    let world = env.world();
    let goals: Vec<State> = (0..world.state_count()).collect();
    let params = ViParams::default();
    let penalty = world.default_min_penalty();

    let hallway_cells: Vec<Cell> = env.layout().hallways.iter().copied().collect();
    let hallways = env.four_rooms_task("hallways", &hallway_cells).unwrap();

    let t1 = vi_wvf(world, env.task(), &goals, penalty, &params).unwrap();
    let t2 = vi_wvf(world, &hallways, &goals, penalty, &params).unwrap();

    for s in 0..world.state_count() {
        for gi in 0..goals.len() {
            if goals[gi] == s {
                continue;
            }
            // the greedy action under task 1 is optimal under task 2
            let a1 = t1.greedy_action(s, gi);
            let best2 = t2.state_value(s, gi);
            assert!(
                t2.get(s, gi, a1) >= best2 - 2.0 * params.tolerance,
                "task-1 greedy action {a1} at (s={s}, g={}) is suboptimal under task 2",
                goals[gi]
            );
        }
    }
}
