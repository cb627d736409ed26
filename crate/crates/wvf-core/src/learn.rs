//! Q-learning for WVFs: epsilon-greedy behaviour conditioned on a goal
//! sampled from a growing buffer, with every observed transition replayed
//! against every buffered goal.
//!
//! Until the first terminal transition the buffer is empty and episodes act
//! uniformly at random. On an absorbing transition out of `s`, `s` joins the
//! buffer before the update loop, so the terminating transition itself
//! already updates the new goal. The wrong-goal penalty replaces the reward
//! exactly when the observed transition is terminal and the relabeled goal
//! differs from the terminating state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::GridEnv;
use crate::table::{TableMeta, WVFTable};
use crate::world::{ComposedTask, ExtendedRewardConfig, GoalBuffer};
use crate::{Action, Error, Result, State};

/// Learner hyperparameters. A fixed seed makes a run fully reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    /// Learning rate in (0, 1].
    pub alpha: f64,
    /// Exploration rate in [0, 1].
    pub epsilon: f64,
    pub episodes: usize,
    pub max_steps: usize,
    /// Discount in (0, 1]; the shipped worlds use 1.
    pub discount: f64,
    pub seed: u64,
    /// Initial table value; 0 by default.
    pub init_value: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon: 0.3,
            episodes: 50_000,
            max_steps: 400,
            discount: 1.0,
            seed: 0,
            init_value: 0.0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if self.episodes == 0 || self.max_steps == 0 {
            return bad("episodes and max_steps must be positive".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad(format!("discount must lie in (0, 1], got {}", self.discount));
        }
        if !self.init_value.is_finite() {
            return bad(format!("init_value must be finite, got {}", self.init_value));
        }
        Ok(())
    }
}

/// Per-episode learning-curve entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Undiscounted sum of task rewards received.
    pub ret: f64,
    pub steps: usize,
    pub buffer_size: usize,
}

/// Output of a learning run.
#[derive(Debug, Clone)]
pub struct LearnResult {
    pub table: WVFTable,
    pub buffer: GoalBuffer,
    pub curve: Vec<EpisodeStats>,
    /// States observed as the source of at least one transition.
    pub visited: Vec<bool>,
    /// Total TD updates applied (one per buffered goal per step).
    pub updates: u64,
}

/// Single TD backup of one table entry:
/// `q += alpha * (r + discount * max_a' Q(s', g, a') - q)` with a zero
/// bootstrap at absorbing successors.
#[allow(clippy::too_many_arguments)]
pub fn td_update(
    table: &mut WVFTable,
    s: State,
    goal_ord: usize,
    a: Action,
    reward: f64,
    s_next: State,
    absorbing: bool,
    alpha: f64,
    discount: f64,
) {
    let future = if absorbing {
        0.0
    } else {
        table.state_value(s_next, goal_ord)
    };
    let q = table.get(s, goal_ord, a);
    table.set(s, goal_ord, a, q + alpha * (reward + discount * future - q));
}

/// Uniform goal sample from the buffer; `None` when it is empty (the caller
/// then runs a pure-exploration episode).
pub fn sample_goal<R: Rng + ?Sized>(buffer: &GoalBuffer, rng: &mut R) -> Option<State> {
    if buffer.is_empty() {
        None
    } else {
        Some(buffer.goals()[rng.random_range(0..buffer.len())])
    }
}

/// Runs Q-learning for WVFs on a grid environment. The goal axis of the
/// returned table spans the full state set; `ext` supplies the wrong-goal
/// penalty.
pub fn learn_wvf(env: &GridEnv, ext: ExtendedRewardConfig, cfg: &LearnConfig) -> Result<LearnResult> {
    cfg.validate()?;
    let world = env.world();
    let n = world.state_count();
    let actions = world.action_count();
    let ct = ComposedTask::new(world, env.task(), ext);
    let meta = TableMeta::new(env.task().name(), ext.min_penalty(), cfg.discount, cfg.episodes as u64);
    let mut table = WVFTable::zeros_full_goals(n, actions, meta);
    if cfg.init_value != 0.0 {
        table.values_mut().fill(cfg.init_value);
    }
    let mut buffer = GoalBuffer::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut visited = vec![false; n];
    let mut updates = 0u64;

    for episode in 0..cfg.episodes {
        let mut at = env.sample_start(&mut rng);
        let goal = sample_goal(&buffer, &mut rng);
        let mut ret = 0.0;
        let mut steps = 0;
        while !at.terminated && steps < cfg.max_steps {
            let a = match goal {
                None => rng.random_range(0..actions),
                Some(g) => {
                    if rng.random::<f64>() < cfg.epsilon {
                        rng.random_range(0..actions)
                    } else {
                        table.greedy_action(at.state, g)
                    }
                }
            };
            let (next, reward, absorbing) = env.step(at, a)?;
            if absorbing {
                buffer.insert(at.state);
            }
            for &g_prime in buffer.goals() {
                let r_bar = if absorbing && g_prime != at.state {
                    ct.min_penalty()
                } else {
                    reward
                };
                td_update(
                    &mut table,
                    at.state,
                    g_prime,
                    a,
                    r_bar,
                    next.state,
                    absorbing,
                    cfg.alpha,
                    cfg.discount,
                );
                updates += 1;
            }
            visited[at.state] = true;
            ret += reward;
            steps += 1;
            at = next;
        }
        curve.push(EpisodeStats {
            episode,
            ret,
            steps,
            buffer_size: buffer.len(),
        });
    }

    Ok(LearnResult {
        table,
        buffer,
        curve,
        visited,
        updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::canonical_four_rooms;
    use crate::table::TableMeta;
    use approx::assert_abs_diff_eq;

    fn test_table() -> WVFTable {
        WVFTable::zeros_full_goals(3, 2, TableMeta::new("t", -1.0, 1.0, 0))
    }

    #[test]
    fn td_update_examples() {
        let mut t = test_table();
        // full-step terminal backup
        td_update(&mut t, 0, 0, 0, 2.0, 1, true, 1.0, 1.0);
        assert_abs_diff_eq!(t.get(0, 0, 0), 2.0);

        // zero TD-error fixed point
        let mut t = test_table();
        t.set(0, 0, 0, 1.9);
        t.set(1, 0, 0, 2.0);
        td_update(&mut t, 0, 0, 0, -0.1, 1, false, 0.5, 1.0);
        assert_abs_diff_eq!(t.get(0, 0, 0), 1.9);

        // penalty backup at half learning rate
        let mut t = test_table();
        td_update(&mut t, 0, 0, 0, -218.4, 1, true, 0.5, 1.0);
        assert_abs_diff_eq!(t.get(0, 0, 0), -109.2, epsilon = 1e-12);

        // zero learning rate is a no-op regardless of the target
        let mut t = test_table();
        t.set(0, 0, 0, 1.3);
        td_update(&mut t, 0, 0, 0, 2.0, 1, true, 0.0, 1.0);
        assert_eq!(t.get(0, 0, 0), 1.3);
    }

    #[test]
    fn sample_goal_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let empty = GoalBuffer::new(4);
        assert_eq!(sample_goal(&empty, &mut rng), None);

        let single = GoalBuffer::from_states(4, [2]);
        for _ in 0..10 {
            assert_eq!(sample_goal(&single, &mut rng), Some(2));
        }
    }

    #[test]
    fn sample_goal_is_uniform() {
        let k = 8;
        let n = 10_000usize;
        let buffer = GoalBuffer::from_states(16, (0..16).step_by(2));
        assert_eq!(buffer.len(), k);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = vec![0usize; 16];
        for _ in 0..n {
            counts[sample_goal(&buffer, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / k as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for &g in buffer.goals() {
            let freq = counts[g] as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "goal {g}: freq {freq} vs p {p} (3 sigma {})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn zero_learning_rate_cannot_be_configured() {
        let cfg = LearnConfig {
            alpha: 0.0,
            ..LearnConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn full_exploration_with_tiny_alpha_leaves_values_near_init() {
        // alpha = 0 is rejected by validation, so the spec's "table
        // unchanged" case is exercised at the smallest positive alpha via
        // epsilon = 1: behaviour is uniform regardless of table content.
        let env = canonical_four_rooms();
        let ext = ExtendedRewardConfig::derived(env.world()).unwrap();
        let cfg = LearnConfig {
            epsilon: 1.0,
            alpha: 1e-12,
            episodes: 5,
            max_steps: 50,
            seed: 3,
            ..LearnConfig::default()
        };
        let result = learn_wvf(&env, ext, &cfg).unwrap();
        let max_abs = result
            .table
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs < 1e-9, "max |q| = {max_abs}");
    }

    #[test]
    fn first_terminal_transition_seeds_the_buffer() {
        let env = canonical_four_rooms();
        let ext = ExtendedRewardConfig::derived(env.world()).unwrap();
        let cfg = LearnConfig {
            episodes: 1,
            max_steps: 100_000,
            seed: 0,
            ..LearnConfig::default()
        };
        let result = learn_wvf(&env, ext, &cfg).unwrap();
        assert_eq!(result.buffer.len(), 1, "buffer is exactly the first terminal state");
        // the terminal transition updates only the just-inserted goal
        assert_eq!(result.updates, 1);
        let nonzero = result.table.values().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn update_count_equals_buffer_size_per_step() {
        let env = canonical_four_rooms();
        let ext = ExtendedRewardConfig::derived(env.world()).unwrap();
        let cfg = LearnConfig {
            episodes: 30,
            max_steps: 500,
            seed: 11,
            ..LearnConfig::default()
        };
        let result = learn_wvf(&env, ext, &cfg).unwrap();
        // replay the arithmetic from the curve: each step of episode e
        // updates once per goal buffered at that moment. Within an episode
        // the buffer can only grow on its final step, so the per-episode
        // update count is (steps - 1) * size_before + size_after for
        // terminated episodes and steps * size_before for truncated ones.
        let mut expected = 0u64;
        let mut size_before = 0u64;
        for e in &result.curve {
            let size_after = e.buffer_size as u64;
            let terminated = e.steps < cfg.max_steps;
            if terminated {
                expected += (e.steps as u64 - 1) * size_before + size_after;
            } else {
                // truncated: unless the last step was terminal (it was not,
                // or the episode would have ended), no insert happened
                expected += e.steps as u64 * size_before;
            }
            size_before = size_after;
        }
        assert_eq!(result.updates, expected);
    }

    #[test]
    fn buffer_growth_is_monotone_and_bounded() {
        let env = canonical_four_rooms();
        let ext = ExtendedRewardConfig::derived(env.world()).unwrap();
        let cfg = LearnConfig {
            episodes: 200,
            max_steps: 200,
            seed: 5,
            ..LearnConfig::default()
        };
        let result = learn_wvf(&env, ext, &cfg).unwrap();
        let mut prev = 0;
        for e in &result.curve {
            assert!(e.buffer_size >= prev);
            assert!(e.buffer_size <= env.state_count());
            prev = e.buffer_size;
        }
    }

    #[test]
    fn fixed_seed_runs_are_bit_identical() {
        let env = canonical_four_rooms();
        let ext = ExtendedRewardConfig::derived(env.world()).unwrap();
        let cfg = LearnConfig {
            episodes: 50,
            max_steps: 200,
            seed: 42,
            ..LearnConfig::default()
        };
        let a = learn_wvf(&env, ext, &cfg).unwrap();
        let b = learn_wvf(&env, ext, &cfg).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.buffer, b.buffer);
        assert_eq!(a.curve, b.curve);
    }
}
