//! Flat sectioned experiment configs: one `section.key = value` per line,
//! `#` comments, no nesting. Strict parsing — unknown or duplicate keys are
//! errors carrying the offending field path.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use wvf_core::dynamics::CandidateScope;
use wvf_core::grid::{self, Cell, EnvKind, GridEnv, RewardParams};
use wvf_core::learn::LearnConfig;
use wvf_core::world::{ExtendedRewardConfig, TaskSpec, WorldSpec};

use crate::CliError;

/// Pipeline stages the `learn` subcommand executes in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Learn,
    Eval,
    Render,
    Infer,
}

/// Four-rooms task goals, by source.
#[derive(Debug, Clone, PartialEq)]
pub enum GoalSpec {
    /// The `G` cells of the map file.
    FromMap,
    /// The map's hallway cells.
    Hallways,
    /// Free cells of the lowest free row.
    BottomRow,
    /// Explicit `row,col` cells.
    Cells(Vec<Cell>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: EnvKind,
    pub map_path: PathBuf,
    pub task_name: String,
    /// Goal selection for four-rooms tasks.
    pub goals: GoalSpec,
    /// Attribute predicate for pickup tasks.
    pub attribute: Option<String>,
    pub learn: LearnConfig,
    /// Wrong-goal penalty override; derived from reward bounds when absent.
    pub penalty: Option<f64>,
    pub eval_episodes: usize,
    pub eval_horizon: usize,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub stages: Vec<Stage>,
    pub infer_scope: CandidateScope,
    /// Base tasks (attributes) solved by the oracle for composition.
    pub compose_base: Vec<String>,
    pub compose_exprs: Vec<String>,
}

fn field_err(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir)
    }

    /// Parses config text; relative map paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut kind = None;
        let mut map_path = None;
        let mut task_name = None;
        let mut goals = None;
        let mut attribute = None;
        let mut learn = LearnConfig::default();
        let mut penalty = None;
        let mut eval_episodes = 1000usize;
        let mut eval_horizon = 400usize;
        let mut out_dir = PathBuf::from("out");
        let mut seeds = vec![0u64];
        let mut stages = vec![Stage::Learn, Stage::Eval, Stage::Render];
        let mut infer_scope = CandidateScope::Full;
        let mut compose_base = Vec::new();
        let mut compose_exprs = Vec::new();

        let mut seen = BTreeSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'section.key = value'", no + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(field_err(key, "duplicate key"));
            }
            match key {
                "env.kind" => {
                    kind = Some(match value {
                        "four_rooms" => EnvKind::FourRooms,
                        "pickup" => EnvKind::Pickup,
                        other => {
                            return Err(field_err(key, format!("unknown kind '{other}'")));
                        }
                    })
                }
                "env.map" => {
                    let p = Path::new(value);
                    map_path = Some(if p.is_absolute() {
                        p.to_path_buf()
                    } else {
                        base_dir.join(p)
                    });
                }
                "task.name" => {
                    if value.is_empty() || value.chars().any(|c| c.is_whitespace()) {
                        return Err(field_err(key, "must be a single token"));
                    }
                    task_name = Some(value.to_string());
                }
                "task.goals" => {
                    goals = Some(match value {
                        "map" => GoalSpec::FromMap,
                        "hallways" => GoalSpec::Hallways,
                        "bottom-row" => GoalSpec::BottomRow,
                        cells => GoalSpec::Cells(parse_cells(key, cells)?),
                    })
                }
                "task.attribute" => attribute = Some(value.to_string()),
                "learn.alpha" => learn.alpha = parse_num(key, value)?,
                "learn.epsilon" => learn.epsilon = parse_num(key, value)?,
                "learn.episodes" => learn.episodes = parse_num(key, value)?,
                "learn.max_steps" => learn.max_steps = parse_num(key, value)?,
                "learn.discount" => learn.discount = parse_num(key, value)?,
                "learn.init" => learn.init_value = parse_num(key, value)?,
                "penalty.min" => penalty = Some(parse_num(key, value)?),
                "eval.episodes" => eval_episodes = parse_num(key, value)?,
                "eval.horizon" => eval_horizon = parse_num(key, value)?,
                "run.out" => out_dir = PathBuf::from(value),
                "run.seeds" => {
                    seeds = value
                        .split_whitespace()
                        .map(|t| t.parse::<u64>().map_err(|e| field_err(key, e)))
                        .collect::<Result<_, _>>()?;
                    if seeds.is_empty() {
                        return Err(field_err(key, "seeds list must be non-empty"));
                    }
                }
                "run.stages" => {
                    stages = value
                        .split_whitespace()
                        .map(|t| match t {
                            "learn" => Ok(Stage::Learn),
                            "eval" => Ok(Stage::Eval),
                            "render" => Ok(Stage::Render),
                            "infer" => Ok(Stage::Infer),
                            other => Err(field_err(key, format!("unknown stage '{other}'"))),
                        })
                        .collect::<Result<_, _>>()?;
                }
                "infer.scope" => {
                    infer_scope = match value {
                        "full" => CandidateScope::Full,
                        radius => CandidateScope::Neighbourhood(parse_num(key, radius)?),
                    }
                }
                "compose.base" => {
                    compose_base = value.split_whitespace().map(str::to_string).collect()
                }
                "compose.exprs" => {
                    compose_exprs = value
                        .split(',')
                        .map(|e| e.trim().to_string())
                        .filter(|e| !e.is_empty())
                        .collect()
                }
                other => return Err(field_err(other, "unknown key")),
            }
        }

        let kind = kind.ok_or_else(|| field_err("env.kind", "missing"))?;
        let map_path = map_path.ok_or_else(|| field_err("env.map", "missing"))?;
        if !map_path.exists() {
            return Err(field_err(
                "env.map",
                format!("map file {} does not exist", map_path.display()),
            ));
        }
        let cfg = Self {
            kind,
            map_path,
            task_name: task_name.unwrap_or_else(|| "task".to_string()),
            goals: goals.unwrap_or(GoalSpec::FromMap),
            attribute,
            learn,
            penalty,
            eval_episodes,
            eval_horizon,
            out_dir,
            seeds,
            stages,
            infer_scope,
            compose_base,
            compose_exprs,
        };
        cfg.learn
            .validate()
            .map_err(|e| field_err("learn", e))?;
        if cfg.eval_episodes == 0 || cfg.eval_horizon == 0 {
            return Err(field_err("eval", "episodes and horizon must be positive"));
        }
        if cfg.kind == EnvKind::Pickup && cfg.attribute.is_none() {
            return Err(field_err("task.attribute", "required for pickup worlds"));
        }
        if cfg.kind == EnvKind::FourRooms && cfg.attribute.is_some() {
            return Err(field_err("task.attribute", "only valid for pickup worlds"));
        }
        Ok(cfg)
    }

    /// Builds the configured environment bound to the configured task.
    pub fn build_env(&self) -> Result<GridEnv, CliError> {
        let text = std::fs::read_to_string(&self.map_path).map_err(|e| {
            CliError::Config(format!("cannot read map {}: {e}", self.map_path.display()))
        })?;
        let layout = grid::parse_map(&text).map_err(CliError::from_config_source)?;
        match self.kind {
            EnvKind::FourRooms => {
                let goal_cells = self.goal_cells(&layout)?;
                let env = grid::four_rooms(layout, &goal_cells, RewardParams::default())
                    .map_err(CliError::from_config_source)?;
                let task = env
                    .four_rooms_task(self.task_name.clone(), &goal_cells)
                    .map_err(CliError::from_config_source)?;
                Ok(env.with_task(task))
            }
            EnvKind::Pickup => {
                let env = grid::pickup_grid(layout, RewardParams::default())
                    .map_err(CliError::from_config_source)?;
                let attr = self.attribute.as_deref().expect("validated");
                let task = env
                    .pickup_task_by_attribute(attr)
                    .map_err(CliError::from_config_source)?;
                let task = rename_task(&env, task, &self.task_name)?;
                Ok(env.with_task(task))
            }
        }
    }

    fn goal_cells(&self, layout: &grid::GridLayout) -> Result<Vec<Cell>, CliError> {
        let cells = match &self.goals {
            GoalSpec::FromMap => layout.goal_cells.clone(),
            GoalSpec::Hallways => layout.hallways.iter().copied().collect(),
            GoalSpec::BottomRow => layout.bottom_row_free_cells(),
            GoalSpec::Cells(cells) => cells.clone(),
        };
        if cells.is_empty() {
            return Err(field_err("task.goals", "resolved to an empty goal set"));
        }
        Ok(cells)
    }

    /// The extended-reward penalty: explicit override or derived bounds.
    pub fn penalty_config(&self, world: &WorldSpec) -> Result<ExtendedRewardConfig, CliError> {
        match self.penalty {
            Some(p) => ExtendedRewardConfig::new(world, p).map_err(CliError::from_config_source),
            None => ExtendedRewardConfig::derived(world).map_err(CliError::from_config_source),
        }
    }
}

/// Rebuilds a task under a new name (task names key output files).
fn rename_task(env: &GridEnv, task: TaskSpec, name: &str) -> Result<TaskSpec, CliError> {
    let world = env.world();
    let terminal: Vec<f64> = (0..world.state_count() * world.action_count())
        .map(|i| {
            let (s, a) = (i / world.action_count(), i % world.action_count());
            task.terminal_reward(world, s, a)
        })
        .collect();
    TaskSpec::new(world, name, terminal).map_err(CliError::from_config_source)
}

fn parse_cells(field: &str, text: &str) -> Result<Vec<Cell>, CliError> {
    text.split_whitespace()
        .map(|tok| {
            let (r, c) = tok
                .split_once(',')
                .ok_or_else(|| field_err(field, format!("expected 'row,col', found '{tok}'")))?;
            let row = r.parse().map_err(|e| field_err(field, e))?;
            let col = c.parse().map_err(|e| field_err(field, e))?;
            Ok(Cell::new(row, col))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| field_err(field, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_map(dir: &Path) -> PathBuf {
        let path = dir.join("four_rooms.map");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(wvf_core::grid::maps::FOUR_ROOMS.as_bytes()).unwrap();
        path
    }

    #[test]
    fn parses_a_full_config() {
        let dir = tempfile::tempdir().unwrap();
        write_map(dir.path());
        let text = "
# experiment 1
env.kind = four_rooms
env.map = four_rooms.map
task.name = tl_br
task.goals = map
learn.alpha = 0.5
learn.episodes = 100
run.seeds = 0 1
run.stages = learn render
eval.episodes = 10
";
        let cfg = ExperimentConfig::parse(text, dir.path()).unwrap();
        assert_eq!(cfg.task_name, "tl_br");
        assert_eq!(cfg.seeds, vec![0, 1]);
        assert_eq!(cfg.stages, vec![Stage::Learn, Stage::Render]);
        assert_eq!(cfg.learn.episodes, 100);
        let env = cfg.build_env().unwrap();
        assert_eq!(env.state_count(), 104);
    }

    #[test]
    fn missing_map_file_is_named_in_the_error() {
        let dir = tempfile::tempdir().unwrap();
        let text = "env.kind = four_rooms\nenv.map = nowhere.map\n";
        let err = ExperimentConfig::parse(text, dir.path()).unwrap_err();
        assert!(err.to_string().contains("nowhere.map"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected_with_field_path() {
        let dir = tempfile::tempdir().unwrap();
        write_map(dir.path());
        let err = ExperimentConfig::parse(
            "env.kind = four_rooms\nenv.map = four_rooms.map\nlearn.alhpa = 0.5\n",
            dir.path(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("learn.alhpa"), "{err}");

        let err = ExperimentConfig::parse(
            "env.kind = four_rooms\nenv.kind = pickup\nenv.map = four_rooms.map\n",
            dir.path(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("env.kind"), "{err}");
    }

    #[test]
    fn numeric_ranges_are_validated_at_load() {
        let dir = tempfile::tempdir().unwrap();
        write_map(dir.path());
        let err = ExperimentConfig::parse(
            "env.kind = four_rooms\nenv.map = four_rooms.map\nlearn.alpha = 1.5\n",
            dir.path(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn goal_specs_resolve() {
        let dir = tempfile::tempdir().unwrap();
        write_map(dir.path());
        let base = "env.kind = four_rooms\nenv.map = four_rooms.map\n";
        for (spec, expected) in [
            ("map", 2usize),
            ("hallways", 4),
            ("bottom-row", 11),
            ("3,3 9,9 1,1", 3),
        ] {
            let text = format!("{base}task.goals = {spec}\n");
            let cfg = ExperimentConfig::parse(&text, dir.path()).unwrap();
            let env = cfg.build_env().unwrap();
            let goals = match &cfg.goals {
                GoalSpec::Cells(c) => c.len(),
                _ => {
                    let layout = env.layout();
                    match cfg.goals {
                        GoalSpec::FromMap => layout.goal_cells.len(),
                        GoalSpec::Hallways => layout.hallways.len(),
                        GoalSpec::BottomRow => layout.bottom_row_free_cells().len(),
                        GoalSpec::Cells(_) => unreachable!(),
                    }
                }
            };
            assert_eq!(goals, expected, "spec {spec}");
        }
    }
}
