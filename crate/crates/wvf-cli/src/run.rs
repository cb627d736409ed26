//! Subcommand implementations: each builds its environment from the
//! config, runs its stages, and emits artifacts through a [`Manifest`] so
//! every output file is hashed. All emission paths iterate in fixed order
//! and format floats with the shortest round-trip encoding, making reruns
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use wvf_core::algebra::{
    compose, compose_task_rewards, enumerate_boolean_functions, parse_expression, recover_task,
    zero_shot_policy, zero_shot_values, AlgebraContext,
};
use wvf_core::dynamics::infer_model;
use wvf_core::eval::{evaluate_policy, EpisodeRecord, EvalStats};
use wvf_core::grid::{Cell, EnvKind, GridEnv, EAST, NORTH, SOUTH, WEST};
use wvf_core::learn::{learn_wvf, EpisodeStats};
use wvf_core::oracle::{vi_task, vi_wvf, ViParams};
use wvf_core::render::{
    cell_values, goal_tiled_svg, goal_value_tiled_svg, policy_glyphs, value_heatmap_svg, Glyph,
};
use wvf_core::table::WVFTable;
use wvf_core::world::{ComposedTask, TaskSpec};
use wvf_core::State;

use crate::config::{ExperimentConfig, Stage};
use crate::manifest::Manifest;
use crate::CliError;

/// Runs stages against a manifest; on failure the partial manifest is
/// still written with a failure record.
fn with_manifest(
    root: &Path,
    config_text: &str,
    seeds: &[u64],
    f: impl FnOnce(&mut Manifest) -> Result<(), CliError>,
) -> Result<PathBuf, CliError> {
    let mut manifest = Manifest::new(root, config_text, seeds);
    match f(&mut manifest) {
        Ok(()) => {
            manifest.write()?;
            Ok(root.to_path_buf())
        }
        Err(e) => {
            manifest.record_failure(&e.to_string());
            let _ = manifest.write();
            Err(e)
        }
    }
}

pub fn load_wvf_table(path: &Path) -> Result<WVFTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read table {}: {e}", path.display())))?;
    WVFTable::from_text(&text).map_err(CliError::from_config_source)
}

/// Oracle goal set of an environment: every free cell in four-rooms (the
/// done action terminates anywhere), object cells in pickup worlds.
pub fn oracle_goals(env: &GridEnv) -> Vec<State> {
    env.terminal_capable_states()
}

fn curve_csv(curve: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,return,steps,buffer_size\n");
    for e in curve {
        let _ = writeln!(out, "{},{},{},{}", e.episode, e.ret, e.steps, e.buffer_size);
    }
    out
}

fn episodes_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::from("episode,start,return,steps,terminated\n");
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{}",
            r.start, r.ret, r.steps, r.terminated as u8
        );
    }
    out
}

fn stats_csv(stats: &EvalStats) -> String {
    format!(
        "mean_return,std_dev,episodes,success_rate,truncated\n{},{},{},{},{}\n",
        stats.mean_return, stats.std_dev, stats.episodes, stats.success_rate, stats.truncated
    )
}

fn render_task_view(env: &GridEnv, table: &WVFTable) -> Result<(String, String), CliError> {
    let tiled = goal_tiled_svg(env, table)?;
    let q = recover_task(table);
    let values = cell_values(env, |s| q.state_value(s));
    let glyphs = policy_glyphs(env, &q.greedy_policy());
    let task_svg = value_heatmap_svg(env.layout(), &values, Some(&glyphs))?;
    Ok((tiled, task_svg))
}

/// The `learn` pipeline: per seed, learn a WVF and run the configured
/// stages (evaluation, rendering, dynamics inference) on the result.
pub fn cmd_learn(cfg: &ExperimentConfig, config_text: &str) -> Result<PathBuf, CliError> {
    let env = cfg.build_env()?;
    let ext = cfg.penalty_config(env.world())?;
    with_manifest(&cfg.out_dir, config_text, &cfg.seeds, |m| {
        for &seed in &cfg.seeds {
            let mut lc = cfg.learn;
            lc.seed = seed;
            let result = learn_wvf(&env, ext, &lc)?;
            let prefix = format!("seed{seed}");
            m.emit(
                &format!("{prefix}/wvf.tbl"),
                result.table.to_text()?.as_bytes(),
            )?;
            m.emit(
                &format!("{prefix}/curve.csv"),
                curve_csv(&result.curve).as_bytes(),
            )?;
            for stage in &cfg.stages {
                match stage {
                    Stage::Learn => {}
                    Stage::Eval => {
                        let policy = recover_task(&result.table).greedy_policy();
                        let (stats, records) = evaluate_policy(
                            &env,
                            &policy,
                            cfg.eval_episodes,
                            cfg.eval_horizon,
                            seed,
                        )?;
                        m.emit(
                            &format!("{prefix}/eval.csv"),
                            episodes_csv(&records).as_bytes(),
                        )?;
                        m.emit(
                            &format!("{prefix}/eval_summary.csv"),
                            stats_csv(&stats).as_bytes(),
                        )?;
                    }
                    Stage::Render => {
                        let (tiled, task_svg) = render_task_view(&env, &result.table)?;
                        m.emit(&format!("{prefix}/wvf_tiled.svg"), tiled.as_bytes())?;
                        m.emit(&format!("{prefix}/task_values.svg"), task_svg.as_bytes())?;
                    }
                    Stage::Infer => {
                        let ct = ComposedTask::new(env.world(), env.task(), ext);
                        let model = infer_model(&result.table, &env, &ct, cfg.infer_scope)?;
                        m.emit(
                            &format!("{prefix}/model.csv"),
                            model.to_csv(Some(&env)).as_bytes(),
                        )?;
                        let acc = format!(
                            "scope,pairs,accuracy\n{},{},{}\n",
                            cfg.infer_scope.label(),
                            model.len(),
                            model.accuracy(&env)
                        );
                        m.emit(&format!("{prefix}/infer_accuracy.csv"), acc.as_bytes())?;
                    }
                }
            }
        }
        Ok(())
    })
}

/// Solves the exact WVF and task tables for the configured task.
pub fn cmd_oracle(cfg: &ExperimentConfig, config_text: &str) -> Result<PathBuf, CliError> {
    let env = cfg.build_env()?;
    let ext = cfg.penalty_config(env.world())?;
    with_manifest(&cfg.out_dir, config_text, &cfg.seeds, |m| {
        let goals = oracle_goals(&env);
        let params = ViParams::default();
        let table = vi_wvf(env.world(), env.task(), &goals, ext.min_penalty(), &params)?;
        let q = vi_task(env.world(), env.task(), &params)?;
        m.emit("oracle_wvf.tbl", table.to_text()?.as_bytes())?;
        m.emit("oracle_q.tbl", q.to_text()?.as_bytes())?;
        let (tiled, task_svg) = render_task_view(&env, &table)?;
        m.emit("wvf_tiled.svg", tiled.as_bytes())?;
        m.emit("task_values.svg", task_svg.as_bytes())?;
        Ok(())
    })
}

/// Evaluates the greedy task policy of a saved WVF table.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    config_text: &str,
    table_path: &Path,
) -> Result<PathBuf, CliError> {
    let env = cfg.build_env()?;
    let table = load_wvf_table(table_path)?;
    with_manifest(&cfg.out_dir, config_text, &cfg.seeds, |m| {
        let policy = recover_task(&table).greedy_policy();
        if policy.len() != env.state_count() {
            return Err(CliError::Config(format!(
                "table indexes {} states, environment has {}",
                policy.len(),
                env.state_count()
            )));
        }
        let seed = cfg.seeds[0];
        let (stats, records) =
            evaluate_policy(&env, &policy, cfg.eval_episodes, cfg.eval_horizon, seed)?;
        m.emit("eval.csv", episodes_csv(&records).as_bytes())?;
        m.emit("eval_summary.csv", stats_csv(&stats).as_bytes())?;
        Ok(())
    })
}

fn arrow_between(env: &GridEnv, s: State, succ: State) -> Glyph {
    let a = env.cell_of(s);
    let b = env.cell_of(succ);
    let dr = b.row as isize - a.row as isize;
    let dc = b.col as isize - a.col as isize;
    if dr.abs() >= dc.abs() {
        match dr.signum() {
            -1 => Glyph::ArrowN,
            1 => Glyph::ArrowS,
            _ => Glyph::Dot,
        }
    } else if dc > 0 {
        Glyph::ArrowE
    } else {
        Glyph::ArrowW
    }
}

/// Infers the transition model from a saved WVF and reports its accuracy
/// against the true dynamics; also renders one arrow map per move action.
pub fn cmd_infer(
    cfg: &ExperimentConfig,
    config_text: &str,
    table_path: &Path,
) -> Result<PathBuf, CliError> {
    let env = cfg.build_env()?;
    let table = load_wvf_table(table_path)?;
    let ext = cfg.penalty_config(env.world())?;
    with_manifest(&cfg.out_dir, config_text, &cfg.seeds, |m| {
        let ct = ComposedTask::new(env.world(), env.task(), ext);
        let model = infer_model(&table, &env, &ct, cfg.infer_scope)?;
        m.emit("model.csv", model.to_csv(Some(&env)).as_bytes())?;
        let acc = format!(
            "scope,pairs,accuracy\n{},{},{}\n",
            cfg.infer_scope.label(),
            model.len(),
            model.accuracy(&env)
        );
        m.emit("infer_accuracy.csv", acc.as_bytes())?;

        // one arrow map per cardinal action: the inferred successor drawn
        // at each cell, over the table's task values
        let q = recover_task(&table);
        let values = cell_values(&env, |s| q.state_value(s));
        for (a, name) in [(NORTH, "north"), (SOUTH, "south"), (EAST, "east"), (WEST, "west")] {
            let mut glyphs: BTreeMap<Cell, Glyph> = BTreeMap::new();
            for s in 0..env.state_count() {
                if let Some(succ) = model.successor(s, a) {
                    glyphs.insert(env.cell_of(s), arrow_between(&env, s, succ));
                }
            }
            let svg = value_heatmap_svg(env.layout(), &values, Some(&glyphs))?;
            m.emit(&format!("inferred_{name}.svg"), svg.as_bytes())?;
        }
        Ok(())
    })
}

/// Zero-shot transfer: estimates the configured (new) task's values and
/// policy from a WVF pretrained on any other task of the same world.
pub fn cmd_zero_shot(
    cfg: &ExperimentConfig,
    config_text: &str,
    table_path: &Path,
) -> Result<PathBuf, CliError> {
    let env = cfg.build_env()?;
    let table = load_wvf_table(table_path)?;
    with_manifest(&cfg.out_dir, config_text, &cfg.seeds, |m| {
        let vtilde = zero_shot_values(&table, env.world(), env.task())?;
        let mut csv = String::from("state,goal,value\n");
        for s in 0..vtilde.state_count() {
            for (gi, &g) in vtilde.goals().iter().enumerate() {
                let _ = writeln!(csv, "{s},{g},{}", vtilde.get(s, gi));
            }
        }
        m.emit("vtilde.csv", csv.as_bytes())?;
        m.emit(
            "vtilde_tiled.svg",
            goal_value_tiled_svg(&env, &vtilde)?.as_bytes(),
        )?;

        let policy = zero_shot_policy(&table, &vtilde)?;
        let values = cell_values(&env, |s| vtilde.state_value(s));
        let glyphs = policy_glyphs(&env, &policy);
        m.emit(
            "zero_shot_values.svg",
            value_heatmap_svg(env.layout(), &values, Some(&glyphs))?.as_bytes(),
        )?;

        let seed = cfg.seeds[0];
        let (stats, records) =
            evaluate_policy(&env, &policy, cfg.eval_episodes, cfg.eval_horizon, seed)?;
        m.emit("zero_shot_eval.csv", episodes_csv(&records).as_bytes())?;
        m.emit("zero_shot_summary.csv", stats_csv(&stats).as_bytes())?;
        Ok(())
    })
}

/// Oracle-solved base tables plus SUP/INF context for a pickup world.
pub fn solve_compose_inputs(
    env: &GridEnv,
    base: &[String],
    penalty: f64,
) -> Result<(BTreeMap<String, WVFTable>, AlgebraContext, BTreeMap<String, TaskSpec>), CliError> {
    if env.kind() != EnvKind::Pickup {
        return Err(CliError::Config(
            "compose.base expects a pickup environment".into(),
        ));
    }
    let goals = oracle_goals(env);
    let params = ViParams::default();
    let mut tables = BTreeMap::new();
    let mut tasks = BTreeMap::new();
    for name in base {
        let task = env
            .pickup_task_by_attribute(name)
            .map_err(CliError::from_config_source)?;
        let table = vi_wvf(env.world(), &task, &goals, penalty, &params)?;
        tables.insert(name.clone(), table);
        tasks.insert(name.clone(), task);
    }
    let sup_task = env.pickup_task_by_attribute("sup")?;
    let inf_task = env.pickup_task_by_attribute("inf")?;
    let sup = vi_wvf(env.world(), &sup_task, &goals, penalty, &params)?;
    let inf = vi_wvf(env.world(), &inf_task, &goals, penalty, &params)?;
    tasks.insert("sup".into(), sup_task);
    tasks.insert("inf".into(), inf_task);
    let ctx = AlgebraContext::new(sup, inf)?;
    Ok((tables, ctx, tasks))
}

/// Composes Boolean expressions over oracle-solved base tasks, evaluating
/// each composed policy; `--enumerate` sweeps all 2^(2^n) functions of the
/// first two base tasks and reports their distances to the directly-solved
/// task oracles.
pub fn cmd_compose(
    cfg: &ExperimentConfig,
    config_text: &str,
    expr_override: Option<&str>,
    enumerate: bool,
) -> Result<PathBuf, CliError> {
    let env = cfg.build_env()?;
    let ext = cfg.penalty_config(env.world())?;
    if cfg.compose_base.is_empty() {
        return Err(CliError::Config(
            "compose.base: at least one base task is required".into(),
        ));
    }
    let exprs: Vec<String> = match expr_override {
        Some(e) => vec![e.to_string()],
        None => cfg.compose_exprs.clone(),
    };
    if exprs.is_empty() && !enumerate {
        return Err(CliError::Config(
            "compose.exprs: no expressions configured (or pass --expr)".into(),
        ));
    }
    with_manifest(&cfg.out_dir, config_text, &cfg.seeds, |m| {
        let (tables, ctx, tasks) = solve_compose_inputs(&env, &cfg.compose_base, ext.min_penalty())?;
        let seed = cfg.seeds[0];

        let mut eval_csv = String::from(
            "expression,mean_return,std_dev,episodes,success_rate,truncated\n",
        );
        for (i, text) in exprs.iter().enumerate() {
            let expr = parse_expression(text).map_err(CliError::from_config_source)?;
            let composed = compose(&expr, Some(&ctx), &tables)?;
            m.emit(&format!("compose/expr{i}.tbl"), composed.to_text()?.as_bytes())?;
            let policy = recover_task(&composed).greedy_policy();
            let (stats, _) =
                evaluate_policy(&env, &policy, cfg.eval_episodes, cfg.eval_horizon, seed)?;
            let _ = writeln!(
                eval_csv,
                "{},{},{},{},{},{}",
                expr, stats.mean_return, stats.std_dev, stats.episodes, stats.success_rate,
                stats.truncated
            );
        }
        if !exprs.is_empty() {
            m.emit("compose_eval.csv", eval_csv.as_bytes())?;
        }

        if enumerate {
            let names: Vec<String> = cfg.compose_base.iter().take(2).cloned().collect();
            if names.len() < 2 {
                return Err(CliError::Config(
                    "--enumerate requires two base tasks".into(),
                ));
            }
            let goals = oracle_goals(&env);
            let params = ViParams::default();
            let sup_task = &tasks["sup"];
            let inf_task = &tasks["inf"];
            let funcs = enumerate_boolean_functions(&names);
            let mut composed_tables = Vec::new();
            let mut csv = String::from("mask,expression,oracle_max_diff\n");
            for f in &funcs {
                let composed = compose(&f.expr, Some(&ctx), &tables)?;
                let task = compose_task_rewards(&f.expr, env.world(), sup_task, inf_task, &tasks)?;
                let solved = vi_wvf(env.world(), &task, &goals, ext.min_penalty(), &params)?;
                let diff = max_abs_diff(composed.values(), solved.values());
                let _ = writeln!(csv, "{},{},{diff}", f.mask, f.expr);
                composed_tables.push(composed);
            }
            m.emit("enumeration.csv", csv.as_bytes())?;

            let mut pairs = String::from("mask_a,mask_b,max_abs_diff\n");
            for i in 0..composed_tables.len() {
                for j in (i + 1)..composed_tables.len() {
                    let d = max_abs_diff(composed_tables[i].values(), composed_tables[j].values());
                    let _ = writeln!(pairs, "{},{},{d}", funcs[i].mask, funcs[j].mask);
                }
            }
            m.emit("enumeration_pairs.csv", pairs.as_bytes())?;
        }
        Ok(())
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Renders the goal-tiled WVF and recovered task-value heatmaps of a saved
/// table.
pub fn cmd_render(
    cfg: &ExperimentConfig,
    config_text: &str,
    table_path: &Path,
) -> Result<PathBuf, CliError> {
    let env = cfg.build_env()?;
    let table = load_wvf_table(table_path)?;
    with_manifest(&cfg.out_dir, config_text, &cfg.seeds, |m| {
        let (tiled, task_svg) = render_task_view(&env, &table)?;
        m.emit("wvf_tiled.svg", tiled.as_bytes())?;
        m.emit("task_values.svg", task_svg.as_bytes())?;
        Ok(())
    })
}
