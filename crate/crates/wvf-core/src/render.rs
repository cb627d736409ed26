//! Deterministic SVG heatmaps of value maps over grid layouts.
//!
//! Values map onto a diverging blue-white-red scale (low = blue, high =
//! red); walls are drawn dark. The emitted bytes are a pure function of the
//! inputs: fixed-order iteration, integer coordinates and integer RGB
//! channels.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::grid::{Cell, GridEnv, GridLayout, EAST, NORTH, SOUTH, WEST};
use crate::table::WVFTable;
use crate::{Action, Error, Result};

const CELL_PX: usize = 24;
const TILE_SUBCELL_PX: usize = 2;
const WALL_FILL: &str = "rgb(40,40,40)";

/// Diverging colormap: t in [0, 1] from blue through light gray to red.
/// The red channel never decreases and the blue channel never increases in
/// t, so the red-minus-blue difference of the emitted colors orders the
/// underlying values even after per-channel rounding.
pub fn diverging_rgb(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, u: f64| a + (b - a) * u;
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (lerp(0.0, 230.0, u), lerp(80.0, 230.0, u), lerp(255.0, 230.0, u))
    } else {
        let u = (t - 0.5) / 0.5;
        (lerp(230.0, 255.0, u), lerp(230.0, 30.0, u), lerp(230.0, 30.0, u))
    };
    (r.round() as u8, g.round() as u8, b.round() as u8)
}

fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    if hi - lo > 1e-12 {
        (v - lo) / (hi - lo)
    } else {
        // degenerate range: fixed mid-scale fallback
        0.5
    }
}

fn fill(t: f64) -> String {
    let (r, g, b) = diverging_rgb(t);
    format!("rgb({r},{g},{b})")
}

fn svg_open(out: &mut String, width_px: usize, height_px: usize) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width_px}\" height=\"{height_px}\" viewBox=\"0 0 {width_px} {height_px}\">"
    );
    out.push('\n');
}

fn rect(out: &mut String, x: usize, y: usize, w: usize, h: usize, fill: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"{fill}\"/>"
    );
}

/// Per-cell policy glyph drawn over a heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glyph {
    ArrowN,
    ArrowS,
    ArrowE,
    ArrowW,
    Dot,
}

impl Glyph {
    /// Glyph for a grid action; the terminal action renders as a dot.
    pub fn from_action(a: Action) -> Self {
        match a {
            NORTH => Glyph::ArrowN,
            SOUTH => Glyph::ArrowS,
            EAST => Glyph::ArrowE,
            WEST => Glyph::ArrowW,
            _ => Glyph::Dot,
        }
    }
}

fn glyph(out: &mut String, g: Glyph, x: usize, y: usize) {
    let cx = x + CELL_PX / 2;
    let cy = y + CELL_PX / 2;
    let s = CELL_PX / 4;
    match g {
        Glyph::Dot => {
            let _ = writeln!(
                out,
                "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{}\" fill=\"black\"/>",
                s / 2 + 1
            );
        }
        _ => {
            let (dx, dy) = match g {
                Glyph::ArrowN => (0isize, -1isize),
                Glyph::ArrowS => (0, 1),
                Glyph::ArrowE => (1, 0),
                Glyph::ArrowW => (-1, 0),
                Glyph::Dot => unreachable!(),
            };
            let tip_x = (cx as isize + dx * s as isize) as usize;
            let tip_y = (cy as isize + dy * s as isize) as usize;
            let tail_x = (cx as isize - dx * s as isize) as usize;
            let tail_y = (cy as isize - dy * s as isize) as usize;
            // perpendicular offsets for the arrowhead
            let (px, py) = (dy.abs(), dx.abs());
            let head = s as isize / 2;
            let h1x = (tip_x as isize - dx * head + px * head) as usize;
            let h1y = (tip_y as isize - dy * head + py * head) as usize;
            let h2x = (tip_x as isize - dx * head - px * head) as usize;
            let h2y = (tip_y as isize - dy * head - py * head) as usize;
            let _ = writeln!(
                out,
                "<path d=\"M{tail_x} {tail_y} L{tip_x} {tip_y} M{h1x} {h1y} L{tip_x} {tip_y} L{h2x} {h2y}\" stroke=\"black\" stroke-width=\"2\" fill=\"none\"/>"
            );
        }
    }
}

/// Renders one value per free cell. Every free cell of the layout must be
/// covered and no other cell may appear; `glyphs` optionally overlays a
/// policy.
pub fn value_heatmap_svg(
    layout: &GridLayout,
    values: &BTreeMap<Cell, f64>,
    glyphs: Option<&BTreeMap<Cell, Glyph>>,
) -> Result<String> {
    let free = layout.free_cells();
    if values.len() != free.len() || !free.iter().all(|c| values.contains_key(c)) {
        return Err(Error::Domain(format!(
            "values cover {} cells, layout has {} free cells",
            values.len(),
            free.len()
        )));
    }
    let (lo, hi) = values
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut out = String::new();
    svg_open(&mut out, layout.width * CELL_PX, layout.height * CELL_PX);
    for row in 0..layout.height {
        for col in 0..layout.width {
            let cell = Cell::new(row, col);
            let x = col * CELL_PX;
            let y = row * CELL_PX;
            match values.get(&cell) {
                Some(&v) => rect(&mut out, x, y, CELL_PX, CELL_PX, &fill(normalize(v, lo, hi))),
                None => rect(&mut out, x, y, CELL_PX, CELL_PX, WALL_FILL),
            }
        }
    }
    if let Some(glyphs) = glyphs {
        for (cell, g) in glyphs {
            if !layout.is_free(*cell) {
                return Err(Error::Domain(format!("glyph on non-free cell {cell}")));
            }
            glyph(&mut out, *g, cell.col * CELL_PX, cell.row * CELL_PX);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Goal-tiled rendering of a WVF: at every goal's grid position, the full
/// per-goal value map drawn as a miniature tile. All tiles share one global
/// color scale, so tiles whose goal carries a high task reward stand out.
pub fn goal_tiled_svg(env: &GridEnv, table: &WVFTable) -> Result<String> {
    let layout = env.layout();
    if table.state_count() != env.state_count() {
        return Err(Error::Domain(
            "table does not index this environment".into(),
        ));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in 0..table.state_count() {
        for gi in 0..table.goal_count() {
            let v = table.state_value(s, gi);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let tile_w = layout.width * TILE_SUBCELL_PX;
    let tile_h = layout.height * TILE_SUBCELL_PX;
    let mut out = String::new();
    svg_open(&mut out, layout.width * tile_w, layout.height * tile_h);
    rect(
        &mut out,
        0,
        0,
        layout.width * tile_w,
        layout.height * tile_h,
        WALL_FILL,
    );
    for (gi, &g) in table.goals().iter().enumerate() {
        let gc = env.cell_of(g);
        let ox = gc.col * tile_w;
        let oy = gc.row * tile_h;
        for row in 0..layout.height {
            for col in 0..layout.width {
                let cell = Cell::new(row, col);
                let x = ox + col * TILE_SUBCELL_PX;
                let y = oy + row * TILE_SUBCELL_PX;
                match env.state_at(cell) {
                    Ok(s) => {
                        let t = normalize(table.state_value(s, gi), lo, hi);
                        rect(&mut out, x, y, TILE_SUBCELL_PX, TILE_SUBCELL_PX, &fill(t));
                    }
                    Err(_) => rect(&mut out, x, y, TILE_SUBCELL_PX, TILE_SUBCELL_PX, WALL_FILL),
                }
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Estimated goal-value tiling (the zero-shot analogue of
/// [`goal_tiled_svg`]).
pub fn goal_value_tiled_svg(
    env: &GridEnv,
    vtilde: &crate::algebra::GoalValueTable,
) -> Result<String> {
    let layout = env.layout();
    if vtilde.state_count() != env.state_count() {
        return Err(Error::Domain(
            "estimated values do not index this environment".into(),
        ));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in 0..vtilde.state_count() {
        for gi in 0..vtilde.goals().len() {
            let v = vtilde.get(s, gi);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let tile_w = layout.width * TILE_SUBCELL_PX;
    let tile_h = layout.height * TILE_SUBCELL_PX;
    let mut out = String::new();
    svg_open(&mut out, layout.width * tile_w, layout.height * tile_h);
    rect(
        &mut out,
        0,
        0,
        layout.width * tile_w,
        layout.height * tile_h,
        WALL_FILL,
    );
    for (gi, &g) in vtilde.goals().iter().enumerate() {
        let gc = env.cell_of(g);
        let ox = gc.col * tile_w;
        let oy = gc.row * tile_h;
        for row in 0..layout.height {
            for col in 0..layout.width {
                let cell = Cell::new(row, col);
                let x = ox + col * TILE_SUBCELL_PX;
                let y = oy + row * TILE_SUBCELL_PX;
                match env.state_at(cell) {
                    Ok(s) => {
                        let t = normalize(vtilde.get(s, gi), lo, hi);
                        rect(&mut out, x, y, TILE_SUBCELL_PX, TILE_SUBCELL_PX, &fill(t));
                    }
                    Err(_) => rect(&mut out, x, y, TILE_SUBCELL_PX, TILE_SUBCELL_PX, WALL_FILL),
                }
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Per-cell value map of a state-indexed slice, for rendering task values
/// or one goal slice.
pub fn cell_values(env: &GridEnv, values: impl Fn(crate::State) -> f64) -> BTreeMap<Cell, f64> {
    (0..env.state_count())
        .map(|s| (env.cell_of(s), values(s)))
        .collect()
}

/// Policy glyph overlay for a per-state policy.
pub fn policy_glyphs(env: &GridEnv, policy: &[Action]) -> BTreeMap<Cell, Glyph> {
    policy
        .iter()
        .enumerate()
        .map(|(s, &a)| (env.cell_of(s), Glyph::from_action(a)))
        .collect()
}
