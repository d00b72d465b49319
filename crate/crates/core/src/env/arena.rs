//! Synthetic navigation arena: an elongated grid with obstacles, eight
//! allocentric move directions and slip to the two adjacent directions.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionId, ChangeEvent, ChangeKind, Outcome, StateId, WorldModel};
use crate::error::{Error, Result};

/// Compass directions, clockwise from north. Action `i` moves along
/// `Direction::ALL[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    /// (column, row) offset; rows grow southwards.
    pub fn offset(self) -> (i64, i64) {
        match self {
            Direction::N => (0, -1),
            Direction::NE => (1, -1),
            Direction::E => (1, 0),
            Direction::SE => (1, 1),
            Direction::S => (0, 1),
            Direction::SW => (-1, 1),
            Direction::W => (-1, 0),
            Direction::NW => (-1, -1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaParams {
    /// Grid columns (the long side of the arena).
    pub width: usize,
    /// Grid rows.
    pub height: usize,
    /// Free cells kept after obstacle placement; `width * height - num_states`
    /// cells become obstacles.
    pub num_states: usize,
    /// Probability of drifting to one of the two directions adjacent to the
    /// intended one, split evenly.
    pub p_slip: f64,
    pub reset_ids: [StateId; 2],
    pub goal_id: StateId,
    /// Id given to the goal used after relocation.
    pub moved_goal_id: StateId,
    /// Step at which the goal moves to `moved_goal_id`; `None` keeps it fixed.
    pub switch_step: Option<u64>,
    pub max_attempts: usize,
}

impl Default for ArenaParams {
    fn default() -> Self {
        ArenaParams {
            width: 14,
            height: 4,
            num_states: 38,
            p_slip: 0.2,
            reset_ids: [0, 32],
            goal_id: 18,
            moved_goal_id: 34,
            switch_step: Some(1600),
            max_attempts: 10_000,
        }
    }
}

/// Geometry behind a generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaLayout {
    pub width: usize,
    pub height: usize,
    /// (column, row) of each state.
    pub cells: Vec<(usize, usize)>,
    /// Intended neighbour of each (state, action), `None` for a wall.
    pub neighbors: Vec<[Option<StateId>; 8]>,
}

impl ArenaLayout {
    pub fn neighbor(&self, s: StateId, a: ActionId) -> Option<StateId> {
        self.neighbors[s][a]
    }

    /// States with exactly one free neighbouring cell.
    pub fn dead_ends(&self) -> Vec<StateId> {
        (0..self.cells.len())
            .filter(|&s| self.neighbors[s].iter().flatten().count() == 1)
            .collect()
    }

    /// Every (state, action) pair whose intended move crosses between the two
    /// given states. Blocking these puts a wall between them.
    pub fn pairs_between(&self, a: StateId, b: StateId) -> Vec<(StateId, ActionId)> {
        let mut pairs = Vec::new();
        for (from, to) in [(a, b), (b, a)] {
            for act in 0..8 {
                if self.neighbors[from][act] == Some(to) {
                    pairs.push((from, act));
                }
            }
        }
        pairs
    }

    /// Obstacle event that walls off the last edge into `goal` on a shortest
    /// deterministic path from `start`, provided the goal stays reachable.
    pub fn detour_event(&self, at_step: u64, start: StateId, goal: StateId) -> Option<ChangeEvent> {
        let parents = self.bfs_parents(start, &[]);
        let before_goal = parents[goal]?;
        let blocked = self.pairs_between(before_goal, goal);
        let reroute = self.bfs_parents(start, &blocked);
        reroute[goal]?;
        Some(ChangeEvent {
            at_step,
            kind: ChangeKind::AddObstacles { blocked },
        })
    }

    fn bfs_parents(&self, start: StateId, blocked: &[(StateId, ActionId)]) -> Vec<Option<StateId>> {
        let n = self.cells.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for a in 0..8 {
                if blocked.contains(&(s, a)) {
                    continue;
                }
                if let Some(t) = self.neighbors[s][a] {
                    if !seen[t] {
                        seen[t] = true;
                        parent[t] = Some(s);
                        queue.push_back(t);
                    }
                }
            }
        }
        parent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedArena {
    pub world: WorldModel,
    pub layout: ArenaLayout,
}

fn check_params(p: &ArenaParams) -> Result<()> {
    let cells = p.width * p.height;
    if p.width == 0 || p.height == 0 {
        return Err(Error::Generation("grid extent must be non-zero".into()));
    }
    if p.num_states < 4 || p.num_states > cells {
        return Err(Error::Generation(format!(
            "cannot keep {} free cells in a {}x{} grid",
            p.num_states, p.width, p.height
        )));
    }
    if !(0.0..=1.0).contains(&p.p_slip) {
        return Err(Error::Generation(format!("p_slip {} outside [0, 1]", p.p_slip)));
    }
    let ids = [p.reset_ids[0], p.reset_ids[1], p.goal_id, p.moved_goal_id];
    for (i, id) in ids.iter().enumerate() {
        if *id >= p.num_states {
            return Err(Error::Generation(format!("state id {id} >= num_states")));
        }
        if ids[..i].contains(id) {
            return Err(Error::Generation(format!("state id {id} assigned twice")));
        }
    }
    Ok(())
}

/// Generates a connected arena, deterministic in `seed`.
///
/// Obstacles are dropped at random cells as long as the free area stays
/// connected under eight-way moves, until `num_states` cells remain. Layouts
/// without a dead-end are rejected and redrawn. The reset states sit at the two
/// ends of the long axis, the goal midway between them and the relocated goal
/// at the dead-end farthest from the original goal.
pub fn generate_arena(seed: u64, params: &ArenaParams) -> Result<GeneratedArena> {
    check_params(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..params.max_attempts {
        let free = carve(params, &mut rng);
        if let Some(arena) = assemble(params, &free) {
            return Ok(arena);
        }
    }
    Err(Error::Generation(format!(
        "no valid arena after {} attempts",
        params.max_attempts
    )))
}

fn carve(p: &ArenaParams, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let cells = p.width * p.height;
    let mut free = vec![true; cells];
    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(rng);
    let mut remaining = cells;
    for c in order {
        if remaining == p.num_states {
            break;
        }
        free[c] = false;
        if connected(p, &free, remaining - 1) {
            remaining -= 1;
        } else {
            free[c] = true;
        }
    }
    free
}

fn grid_neighbor(p: &ArenaParams, cell: usize, dir: Direction) -> Option<usize> {
    let (col, row) = ((cell % p.width) as i64, (cell / p.width) as i64);
    let (dc, dr) = dir.offset();
    let (c, r) = (col + dc, row + dr);
    if c < 0 || r < 0 || c >= p.width as i64 || r >= p.height as i64 {
        return None;
    }
    Some(r as usize * p.width + c as usize)
}

fn connected(p: &ArenaParams, free: &[bool], expected: usize) -> bool {
    let Some(start) = free.iter().position(|&f| f) else {
        return false;
    };
    let mut seen = vec![false; free.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(c) = queue.pop_front() {
        for dir in Direction::ALL {
            if let Some(n) = grid_neighbor(p, c, dir) {
                if free[n] && !seen[n] {
                    seen[n] = true;
                    count += 1;
                    queue.push_back(n);
                }
            }
        }
    }
    count == expected
}

fn cell_distances(p: &ArenaParams, free: &[bool], from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; free.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        for dir in Direction::ALL {
            if let Some(n) = grid_neighbor(p, c, dir) {
                if free[n] && dist[n] == usize::MAX {
                    dist[n] = dist[c] + 1;
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}

fn assemble(p: &ArenaParams, free: &[bool]) -> Option<GeneratedArena> {
    let cells: Vec<usize> = (0..free.len()).filter(|&c| free[c]).collect();
    let degree = |c: usize| {
        Direction::ALL
            .iter()
            .filter_map(|d| grid_neighbor(p, c, *d))
            .filter(|n| free[*n])
            .count()
    };
    let dead_ends: Vec<usize> = cells.iter().copied().filter(|&c| degree(c) == 1).collect();
    if dead_ends.is_empty() {
        return None;
    }

    // column-major order: sort by column then row
    let mut by_column = cells.clone();
    by_column.sort_by_key(|&c| (c % p.width, c / p.width));
    let left = by_column[0];
    let right = *by_column.last()?;

    let d_left = cell_distances(p, free, left);
    let d_right = cell_distances(p, free, right);
    let goal = by_column
        .iter()
        .copied()
        .filter(|&c| c != left && c != right)
        .min_by_key(|&c| {
            let balance = d_left[c].abs_diff(d_right[c]);
            (balance, usize::MAX - (d_left[c] + d_right[c]))
        })?;
    let d_goal = cell_distances(p, free, goal);
    let moved = dead_ends
        .iter()
        .copied()
        .filter(|&c| c != left && c != right && c != goal)
        .max_by_key(|&c| (d_goal[c], usize::MAX - c))?;

    let mut id_of = vec![usize::MAX; free.len()];
    id_of[left] = p.reset_ids[0];
    id_of[right] = p.reset_ids[1];
    id_of[goal] = p.goal_id;
    id_of[moved] = p.moved_goal_id;
    let reserved = [p.reset_ids[0], p.reset_ids[1], p.goal_id, p.moved_goal_id];
    let mut next_ids = (0..p.num_states).filter(|id| !reserved.contains(id));
    for &c in &by_column {
        if id_of[c] == usize::MAX {
            id_of[c] = next_ids.next()?;
        }
    }

    let n = p.num_states;
    let mut coords = vec![(0, 0); n];
    let mut neighbors = vec![[None; 8]; n];
    for &c in &cells {
        let s = id_of[c];
        coords[s] = (c % p.width, c / p.width);
        for (a, dir) in Direction::ALL.iter().enumerate() {
            neighbors[s][a] = grid_neighbor(p, c, *dir).filter(|t| free[*t]).map(|t| id_of[t]);
        }
    }

    let mut transitions = Vec::with_capacity(n * 8);
    for s in 0..n {
        for a in 0..8 {
            let mut outs: Vec<Outcome> = Vec::new();
            let mut add = |next: StateId, prob: f64| {
                if prob <= 0.0 {
                    return;
                }
                match outs.iter_mut().find(|o| o.next == next) {
                    Some(o) => o.prob += prob,
                    None => outs.push(Outcome { next, prob }),
                }
            };
            let land = |dir: usize| neighbors[s][dir].unwrap_or(s);
            add(land(a), 1.0 - p.p_slip);
            add(land((a + 1) % 8), p.p_slip / 2.0);
            add(land((a + 7) % 8), p.p_slip / 2.0);
            transitions.push(outs);
        }
    }

    let schedule = p
        .switch_step
        .map(|step| vec![ChangeEvent::reward_move(step, p.moved_goal_id)])
        .unwrap_or_default();
    let world = WorldModel::new(
        n,
        8,
        transitions,
        p.goal_id,
        p.reset_ids.to_vec(),
        schedule,
    )
    .ok()?;
    world.validate().ok()?;
    Some(GeneratedArena {
        world,
        layout: ArenaLayout {
            width: p.width,
            height: p.height,
            cells: coords,
            neighbors,
        },
    })
}
