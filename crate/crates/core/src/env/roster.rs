//! Builders for the environment roster.

use rand::Rng;

use crate::env::instance::{EnvInstance, EnvKind};
use crate::env::mdp::EnumeratedMdp;
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Grid moves, in action order.
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const WEST: usize = 2;
pub const EAST: usize = 3;

/// Corridor of `length` cells starting at the left end. Moving right out of
/// cell `length - 2` enters the terminal right end and pays 1. An optional
/// distractor pays a small amount for pushing left against the wall at
/// cell 0.
pub fn chain(length: usize, horizon: usize, distractor: Option<f64>) -> Result<EnvInstance> {
    if length < 2 {
        return Err(Error::invalid("chain needs at least 2 cells"));
    }
    let n = length;
    let mut transition = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2];
    for s in 0..n {
        let left = s.saturating_sub(1);
        let right = if s + 1 < n { s + 1 } else { s };
        transition[(s * 2 + LEFT) * n + left] = 1.0;
        transition[(s * 2 + RIGHT) * n + right] = 1.0;
    }
    reward[(n - 2) * 2 + RIGHT] = 1.0;
    if let Some(d) = distractor {
        reward[LEFT] = d;
    }
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    let mut terminal = vec![false; n];
    terminal[n - 1] = true;
    let mdp = EnumeratedMdp::new(n, 2, horizon, transition, reward, initial, terminal)?;
    Ok(EnvInstance::new(EnvKind::Chain, format!("chain{length}"), mdp))
}

/// Rectangular grid with blocked cells; moving into a wall or off the edge
/// leaves the agent in place.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    blocked: Vec<bool>,
}

impl Grid {
    pub fn new(width: usize, height: usize, walls: &[[usize; 2]]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        let mut blocked = vec![false; width * height];
        for &[r, c] in walls {
            if r >= height || c >= width {
                return Err(Error::invalid(format!("wall ({r}, {c}) lies outside the grid")));
            }
            blocked[r * width + c] = true;
        }
        Ok(Self { width, height, blocked })
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, [r, c]: [usize; 2]) -> Result<usize> {
        if r >= self.height || c >= self.width {
            return Err(Error::invalid(format!("cell ({r}, {c}) lies outside the grid")));
        }
        let idx = r * self.width + c;
        if self.blocked[idx] {
            return Err(Error::invalid(format!("cell ({r}, {c}) is a wall")));
        }
        Ok(idx)
    }

    pub fn coords(&self, cell: usize) -> [usize; 2] {
        [cell / self.width, cell % self.width]
    }

    pub fn is_blocked(&self, cell: usize) -> bool {
        self.blocked[cell]
    }

    pub fn step(&self, cell: usize, action: usize) -> usize {
        let [r, c] = self.coords(cell);
        let (nr, nc) = match action {
            UP if r > 0 => (r - 1, c),
            DOWN if r + 1 < self.height => (r + 1, c),
            WEST if c > 0 => (r, c - 1),
            EAST if c + 1 < self.width => (r, c + 1),
            _ => (r, c),
        };
        let next = nr * self.width + nc;
        if self.blocked[next] {
            cell
        } else {
            next
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyDoorLayout {
    pub grid: Grid,
    pub start: usize,
    pub key: usize,
    pub door: usize,
}

impl KeyDoorLayout {
    /// State index of a cell with or without the key.
    pub fn state(&self, cell: usize, has_key: bool) -> usize {
        cell * 2 + has_key as usize
    }

    pub fn decode(&self, state: usize) -> (usize, bool) {
        (state / 2, state % 2 == 1)
    }
}

/// Key-door gridworld. Entering the key cell picks up a key; entering the
/// door while holding it pays 1 and consumes the key. The key is always
/// available again at its cell, so a fixed-horizon episode can earn the
/// reward repeatedly. There are no terminal states.
pub fn key_door(
    width: usize,
    height: usize,
    horizon: usize,
    start: [usize; 2],
    key: [usize; 2],
    door: [usize; 2],
    walls: &[[usize; 2]],
) -> Result<(EnvInstance, KeyDoorLayout)> {
    let grid = Grid::new(width, height, walls)?;
    let layout = KeyDoorLayout {
        start: grid.cell(start)?,
        key: grid.cell(key)?,
        door: grid.cell(door)?,
        grid,
    };
    if layout.key == layout.door {
        return Err(Error::invalid("key and door must be different cells"));
    }
    let cells = layout.grid.n_cells();
    let ns = cells * 2;
    let na = 4;
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for cell in 0..cells {
        for has_key in [false, true] {
            let s = layout.state(cell, has_key);
            for a in 0..na {
                let next = if layout.grid.is_blocked(cell) {
                    cell
                } else {
                    layout.grid.step(cell, a)
                };
                let mut key_after = has_key || next == layout.key;
                if next == layout.door && next != cell && has_key {
                    reward[s * na + a] = 1.0;
                    key_after = false;
                }
                transition[(s * na + a) * ns + layout.state(next, key_after)] = 1.0;
            }
        }
    }
    let mut initial = vec![0.0; ns];
    initial[layout.state(layout.start, false)] = 1.0;
    let mdp = EnumeratedMdp::new(ns, na, horizon, transition, reward, initial, vec![false; ns])?;
    Ok((EnvInstance::new(EnvKind::KeyDoorGrid, format!("key_door{width}x{height}"), mdp), layout))
}

/// Discretised maze; entering the goal pays 1 and ends the episode.
pub fn point_maze(
    width: usize,
    height: usize,
    horizon: usize,
    start: [usize; 2],
    goal: [usize; 2],
    walls: &[[usize; 2]],
) -> Result<EnvInstance> {
    let grid = Grid::new(width, height, walls)?;
    let start = grid.cell(start)?;
    let goal = grid.cell(goal)?;
    if start == goal {
        return Err(Error::invalid("start and goal must differ"));
    }
    let ns = grid.n_cells();
    let na = 4;
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let next = if grid.is_blocked(s) || s == goal {
                s
            } else {
                grid.step(s, a)
            };
            if next == goal && s != goal {
                reward[s * na + a] = 1.0;
            }
            transition[(s * na + a) * ns + next] = 1.0;
        }
    }
    let mut initial = vec![0.0; ns];
    initial[start] = 1.0;
    let mut terminal = vec![false; ns];
    terminal[goal] = true;
    let mdp = EnumeratedMdp::new(ns, na, horizon, transition, reward, initial, terminal)?;
    Ok(EnvInstance::new(EnvKind::PointMazeGrid, format!("point_maze{width}x{height}"), mdp))
}

/// 5x5 U-shaped maze: a wall runs up the middle column from the bottom,
/// start and goal sit on either side of it.
pub fn u_maze(horizon: usize) -> Result<EnvInstance> {
    point_maze(5, 5, horizon, [4, 0], [4, 4], &[[2, 2], [3, 2], [4, 2]])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomMdpOptions {
    /// Probability that a transition entry is forced to zero (each row keeps at least one).
    pub sparsity: f64,
    /// Number of terminal states (taken from the highest indices).
    pub n_terminal: usize,
    pub reward_scale: f64,
}

impl Default for RandomMdpOptions {
    fn default() -> Self {
        Self {
            sparsity: 0.0,
            n_terminal: 0,
            reward_scale: 1.0,
        }
    }
}

fn random_distribution<R: Rng + ?Sized>(n: usize, sparsity: f64, allowed: &[bool], rng: &mut R) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|i| {
            if !allowed[i] || rng.gen::<f64>() < sparsity {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    if p.iter().all(|&x| x == 0.0) {
        let candidates: Vec<usize> = (0..n).filter(|&i| allowed[i]).collect();
        p[candidates[rng.gen_range(0..candidates.len())]] = 1.0;
    }
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// Random tables: transition rows and the initial distribution drawn
/// uniformly then normalised, rewards uniform in `[-scale, scale]`.
pub fn random_mdp<R: Rng + ?Sized>(
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    opts: RandomMdpOptions,
    rng: &mut R,
) -> Result<EnumeratedMdp> {
    if opts.n_terminal >= n_states {
        return Err(Error::invalid("at least one state must be non-terminal"));
    }
    let terminal: Vec<bool> = (0..n_states).map(|s| s >= n_states - opts.n_terminal).collect();
    let every = vec![true; n_states];
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(random_distribution(n_states, opts.sparsity, &every, rng));
    }
    let reward = (0..n_states * n_actions)
        .map(|_| rng.gen_range(-opts.reward_scale..=opts.reward_scale))
        .collect();
    let startable: Vec<bool> = terminal.iter().map(|t| !t).collect();
    let initial = random_distribution(n_states, opts.sparsity, &startable, rng);
    EnumeratedMdp::new(n_states, n_actions, horizon, transition, reward, initial, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::instance::EpisodicEnv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_moves_and_terminates() {
        let mut env = chain(5, 10, None).unwrap();
        assert_eq!(env.reset(3), 0);
        for k in 1..4 {
            let st = env.step(RIGHT).unwrap();
            assert_eq!(st.state, k);
            assert!(!st.done);
        }
        let last = env.step(RIGHT).unwrap();
        assert_eq!(last, crate::env::Step { state: 4, done: true });
        assert_eq!(env.finish_episode().unwrap(), 1.0);
        assert_eq!(env.oracle_mdp().optimal_return(), 1.0);
    }

    #[test]
    fn chain_horizon_done() {
        let mut env = chain(5, 3, None).unwrap();
        env.reset(0);
        assert!(!env.step(LEFT).unwrap().done);
        assert!(!env.step(LEFT).unwrap().done);
        assert!(env.step(LEFT).unwrap().done);
        assert_eq!(env.finish_episode().unwrap(), 0.0);
    }

    #[test]
    fn door_without_key_pays_nothing() {
        let (mut env, layout) = key_door(3, 1, 6, [0, 1], [0, 0], [0, 2], &[]).unwrap();
        let s0 = env.reset(0);
        assert_eq!(layout.decode(s0), (1, false));
        assert_eq!(layout.decode(env.step(EAST).unwrap().state), (2, false));
        env.step(WEST).unwrap();
        assert_eq!(layout.decode(env.step(WEST).unwrap().state), (0, true));
        env.step(EAST).unwrap();
        assert_eq!(layout.decode(env.step(EAST).unwrap().state), (2, false));
        env.step(UP).unwrap();
        assert_eq!(env.finish_episode().unwrap(), 1.0);
    }

    #[test]
    fn random_mdp_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let opts = RandomMdpOptions {
                sparsity: 0.4,
                n_terminal: 1,
                ..Default::default()
            };
            let mdp = random_mdp(4, 2, 3, opts, &mut rng).unwrap();
            assert!(mdp.is_terminal(3));
            assert_eq!(mdp.initial()[3], 0.0);
        }
    }

    #[test]
    fn u_maze_shortest_path() {
        let env = u_maze(20).unwrap();
        // Three moves up, four across, three down.
        assert_eq!(env.oracle_mdp().optimal_return(), 1.0);
        let short = u_maze(9).unwrap();
        assert_eq!(short.oracle_mdp().optimal_return(), 0.0);
        let exact = u_maze(10).unwrap();
        assert_eq!(exact.oracle_mdp().optimal_return(), 1.0);
    }
}
