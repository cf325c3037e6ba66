//! The labeled two-player grid game: both agents move simultaneously on a
//! W×H grid with slip noise; power bases, capture proximity and base
//! destruction generate the high-level events the reward machines consume.

use crate::machine::Label;
use rand::Rng;
use thiserror::Error;

/// Proposition vocabulary emitted by the labeling function, in bit order.
pub const GAME_PROPS: [&str; 5] =
    ["EgoAtHome", "AdvAtHome", "EgoMeetAdv", "EgoAtAdvHome", "AdvAtEgoHome"];

pub const P_EGO_AT_HOME: usize = 0;
pub const P_ADV_AT_HOME: usize = 1;
pub const P_EGO_MEET_ADV: usize = 2;
pub const P_EGO_AT_ADV_HOME: usize = 3;
pub const P_ADV_AT_EGO_HOME: usize = 4;

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct Cell {
    pub x: u8,
    pub y: u8,
}

impl Cell {
    pub fn new(x: u8, y: u8) -> Cell {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) as u32 + self.y.abs_diff(other.y) as u32
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const FOUR: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
    pub const FIVE: [Action; 5] =
        [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay];

    fn delta(self) -> (i16, i16) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }
}

#[derive(Error, Debug, PartialEq)]
pub enum GridError {
    #[error("map line {line}: {msg}")]
    Map { line: usize, msg: String },
    #[error("cell ({x}, {y}) out of bounds for a {width}x{height} grid")]
    OutOfBounds { x: u8, y: u8, width: u8, height: u8 },
    #[error("{0}")]
    Invalid(String),
}

/// Static description of the grid game. Immutable and shareable across
/// concurrent rollouts.
#[derive(Clone, Debug)]
pub struct GridConfig {
    pub width: u8,
    pub height: u8,
    pub ego_start: Cell,
    pub adv_starts: Vec<Cell>,
    pub ego_home: Cell,
    pub adv_home: Cell,
    /// Probability that an agent's intended action is replaced by a
    /// uniformly random different one (or any action at all when
    /// `slip_includes_intended` is set).
    pub slip_rate: f64,
    /// Agents capture each other when their Manhattan distance is strictly
    /// below this.
    pub capture_distance: f64,
    pub actions: Vec<Action>,
    pub slip_includes_intended: bool,
    /// Whether the adversary reaching the ego home cell destroys it, and
    /// symmetrically. A destroyed base stops emitting its owner's at-home
    /// event.
    pub ego_home_destructible: bool,
    pub adv_home_destructible: bool,
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        if self.width == 0 || self.height == 0 {
            return Err(GridError::Invalid("grid dimensions must be positive".into()));
        }
        let bounds = |c: Cell| {
            if c.x >= self.width || c.y >= self.height {
                Err(GridError::OutOfBounds {
                    x: c.x,
                    y: c.y,
                    width: self.width,
                    height: self.height,
                })
            } else {
                Ok(())
            }
        };
        bounds(self.ego_start)?;
        bounds(self.ego_home)?;
        bounds(self.adv_home)?;
        if self.adv_starts.is_empty() {
            return Err(GridError::Invalid("adversary start undefined".into()));
        }
        for &c in &self.adv_starts {
            bounds(c)?;
        }
        if !(0.0..=1.0).contains(&self.slip_rate) {
            return Err(GridError::Invalid("slip_rate must be in [0, 1]".into()));
        }
        if !(self.capture_distance > 0.0) {
            return Err(GridError::Invalid("capture_distance must be positive".into()));
        }
        if self.actions.is_empty() {
            return Err(GridError::Invalid("action set must be nonempty".into()));
        }
        Ok(())
    }

    fn clamp(&self, c: Cell, a: Action) -> Cell {
        let (dx, dy) = a.delta();
        let x = (c.x as i16 + dx).clamp(0, self.width as i16 - 1) as u8;
        let y = (c.y as i16 + dy).clamp(0, self.height as i16 - 1) as u8;
        Cell { x, y }
    }
}

/// Positions of both agents plus the base destruction flags. Passed by
/// value; each simulation run owns its random source.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct GridState {
    pub ego_pos: Cell,
    pub adv_pos: Cell,
    pub ego_home_destroyed: bool,
    pub adv_home_destroyed: bool,
}

/// Initial state: ego at its start, adversary at a uniformly sampled member
/// of its start set, bases intact.
pub fn reset(cfg: &GridConfig, rng: &mut (impl Rng + ?Sized)) -> GridState {
    let adv_pos = cfg.adv_starts[rng.random_range(0..cfg.adv_starts.len())];
    GridState {
        ego_pos: cfg.ego_start,
        adv_pos,
        ego_home_destroyed: false,
        adv_home_destroyed: false,
    }
}

fn executed_action(cfg: &GridConfig, intended: Action, rng: &mut (impl Rng + ?Sized)) -> Action {
    if cfg.slip_rate > 0.0 && rng.random::<f64>() < cfg.slip_rate {
        if cfg.slip_includes_intended {
            return cfg.actions[rng.random_range(0..cfg.actions.len())];
        }
        let others: Vec<Action> =
            cfg.actions.iter().copied().filter(|&a| a != intended).collect();
        if !others.is_empty() {
            return others[rng.random_range(0..others.len())];
        }
    }
    intended
}

/// One simultaneous move. Each agent independently executes its intended
/// action with probability `1 - slip_rate`; off-grid moves are clamped to
/// the current cell. Destruction flags latch when an agent enters the
/// opponent's (destructible) home cell.
pub fn step(
    cfg: &GridConfig,
    s: GridState,
    a_ego: Action,
    a_adv: Action,
    rng: &mut (impl Rng + ?Sized),
) -> GridState {
    let ego_exec = executed_action(cfg, a_ego, rng);
    let adv_exec = executed_action(cfg, a_adv, rng);
    let ego_pos = cfg.clamp(s.ego_pos, ego_exec);
    let adv_pos = cfg.clamp(s.adv_pos, adv_exec);
    GridState {
        ego_pos,
        adv_pos,
        ego_home_destroyed: s.ego_home_destroyed
            || (cfg.ego_home_destructible && adv_pos == cfg.ego_home),
        adv_home_destroyed: s.adv_home_destroyed
            || (cfg.adv_home_destructible && ego_pos == cfg.adv_home),
    }
}

/// The labeling function: the set of propositions true in the successor
/// state. At-home events are gated off once the base is destroyed; the
/// meeting event fires when the agents' Manhattan distance is strictly
/// below the capture distance.
pub fn label(
    cfg: &GridConfig,
    _s: GridState,
    _a_ego: Action,
    _a_adv: Action,
    s_next: GridState,
) -> Label {
    let mut l = Label::EMPTY;
    if s_next.ego_pos == cfg.ego_home && !s_next.ego_home_destroyed {
        l = l.with(P_EGO_AT_HOME);
    }
    if s_next.adv_pos == cfg.adv_home && !s_next.adv_home_destroyed {
        l = l.with(P_ADV_AT_HOME);
    }
    if (s_next.ego_pos.manhattan(s_next.adv_pos) as f64) < cfg.capture_distance {
        l = l.with(P_EGO_MEET_ADV);
    }
    if s_next.ego_pos == cfg.adv_home {
        l = l.with(P_EGO_AT_ADV_HOME);
    }
    if s_next.adv_pos == cfg.ego_home {
        l = l.with(P_ADV_AT_EGO_HOME);
    }
    l
}

/// Parse a map file: first line `W H`, then H rows of W space-separated
/// symbols. `.` empty, `E` ego start, `a` adversary start (repeatable),
/// `H` ego home, `h` adversary home. Row 0 is the top of the grid; x grows
/// rightward, y grows downward. Slip rate, capture distance and the action
/// set take their defaults and are adjusted by the caller.
pub fn parse_map(text: &str) -> Result<GridConfig, GridError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(GridError::Map { line: 1, msg: "empty map file".into() })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(GridError::Map { line: 1, msg: "expected header `W H`".into() });
    }
    let width: u8 = dims[0]
        .parse()
        .map_err(|_| GridError::Map { line: 1, msg: format!("bad width `{}`", dims[0]) })?;
    let height: u8 = dims[1]
        .parse()
        .map_err(|_| GridError::Map { line: 1, msg: format!("bad height `{}`", dims[1]) })?;
    if width == 0 || height == 0 {
        return Err(GridError::Map { line: 1, msg: "grid dimensions must be positive".into() });
    }

    let mut ego_start = None;
    let mut ego_home = None;
    let mut adv_home = None;
    let mut adv_starts = Vec::new();
    let mut y: u8 = 0;
    for (lineno, row) in lines {
        let lineno = lineno + 1;
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        if y >= height {
            return Err(GridError::Map { line: lineno, msg: "more rows than declared".into() });
        }
        let symbols: Vec<&str> = row.split_whitespace().collect();
        if symbols.len() != width as usize {
            return Err(GridError::Map {
                line: lineno,
                msg: format!("expected {} symbols, found {}", width, symbols.len()),
            });
        }
        for (x, sym) in symbols.iter().enumerate() {
            let cell = Cell::new(x as u8, y);
            match *sym {
                "." => {}
                "E" => {
                    if ego_start.replace(cell).is_some() {
                        return Err(GridError::Map {
                            line: lineno,
                            msg: format!("duplicate ego start at ({x}, {y})"),
                        });
                    }
                }
                "a" => adv_starts.push(cell),
                "H" => {
                    if ego_home.replace(cell).is_some() {
                        return Err(GridError::Map {
                            line: lineno,
                            msg: format!("duplicate ego home at ({x}, {y})"),
                        });
                    }
                }
                "h" => {
                    if adv_home.replace(cell).is_some() {
                        return Err(GridError::Map {
                            line: lineno,
                            msg: format!("duplicate adversary home at ({x}, {y})"),
                        });
                    }
                }
                other => {
                    return Err(GridError::Map {
                        line: lineno,
                        msg: format!("unknown symbol `{other}` at ({x}, {y})"),
                    });
                }
            }
        }
        y += 1;
    }
    if y != height {
        return Err(GridError::Map {
            line: 0,
            msg: format!("expected {height} rows, found {y}"),
        });
    }

    let cfg = GridConfig {
        width,
        height,
        ego_start: ego_start
            .ok_or(GridError::Invalid("ego start undefined".into()))?,
        adv_starts,
        ego_home: ego_home.ok_or(GridError::Invalid("ego home undefined".into()))?,
        adv_home: adv_home.ok_or(GridError::Invalid("adversary home undefined".into()))?,
        slip_rate: 0.005,
        capture_distance: 2.0,
        actions: Action::FOUR.to_vec(),
        slip_includes_intended: false,
        ego_home_destructible: false,
        adv_home_destructible: false,
    };
    cfg.validate()?;
    Ok(cfg)
}
