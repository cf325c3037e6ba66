//! Reward machines: deterministic Mealy machines whose inputs are sets of
//! propositions and whose outputs are scalar rewards.
//!
//! A machine is described in a small line-oriented text format:
//!
//! ```text
//! states: v0 v1 v2 vend
//! initial: v0
//! props: EgoAtHome AdvAtHome EgoMeetAdv
//! edge: v0 -> v1 on EgoAtHome & !AdvAtHome reward 0
//! edge: v1 -> vend on EgoMeetAdv & !AdvAtHome reward 1
//! ```
//!
//! Guards are boolean formulas over the declared propositions with
//! precedence `!` > `&` > `|` and parentheses. Label sets that match no
//! explicit edge take a self-loop with reward 0, so stepping is total.

use std::fmt;
use thiserror::Error;

/// Largest proposition set a machine may declare. Determinism is checked by
/// exhaustive enumeration of label sets, so this bounds that loop.
pub const MAX_PROPS: usize = 20;

/// A set of propositions that hold at one step, as a bitset over a machine's
/// (or the game's) proposition ordering.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default)]
pub struct Label(pub u32);

impl Label {
    pub const EMPTY: Label = Label(0);

    pub fn singleton(index: usize) -> Label {
        Label(1 << index)
    }

    pub fn with(self, index: usize) -> Label {
        Label(self.0 | (1 << index))
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Label({:#b})", self.0)
    }
}

/// Index of a machine state in its state list.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct RmState(pub u8);

/// Boolean formula over proposition indices.
#[derive(Clone, Debug, PartialEq)]
pub enum Guard {
    True,
    Atom(u8),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn eval(&self, label: Label) -> bool {
        match self {
            Guard::True => true,
            Guard::Atom(i) => label.contains(*i as usize),
            Guard::Not(g) => !g.eval(label),
            Guard::And(a, b) => a.eval(label) && b.eval(label),
            Guard::Or(a, b) => a.eval(label) || b.eval(label),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub guard: Guard,
    pub target: RmState,
    pub reward: f64,
}

#[derive(Error, Debug, PartialEq)]
pub enum RmError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: unknown proposition `{name}`")]
    UnknownProp { line: usize, name: String },
    #[error("line {line}: unknown state `{name}`")]
    UnknownState { line: usize, name: String },
    #[error("nondeterministic: state `{state}` has multiple edges enabled by label {{{label}}}")]
    Nondeterministic { state: String, label: String },
    #[error("machine declares {got} propositions, at most {MAX_PROPS} supported")]
    TooManyProps { got: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Witness returned by [`RewardMachine::check_deterministic`]: a state and a
/// label set enabling more than one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterminismWitness {
    pub state: RmState,
    pub label: Label,
}

/// A deterministic Mealy machine over proposition sets. Immutable after
/// construction; execution state (the current machine state) lives in the
/// caller.
#[derive(Clone, Debug)]
pub struct RewardMachine {
    state_names: Vec<String>,
    prop_names: Vec<String>,
    initial: RmState,
    edges: Vec<Vec<Edge>>, // indexed by source state
}

impl RewardMachine {
    /// Build a machine from parts, validating determinism and index ranges.
    pub fn new(
        state_names: Vec<String>,
        prop_names: Vec<String>,
        initial: RmState,
        edges_list: Vec<(RmState, Edge)>,
    ) -> Result<RewardMachine, RmError> {
        if state_names.is_empty() {
            return Err(RmError::Invalid("machine needs at least one state".into()));
        }
        if prop_names.len() > MAX_PROPS {
            return Err(RmError::TooManyProps { got: prop_names.len() });
        }
        for names in [&state_names, &prop_names] {
            for (i, a) in names.iter().enumerate() {
                if a.is_empty() {
                    return Err(RmError::Invalid("empty identifier".into()));
                }
                if names[..i].contains(a) {
                    return Err(RmError::Invalid(format!("duplicate identifier `{a}`")));
                }
            }
        }
        if initial.0 as usize >= state_names.len() {
            return Err(RmError::Invalid("initial state out of range".into()));
        }
        let mut edges = vec![Vec::new(); state_names.len()];
        for (src, edge) in edges_list {
            if src.0 as usize >= state_names.len() || edge.target.0 as usize >= state_names.len() {
                return Err(RmError::Invalid("edge endpoint out of range".into()));
            }
            if !edge.reward.is_finite() {
                return Err(RmError::Invalid("edge reward must be finite".into()));
            }
            edges[src.0 as usize].push(edge);
        }
        let rm = RewardMachine { state_names, prop_names, initial, edges };
        if let Err(w) = rm.check_deterministic() {
            return Err(RmError::Nondeterministic {
                state: rm.state_name(w.state).to_string(),
                label: rm.format_label(w.label),
            });
        }
        Ok(rm)
    }

    pub fn initial(&self) -> RmState {
        self.initial
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_name(&self, v: RmState) -> &str {
        &self.state_names[v.0 as usize]
    }

    pub fn state_index(&self, name: &str) -> Option<RmState> {
        self.state_names.iter().position(|s| s == name).map(|i| RmState(i as u8))
    }

    pub fn prop_names(&self) -> &[String] {
        &self.prop_names
    }

    pub fn prop_index(&self, name: &str) -> Option<usize> {
        self.prop_names.iter().position(|p| p == name)
    }

    /// Build a label from proposition names. Unknown names are an error.
    pub fn label_of(&self, props: &[&str]) -> Result<Label, RmError> {
        let mut l = Label::EMPTY;
        for p in props {
            let i = self
                .prop_index(p)
                .ok_or_else(|| RmError::UnknownProp { line: 0, name: p.to_string() })?;
            l = l.with(i);
        }
        Ok(l)
    }

    fn format_label(&self, label: Label) -> String {
        let mut parts = Vec::new();
        for (i, p) in self.prop_names.iter().enumerate() {
            if label.contains(i) {
                parts.push(p.as_str());
            }
        }
        parts.join(", ")
    }

    /// One transition: returns the successor state and the emitted reward.
    /// Label sets matching no edge take the default self-loop with reward 0,
    /// so this is total.
    pub fn step(&self, v: RmState, label: Label) -> (RmState, f64) {
        for edge in &self.edges[v.0 as usize] {
            if edge.guard.eval(label) {
                return (edge.target, edge.reward);
            }
        }
        (v, 0.0)
    }

    /// Fold [`RewardMachine::step`] over a label sequence starting from the
    /// initial state. The output has the same length as the input.
    pub fn run(&self, labels: &[Label]) -> Vec<f64> {
        let mut v = self.initial;
        labels
            .iter()
            .map(|&l| {
                let (next, r) = self.step(v, l);
                v = next;
                r
            })
            .collect()
    }

    /// Exhaustively check that no (state, label set) pair enables more than
    /// one edge. Returns the first violating pair found.
    pub fn check_deterministic(&self) -> Result<(), DeterminismWitness> {
        let n_labels: u32 = 1 << self.prop_names.len();
        for (s, edges) in self.edges.iter().enumerate() {
            for bits in 0..n_labels {
                let label = Label(bits);
                let mut hits = 0;
                for edge in edges {
                    if edge.guard.eval(label) {
                        hits += 1;
                        if hits > 1 {
                            return Err(DeterminismWitness { state: RmState(s as u8), label });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Render the machine back into the text format accepted by
    /// [`parse_rm`]. Guards are parenthesized as needed.
    pub fn print(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("states: {}\n", self.state_names.join(" ")));
        out.push_str(&format!("initial: {}\n", self.state_name(self.initial)));
        out.push_str(&format!("props: {}\n", self.prop_names.join(" ")));
        for (s, edges) in self.edges.iter().enumerate() {
            for e in edges {
                out.push_str(&format!(
                    "edge: {} -> {} on {} reward {}\n",
                    self.state_names[s],
                    self.state_name(e.target),
                    self.print_guard(&e.guard, 0),
                    e.reward,
                ));
            }
        }
        out
    }

    // prec: 0 = or-context, 1 = and-context, 2 = unary-context
    fn print_guard(&self, g: &Guard, prec: u8) -> String {
        match g {
            Guard::True => "true".into(),
            Guard::Atom(i) => self.prop_names[*i as usize].clone(),
            Guard::Not(inner) => format!("!{}", self.print_guard(inner, 2)),
            Guard::And(a, b) => {
                let s = format!("{} & {}", self.print_guard(a, 1), self.print_guard(b, 1));
                if prec > 1 { format!("({s})") } else { s }
            }
            Guard::Or(a, b) => {
                let s = format!("{} | {}", self.print_guard(a, 0), self.print_guard(b, 0));
                if prec > 0 { format!("({s})") } else { s }
            }
        }
    }
}

/// Parse the reward-machine text format. `#` starts a comment; blank lines
/// are ignored. Declarations must precede their uses (`states`, `initial`
/// and `props` before any `edge`).
pub fn parse_rm(text: &str) -> Result<RewardMachine, RmError> {
    let mut state_names: Option<Vec<String>> = None;
    let mut prop_names: Option<Vec<String>> = None;
    let mut initial: Option<String> = None;
    let mut initial_line = 0;
    let mut edges: Vec<(RmState, Edge)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(':').ok_or_else(|| RmError::Syntax {
            line: lineno,
            col: 1,
            msg: "expected `key: ...`".into(),
        })?;
        let rest = rest.trim();
        match key.trim() {
            "states" => {
                state_names = Some(rest.split_whitespace().map(String::from).collect());
            }
            "initial" => {
                if rest.split_whitespace().count() != 1 {
                    return Err(RmError::Syntax {
                        line: lineno,
                        col: 1,
                        msg: "initial takes exactly one state".into(),
                    });
                }
                initial = Some(rest.to_string());
                initial_line = lineno;
            }
            "props" => {
                prop_names = Some(rest.split_whitespace().map(String::from).collect());
            }
            "edge" => {
                let states = state_names.as_ref().ok_or_else(|| RmError::Syntax {
                    line: lineno,
                    col: 1,
                    msg: "edge before states declaration".into(),
                })?;
                let props = prop_names.as_ref().ok_or_else(|| RmError::Syntax {
                    line: lineno,
                    col: 1,
                    msg: "edge before props declaration".into(),
                })?;
                let (src, edge) = parse_edge(rest, lineno, states, props)?;
                edges.push((src, edge));
            }
            other => {
                return Err(RmError::Syntax {
                    line: lineno,
                    col: 1,
                    msg: format!("unknown directive `{other}`"),
                });
            }
        }
    }

    let state_names =
        state_names.ok_or_else(|| RmError::Invalid("missing states declaration".into()))?;
    let prop_names = prop_names.unwrap_or_default();
    let initial_name =
        initial.ok_or_else(|| RmError::Invalid("missing initial declaration".into()))?;
    let initial_idx = state_names
        .iter()
        .position(|s| *s == initial_name)
        .ok_or(RmError::UnknownState { line: initial_line, name: initial_name })?;

    RewardMachine::new(state_names, prop_names, RmState(initial_idx as u8), edges)
}

fn parse_edge(
    rest: &str,
    line: usize,
    states: &[String],
    props: &[String],
) -> Result<(RmState, Edge), RmError> {
    // Shape: SRC -> DST on GUARD reward R
    let syntax = |msg: &str| RmError::Syntax { line, col: 1, msg: msg.into() };
    let (src_part, after_arrow) =
        rest.split_once("->").ok_or_else(|| syntax("expected `->` in edge"))?;
    let (dst_part, after_on) =
        after_arrow.split_once(" on ").ok_or_else(|| syntax("expected ` on ` in edge"))?;
    let (guard_part, reward_part) = after_on
        .rsplit_once(" reward ")
        .ok_or_else(|| syntax("expected ` reward ` in edge"))?;

    let src_name = src_part.trim();
    let dst_name = dst_part.trim();
    let src = states
        .iter()
        .position(|s| s == src_name)
        .ok_or_else(|| RmError::UnknownState { line, name: src_name.to_string() })?;
    let dst = states
        .iter()
        .position(|s| s == dst_name)
        .ok_or_else(|| RmError::UnknownState { line, name: dst_name.to_string() })?;
    let reward: f64 = reward_part
        .trim()
        .parse()
        .map_err(|_| syntax(&format!("invalid reward `{}`", reward_part.trim())))?;

    let guard = parse_guard(guard_part.trim(), line, props)?;
    Ok((RmState(src as u8), Edge { guard, target: RmState(dst as u8), reward }))
}

struct GuardParser<'a> {
    tokens: Vec<(usize, GuardToken<'a>)>, // (column, token)
    pos: usize,
    line: usize,
    props: &'a [String],
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum GuardToken<'a> {
    Ident(&'a str),
    Bang,
    Amp,
    Pipe,
    LParen,
    RParen,
}

/// Parse a guard formula: `atom | "!" g | g "&" g | g "|" g | "(" g ")" |
/// "true"` with precedence `!` > `&` > `|`.
pub fn parse_guard(text: &str, line: usize, props: &[String]) -> Result<Guard, RmError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        let col = i + 1;
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '!' => {
                tokens.push((col, GuardToken::Bang));
                chars.next();
            }
            '&' => {
                tokens.push((col, GuardToken::Amp));
                chars.next();
            }
            '|' => {
                tokens.push((col, GuardToken::Pipe));
                chars.next();
            }
            '(' => {
                tokens.push((col, GuardToken::LParen));
                chars.next();
            }
            ')' => {
                tokens.push((col, GuardToken::RParen));
                chars.next();
            }
            c if c.is_alphanumeric() || c == '_' => {
                let start = i;
                let mut end = i;
                while let Some(&(j, c)) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        end = j + c.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push((start + 1, GuardToken::Ident(&text[start..end])));
            }
            other => {
                return Err(RmError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{other}` in guard"),
                });
            }
        }
    }
    let mut p = GuardParser { tokens, pos: 0, line, props };
    let g = p.parse_or()?;
    if p.pos != p.tokens.len() {
        let (col, _) = p.tokens[p.pos];
        return Err(RmError::Syntax { line, col, msg: "trailing tokens in guard".into() });
    }
    Ok(g)
}

impl<'a> GuardParser<'a> {
    fn peek(&self) -> Option<GuardToken<'a>> {
        self.tokens.get(self.pos).map(|&(_, t)| t)
    }

    fn bump(&mut self) -> Option<GuardToken<'a>> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: &str) -> RmError {
        let col = self.tokens.get(self.pos).map(|&(c, _)| c).unwrap_or(1);
        RmError::Syntax { line: self.line, col, msg: msg.into() }
    }

    fn parse_or(&mut self) -> Result<Guard, RmError> {
        let mut g = self.parse_and()?;
        while self.peek() == Some(GuardToken::Pipe) {
            self.bump();
            let rhs = self.parse_and()?;
            g = Guard::Or(Box::new(g), Box::new(rhs));
        }
        Ok(g)
    }

    fn parse_and(&mut self) -> Result<Guard, RmError> {
        let mut g = self.parse_unary()?;
        while self.peek() == Some(GuardToken::Amp) {
            self.bump();
            let rhs = self.parse_unary()?;
            g = Guard::And(Box::new(g), Box::new(rhs));
        }
        Ok(g)
    }

    fn parse_unary(&mut self) -> Result<Guard, RmError> {
        match self.bump() {
            Some(GuardToken::Bang) => Ok(Guard::Not(Box::new(self.parse_unary()?))),
            Some(GuardToken::LParen) => {
                let g = self.parse_or()?;
                if self.bump() != Some(GuardToken::RParen) {
                    return Err(self.err("expected `)`"));
                }
                Ok(g)
            }
            Some(GuardToken::Ident("true")) => Ok(Guard::True),
            Some(GuardToken::Ident(name)) => {
                let i = self
                    .props
                    .iter()
                    .position(|p| p == name)
                    .ok_or(RmError::UnknownProp { line: self.line, name: name.to_string() })?;
                Ok(Guard::Atom(i as u8))
            }
            _ => Err(self.err("expected atom, `!`, `(` or `true`")),
        }
    }
}
