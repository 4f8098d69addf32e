//! Path patterns and their query automata.
//!
//! A pattern constrains the labels of the *interior* nodes of a path. The
//! query automaton is an ε-free position (Glushkov) automaton whose interior
//! states each carry one label of the pattern; the start and final states
//! stand for the query endpoints and are matched by node identity.
//!
//! Pattern syntax:
//!
//! ```text
//! expr   := concat ('|' concat)*
//! concat := repeat+
//! repeat := atom '*'?
//! atom   := LABEL | '_' | '(' expr ')' | '()'
//! ```

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::Label;

pub type StateId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RegexAst {
    Epsilon,
    Atom(Label),
    Wildcard,
    Concat(Box<RegexAst>, Box<RegexAst>),
    Union(Box<RegexAst>, Box<RegexAst>),
    Star(Box<RegexAst>),
}

impl RegexAst {
    pub fn atom(label: &str) -> Self {
        RegexAst::Atom(Label::new(label))
    }

    pub fn concat(a: RegexAst, b: RegexAst) -> Self {
        RegexAst::Concat(Box::new(a), Box::new(b))
    }

    pub fn union(a: RegexAst, b: RegexAst) -> Self {
        RegexAst::Union(Box::new(a), Box::new(b))
    }

    pub fn star(a: RegexAst) -> Self {
        RegexAst::Star(Box::new(a))
    }

    /// Number of constructors in the tree.
    pub fn size(&self) -> usize {
        match self {
            RegexAst::Epsilon | RegexAst::Atom(_) | RegexAst::Wildcard => 1,
            RegexAst::Star(a) => 1 + a.size(),
            RegexAst::Concat(a, b) | RegexAst::Union(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Number of atom and wildcard occurrences.
    pub fn positions(&self) -> usize {
        match self {
            RegexAst::Epsilon => 0,
            RegexAst::Atom(_) | RegexAst::Wildcard => 1,
            RegexAst::Star(a) => a.positions(),
            RegexAst::Concat(a, b) | RegexAst::Union(a, b) => a.positions() + b.positions(),
        }
    }
}

/// Prints a pattern that [`parse_regex`] maps back to the same tree.
impl fmt::Display for RegexAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegexAst::Epsilon => f.write_str("()"),
            RegexAst::Atom(l) => f.write_str(l.as_str()),
            RegexAst::Wildcard => f.write_str("_"),
            RegexAst::Star(a) => match **a {
                RegexAst::Atom(_) | RegexAst::Wildcard | RegexAst::Epsilon => write!(f, "{a}*"),
                _ => write!(f, "({a})*"),
            },
            RegexAst::Concat(a, b) => {
                let wrap_left = matches!(**a, RegexAst::Union(..));
                let wrap_right = matches!(**b, RegexAst::Union(..) | RegexAst::Concat(..));
                write_wrapped(f, a, wrap_left)?;
                f.write_str(" ")?;
                write_wrapped(f, b, wrap_right)
            }
            RegexAst::Union(a, b) => {
                write!(f, "{a} | ")?;
                write_wrapped(f, b, matches!(**b, RegexAst::Union(..)))
            }
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, ast: &RegexAst, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({ast})")
    } else {
        write!(f, "{ast}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Token {
    Label(String),
    Wildcard,
    Open,
    Close,
    Bar,
    Star,
}

fn tokenize(text: &str) -> Vec<(usize, Token)> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(at, c)) = chars.peek() {
        let single = match c {
            '(' => Some(Token::Open),
            ')' => Some(Token::Close),
            '|' => Some(Token::Bar),
            '*' => Some(Token::Star),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((at, tok));
            chars.next();
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut word = String::new();
        while let Some(&(_, c)) = chars.peek() {
            if c.is_whitespace() || "()|*".contains(c) {
                break;
            }
            word.push(c);
            chars.next();
        }
        out.push((at, if word == "_" { Token::Wildcard } else { Token::Label(word) }));
    }
    out
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Pattern { offset: self.offset(), message: message.into() })
    }

    fn expr(&mut self) -> Result<RegexAst> {
        let mut ast = self.concat()?;
        while self.peek() == Some(&Token::Bar) {
            self.pos += 1;
            let rhs = self.concat()?;
            ast = RegexAst::union(ast, rhs);
        }
        Ok(ast)
    }

    fn concat(&mut self) -> Result<RegexAst> {
        match self.peek() {
            None | Some(Token::Bar) | Some(Token::Close) => return self.fail("empty alternation branch"),
            _ => {}
        }
        let mut ast = self.repeat()?;
        while matches!(self.peek(), Some(Token::Label(_) | Token::Wildcard | Token::Open)) {
            let rhs = self.repeat()?;
            ast = RegexAst::concat(ast, rhs);
        }
        Ok(ast)
    }

    fn repeat(&mut self) -> Result<RegexAst> {
        let atom = self.atom()?;
        if self.peek() == Some(&Token::Star) {
            self.pos += 1;
            return Ok(RegexAst::star(atom));
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<RegexAst> {
        match self.peek().cloned() {
            Some(Token::Label(l)) => {
                self.pos += 1;
                Ok(RegexAst::atom(&l))
            }
            Some(Token::Wildcard) => {
                self.pos += 1;
                Ok(RegexAst::Wildcard)
            }
            Some(Token::Open) => {
                self.pos += 1;
                if self.peek() == Some(&Token::Close) {
                    self.pos += 1;
                    return Ok(RegexAst::Epsilon);
                }
                let inner = self.expr()?;
                if self.peek() != Some(&Token::Close) {
                    return self.fail("unbalanced parentheses: expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Token::Star) => self.fail("stray operator `*`"),
            Some(Token::Close) => self.fail("unbalanced parentheses: unexpected `)`"),
            Some(Token::Bar) => self.fail("stray operator `|`"),
            None => self.fail("unexpected end of pattern"),
        }
    }
}

/// Parses a pattern. Precedence: `*` binds tighter than juxtaposition, which
/// binds tighter than `|`. Both binary operators associate to the left.
pub fn parse_regex(text: &str) -> Result<RegexAst> {
    let mut p = Parser { tokens: tokenize(text), pos: 0, end: text.len() };
    let ast = p.expr()?;
    match p.peek() {
        None => Ok(ast),
        Some(Token::Close) => p.fail("unbalanced parentheses: unexpected `)`"),
        Some(Token::Star) => p.fail("stray operator `*`"),
        Some(_) => p.fail("unexpected token"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateLabel {
    /// `u_s`, matched by the query source.
    Start,
    /// `u_t`, matched by the query target.
    Final,
    /// Interior state matching any node label.
    Any,
    Atom(Label),
}

impl StateLabel {
    /// Whether an interior node with `label` can occupy this state. The
    /// endpoint states never match by label.
    pub fn admits(&self, label: &Label) -> bool {
        match self {
            StateLabel::Any => true,
            StateLabel::Atom(l) => l == label,
            StateLabel::Start | StateLabel::Final => false,
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Start => f.write_str("<start>"),
            StateLabel::Final => f.write_str("<final>"),
            StateLabel::Any => f.write_str("_"),
            StateLabel::Atom(l) => f.write_str(l.as_str()),
        }
    }
}

/// `Gq(R)`: state 0 is the start state, the last state is the final state,
/// and states in between are the pattern's positions in textual order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryAutomaton {
    labels: Vec<StateLabel>,
    transitions: BTreeSet<(StateId, StateId)>,
    succ: Vec<Vec<StateId>>,
}

impl QueryAutomaton {
    /// Rebuilds an automaton from its state labels and transitions, as
    /// shipped in request messages.
    pub fn from_parts(labels: Vec<StateLabel>, transitions: impl IntoIterator<Item = (StateId, StateId)>) -> Result<Self> {
        let n = labels.len();
        let well_formed = n >= 2
            && labels[0] == StateLabel::Start
            && labels[n - 1] == StateLabel::Final
            && labels[1..n - 1].iter().all(|l| !matches!(l, StateLabel::Start | StateLabel::Final));
        if !well_formed {
            return Err(Error::Wire("automaton must have one start and one final state".into()));
        }
        let transitions: BTreeSet<_> = transitions.into_iter().collect();
        let mut succ = vec![Vec::new(); n];
        for &(p, q) in &transitions {
            if p >= n || q >= n || q == 0 || p == n - 1 {
                return Err(Error::Wire(format!("invalid transition ({p}, {q})")));
            }
            succ[p].push(q);
        }
        Ok(QueryAutomaton { labels, transitions, succ })
    }

    pub fn start(&self) -> StateId {
        0
    }

    pub fn final_state(&self) -> StateId {
        self.labels.len() - 1
    }

    pub fn state_count(&self) -> usize {
        self.labels.len()
    }

    pub fn state_label(&self, u: StateId) -> &StateLabel {
        &self.labels[u]
    }

    pub fn state_labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn transitions(&self) -> &BTreeSet<(StateId, StateId)> {
        &self.transitions
    }

    pub fn successors(&self, u: StateId) -> &[StateId] {
        &self.succ[u]
    }

    pub fn has_transition(&self, p: StateId, q: StateId) -> bool {
        self.transitions.contains(&(p, q))
    }

    /// Whether the empty label sequence is accepted, i.e. a direct edge from
    /// source to target satisfies the pattern.
    pub fn accepts_empty(&self) -> bool {
        self.has_transition(self.start(), self.final_state())
    }

    /// Runs the automaton over a sequence of interior node labels.
    pub fn accepts<L: AsRef<str>>(&self, labels: &[L]) -> bool {
        let mut current = vec![false; self.state_count()];
        current[self.start()] = true;
        for label in labels {
            let label = Label::new(label.as_ref());
            let mut next = vec![false; self.state_count()];
            for p in (0..self.state_count()).filter(|&p| current[p]) {
                for &q in &self.succ[p] {
                    if self.labels[q].admits(&label) {
                        next[q] = true;
                    }
                }
            }
            current = next;
        }
        (0..self.state_count()).any(|p| current[p] && self.has_transition(p, self.final_state()))
    }
}

/// Glushkov construction: one interior state per position, `start → First`,
/// `p → Follow(p)`, `Last → final`, and `start → final` when the pattern
/// accepts the empty sequence.
pub fn build_query_automaton(ast: &RegexAst) -> QueryAutomaton {
    struct Glushkov {
        labels: Vec<StateLabel>,
        follow: Vec<BTreeSet<StateId>>,
    }

    struct Summary {
        nullable: bool,
        first: BTreeSet<StateId>,
        last: BTreeSet<StateId>,
    }

    impl Glushkov {
        fn position(&mut self, label: StateLabel) -> Summary {
            self.labels.push(label);
            self.follow.push(BTreeSet::new());
            let p = self.labels.len() - 1;
            Summary { nullable: false, first: [p].into(), last: [p].into() }
        }

        fn walk(&mut self, ast: &RegexAst) -> Summary {
            match ast {
                RegexAst::Epsilon => Summary { nullable: true, first: BTreeSet::new(), last: BTreeSet::new() },
                RegexAst::Atom(l) => self.position(StateLabel::Atom(l.clone())),
                RegexAst::Wildcard => self.position(StateLabel::Any),
                RegexAst::Union(a, b) => {
                    let a = self.walk(a);
                    let b = self.walk(b);
                    Summary {
                        nullable: a.nullable || b.nullable,
                        first: &a.first | &b.first,
                        last: &a.last | &b.last,
                    }
                }
                RegexAst::Concat(a, b) => {
                    let a = self.walk(a);
                    let b = self.walk(b);
                    for &p in &a.last {
                        self.follow[p].extend(b.first.iter().copied());
                    }
                    Summary {
                        nullable: a.nullable && b.nullable,
                        first: if a.nullable { &a.first | &b.first } else { a.first },
                        last: if b.nullable { &a.last | &b.last } else { b.last },
                    }
                }
                RegexAst::Star(a) => {
                    let a = self.walk(a);
                    for &p in &a.last {
                        self.follow[p].extend(a.first.iter().copied());
                    }
                    Summary { nullable: true, first: a.first, last: a.last }
                }
            }
        }
    }

    let mut g = Glushkov { labels: vec![StateLabel::Start], follow: vec![BTreeSet::new()] };
    let summary = g.walk(ast);
    let final_state = g.labels.len();
    let mut transitions = BTreeSet::new();
    for &q in &summary.first {
        transitions.insert((0, q));
    }
    for (p, follow) in g.follow.iter().enumerate() {
        for &q in follow {
            transitions.insert((p, q));
        }
    }
    for &p in &summary.last {
        transitions.insert((p, final_state));
    }
    if summary.nullable {
        transitions.insert((0, final_state));
    }
    let mut labels = g.labels;
    labels.push(StateLabel::Final);
    QueryAutomaton::from_parts(labels, transitions).expect("construction yields a well-formed automaton")
}

/// Automaton of `_*`, which accepts every path.
pub fn wildcard_star() -> QueryAutomaton {
    build_query_automaton(&RegexAst::star(RegexAst::Wildcard))
}
