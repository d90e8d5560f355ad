//! Formulas with de Bruijn levels: parsing, printing and the syntactic
//! closures used by the adequacy construction.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexSet;
use thiserror::Error;

/// Relation symbols with their arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    symbols: Vec<(String, usize)>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a signature, rejecting duplicate names.
    pub fn from_symbols<S: Into<String>>(
        symbols: impl IntoIterator<Item = (S, usize)>,
    ) -> Result<Self, SyntaxError> {
        let mut sig = Signature::new();
        for (name, arity) in symbols {
            sig.add(name, arity)?;
        }
        Ok(sig)
    }

    pub fn add(&mut self, name: impl Into<String>, arity: usize) -> Result<(), SyntaxError> {
        let name = name.into();
        if self.arity(&name).is_some() {
            return Err(SyntaxError::DuplicateSymbol(name));
        }
        self.symbols.push((name, arity));
        Ok(())
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.symbols
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| *a)
    }

    pub fn symbols(&self) -> &[(String, usize)] {
        &self.symbols
    }
}

/// Formula tree. Variables are de Bruijn levels: a quantifier inside an
/// `n`-ary formula binds level `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Bottom,
    Atom(String, Vec<usize>),
    Implies(Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Forall(Box<Node>),
    Exists(Box<Node>),
}

impl Node {
    pub fn atom(rel: impl Into<String>, args: impl Into<Vec<usize>>) -> Node {
        Node::Atom(rel.into(), args.into())
    }

    /// `¬φ`, represented as `φ → ⊥`.
    pub fn not(phi: Node) -> Node {
        Node::Implies(Box::new(phi), Box::new(Node::Bottom))
    }

    pub fn implies(a: Node, b: Node) -> Node {
        Node::Implies(Box::new(a), Box::new(b))
    }

    pub fn and(a: Node, b: Node) -> Node {
        Node::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Node, b: Node) -> Node {
        Node::Or(Box::new(a), Box::new(b))
    }

    /// `(a → b) ∧ (b → a)`.
    pub fn iff(a: Node, b: Node) -> Node {
        Node::and(Node::implies(a.clone(), b.clone()), Node::implies(b, a))
    }

    pub fn forall(body: Node) -> Node {
        Node::Forall(Box::new(body))
    }

    pub fn exists(body: Node) -> Node {
        Node::Exists(Box::new(body))
    }

    /// Checks that every level is bound or free below `arity`.
    pub fn well_formed(&self, arity: usize) -> bool {
        match self {
            Node::Bottom => true,
            Node::Atom(_, args) => args.iter().all(|&v| v < arity),
            Node::Implies(a, b) | Node::And(a, b) | Node::Or(a, b) => {
                a.well_formed(arity) && b.well_formed(arity)
            }
            Node::Forall(b) | Node::Exists(b) => b.well_formed(arity + 1),
        }
    }

    /// Connective and quantifier nesting depth; atoms and `⊥` have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Node::Bottom | Node::Atom(..) => 0,
            Node::Implies(a, b) | Node::And(a, b) | Node::Or(a, b) => 1 + a.depth().max(b.depth()),
            Node::Forall(b) | Node::Exists(b) => 1 + b.depth(),
        }
    }

    pub fn has_forall(&self) -> bool {
        match self {
            Node::Bottom | Node::Atom(..) => false,
            Node::Implies(a, b) | Node::And(a, b) | Node::Or(a, b) => a.has_forall() || b.has_forall(),
            Node::Forall(_) => true,
            Node::Exists(b) => b.has_forall(),
        }
    }

    pub fn is_quantifier(&self) -> bool {
        matches!(self, Node::Forall(_) | Node::Exists(_))
    }

    /// Truth value forced by propositional structure alone, if any.
    /// Quantifiers are treated over a non-empty domain.
    pub fn forced(&self) -> Option<bool> {
        match self {
            Node::Bottom => Some(false),
            Node::Atom(..) => None,
            Node::Implies(a, b) => match (a.forced(), b.forced()) {
                (Some(false), _) | (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            },
            Node::And(a, b) => match (a.forced(), b.forced()) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Node::Or(a, b) => match (a.forced(), b.forced()) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
            Node::Forall(b) | Node::Exists(b) => b.forced(),
        }
    }
}

/// A node together with its number of free variables `x0 … x(n-1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Formula {
    pub arity: usize,
    pub node: Node,
}

impl Formula {
    pub fn new(arity: usize, node: Node) -> Result<Self, SyntaxError> {
        if !node.well_formed(arity) {
            return Err(SyntaxError::IllFormed(pretty_node(&node, arity)));
        }
        Ok(Formula { arity, node })
    }

    pub fn bottom(arity: usize) -> Self {
        Formula {
            arity,
            node: Node::Bottom,
        }
    }

    /// The body of a top-level quantifier, one level wider.
    pub fn quantifier_body(&self) -> Option<Formula> {
        match &self.node {
            Node::Forall(b) | Node::Exists(b) => Some(Formula {
                arity: self.arity + 1,
                node: (**b).clone(),
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

/// Ordered set of formulas, deduplicated by structural equality.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FormulaSet {
    items: IndexSet<Formula>,
}

impl FormulaSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, phi: Formula) -> bool {
        self.items.insert(phi)
    }

    pub fn contains(&self, phi: &Formula) -> bool {
        self.items.contains(phi)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Formula> {
        self.items.iter()
    }

    /// Set equality, ignoring order.
    pub fn same_members(&self, other: &FormulaSet) -> bool {
        self.len() == other.len() && self.iter().all(|f| other.contains(f))
    }
}

impl FromIterator<Formula> for FormulaSet {
    fn from_iter<I: IntoIterator<Item = Formula>>(iter: I) -> Self {
        FormulaSet {
            items: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a FormulaSet {
    type Item = &'a Formula;
    type IntoIter = indexmap::set::Iter<'a, Formula>;
    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("{pos}: {msg}")]
    Grammar { pos: usize, msg: String },
    #[error("undeclared relation symbol `{0}`")]
    Undeclared(String),
    #[error("relation `{name}` has arity {expected}, used with {found} arguments")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("free variable `{name}` cannot take level {level} in a formula of arity {arity}")]
    LevelConflict {
        name: String,
        level: usize,
        arity: usize,
    },
    #[error("duplicate relation symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("ill-formed formula `{0}`")]
    IllFormed(String),
}

/// Symbols written between their two arguments.
pub const INFIX_RELATIONS: [&str; 3] = ["<=", "=", "in"];

fn is_infix(name: &str) -> bool {
    INFIX_RELATIONS.contains(&name)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Arrow,
    Amp,
    Bar,
    Infix(String),
    False,
    Forall,
    Exists,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            '&' => {
                i += 1;
                Tok::Amp
            }
            '|' => {
                i += 1;
                Tok::Bar
            }
            '=' => {
                i += 1;
                Tok::Infix("=".into())
            }
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 2;
                Tok::Arrow
            }
            '<' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                Tok::Infix("<=".into())
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
                {
                    i += 1;
                }
                match &text[start..i] {
                    "false" => Tok::False,
                    "forall" => Tok::Forall,
                    "exists" => Tok::Exists,
                    "in" => Tok::Infix("in".into()),
                    w => Tok::Ident(w.to_string()),
                }
            }
            other => {
                return Err(SyntaxError::Grammar {
                    pos: start,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((start, tok));
    }
    Ok(out)
}

/// Parse tree with named variables, before level assignment.
#[derive(Debug)]
enum Named {
    False,
    Atom(String, Vec<String>),
    Implies(Box<Named>, Box<Named>),
    And(Box<Named>, Box<Named>),
    Or(Box<Named>, Box<Named>),
    Forall(String, Box<Named>),
    Exists(String, Box<Named>),
}

struct Parser<'s> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
    sig: &'s Signature,
}

impl<'s> Parser<'s> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError::Grammar {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a variable"),
        }
    }

    fn formula(&mut self) -> Result<Named, SyntaxError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            let rhs = self.formula()?;
            return Ok(Named::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Named, SyntaxError> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            let rhs = self.conjunction()?;
            lhs = Named::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Named, SyntaxError> {
        let mut lhs = self.primary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let rhs = self.primary()?;
            lhs = Named::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Named, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Named::False)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Forall) | Some(Tok::Exists) => {
                let universal = self.peek() == Some(&Tok::Forall);
                self.pos += 1;
                let var = self.ident()?;
                let body = Box::new(self.formula()?);
                Ok(if universal {
                    Named::Forall(var, body)
                } else {
                    Named::Exists(var, body)
                })
            }
            Some(Tok::Ident(name)) => {
                let at = self.offset();
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        args.push(self.ident()?);
                        while self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            args.push(self.ident()?);
                        }
                    }
                    self.expect(Tok::RParen, "`)` or `,`")?;
                    self.check_symbol(&name, args.len(), at)?;
                    return Ok(Named::Atom(name, args));
                }
                match self.peek().cloned() {
                    Some(Tok::Infix(op)) => {
                        self.pos += 1;
                        let rhs = self.ident()?;
                        self.check_symbol(&op, 2, at)?;
                        Ok(Named::Atom(op, vec![name, rhs]))
                    }
                    _ if self.sig.arity(&name) == Some(0) => Ok(Named::Atom(name, Vec::new())),
                    _ => self.err("expected `(` or an infix relation after identifier"),
                }
            }
            Some(_) => self.err("expected a formula"),
            None => self.err("unexpected end of input"),
        }
    }

    fn check_symbol(&self, name: &str, found: usize, _at: usize) -> Result<(), SyntaxError> {
        match self.sig.arity(name) {
            None => Err(SyntaxError::Undeclared(name.to_string())),
            Some(expected) if expected != found => Err(SyntaxError::ArityMismatch {
                name: name.to_string(),
                expected,
                found,
            }),
            Some(_) => Ok(()),
        }
    }
}

fn pinned_level(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn collect_free<'a>(t: &'a Named, bound: &mut Vec<&'a str>, free: &mut Vec<&'a str>) {
    match t {
        Named::False => {}
        Named::Atom(_, args) => {
            for a in args {
                if !bound.contains(&a.as_str()) && !free.contains(&a.as_str()) {
                    free.push(a);
                }
            }
        }
        Named::Implies(a, b) | Named::And(a, b) | Named::Or(a, b) => {
            collect_free(a, bound, free);
            collect_free(b, bound, free);
        }
        Named::Forall(v, b) | Named::Exists(v, b) => {
            bound.push(v);
            collect_free(b, bound, free);
            bound.pop();
        }
    }
}

fn to_levels(t: &Named, scope: &mut Vec<(String, usize)>, depth: usize) -> Node {
    let lookup = |scope: &Vec<(String, usize)>, v: &str| {
        scope
            .iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, l)| *l)
            .expect("free variables are assigned before conversion")
    };
    match t {
        Named::False => Node::Bottom,
        Named::Atom(r, args) => Node::Atom(r.clone(), args.iter().map(|a| lookup(scope, a)).collect()),
        Named::Implies(a, b) => Node::implies(to_levels(a, scope, depth), to_levels(b, scope, depth)),
        Named::And(a, b) => Node::and(to_levels(a, scope, depth), to_levels(b, scope, depth)),
        Named::Or(a, b) => Node::or(to_levels(a, scope, depth), to_levels(b, scope, depth)),
        Named::Forall(v, b) | Named::Exists(v, b) => {
            scope.push((v.clone(), depth));
            let body = to_levels(b, scope, depth + 1);
            scope.pop();
            if matches!(t, Named::Forall(..)) {
                Node::forall(body)
            } else {
                Node::exists(body)
            }
        }
    }
}

/// Parses a formula whose arity is determined by its free variables.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, SyntaxError> {
    parse_impl(text, sig, None)
}

/// Parses a formula at a fixed arity; free variables beyond it are errors.
pub fn parse_formula_at(text: &str, sig: &Signature, arity: usize) -> Result<Formula, SyntaxError> {
    parse_impl(text, sig, Some(arity))
}

/// Free variables named `xk` take level `k`. Other free names take the
/// lowest unused levels in order of first occurrence. Bound variables
/// take the next level at their binder, whatever their name.
fn parse_impl(text: &str, sig: &Signature, arity: Option<usize>) -> Result<Formula, SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: text.len(),
        sig,
    };
    let tree = p.formula()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }

    let mut free = Vec::new();
    collect_free(&tree, &mut Vec::new(), &mut free);
    let mut levels: HashMap<&str, usize> = HashMap::new();
    for v in &free {
        if let Some(k) = pinned_level(v) {
            levels.insert(v, k);
        }
    }
    let mut next = 0;
    for v in &free {
        if levels.contains_key(v) {
            continue;
        }
        while levels.values().any(|&l| l == next) {
            next += 1;
        }
        levels.insert(v, next);
    }
    let span = levels.values().map(|l| l + 1).max().unwrap_or(0);
    let n = match arity {
        Some(n) => {
            for (v, &l) in &levels {
                if l >= n {
                    return Err(SyntaxError::LevelConflict {
                        name: v.to_string(),
                        level: l,
                        arity: n,
                    });
                }
            }
            n
        }
        None => span,
    };
    let mut scope: Vec<(String, usize)> = free.iter().map(|v| (v.to_string(), levels[v])).collect();
    let node = to_levels(&tree, &mut scope, n);
    Formula::new(n, node)
}

const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_ATOM: u8 = 4;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Implies(..) => PREC_IMPLIES,
        Node::Or(..) => PREC_OR,
        Node::And(..) => PREC_AND,
        Node::Forall(_) | Node::Exists(_) => 0,
        _ => PREC_ATOM,
    }
}

fn write_operand(out: &mut String, node: &Node, arity: usize, parens: bool) {
    if parens {
        out.push('(');
        write_node(out, node, arity);
        out.push(')');
    } else {
        write_node(out, node, arity);
    }
}

fn write_node(out: &mut String, node: &Node, arity: usize) {
    match node {
        Node::Bottom => out.push_str("false"),
        Node::Atom(r, args) => {
            if is_infix(r) && args.len() == 2 {
                out.push_str(&format!("x{} {} x{}", args[0], r, args[1]));
            } else {
                let list: Vec<String> = args.iter().map(|a| format!("x{a}")).collect();
                out.push_str(&format!("{}({})", r, list.join(", ")));
            }
        }
        Node::Implies(a, b) => {
            write_operand(out, a, arity, prec(a) <= PREC_IMPLIES);
            out.push_str(" -> ");
            write_operand(out, b, arity, prec(b) < PREC_IMPLIES);
        }
        Node::Or(a, b) | Node::And(a, b) => {
            let (p, sym) = if matches!(node, Node::Or(..)) {
                (PREC_OR, " | ")
            } else {
                (PREC_AND, " & ")
            };
            write_operand(out, a, arity, prec(a) < p);
            out.push_str(sym);
            write_operand(out, b, arity, prec(b) <= p);
        }
        Node::Forall(b) | Node::Exists(b) => {
            let q = if matches!(node, Node::Forall(_)) {
                "forall"
            } else {
                "exists"
            };
            out.push_str(&format!("{q} x{arity} "));
            let bare = match &**b {
                Node::Bottom | Node::Forall(_) | Node::Exists(_) => true,
                Node::Atom(r, args) => !(is_infix(r) && args.len() == 2),
                _ => false,
            };
            write_operand(out, b, arity + 1, !bare);
        }
    }
}

/// Prints a node in the surface syntax, given the arity of its context.
pub fn pretty_node(node: &Node, arity: usize) -> String {
    let mut s = String::new();
    write_node(&mut s, node, arity);
    s
}

/// Prints a formula; `parse_formula_at(pretty(φ), sig, φ.arity)` returns `φ`.
pub fn pretty(phi: &Formula) -> String {
    pretty_node(&phi.node, phi.arity)
}

/// All subformulas, each at the arity of the position where it occurs.
pub fn subformulas(phi: &Formula) -> FormulaSet {
    let mut out = FormulaSet::new();
    collect_subformulas(&phi.node, phi.arity, &mut out);
    out
}

fn collect_subformulas(node: &Node, arity: usize, out: &mut FormulaSet) {
    out.insert(Formula {
        arity,
        node: node.clone(),
    });
    match node {
        Node::Bottom | Node::Atom(..) => {}
        Node::Implies(a, b) | Node::And(a, b) | Node::Or(a, b) => {
            collect_subformulas(a, arity, out);
            collect_subformulas(b, arity, out);
        }
        Node::Forall(b) | Node::Exists(b) => collect_subformulas(b, arity + 1, out),
    }
}

/// Which universal quantifiers the closure rewrites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosureMode {
    /// Every `∀x Ψ` becomes `¬∃x ¬Ψ`.
    Full,
    /// Only `∀` occurring negatively is rewritten; sound for sets of true sentences.
    NegativeOnly,
}

fn rewrite(node: &Node, positive: bool, mode: ClosureMode) -> Node {
    match node {
        Node::Bottom | Node::Atom(..) => node.clone(),
        Node::Implies(a, b) => Node::implies(rewrite(a, !positive, mode), rewrite(b, positive, mode)),
        Node::And(a, b) => Node::and(rewrite(a, positive, mode), rewrite(b, positive, mode)),
        Node::Or(a, b) => Node::or(rewrite(a, positive, mode), rewrite(b, positive, mode)),
        Node::Exists(b) => Node::exists(rewrite(b, positive, mode)),
        Node::Forall(b) => {
            // In ¬∃x¬Ψ the body Ψ keeps the polarity of the original ∀.
            let body = rewrite(b, positive, mode);
            if mode == ClosureMode::Full || !positive {
                Node::not(Node::exists(Node::not(body)))
            } else {
                Node::forall(body)
            }
        }
    }
}

/// The closure `T̂`: rewrite universal quantifiers, then add all subformulas.
///
/// In negative-only mode a subformula lifted to the top level may expose a
/// negative `∀` that was positive in place, so the step is iterated to a
/// fixpoint; this keeps the operation idempotent.
pub fn hat_closure(t: &FormulaSet, mode: ClosureMode) -> FormulaSet {
    let mut current: FormulaSet = t.clone();
    loop {
        let mut next = FormulaSet::new();
        for phi in current.iter() {
            let rewritten = Formula {
                arity: phi.arity,
                node: rewrite(&phi.node, true, mode),
            };
            for sub in subformulas(&rewritten).iter() {
                next.insert(sub.clone());
            }
        }
        if next.same_members(&current) {
            return next;
        }
        current = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::from_symbols([("<=", 2), ("R", 2), ("P", 1), ("Q", 1), ("in", 2), ("=", 2)]).unwrap()
    }

    #[test]
    fn parses_universal_bound() {
        let phi = parse_formula("forall x1 (x1 <= x0)", &sig()).unwrap();
        assert_eq!(phi.arity, 1);
        assert_eq!(phi.node, Node::forall(Node::atom("<=", [1, 0])));
    }

    #[test]
    fn parses_false_and_existential() {
        assert_eq!(parse_formula("false", &sig()).unwrap(), Formula::bottom(0));
        let phi = parse_formula("exists x1 R(x0,x1)", &sig()).unwrap();
        assert_eq!(phi.arity, 1);
        assert_eq!(phi.node, Node::exists(Node::atom("R", [0, 1])));
    }

    #[test]
    fn bound_names_are_renamed() {
        let phi = parse_formula("forall y (y <= x0)", &sig()).unwrap();
        assert_eq!(phi.node, Node::forall(Node::atom("<=", [1, 0])));
        let psi = parse_formula("exists x0 P(x0)", &sig()).unwrap();
        assert_eq!(psi, Formula::new(0, Node::exists(Node::atom("P", [0]))).unwrap());
    }

    #[test]
    fn transposed_free_variables_keep_their_levels() {
        let phi = parse_formula("x1 <= x0", &sig()).unwrap();
        assert_eq!(phi.arity, 2);
        assert_eq!(phi.node, Node::atom("<=", [1, 0]));
    }

    #[test]
    fn named_free_variables_fill_unused_levels() {
        let phi = parse_formula("R(a, x0) & P(b)", &sig()).unwrap();
        assert_eq!(phi.arity, 3);
        assert_eq!(
            phi.node,
            Node::and(Node::atom("R", [1, 0]), Node::atom("P", [2]))
        );
    }

    #[test]
    fn free_level_beyond_fixed_arity_is_rejected() {
        let err = parse_formula_at("forall x0 (x0 <= x1)", &sig(), 1).unwrap_err();
        assert!(matches!(err, SyntaxError::LevelConflict { level: 1, .. }));
    }

    #[test]
    fn reports_errors() {
        assert!(matches!(
            parse_formula("S(x0)", &sig()),
            Err(SyntaxError::Undeclared(_))
        ));
        assert!(matches!(
            parse_formula("R(x0)", &sig()),
            Err(SyntaxError::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse_formula("P(x0) &", &sig()),
            Err(SyntaxError::Grammar { pos: 7, .. })
        ));
        assert!(matches!(
            parse_formula("P(x0) $ P(x0)", &sig()),
            Err(SyntaxError::Grammar { pos: 6, .. })
        ));
    }

    #[test]
    fn precedence() {
        let s = sig();
        let phi = parse_formula("P(x0) & Q(x0) | P(x0) -> Q(x0) -> false", &s).unwrap();
        let p = || Node::atom("P", [0]);
        let q = || Node::atom("Q", [0]);
        assert_eq!(
            phi.node,
            Node::implies(
                Node::or(Node::and(p(), q()), p()),
                Node::implies(q(), Node::Bottom)
            )
        );
        let quant = parse_formula("forall y P(y) & Q(x0)", &s).unwrap();
        assert_eq!(
            quant.node,
            Node::forall(Node::and(Node::atom("P", [1]), Node::atom("Q", [0])))
        );
    }

    #[test]
    fn pretty_examples() {
        let phi = Formula::new(1, Node::forall(Node::atom("<=", [1, 0]))).unwrap();
        assert_eq!(pretty(&phi), "forall x1 (x1 <= x0)");
        assert_eq!(pretty(&Formula::bottom(0)), "false");
        let psi = Formula::new(1, Node::exists(Node::atom("R", [0, 1]))).unwrap();
        assert_eq!(pretty(&psi), "exists x1 R(x0, x1)");
    }

    #[test]
    fn subformula_examples() {
        let s = sig();
        let phi = parse_formula("exists x1 R(x0,x1)", &s).unwrap();
        let subs = subformulas(&phi);
        let expected: FormulaSet = [phi.clone(), Formula::new(2, Node::atom("R", [0, 1])).unwrap()]
            .into_iter()
            .collect();
        assert!(subs.same_members(&expected));
        assert_eq!(subformulas(&Formula::bottom(0)).len(), 1);
        let conj = parse_formula("P(x0) & Q(x0)", &s).unwrap();
        assert_eq!(subformulas(&conj).len(), 3);
    }

    #[test]
    fn full_closure_of_universal() {
        let s = sig();
        let t: FormulaSet = [parse_formula("forall x0 P(x0)", &s).unwrap()].into_iter().collect();
        let hat = hat_closure(&t, ClosureMode::Full);
        let p = Node::atom("P", [0]);
        let expected: FormulaSet = [
            Formula::new(0, Node::not(Node::exists(Node::not(p.clone())))).unwrap(),
            Formula::new(0, Node::exists(Node::not(p.clone()))).unwrap(),
            Formula::new(1, Node::not(p.clone())).unwrap(),
            Formula::new(1, p).unwrap(),
            Formula::bottom(1),
            Formula::bottom(0),
        ]
        .into_iter()
        .collect();
        assert!(hat.same_members(&expected), "{hat:?}");
    }

    #[test]
    fn negative_only_leaves_positive_universal() {
        let s = sig();
        let empty = parse_formula("exists x0 forall x1 (x1 in x0 -> false)", &s).unwrap();
        let t: FormulaSet = [empty.clone()].into_iter().collect();
        let hat = hat_closure(&t, ClosureMode::NegativeOnly);
        assert!(hat.same_members(&subformulas(&empty)));
        assert!(hat_closure(&FormulaSet::new(), ClosureMode::Full).is_empty());
    }

    #[test]
    fn negative_only_rewrites_antecedent() {
        let s = sig();
        let phi = parse_formula("(forall y P(y)) -> false", &s).unwrap();
        let hat = hat_closure(&[phi].into_iter().collect(), ClosureMode::NegativeOnly);
        assert!(hat.iter().all(|f| !f.node.has_forall()));
    }

    #[test]
    fn negative_only_is_idempotent_on_doubly_negated_universal() {
        let s = sig();
        let phi = parse_formula("((forall y P(y)) -> false) -> false", &s).unwrap();
        let once = hat_closure(&[phi].into_iter().collect(), ClosureMode::NegativeOnly);
        let twice = hat_closure(&once, ClosureMode::NegativeOnly);
        assert!(once.same_members(&twice));
    }

    #[test]
    fn forced_values() {
        let s = sig();
        let phi = parse_formula("exists x0 (x0 = x0 & false)", &s).unwrap();
        assert_eq!(phi.node.forced(), Some(false));
        assert_eq!(parse_formula("P(x0) -> P(x0)", &s).unwrap().node.forced(), None);
        assert_eq!(parse_formula("false -> P(x0)", &s).unwrap().node.forced(), Some(true));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::corpus::{random_formula, rng};
    use proptest::prelude::*;

    fn signature() -> Signature {
        Signature::from_symbols([("P", 1), ("E", 2), ("Z", 0)]).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn closure_is_idempotent(seed in any::<u64>(), arity in 0usize..3, depth in 0usize..5) {
            let phi = random_formula(&mut rng(seed), &signature(), arity, depth);
            let t: FormulaSet = [phi].into_iter().collect();
            for mode in [ClosureMode::Full, ClosureMode::NegativeOnly] {
                let once = hat_closure(&t, mode);
                prop_assert!(hat_closure(&once, mode).same_members(&once));
                if mode == ClosureMode::Full {
                    prop_assert!(once.iter().all(|f| !f.node.has_forall()));
                }
            }
        }

        #[test]
        fn printed_formulas_parse_back(seed in any::<u64>(), arity in 0usize..3, depth in 0usize..5) {
            let phi = random_formula(&mut rng(seed), &signature(), arity, depth);
            let back = parse_formula_at(&pretty(&phi), &signature(), arity).unwrap();
            prop_assert_eq!(back, phi);
        }
    }
}
