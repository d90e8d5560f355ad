//! State declarations `⊢ C : Φ`: search, replay, involved indices and traces.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::filters::{is_ll_context, ll_holds, successors, IndexSetRepr, LlRelation, TruthOr};
use crate::syntax::{pretty_node, Formula, Node};
use crate::system::{Context, Index, SignatureMode, StageSystem};
use crate::truth::TruthValue;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("context {context} has length {len}, formula has arity {arity}")]
    ArityMismatch { context: String, len: usize, arity: usize },
    #[error("context {0} is not a <<-context")]
    NotLlContext(String),
    #[error("given index {index} is not << {context}")]
    GivenNotLl { context: String, index: String },
    #[error("no declaration: {0}")]
    Failure(String),
    #[error("search budget {budget} exhausted")]
    Unknown { budget: u64 },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    Bottom,
    /// `R : (j₀ … j_{m-1})` with `j_k ≥ C[args[k]]`.
    Atom {
        relation: String,
        args: Vec<usize>,
        assignment: Context,
    },
    Implies(Box<Derivation>, Box<Derivation>),
    And(Box<Derivation>, Box<Derivation>),
    Or(Box<Derivation>, Box<Derivation>),
    Forall { index: Index, body: Box<Derivation> },
    Exists { index: Index, body: Box<Derivation> },
}

/// A derivation tree mirroring the formula, with the context at each node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub context: Context,
    pub rule: Rule,
}

/// How quantifier indices are chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// The least successor, in canonical order, whose body derives.
    Minimal,
    /// A quantifier binding level `n` uses `chain[n]`; beyond the chain the
    /// minimal choice applies.
    Given(Vec<Index>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeriveConfig {
    pub strategy: Strategy,
    /// Largest index tried on infinite index sets.
    pub budget: u64,
}

impl DeriveConfig {
    pub fn minimal(budget: u64) -> Self {
        DeriveConfig {
            strategy: Strategy::Minimal,
            budget,
        }
    }
}

struct Search<'a> {
    sys: &'a StageSystem,
    ll: &'a dyn LlRelation,
    cfg: &'a DeriveConfig,
}

/// Derives `⊢ C : Φ`.
pub fn derive(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    c: &[Index],
    phi: &Formula,
    cfg: &DeriveConfig,
) -> Result<Derivation, DeriveError> {
    if c.len() != phi.arity {
        return Err(DeriveError::ArityMismatch {
            context: sys.format_context(c),
            len: c.len(),
            arity: phi.arity,
        });
    }
    match is_ll_context(ll, sys, c) {
        TruthValue::True => {}
        TruthValue::False => return Err(DeriveError::NotLlContext(sys.format_context(c))),
        TruthValue::Unknown { budget } => return Err(DeriveError::Unknown { budget }),
    }
    Search { sys, ll, cfg }.node(&phi.node, c)
}

impl Search<'_> {
    fn node(&self, node: &Node, c: &[Index]) -> Result<Derivation, DeriveError> {
        let rule = match node {
            Node::Bottom => Rule::Bottom,
            Node::Atom(rel, args) => {
                let assignment = atom_assignment(self.sys, rel, args, c)?;
                Rule::Atom {
                    relation: rel.clone(),
                    args: args.clone(),
                    assignment,
                }
            }
            Node::Implies(a, b) => Rule::Implies(Box::new(self.node(a, c)?), Box::new(self.node(b, c)?)),
            Node::And(a, b) => Rule::And(Box::new(self.node(a, c)?), Box::new(self.node(b, c)?)),
            Node::Or(a, b) => Rule::Or(Box::new(self.node(a, c)?), Box::new(self.node(b, c)?)),
            Node::Forall(body) => {
                let (index, body) = self.quantifier(body, c)?;
                Rule::Forall { index, body: Box::new(body) }
            }
            Node::Exists(body) => {
                let (index, body) = self.quantifier(body, c)?;
                Rule::Exists { index, body: Box::new(body) }
            }
        };
        Ok(Derivation {
            context: c.to_vec(),
            rule,
        })
    }

    fn child(&self, body: &Node, c: &[Index], i: Index) -> Result<Derivation, DeriveError> {
        let mut d = c.to_vec();
        d.push(i);
        self.node(body, &d)
    }

    fn quantifier(&self, body: &Node, c: &[Index]) -> Result<(Index, Derivation), DeriveError> {
        if let Strategy::Given(chain) = &self.cfg.strategy {
            if let Some(&i) = chain.get(c.len()) {
                if !ll_holds(self.ll, self.sys, c, i).is_true() {
                    return Err(DeriveError::GivenNotLl {
                        context: self.sys.format_context(c),
                        index: self.sys.index_name(i),
                    });
                }
                return Ok((i, self.child(body, c, i)?));
            }
        }
        let iset = self.sys.index_set();
        let succ = successors(self.ll, self.sys, c);
        let mut last_err = None;
        if let Some(list) = iset.indices() {
            for &i in list {
                match succ.contains(iset, i) {
                    TruthValue::False => continue,
                    TruthValue::Unknown { budget } => {
                        last_err = Some(DeriveError::Unknown { budget });
                        continue;
                    }
                    TruthValue::True => {}
                }
                match self.child(body, c, i) {
                    Ok(d) => return Ok((i, d)),
                    Err(e) => last_err = Some(merge(last_err, e)),
                }
            }
            return Err(last_err.unwrap_or_else(|| {
                DeriveError::Failure(format!("no index is << {}", self.sys.format_context(c)))
            }));
        }
        let (start, open_ended) = match &succ {
            IndexSetRepr::Empty => (0, false),
            IndexSetRepr::Explicit(s) => (s.iter().next().copied().unwrap_or(0), false),
            IndexSetRepr::UpFrom(h) => (*h, true),
            IndexSetRepr::All => (0, true),
            IndexSetRepr::UnknownBeyond { .. } => (0, true),
        };
        for i in start..=self.cfg.budget.max(start) {
            if i > self.cfg.budget {
                break;
            }
            match succ.contains(iset, i) {
                TruthValue::True => {}
                TruthValue::False => continue,
                TruthValue::Unknown { .. } => match ll_holds(self.ll, self.sys, c, i) {
                    TruthValue::True => {}
                    _ => continue,
                },
            }
            match self.child(body, c, i) {
                Ok(d) => return Ok((i, d)),
                Err(e) => last_err = Some(merge(last_err, e)),
            }
        }
        if open_ended {
            return Err(DeriveError::Unknown { budget: self.cfg.budget });
        }
        Err(last_err.unwrap_or_else(|| {
            DeriveError::Failure(format!("no index is << {}", self.sys.format_context(c)))
        }))
    }
}

/// An unknown outcome outranks a definite failure.
fn merge(prev: Option<DeriveError>, next: DeriveError) -> DeriveError {
    match prev {
        Some(e @ DeriveError::Unknown { .. }) => e,
        _ => next,
    }
}

/// The signature context used for an atom at `C`: the context's own indices
/// when every context is allowed, otherwise the first pointwise-minimal
/// fitting context in canonical order.
pub fn atom_assignment(sys: &StageSystem, rel: &str, args: &[usize], c: &[Index]) -> Result<Context, DeriveError> {
    let r = sys
        .relation(rel)
        .ok_or_else(|| DeriveError::UnknownRelation(rel.to_string()))?;
    let lower: Vec<Index> = args.iter().map(|&k| c[k]).collect();
    match &r.signature {
        SignatureMode::AllContexts => Ok(lower),
        SignatureMode::Explicit(set) => {
            let iset = sys.index_set();
            let fits: Vec<&Context> = set
                .iter()
                .filter(|d| d.iter().zip(&lower).all(|(&j, &l)| iset.le(l, j)))
                .collect();
            let below = |a: &Context, b: &Context| a.iter().zip(b).all(|(&x, &y)| iset.le(x, y));
            let minimal = fits
                .iter()
                .filter(|d| !fits.iter().any(|e| e != *d && below(e, d)))
                .min_by(|a, b| {
                    a.iter()
                        .zip(b.iter())
                        .map(|(&x, &y)| iset.cmp_canonical(x, y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            minimal.map(|d| (*d).clone()).ok_or_else(|| {
                DeriveError::Failure(format!(
                    "no signature context for `{rel}` above {}",
                    sys.format_context(&lower)
                ))
            })
        }
    }
}

/// Replays every rule of a derivation against the system.
pub fn validate(sys: &StageSystem, ll: &dyn LlRelation, phi: &Formula, d: &Derivation) -> Result<(), String> {
    if d.context.len() != phi.arity {
        return Err("root context length differs from the arity".into());
    }
    if !is_ll_context(ll, sys, &d.context).is_true() {
        return Err(format!("{} is not a <<-context", sys.format_context(&d.context)));
    }
    replay(sys, ll, &phi.node, d)
}

fn replay(sys: &StageSystem, ll: &dyn LlRelation, node: &Node, d: &Derivation) -> Result<(), String> {
    let c = &d.context;
    if !c.iter().all(|&i| sys.index_set().contains(i)) {
        return Err(format!("context {c:?} leaves the index set"));
    }
    let child_ok = |child: &Derivation, i: Index| -> Result<(), String> {
        if child.context.len() != c.len() + 1 || child.context[..c.len()] != c[..] || child.context[c.len()] != i {
            return Err("quantifier child has the wrong context".into());
        }
        if !ll_holds(ll, sys, c, i).is_true() {
            return Err(format!(
                "{} << {} does not hold",
                sys.format_context(c),
                sys.index_name(i)
            ));
        }
        Ok(())
    };
    let same = |a: &Derivation, b: &Derivation| a.context == *c && b.context == *c;
    match (node, &d.rule) {
        (Node::Bottom, Rule::Bottom) => Ok(()),
        (
            Node::Atom(rel, args),
            Rule::Atom {
                relation,
                args: a2,
                assignment,
            },
        ) => {
            if rel != relation || args != a2 {
                return Err("atom does not match the formula".into());
            }
            let r = sys.relation(rel).ok_or_else(|| format!("unknown relation `{rel}`"))?;
            if assignment.len() != r.arity || !sys.has_assignment(r, assignment) {
                return Err(format!(
                    "`{rel}` : {} is not in the signature",
                    sys.format_context(assignment)
                ));
            }
            for (k, &v) in args.iter().enumerate() {
                if !sys.index_set().le(c[v], assignment[k]) {
                    return Err(format!("variable x{v} is not declared at {}", sys.index_name(assignment[k])));
                }
            }
            Ok(())
        }
        (Node::Implies(a, b), Rule::Implies(da, db))
        | (Node::And(a, b), Rule::And(da, db))
        | (Node::Or(a, b), Rule::Or(da, db)) => {
            if !same(da, db) {
                return Err("connective children change the context".into());
            }
            replay(sys, ll, a, da)?;
            replay(sys, ll, b, db)
        }
        (Node::Forall(body), Rule::Forall { index, body: db })
        | (Node::Exists(body), Rule::Exists { index, body: db }) => {
            child_ok(db, *index)?;
            replay(sys, ll, body, db)
        }
        _ => Err("derivation does not mirror the formula".into()),
    }
}

/// The involved indices of a declaration. A nullary atom contributes its
/// context so that the declaration survives restriction.
pub fn involved_indices(d: &Derivation) -> BTreeSet<Index> {
    let mut out = BTreeSet::new();
    collect_involved(d, &mut out);
    out
}

fn collect_involved(d: &Derivation, out: &mut BTreeSet<Index>) {
    match &d.rule {
        Rule::Bottom => out.extend(d.context.iter().copied()),
        Rule::Atom { assignment, .. } => {
            out.extend(d.context.iter().copied());
            out.extend(assignment.iter().copied());
        }
        Rule::Implies(a, b) | Rule::And(a, b) | Rule::Or(a, b) => {
            collect_involved(a, out);
            collect_involved(b, out);
        }
        Rule::Forall { body, .. } | Rule::Exists { body, .. } => collect_involved(body, out),
    }
}

/// Quantifier indices in the order they are chosen, depth first.
pub fn quantifier_indices(d: &Derivation) -> Vec<(Context, Index)> {
    let mut out = Vec::new();
    fn walk(d: &Derivation, out: &mut Vec<(Context, Index)>) {
        match &d.rule {
            Rule::Bottom | Rule::Atom { .. } => {}
            Rule::Implies(a, b) | Rule::And(a, b) | Rule::Or(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Rule::Forall { index, body } | Rule::Exists { index, body } => {
                out.push((d.context.clone(), *index));
                walk(body, out);
            }
        }
    }
    walk(d, &mut out);
    out
}

/// One line per rule application.
pub fn trace(sys: &StageSystem, phi: &Formula, d: &Derivation) -> Vec<String> {
    let mut out = Vec::new();
    trace_node(sys, &phi.node, d, 0, &mut out);
    out
}

fn trace_node(sys: &StageSystem, node: &Node, d: &Derivation, depth: usize, out: &mut Vec<String>) {
    let head = format!(
        "{}C={} |- {}",
        "  ".repeat(depth),
        sys.format_context(&d.context),
        pretty_node(node, d.context.len())
    );
    match (node, &d.rule) {
        (Node::Atom(..), Rule::Atom { relation, assignment, .. }) => {
            out.push(format!("{head} : {relation} : {}", sys.format_context(assignment)));
        }
        (Node::Implies(a, b), Rule::Implies(da, db))
        | (Node::And(a, b), Rule::And(da, db))
        | (Node::Or(a, b), Rule::Or(da, db)) => {
            out.push(format!("{head} : both sides"));
            trace_node(sys, a, da, depth + 1, out);
            trace_node(sys, b, db, depth + 1, out);
        }
        (Node::Forall(body), Rule::Forall { index, body: db })
        | (Node::Exists(body), Rule::Exists { index, body: db }) => {
            out.push(format!("{head} : choose i={}", sys.index_name(*index)));
            trace_node(sys, body, db, depth + 1, out);
        }
        _ => out.push(format!("{head} : bottom")),
    }
}

/// Builds `(i₀, …, i_{n-1})` by taking the least element of `C^≪` at each
/// step.
pub fn select_contexts_iota(sys: &StageSystem, ll: &dyn LlRelation, n: usize) -> Result<Context, DeriveError> {
    let mut c = Vec::new();
    while c.len() < n {
        match successors(ll, sys, &c).least(sys.index_set()) {
            TruthOr::Known(Some(i)) => c.push(i),
            TruthOr::Known(None) => {
                return Err(DeriveError::Failure(format!(
                    "nothing is << {}",
                    sys.format_context(&c)
                )))
            }
            TruthOr::Unknown(budget) => return Err(DeriveError::Unknown { budget }),
        }
    }
    Ok(c)
}

/// A declaration of `Φ` at some `≪`-context: the context built from least
/// successors first, then a depth-first search over `≪`-contexts. On `ℕ`
/// only indices up to the budget are searched.
pub fn find_declaration(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    phi: &Formula,
    cfg: &DeriveConfig,
) -> Result<Derivation, DeriveError> {
    if let Ok(c) = select_contexts_iota(sys, ll, phi.arity) {
        if let Ok(d) = derive(sys, ll, &c, phi, cfg) {
            return Ok(d);
        }
    }
    let mut unknown = None;
    match search_contexts(sys, ll, phi, cfg, &mut Vec::new(), &mut unknown) {
        Some(d) => Ok(d),
        None => match unknown {
            Some(budget) => Err(DeriveError::Unknown { budget }),
            None => Err(DeriveError::Failure(format!("`{phi}` has no declaration"))),
        },
    }
}

/// Whether some `≪`-context carries a declaration of `Φ`.
pub fn is_approximable(sys: &StageSystem, ll: &dyn LlRelation, phi: &Formula, cfg: &DeriveConfig) -> TruthValue {
    match find_declaration(sys, ll, phi, cfg) {
        Ok(_) => TruthValue::True,
        Err(DeriveError::Unknown { budget }) => TruthValue::Unknown { budget },
        Err(_) => TruthValue::False,
    }
}

fn search_contexts(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    phi: &Formula,
    cfg: &DeriveConfig,
    c: &mut Vec<Index>,
    unknown: &mut Option<u64>,
) -> Option<Derivation> {
    if c.len() == phi.arity {
        return match derive(sys, ll, c, phi, cfg) {
            Ok(d) => Some(d),
            Err(DeriveError::Unknown { budget }) => {
                *unknown = Some(budget);
                None
            }
            Err(_) => None,
        };
    }
    let iset = sys.index_set();
    let candidates: Vec<Index> = match iset.indices() {
        Some(list) => list.to_vec(),
        None => {
            *unknown = Some(cfg.budget);
            (0..=cfg.budget).collect()
        }
    };
    let succ = successors(ll, sys, c);
    for i in candidates {
        match succ.contains(iset, i) {
            TruthValue::True => {}
            TruthValue::False => continue,
            TruthValue::Unknown { budget } => {
                *unknown = Some(budget);
                continue;
            }
        }
        c.push(i);
        let found = search_contexts(sys, ll, phi, cfg, c, unknown);
        c.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{AllRelation, Pointwise, TableRelation};
    use crate::syntax::{parse_formula, parse_formula_at};
    use crate::system::{make_nat_system, oracles, IndexSet, Poset, Relation, Stages};

    fn nat() -> StageSystem {
        make_nat_system(vec![("<=".into(), 2, oracles::leq())]).unwrap()
    }

    #[test]
    fn pointwise_chooses_one() {
        let sys = nat();
        let phi = parse_formula("forall x1 (x1 <= x0)", &sys.signature()).unwrap();
        let d = derive(&sys, &Pointwise, &[1], &phi, &DeriveConfig::minimal(32)).unwrap();
        assert_eq!(quantifier_indices(&d), vec![(vec![1], 1)]);
        assert!(validate(&sys, &Pointwise, &phi, &d).is_ok());
        assert_eq!(involved_indices(&d), [1].into_iter().collect());
        assert_eq!(trace(&sys, &phi, &d)[0], "C=(1) |- forall x1 (x1 <= x0) : choose i=1");
    }

    #[test]
    fn bottom_declarations() {
        let sys = nat();
        let d = derive(&sys, &Pointwise, &[], &Formula::bottom(0), &DeriveConfig::minimal(4)).unwrap();
        assert_eq!(d.rule, Rule::Bottom);
        let d = derive(&sys, &Pointwise, &[5], &Formula::bottom(1), &DeriveConfig::minimal(4)).unwrap();
        assert_eq!(involved_indices(&d), [5].into_iter().collect());
    }

    #[test]
    fn empty_successors_fail() {
        let poset = Poset::chain(2).unwrap();
        let sys = StageSystem::new(
            IndexSet::Poset(poset),
            Some(vec!["a".into()]),
            Stages::Table(vec![vec![0], vec![0]]),
            vec![Relation::oracle("P", 1, oracles::at_least(0))],
        )
        .unwrap();
        let phi = parse_formula("exists x0 P(x0)", &sys.signature()).unwrap();
        let empty = TableRelation::default();
        assert!(matches!(
            derive(&sys, &empty, &[], &phi, &DeriveConfig::minimal(4)),
            Err(DeriveError::Failure(_))
        ));
        let unary = parse_formula("P(x0)", &sys.signature()).unwrap();
        assert!(is_approximable(&sys, &empty, &unary, &DeriveConfig::minimal(4)).is_false());
        assert!(is_approximable(&sys, &AllRelation, &unary, &DeriveConfig::minimal(4)).is_true());
    }

    #[test]
    fn given_chain_is_checked() {
        let sys = nat();
        let phi = parse_formula("forall x1 (x1 <= x0)", &sys.signature()).unwrap();
        let cfg = DeriveConfig {
            strategy: Strategy::Given(vec![1, 2]),
            budget: 8,
        };
        let d = derive(&sys, &Pointwise, &[1], &phi, &cfg).unwrap();
        assert_eq!(quantifier_indices(&d), vec![(vec![1], 2)]);
        let bad = DeriveConfig {
            strategy: Strategy::Given(vec![5, 2]),
            budget: 8,
        };
        assert!(matches!(
            derive(&sys, &Pointwise, &[5], &phi, &bad),
            Err(DeriveError::GivenNotLl { .. })
        ));
    }

    #[test]
    fn not_a_context() {
        let sys = nat();
        let phi = parse_formula_at("x1 <= x0", &sys.signature(), 2).unwrap();
        assert!(matches!(
            derive(&sys, &Pointwise, &[3, 1], &phi, &DeriveConfig::minimal(4)),
            Err(DeriveError::NotLlContext(_))
        ));
    }

    #[test]
    fn iota_selection() {
        let sys = nat();
        assert_eq!(select_contexts_iota(&sys, &Pointwise, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(select_contexts_iota(&sys, &Pointwise, 0).unwrap(), Vec::<Index>::new());
    }

    #[test]
    fn explicit_signature_takes_minimal_fit() {
        let poset = Poset::chain(3).unwrap();
        let set = [vec![1], vec![2]].into_iter().collect();
        let rel = Relation {
            name: "P".into(),
            arity: 1,
            family: crate::system::RelationFamily::Oracle(oracles::at_least(0)),
            signature: SignatureMode::Explicit(set),
        };
        let sys = StageSystem::new(
            IndexSet::Poset(poset),
            Some(vec!["a".into()]),
            Stages::Table(vec![vec![0], vec![0], vec![0]]),
            vec![rel],
        )
        .unwrap();
        assert_eq!(atom_assignment(&sys, "P", &[0], &[0]).unwrap(), vec![1]);
        assert_eq!(atom_assignment(&sys, "P", &[0], &[2]).unwrap(), vec![2]);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::adequacy::ll_t;
    use crate::corpus::{corpus, CorpusLimits};
    use crate::filters::Restricted;
    use crate::submodel::restrict;
    use crate::syntax::ClosureMode;
    use proptest::prelude::*;
    use std::sync::Arc;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn declarations_survive_restriction_to_involved_indices(seed in any::<u64>()) {
            let case = corpus(seed, 1, &CorpusLimits::default()).pop().unwrap();
            let sys = Arc::new(case.system);
            let ll: Arc<dyn LlRelation> = Arc::new(ll_t(&case.theory, ClosureMode::Full, 32));
            let cfg = DeriveConfig::minimal(32);
            for phi in case.theory.iter() {
                let Ok(d) = find_declaration(&sys, ll.as_ref(), phi, &cfg) else { continue };
                let mut members: Vec<Index> = involved_indices(&d).into_iter().collect();
                if let Some(ub) = sys.index_set().upper_bound(&members) {
                    members.push(ub);
                }
                let Ok(sub) = restrict(&sys, &members) else { continue };
                let ll_sub = Restricted { inner: ll.clone(), full: sys.clone(), members: members.iter().copied().collect() };
                prop_assert_eq!(validate(&sub, &ll_sub, phi, &d), Ok(()));
            }
        }
    }
}
