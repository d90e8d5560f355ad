//! The three interpreters: along a declaration, over the growing union, and
//! classically on a finite structure.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::declarations::{derive, DeriveConfig, DeriveError, Derivation, Rule};
use crate::filters::{is_ll_context, successors, LlRelation};
use crate::syntax::{Formula, Node};
use crate::system::{ClassicalStructure, Context, Elem, Index, IndexSet, Poset, Relation, StageSystem};
use crate::truth::TruthValue;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("assignment {assignment} is not in M_C for C = {context}")]
    NotInStage { assignment: String, context: String },
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error("derivation does not mirror the formula")]
    Mismatch,
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

fn check_stage(sys: &StageSystem, c: &[Index], a: &[Elem]) -> Result<(), EvalError> {
    if sys.in_context(c, a) {
        Ok(())
    } else {
        Err(EvalError::NotInStage {
            assignment: sys.format_tuple(a),
            context: sys.format_context(c),
        })
    }
}

/// `⊨ Φ[ā : C]` along the derivation: atoms at their declared contexts,
/// quantifiers over the single recorded stage.
pub fn eval_ll(sys: &StageSystem, d: &Derivation, a: &[Elem]) -> Result<TruthValue, EvalError> {
    check_stage(sys, &d.context, a)?;
    let mut env = a.to_vec();
    eval_rule(sys, d, &mut env).map(TruthValue::from_bool)
}

fn eval_rule(sys: &StageSystem, d: &Derivation, env: &mut Vec<Elem>) -> Result<bool, EvalError> {
    Ok(match &d.rule {
        Rule::Bottom => false,
        Rule::Atom {
            relation,
            args,
            assignment,
        } => {
            let r = sys
                .relation(relation)
                .ok_or_else(|| EvalError::UnknownRelation(relation.clone()))?;
            let tuple: Vec<Elem> = args.iter().map(|&k| env[k]).collect();
            sys.holds(r, assignment, &tuple)
        }
        Rule::Implies(a, b) => !eval_rule(sys, a, env)? || eval_rule(sys, b, env)?,
        Rule::And(a, b) => eval_rule(sys, a, env)? && eval_rule(sys, b, env)?,
        Rule::Or(a, b) => eval_rule(sys, a, env)? || eval_rule(sys, b, env)?,
        Rule::Forall { index, body } => {
            let mut all = true;
            for b in sys.stage(*index) {
                env.push(b);
                let v = eval_rule(sys, body, env);
                env.pop();
                if !v? {
                    all = false;
                    break;
                }
            }
            all
        }
        Rule::Exists { index, body } => {
            let mut some = false;
            for b in sys.stage(*index) {
                env.push(b);
                let v = eval_rule(sys, body, env);
                env.pop();
                if v? {
                    some = true;
                    break;
                }
            }
            some
        }
    })
}

/// A quantifier node whose value changes when another successor is used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    /// Pre-order position of the quantifier in the formula.
    pub node: usize,
    pub context: Context,
    pub assignment: Vec<Elem>,
    pub recorded: Index,
    pub alternative: Index,
    pub recorded_value: bool,
    pub alternative_value: bool,
}

#[derive(Clone, Debug)]
pub struct AuditConfig {
    /// How many other successors to try at each quantifier.
    pub alternatives: usize,
    /// Use exactly these indices (when they are successors) instead.
    pub explicit: Option<Vec<Index>>,
    pub derive: DeriveConfig,
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub value: TruthValue,
    pub divergences: Vec<Divergence>,
}

/// Evaluates along `d` and re-evaluates every quantifier node reached at
/// other successors of its context.
pub fn eval_ll_audit(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    phi: &Formula,
    d: &Derivation,
    a: &[Elem],
    cfg: &AuditConfig,
) -> Result<AuditReport, EvalError> {
    let value = eval_ll(sys, d, a)?;
    let mut auditor = Auditor {
        sys,
        ll,
        cfg,
        seen: HashSet::new(),
        divergences: Vec::new(),
    };
    let mut env = a.to_vec();
    auditor.walk(&phi.node, d, &mut env, 0)?;
    Ok(AuditReport {
        value,
        divergences: auditor.divergences,
    })
}

struct Auditor<'a> {
    sys: &'a StageSystem,
    ll: &'a dyn LlRelation,
    cfg: &'a AuditConfig,
    seen: HashSet<(usize, Index)>,
    divergences: Vec<Divergence>,
}

fn node_count(node: &Node) -> usize {
    match node {
        Node::Bottom | Node::Atom(..) => 1,
        Node::Implies(a, b) | Node::And(a, b) | Node::Or(a, b) => 1 + node_count(a) + node_count(b),
        Node::Forall(b) | Node::Exists(b) => 1 + node_count(b),
    }
}

impl Auditor<'_> {
    fn alternatives(&self, c: &[Index], recorded: Index) -> Vec<Index> {
        let iset = self.sys.index_set();
        let succ = successors(self.ll, self.sys, c);
        if let Some(list) = &self.cfg.explicit {
            return list
                .iter()
                .copied()
                .filter(|&i| i != recorded && succ.contains(iset, i).is_true())
                .collect();
        }
        let candidates: Box<dyn Iterator<Item = Index>> = match iset.indices() {
            Some(list) => Box::new(list.to_vec().into_iter()),
            None => Box::new(0..=self.cfg.derive.budget),
        };
        candidates
            .filter(|&i| i != recorded && succ.contains(iset, i).is_true())
            .take(self.cfg.alternatives)
            .collect()
    }

    fn walk(&mut self, node: &Node, d: &Derivation, env: &mut Vec<Elem>, id: usize) -> Result<(), EvalError> {
        match (node, &d.rule) {
            (Node::Bottom, Rule::Bottom) | (Node::Atom(..), Rule::Atom { .. }) => Ok(()),
            (Node::Implies(a, b), Rule::Implies(da, db))
            | (Node::And(a, b), Rule::And(da, db))
            | (Node::Or(a, b), Rule::Or(da, db)) => {
                self.walk(a, da, env, id + 1)?;
                self.walk(b, db, env, id + 1 + node_count(a))
            }
            (Node::Forall(body), Rule::Forall { index, body: db })
            | (Node::Exists(body), Rule::Exists { index, body: db }) => {
                let recorded_value = eval_rule(self.sys, d, env)?;
                for alt in self.alternatives(&d.context, *index) {
                    if self.seen.contains(&(id, alt)) {
                        continue;
                    }
                    let mut c = d.context.clone();
                    c.push(alt);
                    let child = match derive(
                        self.sys,
                        self.ll,
                        &c,
                        &Formula {
                            arity: c.len(),
                            node: (**body).clone(),
                        },
                        &DeriveConfig::minimal(self.cfg.derive.budget),
                    ) {
                        Ok(child) => child,
                        Err(_) => continue,
                    };
                    let rule = match node {
                        Node::Forall(_) => Rule::Forall {
                            index: alt,
                            body: Box::new(child),
                        },
                        _ => Rule::Exists {
                            index: alt,
                            body: Box::new(child),
                        },
                    };
                    let alt_d = Derivation {
                        context: d.context.clone(),
                        rule,
                    };
                    let alternative_value = eval_rule(self.sys, &alt_d, env)?;
                    if alternative_value != recorded_value {
                        self.seen.insert((id, alt));
                        self.divergences.push(Divergence {
                            node: id,
                            context: d.context.clone(),
                            assignment: env.clone(),
                            recorded: *index,
                            alternative: alt,
                            recorded_value,
                            alternative_value,
                        });
                    }
                }
                for b in self.sys.stage(*index) {
                    env.push(b);
                    let r = self.walk(body, db, env, id + 1);
                    env.pop();
                    r?;
                }
                Ok(())
            }
            _ => Err(EvalError::Mismatch),
        }
    }
}

/// `⊨_m Φ[ā : C]`: classical truth over the union. Exact on finite index
/// sets; on `ℕ` quantifiers scan the elements below `budget` and answer
/// `Unknown` when the scan settles nothing.
pub fn eval_m(sys: &StageSystem, c: &[Index], phi: &Formula, a: &[Elem], budget: u64) -> Result<TruthValue, EvalError> {
    check_stage(sys, c, a)?;
    if let Some(union) = sys.union() {
        return Ok(TruthValue::from_bool(eval_tarskian(union, phi, a)));
    }
    let mut env = a.to_vec();
    eval_bounded(sys, &phi.node, &mut env, budget)
}

fn eval_bounded(sys: &StageSystem, node: &Node, env: &mut Vec<Elem>, budget: u64) -> Result<TruthValue, EvalError> {
    if let Some(v) = node.forced() {
        return Ok(TruthValue::from_bool(v));
    }
    Ok(match node {
        Node::Bottom => TruthValue::False,
        Node::Atom(rel, args) => {
            let r = sys.relation(rel).ok_or_else(|| EvalError::UnknownRelation(rel.clone()))?;
            let tuple: Vec<Elem> = args.iter().map(|&k| env[k]).collect();
            TruthValue::from_bool(union_atom(sys, r, &tuple))
        }
        Node::Implies(a, b) => eval_bounded(sys, a, env, budget)?.implies(eval_bounded(sys, b, env, budget)?),
        Node::And(a, b) => eval_bounded(sys, a, env, budget)?.and(eval_bounded(sys, b, env, budget)?),
        Node::Or(a, b) => eval_bounded(sys, a, env, budget)?.or(eval_bounded(sys, b, env, budget)?),
        Node::Exists(body) => {
            for b in 0..budget as Elem {
                env.push(b);
                let v = eval_bounded(sys, body, env, budget);
                env.pop();
                if v?.is_true() {
                    return Ok(TruthValue::True);
                }
            }
            TruthValue::Unknown { budget }
        }
        Node::Forall(body) => {
            for b in 0..budget as Elem {
                env.push(b);
                let v = eval_bounded(sys, body, env, budget);
                env.pop();
                if v?.is_false() {
                    return Ok(TruthValue::False);
                }
            }
            TruthValue::Unknown { budget }
        }
    })
}

/// `R(ā)` in the union, for systems over `ℕ` whose families are predicates.
fn union_atom(sys: &StageSystem, r: &Relation, tuple: &[Elem]) -> bool {
    let top = tuple.iter().map(|&e| e as Index + 1).max().unwrap_or(0);
    let c = vec![top; r.arity];
    sys.holds(r, &c, tuple)
}

/// Standard evaluation with quantifiers over the whole carrier.
pub fn eval_tarskian(m: &ClassicalStructure, phi: &Formula, a: &[Elem]) -> bool {
    let mut env = a.to_vec();
    tarski(m, &phi.node, &mut env)
}

fn tarski(m: &ClassicalStructure, node: &Node, env: &mut Vec<Elem>) -> bool {
    match node {
        Node::Bottom => false,
        Node::Atom(rel, args) => {
            let tuple: Vec<Elem> = args.iter().map(|&k| env[k]).collect();
            m.holds(rel, &tuple)
        }
        Node::Implies(a, b) => !tarski(m, a, env) || tarski(m, b, env),
        Node::And(a, b) => tarski(m, a, env) && tarski(m, b, env),
        Node::Or(a, b) => tarski(m, a, env) || tarski(m, b, env),
        Node::Forall(body) => m.carrier.iter().all(|&b| {
            env.push(b);
            let v = tarski(m, body, env);
            env.pop();
            v
        }),
        Node::Exists(body) => m.carrier.iter().any(|&b| {
            env.push(b);
            let v = tarski(m, body, env);
            env.pop();
            v
        }),
    }
}

/// `⟦Φ⟧`: the tuples satisfying `Φ` at every derivable context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefinableRelation {
    pub arity: usize,
    pub table: BTreeMap<Context, BTreeSet<Vec<Elem>>>,
}

impl DefinableRelation {
    pub fn to_relation(&self, name: &str) -> Relation {
        Relation::tabled(name, self.arity, self.table.clone())
    }
}

/// Tabulates `⟦Φ⟧_C` over the derivable contexts; on `ℕ` the contexts
/// range over indices up to `grid`.
pub fn materialize(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    phi: &Formula,
    cfg: &DeriveConfig,
    grid: u64,
) -> Result<DefinableRelation, EvalError> {
    let contexts = match sys.index_set().indices() {
        Some(_) => sys.index_set().all_contexts(phi.arity),
        None => IndexSet::Poset(Poset::chain(grid as usize + 1).expect("chain")).all_contexts(phi.arity),
    };
    let mut table = BTreeMap::new();
    for c in contexts {
        if !is_ll_context(ll, sys, &c).is_true() {
            continue;
        }
        let d = match derive(sys, ll, &c, phi, cfg) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let mut rows = BTreeSet::new();
        for a in sys.tuples(&c) {
            if eval_ll(sys, &d, &a)?.is_true() {
                rows.insert(a);
            }
        }
        table.insert(c, rows);
    }
    Ok(DefinableRelation {
        arity: phi.arity,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{AllRelation, Pointwise};
    use crate::syntax::{parse_formula, parse_formula_at, Signature};
    use crate::system::{make_nat_system, oracles, Stages};

    fn nat() -> StageSystem {
        make_nat_system(vec![("<=".into(), 2, oracles::leq()), ("=".into(), 2, oracles::identity())]).unwrap()
    }

    fn audit_cfg(n: usize) -> AuditConfig {
        AuditConfig {
            alternatives: n,
            explicit: None,
            derive: DeriveConfig::minimal(32),
        }
    }

    #[test]
    fn pointwise_universal_depends_on_the_stage() {
        let sys = nat();
        let phi = parse_formula("forall x1 (x1 <= x0)", &sys.signature()).unwrap();
        let cfg = DeriveConfig::minimal(32);
        let d1 = derive(&sys, &Pointwise, &[1], &phi, &cfg).unwrap();
        assert_eq!(eval_ll(&sys, &d1, &[0]).unwrap(), TruthValue::True);
        let d2 = derive(&sys, &Pointwise, &[2], &phi, &cfg).unwrap();
        assert_eq!(eval_ll(&sys, &d2, &[0]).unwrap(), TruthValue::False);
        assert!(matches!(eval_ll(&sys, &d1, &[1]), Err(EvalError::NotInStage { .. })));
    }

    #[test]
    fn audit_reports_the_later_stage() {
        let sys = nat();
        let phi = parse_formula("forall x1 (x1 <= x0)", &sys.signature()).unwrap();
        let d = derive(&sys, &Pointwise, &[1], &phi, &DeriveConfig::minimal(32)).unwrap();
        let report = eval_ll_audit(&sys, &Pointwise, &phi, &d, &[0], &audit_cfg(3)).unwrap();
        assert_eq!(report.value, TruthValue::True);
        assert!(report
            .divergences
            .iter()
            .any(|v| v.alternative == 2 && v.recorded_value && !v.alternative_value));
        let atom = parse_formula_at("x0 <= x0", &sys.signature(), 1).unwrap();
        let d = derive(&sys, &Pointwise, &[1], &atom, &DeriveConfig::minimal(32)).unwrap();
        assert!(eval_ll_audit(&sys, &Pointwise, &atom, &d, &[0], &audit_cfg(3))
            .unwrap()
            .divergences
            .is_empty());
    }

    #[test]
    fn bottom_is_false_everywhere() {
        let sys = nat();
        let d = derive(&sys, &Pointwise, &[3], &Formula::bottom(1), &DeriveConfig::minimal(4)).unwrap();
        assert_eq!(eval_ll(&sys, &d, &[2]).unwrap(), TruthValue::False);
    }

    #[test]
    fn bounded_union_semantics() {
        let sys = nat();
        let forced = parse_formula("exists x0 (x0 = x0 & false)", &sys.signature()).unwrap();
        for budget in [1, 5, 50] {
            assert_eq!(eval_m(&sys, &[], &forced, &[], budget).unwrap(), TruthValue::False);
        }
        let some = parse_formula("exists x1 (x0 <= x1)", &sys.signature()).unwrap();
        assert_eq!(eval_m(&sys, &[3], &some, &[2], 10).unwrap(), TruthValue::True);
        let all = parse_formula("forall x1 (x0 <= x1)", &sys.signature()).unwrap();
        assert_eq!(eval_m(&sys, &[3], &all, &[0], 10).unwrap(), TruthValue::Unknown { budget: 10 });
        assert_eq!(eval_m(&sys, &[3], &all, &[2], 10).unwrap(), TruthValue::False);
    }

    #[test]
    fn tarskian_basics() {
        let mut sig = Signature::new();
        sig.add("=", 2).unwrap();
        sig.add("P", 1).unwrap();
        let m = ClassicalStructure {
            carrier: vec![0],
            relations: vec![
                ("=".into(), 2, [vec![0, 0]].into_iter().collect()),
                ("P".into(), 1, HashSet::new()),
            ],
            element_names: None,
            truncated_at: None,
        };
        assert!(eval_tarskian(&m, &parse_formula("forall x0 (x0 = x0)", &sig).unwrap(), &[]));
        assert!(!eval_tarskian(&m, &parse_formula("exists x0 P(x0)", &sig).unwrap(), &[]));
    }

    #[test]
    fn materialize_on_a_grid() {
        let sys = nat();
        let phi = parse_formula("x1 <= x0", &sys.signature()).unwrap();
        let rel = materialize(&sys, &AllRelation, &phi, &DeriveConfig::minimal(8), 5).unwrap();
        assert_eq!(rel.table.len(), 36);
        for (c, rows) in &rel.table {
            for a in sys.tuples(c) {
                assert_eq!(rows.contains(&a), a[1] <= a[0]);
            }
        }
        let bottom = materialize(&sys, &AllRelation, &Formula::bottom(1), &DeriveConfig::minimal(8), 5).unwrap();
        assert!(bottom.table.values().all(|r| r.is_empty()));
    }

    #[test]
    fn single_stage_matches_union() {
        let poset = Poset::new(vec!["*".into()], vec![vec![true]]).unwrap();
        let sys = StageSystem::new(
            IndexSet::Poset(poset),
            Some(vec!["a".into(), "b".into()]),
            Stages::Table(vec![vec![0, 1]]),
            vec![Relation::oracle("<=", 2, oracles::leq())],
        )
        .unwrap();
        let phi = parse_formula("forall x0 exists x1 (x0 <= x1)", &sys.signature()).unwrap();
        let d = derive(&sys, &AllRelation, &[], &phi, &DeriveConfig::minimal(4)).unwrap();
        assert_eq!(
            eval_ll(&sys, &d, &[]).unwrap().as_bool(),
            Some(eval_tarskian(sys.union().unwrap(), &phi, &[]))
        );
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::adequacy::ll_t;
    use crate::corpus::{corpus, CorpusLimits};
    use crate::filters::is_ll_context;
    use crate::syntax::{ClosureMode, FormulaSet, Node};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn negation_is_complement(seed in any::<u64>()) {
            let case = corpus(seed, 1, &CorpusLimits::default()).pop().unwrap();
            let sys = &case.system;
            let cfg = DeriveConfig::minimal(32);
            for phi in case.theory.iter() {
                let neg = Formula::new(phi.arity, Node::not(phi.node.clone())).unwrap();
                let t: FormulaSet = [phi.clone(), neg.clone()].into_iter().collect();
                let ll = ll_t(&t, ClosureMode::Full, 32);
                for c in sys.index_set().all_contexts(phi.arity) {
                    if !is_ll_context(&ll, sys, &c).is_true() {
                        continue;
                    }
                    let (Ok(d), Ok(dn)) = (derive(sys, &ll, &c, phi, &cfg), derive(sys, &ll, &c, &neg, &cfg)) else {
                        continue;
                    };
                    for a in sys.tuples(&c) {
                        let v = eval_ll(sys, &d, &a).unwrap();
                        prop_assert_eq!(eval_ll(sys, &dn, &a).unwrap(), v.not());
                    }
                }
            }
        }
    }
}
