//! Finite restrictions of a system that keep a theory's declarations, and
//! their verification against the full system.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::declarations::{derive, find_declaration, involved_indices, validate, DeriveConfig, DeriveError, Derivation};
use crate::filters::{is_ll_context, LlRelation, Restricted};
use crate::semantics::{eval_ll, EvalError};
use crate::syntax::{Formula, FormulaSet};
use crate::system::{Context, Elem, Index, IndexSet, Relation, RelationFamily, SignatureMode, StageSystem, SystemError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmodelError {
    #[error("`{formula}`: {error}")]
    Derive { formula: String, error: DeriveError },
    #[error("index subset is not directed")]
    NotDirected,
    #[error("index {0} is not in the index set")]
    UnknownIndex(Index),
    #[error("no upper bound exists")]
    NoUpperBound,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A finite directed subset of indices together with the declarations it
/// was built from.
#[derive(Clone, Debug)]
pub struct Restriction {
    /// Members in canonical order.
    pub members: Vec<Index>,
    pub seed: BTreeSet<Index>,
    pub upper_bound: Index,
    pub derivations: Vec<(Formula, Derivation)>,
}

/// Collects one declaration per formula, their involved indices, the seed
/// and an upper bound of all of them.
pub fn possible_restriction(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    t: &FormulaSet,
    seed: &[Index],
    cfg: &DeriveConfig,
) -> Result<Restriction, SubmodelError> {
    let iset = sys.index_set();
    let mut all: BTreeSet<Index> = BTreeSet::new();
    for &i in seed {
        if !iset.contains(i) {
            return Err(SubmodelError::UnknownIndex(i));
        }
        all.insert(i);
    }
    let mut derivations = Vec::new();
    for phi in t {
        let d = find_declaration(sys, ll, phi, cfg).map_err(|error| SubmodelError::Derive {
            formula: phi.to_string(),
            error,
        })?;
        all.extend(involved_indices(&d));
        derivations.push((phi.clone(), d));
    }
    if all.iter().all(|&i| sys.stage(i).is_empty()) {
        // A system needs some non-empty stage.
        let first = match iset.indices() {
            Some(list) => list.iter().copied().find(|&i| !sys.stage(i).is_empty()),
            None => (0..).find(|&i| !sys.stage(i).is_empty()),
        };
        all.extend(first);
    }
    let list: Vec<Index> = all.iter().copied().collect();
    let upper_bound = iset.upper_bound(&list).ok_or(SubmodelError::NoUpperBound)?;
    all.insert(upper_bound);
    let mut members: Vec<Index> = all.into_iter().collect();
    members.sort_by(|a, b| iset.cmp_canonical(*a, *b));
    Ok(Restriction {
        members,
        seed: seed.iter().copied().collect(),
        upper_bound,
        derivations,
    })
}

/// A possible restriction that also declares every formula at each
/// `≪`-context built from seed indices, so those contexts stay usable in
/// the restriction. Without a seed this is [`possible_restriction`].
pub fn seeded_restriction(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    t: &FormulaSet,
    seed: &[Index],
    cfg: &DeriveConfig,
) -> Result<Restriction, SubmodelError> {
    let mut r = possible_restriction(sys, ll, t, seed, cfg)?;
    if seed.is_empty() {
        return Ok(r);
    }
    let iset = sys.index_set();
    let seeds = IndexSet::Subset {
        parent: Box::new(iset.clone()),
        members: r.seed.iter().copied().collect(),
    };
    let mut all: BTreeSet<Index> = r.members.iter().copied().collect();
    for phi in t {
        for c in seeds.all_contexts(phi.arity) {
            if !is_ll_context(ll, sys, &c).is_true() {
                continue;
            }
            if let Ok(d) = derive(sys, ll, &c, phi, cfg) {
                all.extend(involved_indices(&d));
                r.derivations.push((phi.clone(), d));
            }
        }
    }
    let list: Vec<Index> = all.iter().copied().collect();
    r.upper_bound = iset.upper_bound(&list).ok_or(SubmodelError::NoUpperBound)?;
    all.insert(r.upper_bound);
    r.members = all.into_iter().collect();
    r.members.sort_by(|a, b| iset.cmp_canonical(*a, *b));
    Ok(r)
}

/// The system over a directed subset of indices, with the signature cut
/// down to contexts inside it.
pub fn restrict(sys: &StageSystem, members: &[Index]) -> Result<StageSystem, SubmodelError> {
    let iset = sys.index_set();
    if let Some(&bad) = members.iter().find(|&&i| !iset.contains(i)) {
        return Err(SubmodelError::UnknownIndex(bad));
    }
    let mut list: Vec<Index> = members.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    list.sort_by(|a, b| iset.cmp_canonical(*a, *b));
    let parent = match iset {
        IndexSet::Subset { parent, .. } => parent.clone(),
        other => Box::new(other.clone()),
    };
    let sub = IndexSet::Subset { parent, members: list };
    if !sub.is_directed() {
        return Err(SubmodelError::NotDirected);
    }
    let inside = |c: &Context| c.iter().all(|i| sub.contains(*i));
    let relations = sys
        .relations()
        .iter()
        .map(|r| {
            let signature = match &r.signature {
                SignatureMode::AllContexts => SignatureMode::AllContexts,
                SignatureMode::Explicit(set) => SignatureMode::Explicit(set.iter().filter(|c| inside(c)).cloned().collect()),
            };
            let family = match &r.family {
                RelationFamily::Tabled(t) => RelationFamily::Tabled(
                    t.iter()
                        .filter(|(c, _)| inside(c))
                        .map(|(c, v)| (c.clone(), v.clone()))
                        .collect(),
                ),
                other => other.clone(),
            };
            Relation {
                name: r.name.clone(),
                arity: r.arity,
                family,
                signature,
            }
        })
        .collect();
    Ok(sys.with_index(sub, relations)?)
}

/// The restriction of `ll` to the given indices, answered on `full`.
pub fn restrict_ll(full: &Arc<StageSystem>, ll: &Arc<dyn LlRelation>, members: &[Index]) -> Restricted {
    Restricted {
        inner: ll.clone(),
        full: full.clone(),
        members: members.iter().copied().collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub formula: String,
    pub context: Context,
    pub assignment: Vec<Elem>,
    pub sub_value: bool,
    pub full_value: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SubmodelReport {
    pub compared: usize,
    pub disagreements: Vec<Disagreement>,
    /// Declarations used to build the restriction that do not replay in it.
    pub replay_failures: Vec<(String, String)>,
    /// Formulas with no declaration at all in the restriction.
    pub unapproximable: Vec<String>,
    /// Contexts derivable in the full system but not in the restriction.
    pub underivable: Vec<(String, Context)>,
}

impl SubmodelReport {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty() && self.replay_failures.is_empty() && self.unapproximable.is_empty()
    }
}

/// Compares the interpretation in the restriction with the full system on
/// every formula, every `≪`-context inside the restriction and every
/// assignment, and replays the declarations the restriction was built from.
pub fn verify_t_submodel(
    full: &Arc<StageSystem>,
    ll: &Arc<dyn LlRelation>,
    restriction: &Restriction,
    t: &FormulaSet,
    cfg: &DeriveConfig,
) -> Result<SubmodelReport, SubmodelError> {
    let sub = restrict(full, &restriction.members)?;
    let ll_sub = restrict_ll(full, ll, &restriction.members);
    let mut report = SubmodelReport::default();
    for (phi, d) in &restriction.derivations {
        if let Err(e) = validate(&sub, &ll_sub, phi, d) {
            report.replay_failures.push((phi.to_string(), e));
        }
    }
    for phi in t {
        if find_declaration(&sub, &ll_sub, phi, cfg).is_err() {
            report.unapproximable.push(phi.to_string());
            continue;
        }
        for c in sub.index_set().all_contexts(phi.arity) {
            if !is_ll_context(&ll_sub, &sub, &c).is_true() {
                continue;
            }
            let d_full = match derive(full, ll.as_ref(), &c, phi, cfg) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let d_sub = match derive(&sub, &ll_sub, &c, phi, cfg) {
                Ok(d) => d,
                Err(_) => {
                    report.underivable.push((phi.to_string(), c.clone()));
                    continue;
                }
            };
            for a in sub.tuples(&c) {
                report.compared += 1;
                let sv = eval_ll(&sub, &d_sub, &a)?;
                let fv = eval_ll(full, &d_full, &a)?;
                if sv != fv {
                    report.disagreements.push(Disagreement {
                        formula: phi.to_string(),
                        context: c.clone(),
                        assignment: a,
                        sub_value: sv.is_true(),
                        full_value: fv.is_true(),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Reruns the verification without `drop`, taking a fresh upper bound of
/// the rest. `None` when the upper bound brings `drop` back.
pub fn negative_control(
    full: &Arc<StageSystem>,
    ll: &Arc<dyn LlRelation>,
    restriction: &Restriction,
    t: &FormulaSet,
    drop: Index,
    cfg: &DeriveConfig,
) -> Option<SubmodelReport> {
    let iset = full.index_set();
    let rest: Vec<Index> = restriction.members.iter().copied().filter(|&i| i != drop).collect();
    let bound = iset.upper_bound(&rest)?;
    if bound == drop {
        return None;
    }
    let mut members = rest;
    if !members.contains(&bound) {
        members.push(bound);
    }
    members.sort_by(|a, b| iset.cmp_canonical(*a, *b));
    let reduced = Restriction {
        members,
        seed: restriction.seed.clone(),
        upper_bound: bound,
        derivations: restriction.derivations.clone(),
    };
    verify_t_submodel(full, ll, &reduced, t, cfg).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adequacy::ll_t;
    use crate::filters::{AllRelation, Pointwise};
    use crate::syntax::{parse_formula, ClosureMode};
    use crate::system::{make_nat_system, oracles};

    #[test]
    fn bottom_gives_seed_and_bound() {
        let sys = make_nat_system(vec![]).unwrap();
        let t: FormulaSet = [Formula::bottom(0)].into_iter().collect();
        let r = possible_restriction(&sys, &Pointwise, &t, &[3, 5], &DeriveConfig::minimal(8)).unwrap();
        assert_eq!(r.members, vec![3, 5]);
        assert_eq!(r.upper_bound, 5);
    }

    #[test]
    fn perfect_restriction_needs_horizon() {
        let sys = Arc::new(make_nat_system(vec![("R".into(), 2, oracles::perfect_sum())]).unwrap());
        let phi = parse_formula("exists x1 R(x0,x1)", &sys.signature()).unwrap();
        let t: FormulaSet = [phi].into_iter().collect();
        let ll: Arc<dyn LlRelation> = Arc::new(ll_t(&t, ClosureMode::Full, 64));
        let cfg = DeriveConfig::minimal(64);
        // Stage 0 is empty, so the formula is declared vacuously there.
        let r = possible_restriction(&sys, ll.as_ref(), &t, &[8], &cfg).unwrap();
        assert_eq!(r.members, vec![0, 8]);
        let report = verify_t_submodel(&sys, &ll, &r, &t, &cfg).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.underivable.iter().any(|(_, c)| c == &vec![8]));

        let r = possible_restriction(&sys, ll.as_ref(), &t, &[8, 22], &cfg).unwrap();
        assert_eq!(r.members, vec![0, 8, 22]);
        let report = verify_t_submodel(&sys, &ll, &r, &t, &cfg).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.underivable.iter().all(|(_, c)| c != &vec![8]));
        assert!(report.compared >= 8);

        let r = seeded_restriction(&sys, ll.as_ref(), &t, &[8], &cfg).unwrap();
        assert_eq!(r.members, vec![0, 8, 22]);
        assert!(verify_t_submodel(&sys, &ll, &r, &t, &cfg).unwrap().passed());
    }

    #[test]
    fn restricting_to_everything_is_identity() {
        let sys = crate::demos::zfc_system();
        let all = sys.index_set().indices().unwrap().to_vec();
        let sub = restrict(&sys, &all).unwrap();
        assert_eq!(sub.index_set().indices().unwrap(), &all[..]);
        let top = *all.last().unwrap();
        let single = restrict(&sys, &[top]).unwrap();
        assert_eq!(single.index_set().indices().unwrap().len(), 1);
        assert!(matches!(restrict(&sys, &[1, 2]), Err(SubmodelError::NotDirected)));
        let _ = AllRelation;
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::adequacy::ll_t;
    use crate::corpus::{corpus, CorpusLimits};
    use crate::syntax::ClosureMode;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn restrictions_pass_and_supersets_stay_valid(seed in any::<u64>(), extra in any::<u64>()) {
            let case = corpus(seed, 1, &CorpusLimits::default()).pop().unwrap();
            let sys = Arc::new(case.system);
            let ll: Arc<dyn LlRelation> = Arc::new(ll_t(&case.theory, ClosureMode::Full, 32));
            let cfg = DeriveConfig::minimal(32);
            let r = possible_restriction(&sys, ll.as_ref(), &case.theory, &[], &cfg).unwrap();
            prop_assert!(verify_t_submodel(&sys, &ll, &r, &case.theory, &cfg).unwrap().passed());
            let iset = sys.index_set();
            let list = iset.indices().unwrap();
            let mut members = r.members.clone();
            members.extend(list.iter().enumerate().filter(|(k, _)| extra >> k & 1 == 1).map(|(_, &i)| i));
            members.push(iset.upper_bound(&members).unwrap());
            members.sort_by(|a, b| iset.cmp_canonical(*a, *b));
            members.dedup();
            let bigger = Restriction { members, ..r };
            prop_assert!(verify_t_submodel(&sys, &ll, &bigger, &case.theory, &cfg).unwrap().passed());
        }
    }
}
