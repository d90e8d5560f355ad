//! Witness sets and the relation `≪_T` built from them.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use thiserror::Error;

use crate::filters::{ll_holds, successors, IndexSetRepr, LlRelation, Provenance, TruthOr};
use crate::semantics::{eval_m, eval_tarskian, EvalError};
use crate::syntax::{hat_closure, ClosureMode, Formula, FormulaSet, Node};
use crate::system::{Context, Elem, Index, StageSystem};
use crate::truth::TruthValue;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdequacyError {
    #[error("`{0}` is not an existential formula")]
    NotExistential(String),
    #[error("context length {len} does not match arity {arity}")]
    Arity { len: usize, arity: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Which case of the witness-set definition produced a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessBranch {
    Found,
    /// No witness exists; the set is every index.
    NoWitness,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessSet {
    pub set: IndexSetRepr,
    pub branch: WitnessBranch,
}

/// The indices whose stage holds a witness `b` of `Ψ[āb]`, or every index
/// when there is none. On `ℕ` the scan covers elements below `budget`; a
/// formula listed in `certified` is taken to have no witness beyond it.
fn witness_set_of(
    sys: &StageSystem,
    matrix: &Formula,
    a: &[Elem],
    budget: u64,
    certified: bool,
) -> Result<WitnessSet, AdequacyError> {
    let iset = sys.index_set();
    if let Some(union) = sys.union() {
        let mut env = a.to_vec();
        let mut witnesses = Vec::new();
        for &b in &union.carrier {
            env.push(b);
            if eval_tarskian(union, matrix, &env) {
                witnesses.push(b);
            }
            env.pop();
        }
        if witnesses.is_empty() {
            return Ok(WitnessSet {
                set: IndexSetRepr::All,
                branch: WitnessBranch::NoWitness,
            });
        }
        let members: BTreeSet<Index> = iset
            .indices()
            .expect("finite")
            .iter()
            .copied()
            .filter(|&i| witnesses.iter().any(|&b| sys.stage_contains(i, b)))
            .collect();
        return Ok(WitnessSet {
            set: IndexSetRepr::Explicit(members).normalize(iset),
            branch: WitnessBranch::Found,
        });
    }
    let top = a.iter().map(|&e| e as Index + 1).max().unwrap_or(0);
    let mut open = false;
    for b in 0..budget as Elem {
        let mut env = a.to_vec();
        env.push(b);
        let c = vec![top.max(b as Index + 1); env.len()];
        match eval_m(sys, &c, matrix, &env, budget)? {
            TruthValue::True => {
                let h = b as Index + 1;
                if !open {
                    return Ok(WitnessSet {
                        set: IndexSetRepr::UpFrom(h).normalize(iset),
                        branch: WitnessBranch::Found,
                    });
                }
                return Ok(WitnessSet {
                    set: IndexSetRepr::UnknownBeyond {
                        budget,
                        known: (h..=budget).collect(),
                    },
                    branch: WitnessBranch::Unknown,
                });
            }
            TruthValue::False => {}
            TruthValue::Unknown { .. } => open = true,
        }
    }
    if !open && (matrix.node.forced() == Some(false) || certified) {
        return Ok(WitnessSet {
            set: IndexSetRepr::All,
            branch: WitnessBranch::NoWitness,
        });
    }
    Ok(WitnessSet {
        set: IndexSetRepr::UnknownBeyond {
            budget,
            known: BTreeSet::new(),
        },
        branch: WitnessBranch::Unknown,
    })
}

/// Witness set of `∃x Ψ` for `ā ∈ M_C`.
pub fn witness_set(
    sys: &StageSystem,
    exists_phi: &Formula,
    a: &[Elem],
    c: &[Index],
    budget: u64,
) -> Result<WitnessSet, AdequacyError> {
    let Node::Exists(body) = &exists_phi.node else {
        return Err(AdequacyError::NotExistential(exists_phi.to_string()));
    };
    if c.len() != exists_phi.arity || a.len() != exists_phi.arity {
        return Err(AdequacyError::Arity {
            len: c.len(),
            arity: exists_phi.arity,
        });
    }
    if !sys.in_context(c, a) {
        return Err(EvalError::NotInStage {
            assignment: sys.format_tuple(a),
            context: sys.format_context(c),
        }
        .into());
    }
    let matrix = Formula {
        arity: exists_phi.arity + 1,
        node: (**body).clone(),
    };
    witness_set_of(sys, &matrix, a, budget, false)
}

struct Existential {
    formula: Formula,
    matrix: Formula,
    certified: bool,
}

#[derive(Default)]
struct Cache {
    per_tuple: HashMap<(usize, Vec<Elem>), WitnessSet>,
    per_context: HashMap<(usize, Context), IndexSetRepr>,
}

/// `≪_T`: `C ≪_T i` iff for every existential `∃xΨ` of the closure of `T`
/// whose matrix has `|C| + 1` variables, every `ā ∈ M_C` has a witness in
/// `M_i`; existentials with fewer variables constrain the prefixes of `C`.
pub struct AdequateRelation {
    existentials: Vec<Existential>,
    budget: Mutex<u64>,
    cache: Mutex<Cache>,
}

impl AdequateRelation {
    /// The existential formulas that constrain the relation.
    pub fn existentials(&self) -> Vec<&Formula> {
        self.existentials.iter().map(|e| &e.formula).collect()
    }

    pub fn budget(&self) -> u64 {
        *self.budget.lock().expect("budget lock")
    }

    /// Raising the budget drops cached sets, which may have been unknown.
    pub fn set_budget(&self, budget: u64) {
        let mut b = self.budget.lock().expect("budget lock");
        if budget > *b {
            *self.cache.lock().expect("cache lock") = Cache::default();
        }
        *b = budget;
    }

    fn tuple_set(&self, sys: &StageSystem, k: usize, a: &[Elem]) -> WitnessSet {
        let key = (k, a.to_vec());
        if let Some(w) = self.cache.lock().expect("cache lock").per_tuple.get(&key) {
            return w.clone();
        }
        let e = &self.existentials[k];
        let w = witness_set_of(sys, &e.matrix, a, self.budget(), e.certified).unwrap_or(WitnessSet {
            set: IndexSetRepr::UnknownBeyond {
                budget: self.budget(),
                known: BTreeSet::new(),
            },
            branch: WitnessBranch::Unknown,
        });
        self.cache
            .lock()
            .expect("cache lock")
            .per_tuple
            .insert(key, w.clone());
        w
    }

    /// `⋂_{ā ∈ M_C}` of the witness sets of existential `k`.
    fn context_set(&self, sys: &StageSystem, k: usize, c: &[Index]) -> IndexSetRepr {
        let key = (k, c.to_vec());
        if let Some(s) = self.cache.lock().expect("cache lock").per_context.get(&key) {
            return s.clone();
        }
        let iset = sys.index_set();
        let mut acc = IndexSetRepr::All;
        for a in sys.tuples(c) {
            acc = acc.intersect(&self.tuple_set(sys, k, &a).set, iset);
            if acc == IndexSetRepr::Empty {
                break;
            }
        }
        self.cache
            .lock()
            .expect("cache lock")
            .per_context
            .insert(key, acc.clone());
        acc
    }

    /// The witness set of existential `k` for one tuple.
    pub fn witness(&self, sys: &StageSystem, formula: &Formula, a: &[Elem]) -> Option<WitnessSet> {
        let k = self.existentials.iter().position(|e| &e.formula == formula)?;
        Some(self.tuple_set(sys, k, a))
    }
}

impl LlRelation for AdequateRelation {
    fn raw(&self, sys: &StageSystem, c: &[Index], i: Index) -> TruthValue {
        let iset = sys.index_set();
        let mut acc = TruthValue::True;
        for (k, e) in self.existentials.iter().enumerate() {
            let n = e.formula.arity;
            let v = if n == c.len() {
                self.context_set(sys, k, c).contains(iset, i)
            } else if n < c.len() {
                self.context_set(sys, k, &c[..n]).contains(iset, c[n])
            } else {
                // Witness sets are never empty, so the projections are total.
                TruthValue::True
            };
            acc = acc.and(v);
            if acc.is_false() {
                break;
            }
        }
        acc
    }

    fn successors_raw(&self, sys: &StageSystem, c: &[Index]) -> IndexSetRepr {
        let iset = sys.index_set();
        let mut acc = IndexSetRepr::All;
        for (k, e) in self.existentials.iter().enumerate() {
            let n = e.formula.arity;
            if n == c.len() {
                acc = acc.intersect(&self.context_set(sys, k, c), iset);
            } else if n < c.len() {
                match self.context_set(sys, k, &c[..n]).contains(iset, c[n]) {
                    TruthValue::True => {}
                    TruthValue::False => return IndexSetRepr::Empty,
                    TruthValue::Unknown { budget } => {
                        acc = acc.intersect(
                            &IndexSetRepr::UnknownBeyond {
                                budget,
                                known: BTreeSet::new(),
                            },
                            iset,
                        )
                    }
                }
            }
        }
        acc
    }

    fn provenance(&self) -> Provenance {
        Provenance::Computed
    }
}

/// Builds `≪_T` from the closure of `T`.
pub fn ll_t(t: &FormulaSet, mode: ClosureMode, budget: u64) -> AdequateRelation {
    ll_t_certified(t, mode, budget, &[])
}

/// As [`ll_t`], with existentials that are declared to have no witness
/// beyond those found within the budget.
pub fn ll_t_certified(t: &FormulaSet, mode: ClosureMode, budget: u64, certified: &[Formula]) -> AdequateRelation {
    let hat = hat_closure(t, mode);
    let existentials = hat
        .iter()
        .filter_map(|phi| match &phi.node {
            Node::Exists(body) => Some(Existential {
                formula: phi.clone(),
                matrix: Formula {
                    arity: phi.arity + 1,
                    node: (**body).clone(),
                },
                certified: certified.contains(phi),
            }),
            _ => None,
        })
        .collect();
    AdequateRelation {
        existentials,
        budget: Mutex::new(budget),
        cache: Mutex::new(Cache::default()),
    }
}

/// Least index `i` with `C ≪ i` in canonical order.
pub fn horizon(ll: &dyn LlRelation, sys: &StageSystem, c: &[Index]) -> TruthOr<Option<Index>> {
    successors(ll, sys, c).least(sys.index_set())
}

#[derive(Clone, Debug, Default)]
pub struct AdequacyReport {
    pub checked: usize,
    pub violations: Vec<(Context, Index)>,
    pub unknowns: Vec<(Context, Index)>,
}

impl AdequacyReport {
    pub fn is_adequate(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `C ≪ i ⇒ C ≪_T i` on the probes.
pub fn check_adequate(
    ll: &dyn LlRelation,
    ll_t: &dyn LlRelation,
    sys: &StageSystem,
    probes: &[(Context, Index)],
) -> AdequacyReport {
    let mut report = AdequacyReport::default();
    for (c, i) in probes {
        if !ll_holds(ll, sys, c, *i).is_true() {
            continue;
        }
        report.checked += 1;
        match ll_holds(ll_t, sys, c, *i) {
            TruthValue::True => {}
            TruthValue::False => report.violations.push((c.clone(), *i)),
            TruthValue::Unknown { .. } => report.unknowns.push((c.clone(), *i)),
        }
    }
    report
}

/// Every `(C, i)` with `|C| ≤ max_len`; over `ℕ` indices range up to `grid`.
pub fn grid_probes(sys: &StageSystem, max_len: usize, grid: u64) -> Vec<(Context, Index)> {
    let list: Vec<Index> = match sys.index_set().indices() {
        Some(l) => l.to_vec(),
        None => (0..=grid).collect(),
    };
    let mut out = Vec::new();
    let mut layer: Vec<Context> = vec![Vec::new()];
    for len in 0..=max_len {
        for c in &layer {
            for &i in &list {
                out.push((c.clone(), i));
            }
        }
        if len < max_len {
            layer = layer
                .iter()
                .flat_map(|c| {
                    list.iter().map(move |&i| {
                        let mut d = c.clone();
                        d.push(i);
                        d
                    })
                })
                .collect();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::Pointwise;
    use crate::syntax::parse_formula;
    use crate::system::{make_nat_system, oracles};

    fn perfect() -> StageSystem {
        make_nat_system(vec![("R".into(), 2, oracles::perfect_sum())]).unwrap()
    }

    fn theory(sys: &StageSystem, text: &str) -> FormulaSet {
        [parse_formula(text, &sys.signature()).unwrap()].into_iter().collect()
    }

    #[test]
    fn perfect_number_witness_sets() {
        let sys = perfect();
        let phi = parse_formula("exists x1 R(x0,x1)", &sys.signature()).unwrap();
        let w = witness_set(&sys, &phi, &[7], &[8], 64).unwrap();
        assert_eq!(w.set, IndexSetRepr::UpFrom(22));
        assert_eq!(witness_set(&sys, &phi, &[0], &[8], 64).unwrap().set, IndexSetRepr::UpFrom(7));
    }

    #[test]
    fn perfect_number_relation() {
        let sys = perfect();
        let ll = ll_t(&theory(&sys, "exists x1 R(x0,x1)"), ClosureMode::Full, 64);
        assert!(ll.raw(&sys, &[8], 22).is_true());
        assert!(ll.raw(&sys, &[8], 21).is_false());
        assert_eq!(horizon(&ll, &sys, &[8]), TruthOr::Known(Some(22)));
    }

    #[test]
    fn empty_theory_is_everything() {
        let sys = perfect();
        let ll = ll_t(&FormulaSet::new(), ClosureMode::Full, 8);
        assert!(ll.raw(&sys, &[3, 1], 0).is_true());
        assert_eq!(horizon(&ll, &sys, &[5]), TruthOr::Known(Some(0)));
    }

    #[test]
    fn small_budget_is_unknown_then_resolves() {
        let sys = perfect();
        let ll = ll_t(&theory(&sys, "exists x1 R(x0,x1)"), ClosureMode::Full, 10);
        assert!(ll.raw(&sys, &[8], 22).is_unknown());
        ll.set_budget(64);
        assert!(ll.raw(&sys, &[8], 22).is_true());
    }

    #[test]
    fn pointwise_is_not_adequate_for_the_universal_bound() {
        let sys = make_nat_system(vec![("<=".into(), 2, oracles::leq())]).unwrap();
        let ll = ll_t(&theory(&sys, "forall x1 (x1 <= x0)"), ClosureMode::Full, 30);
        let probes = grid_probes(&sys, 1, 5);
        let report = check_adequate(&Pointwise, &ll, &sys, &probes);
        assert!(!report.violations.is_empty());
        assert!(check_adequate(&ll, &ll, &sys, &probes).violations.is_empty());
    }
}
