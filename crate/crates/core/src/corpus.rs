//! Seeded random systems and formulas for differential testing.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{Formula, FormulaSet, Node, Signature};
use crate::system::{cartesian, cover_structure, ClassicalStructure, Elem, StageSystem};

/// Size limits for generated cases.
#[derive(Clone, Copy, Debug)]
pub struct CorpusLimits {
    pub max_stages: usize,
    pub max_elements: usize,
    pub max_relations: usize,
    pub max_depth: usize,
    pub max_formulas: usize,
}

impl Default for CorpusLimits {
    fn default() -> Self {
        CorpusLimits {
            max_stages: 4,
            max_elements: 5,
            max_relations: 2,
            max_depth: 3,
            max_formulas: 3,
        }
    }
}

pub struct CorpusCase {
    pub seed: u64,
    pub system: StageSystem,
    pub theory: FormulaSet,
}

const NAMES: [&str; 4] = ["P", "Q", "S", "U"];

fn random_structure(rng: &mut ChaCha8Rng, elements: usize, max_relations: usize) -> ClassicalStructure {
    let carrier: Vec<Elem> = (0..elements as Elem).collect();
    let count = rng.gen_range(1..=max_relations.max(1));
    let relations = (0..count)
        .map(|k| {
            let arity = rng.gen_range(0..=2);
            let density = rng.gen_range(0.2..0.8);
            let tuples: HashSet<Vec<Elem>> = cartesian(&carrier, arity)
                .into_iter()
                .filter(|_| rng.gen_bool(density))
                .collect();
            (NAMES[k % NAMES.len()].to_string(), arity, tuples)
        })
        .collect();
    ClassicalStructure {
        carrier,
        relations,
        element_names: None,
        truncated_at: None,
    }
}

/// A system of distinct stages ordered by inclusion; the last stage is the
/// whole carrier, so the index set has a top.
pub fn random_system(rng: &mut ChaCha8Rng, limits: &CorpusLimits) -> StageSystem {
    let elements = rng.gen_range(1..=limits.max_elements.max(1));
    let m = random_structure(rng, elements, limits.max_relations);
    let stages = rng.gen_range(1..=limits.max_stages.max(1));
    let full: Vec<Elem> = (0..elements as Elem).collect();
    let mut seen: BTreeSet<Vec<Elem>> = BTreeSet::new();
    seen.insert(full.clone());
    let mut cover = Vec::new();
    for _ in 0..stages.saturating_sub(1) * 4 {
        if cover.len() + 1 >= stages {
            break;
        }
        let s: Vec<Elem> = full.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if seen.insert(s.clone()) {
            cover.push(s);
        }
    }
    cover.shuffle(rng);
    cover.push(full);
    cover_structure(&m, &cover).expect("a cover with a top is directed")
}

/// A system with the single stage `M = carrier`.
pub fn one_stage_system(rng: &mut ChaCha8Rng, limits: &CorpusLimits) -> StageSystem {
    let elements = rng.gen_range(1..=limits.max_elements.max(1));
    let m = random_structure(rng, elements, limits.max_relations);
    cover_structure(&m, &[(0..elements as Elem).collect()]).expect("single stage")
}

fn random_node(rng: &mut ChaCha8Rng, sig: &Signature, bound: usize, depth: usize) -> Node {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        let usable: Vec<&(String, usize)> = sig.symbols().iter().filter(|(_, a)| *a == 0 || bound > 0).collect();
        if usable.is_empty() || rng.gen_bool(0.05) {
            return Node::Bottom;
        }
        let (name, arity) = usable[rng.gen_range(0..usable.len())];
        let args: Vec<usize> = (0..*arity).map(|_| rng.gen_range(0..bound)).collect();
        return Node::atom(name.clone(), args);
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 => Node::not(random_node(rng, sig, bound, d)),
        1 => Node::and(random_node(rng, sig, bound, d), random_node(rng, sig, bound, d)),
        2 => Node::or(random_node(rng, sig, bound, d), random_node(rng, sig, bound, d)),
        3 => Node::implies(random_node(rng, sig, bound, d), random_node(rng, sig, bound, d)),
        4 => Node::forall(random_node(rng, sig, bound + 1, d)),
        _ => Node::exists(random_node(rng, sig, bound + 1, d)),
    }
}

/// A formula of the given arity with at most `depth` nested connectives.
pub fn random_formula(rng: &mut ChaCha8Rng, sig: &Signature, arity: usize, depth: usize) -> Formula {
    Formula::new(arity, random_node(rng, sig, arity, depth)).expect("levels stay bound")
}

pub fn random_theory(rng: &mut ChaCha8Rng, sig: &Signature, limits: &CorpusLimits) -> FormulaSet {
    let count = rng.gen_range(1..=limits.max_formulas.max(1));
    let mut t = FormulaSet::new();
    for _ in 0..count {
        let arity = rng.gen_range(0..=2);
        let depth = rng.gen_range(1..=limits.max_depth.max(1));
        t.insert(random_formula(rng, sig, arity, depth));
    }
    t
}

/// One case per seed `base, base + 1, …`.
pub fn corpus(base: u64, count: usize, limits: &CorpusLimits) -> Vec<CorpusCase> {
    (0..count as u64)
        .map(|k| {
            let seed = base + k;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let system = random_system(&mut rng, limits);
            let theory = random_theory(&mut rng, &system.signature(), limits);
            CorpusCase { seed, system, theory }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_respect_limits() {
        let limits = CorpusLimits::default();
        for case in corpus(7, 40, &limits) {
            let iset = case.system.index_set();
            let list = iset.indices().unwrap();
            assert!(list.len() <= limits.max_stages);
            assert!(iset.is_directed());
            assert!(iset.upper_bound(list).is_some());
            assert!(case.system.union_elements().unwrap().len() <= limits.max_elements);
            assert!(case.system.relations().len() <= limits.max_relations);
            for phi in case.theory.iter() {
                assert!(phi.node.depth() <= limits.max_depth);
                assert!(phi.node.well_formed(phi.arity));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = corpus(3, 5, &CorpusLimits::default());
        let b = corpus(3, 5, &CorpusLimits::default());
        for (x, y) in a.iter().zip(&b) {
            assert!(x.theory.same_members(&y.theory));
            assert_eq!(x.system.index_set(), y.system.index_set());
        }
    }
}
