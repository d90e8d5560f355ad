//! Stage systems: a directed index set, finite monotone stages and
//! compatible relation families.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::syntax::Signature;

pub type Index = u64;
pub type Elem = u32;
pub type Context = Vec<Index>;

/// Largest carrier accepted for a subset lattice.
pub const MAX_POWERSET_CARRIER: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("order is not reflexive at `{0}`")]
    NotReflexive(String),
    #[error("order is not transitive: `{0}` <= `{1}` <= `{2}`")]
    NotTransitive(String, String, String),
    #[error("indices `{0}` and `{1}` have no upper bound")]
    NotDirected(String, String),
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("every stage is empty")]
    AllStagesEmpty,
    #[error("stages are not monotone: `{0}` <= `{1}` but M_{0} is not contained in M_{1}")]
    NotMonotone(String, String),
    #[error("unknown index `{0}`")]
    UnknownIndex(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("duplicate relation `{0}`")]
    DuplicateRelation(String),
    #[error("relation `{0}`: explicit signatures need a finite index set")]
    ExplicitOnInfinite(String),
    #[error("relation `{name}`: context {context} has the wrong length or invalid indices")]
    BadContext { name: String, context: String },
    #[error("relation `{name}`: tuple outside M_C at context {context}")]
    TupleOutsideStage { name: String, context: String },
    #[error("table sizes do not match the carrier of {0} elements")]
    TableSize(usize),
    #[error("carrier of {0} elements is too large for a subset lattice")]
    CarrierTooLarge(usize),
    #[error("cover does not have the carrier as its union")]
    CoverUnion,
    #[error("the natural numbers need an explicit cutoff")]
    NeedsCutoff,
}

/// A finite preorder given by its reflexive-transitive table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poset {
    names: Vec<String>,
    le: Vec<Vec<bool>>,
    order: Vec<Index>,
}

impl Poset {
    /// Checks reflexivity, transitivity, non-emptiness and directedness.
    pub fn new(names: Vec<String>, le: Vec<Vec<bool>>) -> Result<Self, SystemError> {
        let n = names.len();
        if n == 0 {
            return Err(SystemError::EmptyIndexSet);
        }
        if le.len() != n || le.iter().any(|row| row.len() != n) {
            return Err(SystemError::TableSize(n));
        }
        for a in 0..n {
            if !le[a][a] {
                return Err(SystemError::NotReflexive(names[a].clone()));
            }
        }
        for a in 0..n {
            for b in 0..n {
                if !le[a][b] {
                    continue;
                }
                for c in 0..n {
                    if le[b][c] && !le[a][c] {
                        return Err(SystemError::NotTransitive(
                            names[a].clone(),
                            names[b].clone(),
                            names[c].clone(),
                        ));
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                if !(0..n).any(|c| le[a][c] && le[b][c]) {
                    return Err(SystemError::NotDirected(names[a].clone(), names[b].clone()));
                }
            }
        }
        Ok(Poset {
            names,
            le,
            order: (0..n as Index).collect(),
        })
    }

    /// Builds the reflexive-transitive closure of the given strict pairs.
    pub fn from_pairs(names: Vec<String>, pairs: &[(usize, usize)]) -> Result<Self, SystemError> {
        let n = names.len();
        let mut le = vec![vec![false; n]; n];
        for (a, row) in le.iter_mut().enumerate() {
            row[a] = true;
        }
        for &(a, b) in pairs {
            le[a][b] = true;
        }
        for k in 0..n {
            for a in 0..n {
                if le[a][k] {
                    for b in 0..n {
                        if le[k][b] {
                            le[a][b] = true;
                        }
                    }
                }
            }
        }
        Poset::new(names, le)
    }

    /// A chain `0 < 1 < … < n-1` with indices named by number.
    pub fn chain(n: usize) -> Result<Self, SystemError> {
        let names = (0..n).map(|i| i.to_string()).collect();
        let pairs: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Poset::from_pairs(names, &pairs)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn le(&self, a: Index, b: Index) -> bool {
        self.le[a as usize][b as usize]
    }
}

/// Directed index sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexSet {
    Poset(Poset),
    /// `ℕ` with its usual order.
    Naturals,
    /// Finite subsets of a carrier, as bit masks ordered by inclusion.
    Powerset { carrier: usize, order: Vec<Index> },
    /// A directed subset of a parent index set, keeping the parent's ids.
    Subset { parent: Box<IndexSet>, members: Vec<Index> },
}

fn lex_key(mask: Index) -> (u32, Vec<u32>) {
    let bits: Vec<u32> = (0..64).filter(|b| mask >> b & 1 == 1).collect();
    (mask.count_ones(), bits)
}

impl IndexSet {
    pub fn powerset(carrier: usize) -> Result<Self, SystemError> {
        if carrier > MAX_POWERSET_CARRIER {
            return Err(SystemError::CarrierTooLarge(carrier));
        }
        let mut order: Vec<Index> = (0..(1u64 << carrier)).collect();
        order.sort_by_cached_key(|&m| lex_key(m));
        Ok(IndexSet::Powerset { carrier, order })
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, IndexSet::Naturals)
    }

    /// Finite index sets, listed in canonical order.
    pub fn indices(&self) -> Option<&[Index]> {
        match self {
            IndexSet::Poset(p) => Some(&p.order),
            IndexSet::Naturals => None,
            IndexSet::Powerset { order, .. } => Some(order),
            IndexSet::Subset { members, .. } => Some(members),
        }
    }

    pub fn contains(&self, i: Index) -> bool {
        match self {
            IndexSet::Poset(p) => (i as usize) < p.len(),
            IndexSet::Naturals => true,
            IndexSet::Powerset { carrier, .. } => i < (1u64 << carrier),
            IndexSet::Subset { members, .. } => members.contains(&i),
        }
    }

    pub fn le(&self, a: Index, b: Index) -> bool {
        match self {
            IndexSet::Poset(p) => p.le(a, b),
            IndexSet::Naturals => a <= b,
            IndexSet::Powerset { .. } => a & !b == 0,
            IndexSet::Subset { parent, .. } => parent.le(a, b),
        }
    }

    /// Canonical order: numeric on `ℕ`, size then lexicographic on subsets,
    /// declaration order on explicit posets.
    pub fn cmp_canonical(&self, a: Index, b: Index) -> std::cmp::Ordering {
        match self {
            IndexSet::Poset(_) | IndexSet::Naturals => a.cmp(&b),
            IndexSet::Powerset { .. } => lex_key(a).cmp(&lex_key(b)),
            IndexSet::Subset { parent, .. } => parent.cmp_canonical(a, b),
        }
    }

    pub fn min_index(&self) -> Index {
        match self.indices() {
            Some(list) => list[0],
            None => 0,
        }
    }

    /// An upper bound: maximum on `ℕ`, union on subsets, otherwise the first
    /// index in canonical order above all given ones.
    pub fn upper_bound(&self, of: &[Index]) -> Option<Index> {
        match self {
            IndexSet::Naturals => Some(of.iter().copied().max().unwrap_or(0)),
            IndexSet::Powerset { .. } => Some(of.iter().fold(0, |acc, &i| acc | i)),
            _ => self
                .indices()
                .expect("finite")
                .iter()
                .copied()
                .find(|&j| of.iter().all(|&i| self.le(i, j))),
        }
    }

    /// `↑i` for finite index sets.
    pub fn up_set(&self, i: Index) -> Vec<Index> {
        self.indices()
            .expect("finite")
            .iter()
            .copied()
            .filter(|&j| self.le(i, j))
            .collect()
    }

    pub fn is_directed(&self) -> bool {
        match self.indices() {
            None => true,
            Some(list) => {
                !list.is_empty()
                    && list.iter().all(|&a| {
                        list.iter()
                            .all(|&b| list.iter().any(|&c| self.le(a, c) && self.le(b, c)))
                    })
            }
        }
    }

    /// Every context of length `n` over a finite index set, lexicographic in
    /// canonical order.
    pub fn all_contexts(&self, n: usize) -> Vec<Context> {
        let list = self.indices().expect("finite");
        let mut out = vec![Vec::new()];
        for _ in 0..n {
            let mut next = Vec::with_capacity(out.len() * list.len());
            for c in &out {
                for &i in list {
                    let mut d = c.clone();
                    d.push(i);
                    next.push(d);
                }
            }
            out = next;
        }
        out
    }
}

/// A named pure predicate on element tuples.
#[derive(Clone)]
pub struct Oracle {
    pub name: String,
    f: Arc<dyn Fn(&[Elem]) -> bool + Send + Sync>,
}

impl Oracle {
    pub fn new(name: impl Into<String>, f: impl Fn(&[Elem]) -> bool + Send + Sync + 'static) -> Self {
        Oracle {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn call(&self, tuple: &[Elem]) -> bool {
        (self.f)(tuple)
    }

    /// Restriction of a fixed set of tuples.
    pub fn table(tuples: BTreeSet<Vec<Elem>>) -> Self {
        Oracle::new("table", move |t| tuples.contains(t))
    }
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oracle({})", self.name)
    }
}

pub fn is_perfect(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut sum = 1;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            sum += d;
            if d * d != n {
                sum += n / d;
            }
        }
        d += 1;
    }
    sum == n
}

/// Built-in predicates on natural-number elements.
pub mod oracles {
    use super::{is_perfect, Oracle};

    pub fn leq() -> Oracle {
        Oracle::new("leq", |t| t[0] <= t[1])
    }

    pub fn lt() -> Oracle {
        Oracle::new("lt", |t| t[0] < t[1])
    }

    pub fn identity() -> Oracle {
        Oracle::new("eq", |t| t.windows(2).all(|w| w[0] == w[1]))
    }

    /// `a0 + a1` is a perfect number.
    pub fn perfect_sum() -> Oracle {
        Oracle::new("perfect_sum", |t| is_perfect(t.iter().map(|&a| a as u64).sum()))
    }

    /// `a0 >= n`.
    pub fn at_least(n: u32) -> Oracle {
        Oracle::new(format!("ge{n}"), move |t| t[0] >= n)
    }
}

/// `R_C` for each context `C`, either tabulated per context or given by a
/// predicate restricted to `M_C`.
#[derive(Clone, Debug)]
pub enum RelationFamily {
    Tabled(BTreeMap<Context, BTreeSet<Vec<Elem>>>),
    Oracle(Oracle),
}

/// The contexts `C` with `R : C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignatureMode {
    AllContexts,
    Explicit(BTreeSet<Context>),
}

#[derive(Clone, Debug)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
    pub family: RelationFamily,
    pub signature: SignatureMode,
}

impl Relation {
    pub fn oracle(name: impl Into<String>, arity: usize, oracle: Oracle) -> Self {
        Relation {
            name: name.into(),
            arity,
            family: RelationFamily::Oracle(oracle),
            signature: SignatureMode::AllContexts,
        }
    }

    /// A tabled family whose signature is exactly its table's contexts.
    pub fn tabled(name: impl Into<String>, arity: usize, table: BTreeMap<Context, BTreeSet<Vec<Elem>>>) -> Self {
        let contexts = table.keys().cloned().collect();
        Relation {
            name: name.into(),
            arity,
            family: RelationFamily::Tabled(table),
            signature: SignatureMode::Explicit(contexts),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Stages {
    /// `M_i = {0, …, i-1}`.
    Naturals,
    /// `M_i = i`.
    Powerset,
    /// Sorted element lists per poset index.
    Table(Vec<Vec<Elem>>),
}

/// A finite classical structure.
#[derive(Clone, Debug)]
pub struct ClassicalStructure {
    pub carrier: Vec<Elem>,
    pub relations: Vec<(String, usize, HashSet<Vec<Elem>>)>,
    pub element_names: Option<Vec<String>>,
    /// Set when the carrier is a cutoff of the natural numbers.
    pub truncated_at: Option<u64>,
}

impl ClassicalStructure {
    pub fn holds(&self, rel: &str, tuple: &[Elem]) -> bool {
        self.relations
            .iter()
            .find(|(n, _, _)| n == rel)
            .map(|(_, _, t)| t.contains(tuple))
            .unwrap_or(false)
    }

    pub fn relation_arity(&self, rel: &str) -> Option<usize> {
        self.relations.iter().find(|(n, _, _)| n == rel).map(|(_, a, _)| *a)
    }
}

/// A directed family of finite stages with compatible relations.
#[derive(Clone, Debug)]
pub struct StageSystem {
    index: IndexSet,
    elements: Option<Vec<String>>,
    stages: Stages,
    relations: Vec<Relation>,
    union_cache: OnceLock<ClassicalStructure>,
}

impl StageSystem {
    /// Validates monotonicity, a non-empty stage and the relation families.
    pub fn new(
        index: IndexSet,
        elements: Option<Vec<String>>,
        stages: Stages,
        relations: Vec<Relation>,
    ) -> Result<Self, SystemError> {
        let sys = StageSystem {
            index,
            elements,
            stages,
            relations,
            union_cache: OnceLock::new(),
        };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<(), SystemError> {
        if let Some(list) = self.index.indices() {
            if list.is_empty() {
                return Err(SystemError::EmptyIndexSet);
            }
            if !self.index.is_directed() {
                return Err(SystemError::NotDirected(
                    self.index_name(list[0]),
                    self.index_name(*list.last().unwrap()),
                ));
            }
            if let Stages::Table(t) = &self.stages {
                let n = self.elements.as_ref().map(|e| e.len()).unwrap_or(0);
                for stage in t {
                    if let Some(&e) = stage.iter().find(|&&e| e as usize >= n) {
                        return Err(SystemError::UnknownElement(e.to_string()));
                    }
                }
            }
            if list.iter().all(|&i| self.stage(i).is_empty()) {
                return Err(SystemError::AllStagesEmpty);
            }
            if let Stages::Table(_) = &self.stages {
                for &a in list {
                    for &b in list {
                        if self.index.le(a, b) && !self.stage(a).iter().all(|&e| self.stage_contains(b, e)) {
                            return Err(SystemError::NotMonotone(self.index_name(a), self.index_name(b)));
                        }
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        for r in &self.relations {
            if !seen.insert(r.name.as_str()) {
                return Err(SystemError::DuplicateRelation(r.name.clone()));
            }
            if let SignatureMode::Explicit(set) = &r.signature {
                if !self.index.is_finite() {
                    return Err(SystemError::ExplicitOnInfinite(r.name.clone()));
                }
                for c in set {
                    if c.len() != r.arity || !c.iter().all(|&i| self.index.contains(i)) {
                        return Err(SystemError::BadContext {
                            name: r.name.clone(),
                            context: self.format_context(c),
                        });
                    }
                }
            }
            if let RelationFamily::Tabled(table) = &r.family {
                let needed: Vec<Context> = match &r.signature {
                    SignatureMode::Explicit(set) => set.iter().cloned().collect(),
                    SignatureMode::AllContexts => {
                        if !self.index.is_finite() {
                            return Err(SystemError::ExplicitOnInfinite(r.name.clone()));
                        }
                        self.index.all_contexts(r.arity)
                    }
                };
                for c in &needed {
                    if !table.contains_key(c) {
                        return Err(SystemError::BadContext {
                            name: r.name.clone(),
                            context: self.format_context(c),
                        });
                    }
                }
                for (c, tuples) in table {
                    if c.len() != r.arity || !c.iter().all(|&i| self.index.contains(i)) {
                        return Err(SystemError::BadContext {
                            name: r.name.clone(),
                            context: self.format_context(c),
                        });
                    }
                    for t in tuples {
                        if t.len() != r.arity || !self.in_context(c, t) {
                            return Err(SystemError::TupleOutsideStage {
                                name: r.name.clone(),
                                context: self.format_context(c),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index
    }

    pub fn stages(&self) -> &Stages {
        &self.stages
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn element_names(&self) -> Option<&[String]> {
        self.elements.as_deref()
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn signature(&self) -> Signature {
        Signature::from_symbols(self.relations.iter().map(|r| (r.name.clone(), r.arity)))
            .expect("relation names are unique")
    }

    pub fn stage(&self, i: Index) -> Vec<Elem> {
        match &self.stages {
            Stages::Naturals => (0..i as Elem).collect(),
            Stages::Powerset => (0..64).filter(|b| i >> b & 1 == 1).collect(),
            Stages::Table(t) => t[i as usize].clone(),
        }
    }

    pub fn stage_contains(&self, i: Index, e: Elem) -> bool {
        match &self.stages {
            Stages::Naturals => (e as Index) < i,
            Stages::Powerset => e < 64 && i >> e & 1 == 1,
            Stages::Table(t) => t[i as usize].binary_search(&e).is_ok(),
        }
    }

    /// `ā ∈ M_C`.
    pub fn in_context(&self, c: &[Index], a: &[Elem]) -> bool {
        c.len() == a.len() && c.iter().zip(a).all(|(&i, &e)| self.stage_contains(i, e))
    }

    /// Every tuple of `M_C`.
    pub fn tuples(&self, c: &[Index]) -> Vec<Vec<Elem>> {
        let mut out = vec![Vec::new()];
        for &i in c {
            let stage = self.stage(i);
            let mut next = Vec::with_capacity(out.len() * stage.len());
            for t in &out {
                for &e in &stage {
                    let mut u = t.clone();
                    u.push(e);
                    next.push(u);
                }
            }
            out = next;
        }
        out
    }

    pub fn has_assignment(&self, rel: &Relation, c: &[Index]) -> bool {
        match &rel.signature {
            SignatureMode::AllContexts => c.len() == rel.arity,
            SignatureMode::Explicit(set) => set.contains(c),
        }
    }

    /// `R_C(ā)`, for `ā ∈ M_C`.
    pub fn holds(&self, rel: &Relation, c: &[Index], a: &[Elem]) -> bool {
        match &rel.family {
            RelationFamily::Tabled(t) => t.get(c).map(|s| s.contains(a)).unwrap_or(false),
            RelationFamily::Oracle(o) => o.call(a),
        }
    }

    pub fn element_name(&self, e: Elem) -> String {
        match &self.elements {
            Some(names) => names.get(e as usize).cloned().unwrap_or_else(|| format!("#{e}")),
            None => e.to_string(),
        }
    }

    pub fn parse_element(&self, s: &str) -> Result<Elem, SystemError> {
        let s = s.trim();
        match &self.elements {
            Some(names) => names
                .iter()
                .position(|n| n == s)
                .map(|p| p as Elem)
                .ok_or_else(|| SystemError::UnknownElement(s.to_string())),
            None => s.parse().map_err(|_| SystemError::UnknownElement(s.to_string())),
        }
    }

    pub fn index_name(&self, i: Index) -> String {
        fn name(set: &IndexSet, sys: &StageSystem, i: Index) -> String {
            match set {
                IndexSet::Poset(p) => p.names.get(i as usize).cloned().unwrap_or_else(|| format!("#{i}")),
                IndexSet::Naturals => i.to_string(),
                IndexSet::Powerset { .. } => {
                    let items: Vec<String> = (0..64)
                        .filter(|b| i >> b & 1 == 1)
                        .map(|b| sys.element_name(b as Elem))
                        .collect();
                    format!("{{{}}}", items.join(","))
                }
                IndexSet::Subset { parent, .. } => name(parent, sys, i),
            }
        }
        name(&self.index, self, i)
    }

    pub fn parse_index(&self, s: &str) -> Result<Index, SystemError> {
        fn parse(set: &IndexSet, sys: &StageSystem, s: &str) -> Result<Index, SystemError> {
            let bad = || SystemError::UnknownIndex(s.to_string());
            match set {
                IndexSet::Poset(p) => p.names.iter().position(|n| n == s).map(|p| p as Index).ok_or_else(bad),
                IndexSet::Naturals => s.parse().map_err(|_| bad()),
                IndexSet::Powerset { .. } => {
                    let inner = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')).ok_or_else(bad)?;
                    let mut mask = 0;
                    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        let e = sys.parse_element(part).map_err(|_| bad())?;
                        mask |= 1u64 << e;
                    }
                    Ok(mask)
                }
                IndexSet::Subset { parent, members } => {
                    let i = parse(parent, sys, s)?;
                    if members.contains(&i) {
                        Ok(i)
                    } else {
                        Err(bad())
                    }
                }
            }
        }
        parse(&self.index, self, s.trim())
    }

    pub fn format_context(&self, c: &[Index]) -> String {
        let parts: Vec<String> = c.iter().map(|&i| self.index_name(i)).collect();
        format!("({})", parts.join(", "))
    }

    pub fn format_tuple(&self, a: &[Elem]) -> String {
        let parts: Vec<String> = a.iter().map(|&e| self.element_name(e)).collect();
        format!("({})", parts.join(", "))
    }

    /// Sorted union of all stages of a finite system.
    pub fn union_elements(&self) -> Option<Vec<Elem>> {
        let list = self.index.indices()?;
        let mut all = BTreeSet::new();
        for &i in list {
            all.extend(self.stage(i));
        }
        Some(all.into_iter().collect())
    }

    /// The union structure; `ℕ` needs a cutoff and is marked truncated.
    pub fn union_structure(&self, cutoff: Option<u64>) -> Result<ClassicalStructure, SystemError> {
        let (carrier, truncated_at) = match self.union_elements() {
            Some(c) => (c, None),
            None => {
                let bound = cutoff.ok_or(SystemError::NeedsCutoff)?;
                ((0..bound as Elem).collect(), Some(bound))
            }
        };
        let mut relations = Vec::new();
        for r in &self.relations {
            let mut set = HashSet::new();
            for t in cartesian(&carrier, r.arity) {
                if self.union_holds(r, &t) {
                    set.insert(t);
                }
            }
            relations.push((r.name.clone(), r.arity, set));
        }
        Ok(ClassicalStructure {
            carrier,
            relations,
            element_names: self.elements.clone(),
            truncated_at,
        })
    }

    fn union_holds(&self, r: &Relation, t: &[Elem]) -> bool {
        match (&r.family, &r.signature) {
            (RelationFamily::Oracle(o), SignatureMode::AllContexts) => o.call(t),
            (_, SignatureMode::Explicit(set)) => set
                .iter()
                .any(|c| self.in_context(c, t) && self.holds(r, c, t)),
            (RelationFamily::Tabled(table), SignatureMode::AllContexts) => {
                table.values().any(|s| s.contains(t))
            }
        }
    }

    /// Cached union structure of a finite system.
    pub fn union(&self) -> Option<&ClassicalStructure> {
        if !self.index.is_finite() {
            return None;
        }
        Some(
            self.union_cache
                .get_or_init(|| self.union_structure(None).expect("finite system")),
        )
    }

    /// The same system over a different index set with the same ids.
    pub(crate) fn with_index(&self, index: IndexSet, relations: Vec<Relation>) -> Result<StageSystem, SystemError> {
        StageSystem::new(index, self.elements.clone(), self.stages.clone(), relations)
    }
}

/// All tuples of length `n` over `carrier`.
pub fn cartesian(carrier: &[Elem], n: usize) -> Vec<Vec<Elem>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * carrier.len());
        for t in &out {
            for &e in carrier {
                let mut u = t.clone();
                u.push(e);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

/// `ℕ_ℕ` with the given predicates; every context is a signature assignment.
pub fn make_nat_system(relations: Vec<(String, usize, Oracle)>) -> Result<StageSystem, SystemError> {
    let rels = relations
        .into_iter()
        .map(|(n, a, o)| Relation::oracle(n, a, o))
        .collect();
    StageSystem::new(IndexSet::Naturals, None, Stages::Naturals, rels)
}

/// The lattice of subsets of `carrier` with `M_i = i`, interpreting `in`
/// and `=` by restriction of the given tables.
pub fn make_powerset_system(
    carrier: Vec<String>,
    membership: &[Vec<bool>],
    equality: &[Vec<bool>],
) -> Result<StageSystem, SystemError> {
    let n = carrier.len();
    if n == 0 {
        return Err(SystemError::AllStagesEmpty);
    }
    let square = |t: &[Vec<bool>]| t.len() == n && t.iter().all(|r| r.len() == n);
    if !square(membership) || !square(equality) {
        return Err(SystemError::TableSize(n));
    }
    let pairs = |t: &[Vec<bool>]| -> BTreeSet<Vec<Elem>> {
        let mut s = BTreeSet::new();
        for (a, row) in t.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                if v {
                    s.insert(vec![a as Elem, b as Elem]);
                }
            }
        }
        s
    };
    let rels = vec![
        Relation::oracle("in", 2, Oracle::table(pairs(membership))),
        Relation::oracle("=", 2, Oracle::table(pairs(equality))),
    ];
    StageSystem::new(IndexSet::powerset(n)?, Some(carrier), Stages::Powerset, rels)
}

/// The system of a cover of a finite structure, ordered by inclusion.
pub fn cover_structure(m: &ClassicalStructure, cover: &[Vec<Elem>]) -> Result<StageSystem, SystemError> {
    let mut union = BTreeSet::new();
    let stages: Vec<Vec<Elem>> = cover
        .iter()
        .map(|s| {
            let set: BTreeSet<Elem> = s.iter().copied().collect();
            union.extend(set.iter().copied());
            set.into_iter().collect()
        })
        .collect();
    let carrier: BTreeSet<Elem> = m.carrier.iter().copied().collect();
    if union != carrier {
        return Err(SystemError::CoverUnion);
    }
    let n = stages.len();
    let subset = |a: &Vec<Elem>, b: &Vec<Elem>| a.iter().all(|e| b.binary_search(e).is_ok());
    let le: Vec<Vec<bool>> = (0..n)
        .map(|a| (0..n).map(|b| subset(&stages[a], &stages[b])).collect())
        .collect();
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let poset = Poset::new(names, le)?;
    let max = m.carrier.iter().copied().max().unwrap_or(0) as usize;
    let elements = match &m.element_names {
        Some(names) => names.clone(),
        None => (0..=max).map(|e| e.to_string()).collect(),
    };
    let relations = m
        .relations
        .iter()
        .map(|(name, arity, set)| {
            Relation::oracle(name.clone(), *arity, Oracle::table(set.iter().cloned().collect()))
        })
        .collect();
    StageSystem::new(IndexSet::Poset(poset), Some(elements), Stages::Table(stages), relations)
}

/// A context pair disagreeing on a tuple in their common stages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatibilityViolation {
    pub relation: String,
    pub context: Context,
    pub reference: Context,
    pub tuple: Vec<Elem>,
}

#[derive(Clone, Debug, Default)]
pub struct CompatibilityReport {
    pub violations: Vec<CompatibilityViolation>,
    pub contexts_checked: usize,
}

/// Checks `R_C(ā) ⇔ R_C'(ā)` on common tuples. Exhaustive on finite index
/// sets; on `ℕ` all contexts with indices up to `budget` are covered.
///
/// Contexts holding the minority value for a tuple are reported against a
/// representative of the majority.
pub fn check_compatibility(sys: &StageSystem, budget: u64) -> CompatibilityReport {
    let mut report = CompatibilityReport::default();
    for r in sys.relations() {
        let contexts: Vec<Context> = match (&r.signature, sys.index_set().is_finite()) {
            (SignatureMode::Explicit(set), _) => set.iter().cloned().collect(),
            (SignatureMode::AllContexts, true) => sys.index_set().all_contexts(r.arity),
            (SignatureMode::AllContexts, false) => {
                let grid = IndexSet::Poset(Poset::chain(budget as usize + 1).expect("chain"));
                grid.all_contexts(r.arity)
            }
        };
        report.contexts_checked += contexts.len();
        // (first true context, count true, first false context, count false)
        let mut seen: HashMap<Vec<Elem>, (Option<usize>, usize, Option<usize>, usize)> = HashMap::new();
        for (k, c) in contexts.iter().enumerate() {
            for t in sys.tuples(c) {
                let e = seen.entry(t.clone()).or_insert((None, 0, None, 0));
                if sys.holds(r, c, &t) {
                    e.0.get_or_insert(k);
                    e.1 += 1;
                } else {
                    e.2.get_or_insert(k);
                    e.3 += 1;
                }
            }
        }
        let mut found = Vec::new();
        for (k, c) in contexts.iter().enumerate() {
            for t in sys.tuples(c) {
                let (ft, nt, ff, nf) = seen[&t];
                if nt == 0 || nf == 0 {
                    continue;
                }
                let value = sys.holds(r, c, &t);
                let majority_true = nt >= nf;
                if value != majority_true {
                    let reference = if majority_true { ft } else { ff }.expect("majority is non-empty");
                    let _ = k;
                    found.push(CompatibilityViolation {
                        relation: r.name.clone(),
                        context: c.clone(),
                        reference: contexts[reference].clone(),
                        tuple: t,
                    });
                }
            }
        }
        report.violations.extend(found);
    }
    report
}
