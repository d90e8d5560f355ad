//! The "indefinitely large" filters `𝔇ₙ`, generated families and
//! `≪`-relations.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::system::{Context, Index, IndexSet, StageSystem};
use crate::truth::TruthValue;

/// Grid size used when a horizon family over `ℕ` has to be probed.
pub const NAT_PROBE: Index = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("unsupported representation: {0}")]
    Unsupported(String),
    #[error("families of different levels {0} and {1}")]
    LevelMismatch(usize, usize),
}

/// A set of indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexSetRepr {
    Explicit(BTreeSet<Index>),
    /// `↑h`.
    UpFrom(Index),
    All,
    Empty,
    /// Membership is known to hold for `known`; everything else is open.
    UnknownBeyond { budget: u64, known: BTreeSet<Index> },
}

impl IndexSetRepr {
    pub fn contains(&self, iset: &IndexSet, i: Index) -> TruthValue {
        match self {
            IndexSetRepr::Explicit(s) => TruthValue::from_bool(s.contains(&i)),
            IndexSetRepr::UpFrom(h) => TruthValue::from_bool(iset.le(*h, i)),
            IndexSetRepr::All => TruthValue::True,
            IndexSetRepr::Empty => TruthValue::False,
            IndexSetRepr::UnknownBeyond { budget, known } => {
                if known.contains(&i) {
                    TruthValue::True
                } else {
                    TruthValue::Unknown { budget: *budget }
                }
            }
        }
    }

    /// Explicit member list over a finite index set.
    pub fn members(&self, iset: &IndexSet) -> Option<BTreeSet<Index>> {
        let list = iset.indices()?;
        let mut out = BTreeSet::new();
        for &i in list {
            match self.contains(iset, i) {
                TruthValue::True => {
                    out.insert(i);
                }
                TruthValue::False => {}
                TruthValue::Unknown { .. } => return None,
            }
        }
        Some(out)
    }

    /// Canonical form: over finite index sets an explicit list (or `All` /
    /// `Empty`); over `ℕ`, `UpFrom(0)` becomes `All`.
    pub fn normalize(self, iset: &IndexSet) -> Self {
        if let Some(list) = iset.indices() {
            if let Some(m) = self.members(iset) {
                return if m.is_empty() {
                    IndexSetRepr::Empty
                } else if m.len() == list.len() {
                    IndexSetRepr::All
                } else {
                    IndexSetRepr::Explicit(m)
                };
            }
            return self;
        }
        match self {
            IndexSetRepr::UpFrom(0) => IndexSetRepr::All,
            IndexSetRepr::Explicit(s) if s.is_empty() => IndexSetRepr::Empty,
            other => other,
        }
    }

    pub fn intersect(&self, other: &IndexSetRepr, iset: &IndexSet) -> IndexSetRepr {
        use IndexSetRepr::*;
        let result = match (self, other) {
            (Empty, _) | (_, Empty) => Empty,
            (All, x) | (x, All) => x.clone(),
            (UpFrom(a), UpFrom(b)) if !iset.is_finite() => UpFrom(*a.max(b)),
            (Explicit(s), x) | (x, Explicit(s)) => {
                let mut kept = BTreeSet::new();
                let mut open = None;
                for &i in s {
                    match x.contains(iset, i) {
                        TruthValue::True => {
                            kept.insert(i);
                        }
                        TruthValue::False => {}
                        TruthValue::Unknown { budget } => open = Some(budget),
                    }
                }
                match open {
                    Some(budget) => UnknownBeyond { budget, known: kept },
                    None => Explicit(kept),
                }
            }
            (UnknownBeyond { budget: a, known: ka }, UnknownBeyond { budget: b, known: kb }) => UnknownBeyond {
                budget: *a.max(b),
                known: ka.intersection(kb).copied().collect(),
            },
            (UnknownBeyond { budget, known }, x) | (x, UnknownBeyond { budget, known }) => UnknownBeyond {
                budget: *budget,
                known: known.iter().copied().filter(|&i| x.contains(iset, i).is_true()).collect(),
            },
            (UpFrom(_), UpFrom(_)) => {
                let a = self.members(iset).expect("finite");
                let b = other.members(iset).expect("finite");
                Explicit(a.intersection(&b).copied().collect())
            }
        };
        result.normalize(iset)
    }

    /// Least member in canonical order.
    pub fn least(&self, iset: &IndexSet) -> TruthOr<Option<Index>> {
        match self {
            IndexSetRepr::Empty => TruthOr::Known(None),
            IndexSetRepr::All => TruthOr::Known(Some(iset.min_index())),
            IndexSetRepr::UpFrom(h) if !iset.is_finite() => TruthOr::Known(Some(*h)),
            IndexSetRepr::Explicit(s) => {
                TruthOr::Known(s.iter().copied().min_by(|a, b| iset.cmp_canonical(*a, *b)))
            }
            IndexSetRepr::UnknownBeyond { budget, .. } => TruthOr::Unknown(*budget),
            IndexSetRepr::UpFrom(_) => {
                let m = self.members(iset).expect("finite");
                TruthOr::Known(m.into_iter().min_by(|a, b| iset.cmp_canonical(*a, *b)))
            }
        }
    }
}

impl fmt::Display for IndexSetRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexSetRepr::Explicit(s) => {
                let items: Vec<String> = s.iter().map(|i| i.to_string()).collect();
                write!(f, "{{{}}}", items.join(","))
            }
            IndexSetRepr::UpFrom(h) => write!(f, "up({h})"),
            IndexSetRepr::All => f.write_str("all"),
            IndexSetRepr::Empty => f.write_str("empty"),
            IndexSetRepr::UnknownBeyond { budget, .. } => write!(f, "unknown beyond {budget}"),
        }
    }
}

/// A value or the budget that ran out while computing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthOr<T> {
    Known(T),
    Unknown(u64),
}

/// `s ∈ 𝔇₁`: `s` contains an up-set.
pub fn in_d1(s: &IndexSetRepr, iset: &IndexSet) -> TruthValue {
    match s {
        IndexSetRepr::All | IndexSetRepr::UpFrom(_) => TruthValue::True,
        IndexSetRepr::Empty => TruthValue::False,
        IndexSetRepr::UnknownBeyond { budget, .. } => TruthValue::Unknown { budget: *budget },
        IndexSetRepr::Explicit(set) => match iset.indices() {
            None => TruthValue::False,
            Some(list) => TruthValue::from_bool(
                list.iter()
                    .any(|&i| iset.up_set(i).iter().all(|j| set.contains(j))),
            ),
        },
    }
}

pub type HorizonFn = Arc<dyn Fn(&[Index]) -> IndexSetRepr + Send + Sync>;

/// A set `𝓗ₙ ⊆ 𝓘ⁿ` of contexts of one length.
#[derive(Clone)]
pub enum ContextFamily {
    Explicit { level: usize, contexts: BTreeSet<Context> },
    /// `{Ci | i ∈ f(C)}` at the given level (at least 1).
    Horizon { level: usize, f: HorizonFn },
    All { level: usize },
}

impl fmt::Debug for ContextFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextFamily::Explicit { level, contexts } => {
                write!(f, "Explicit {{ level: {level}, contexts: {contexts:?} }}")
            }
            ContextFamily::Horizon { level, .. } => write!(f, "Horizon {{ level: {level} }}"),
            ContextFamily::All { level } => write!(f, "All {{ level: {level} }}"),
        }
    }
}

impl ContextFamily {
    pub fn explicit(level: usize, contexts: impl IntoIterator<Item = Context>) -> Self {
        ContextFamily::Explicit {
            level,
            contexts: contexts.into_iter().collect(),
        }
    }

    pub fn horizon(level: usize, f: impl Fn(&[Index]) -> IndexSetRepr + Send + Sync + 'static) -> Self {
        assert!(level >= 1, "horizon families start at level 1");
        ContextFamily::Horizon { level, f: Arc::new(f) }
    }

    pub fn level(&self) -> usize {
        match self {
            ContextFamily::Explicit { level, .. }
            | ContextFamily::Horizon { level, .. }
            | ContextFamily::All { level } => *level,
        }
    }

    pub fn contains(&self, iset: &IndexSet, c: &[Index]) -> TruthValue {
        if c.len() != self.level() {
            return TruthValue::False;
        }
        match self {
            ContextFamily::Explicit { contexts, .. } => TruthValue::from_bool(contexts.contains(c)),
            ContextFamily::All { .. } => TruthValue::True,
            ContextFamily::Horizon { f, .. } => {
                let (last, init) = c.split_last().expect("level >= 1");
                f(init).contains(iset, *last)
            }
        }
    }

    /// All members over a finite index set.
    pub fn members(&self, iset: &IndexSet) -> Result<BTreeSet<Context>, FilterError> {
        if let ContextFamily::Explicit { contexts, .. } = self {
            return Ok(contexts.clone());
        }
        if !iset.is_finite() {
            return Err(FilterError::Unsupported("enumerating a family over the naturals".into()));
        }
        let mut out = BTreeSet::new();
        for c in iset.all_contexts(self.level()) {
            match self.contains(iset, &c) {
                TruthValue::True => {
                    out.insert(c);
                }
                TruthValue::False => {}
                TruthValue::Unknown { .. } => {
                    return Err(FilterError::Unsupported("family with unknown members".into()))
                }
            }
        }
        Ok(out)
    }
}

/// `dₙ(𝓗) = {C | C^𝓗 ∈ 𝔇₁}` on explicit sets over a finite index set.
fn shorten_finite(iset: &IndexSet, h: &BTreeSet<Context>, level: usize) -> BTreeSet<Context> {
    let mut out = BTreeSet::new();
    for c in iset.all_contexts(level - 1) {
        let succ: BTreeSet<Index> = h
            .iter()
            .filter(|d| d[..level - 1] == c[..])
            .map(|d| d[level - 1])
            .collect();
        if in_d1(&IndexSetRepr::Explicit(succ), iset).is_true() {
            out.insert(c);
        }
    }
    out
}

/// `𝓗 ∈ 𝔇ₙ`, by the recursion `𝓗 ∈ 𝔇ₙ₊₁ ⇔ dₙ(𝓗) ∈ 𝔇ₙ` down to
/// `𝔇₀ = {{()}}`.
///
/// Over `ℕ`, horizon families are probed on a grid of `NAT_PROBE + 1`
/// values per coordinate; a non-up-closed pattern on the grid is reported
/// as unsupported.
pub fn in_dn(f: &ContextFamily, iset: &IndexSet) -> Result<TruthValue, FilterError> {
    let level = f.level();
    if let ContextFamily::All { .. } = f {
        return Ok(TruthValue::True);
    }
    if level == 0 {
        return Ok(f.contains(iset, &[]));
    }
    if iset.is_finite() {
        let mut h = f.members(iset)?;
        for n in (1..=level).rev() {
            h = shorten_finite(iset, &h, n);
        }
        return Ok(TruthValue::from_bool(h.contains(&Vec::new())));
    }
    match f {
        ContextFamily::Explicit { .. } => Ok(TruthValue::False),
        ContextFamily::Horizon { f: hf, .. } => nat_member(hf, level, &mut Vec::new(), iset),
        ContextFamily::All { .. } => unreachable!(),
    }
}

/// Whether `c` lies in `d^{level-|c|}(𝓗)` over `ℕ`.
fn nat_member(
    hf: &HorizonFn,
    level: usize,
    c: &mut Vec<Index>,
    iset: &IndexSet,
) -> Result<TruthValue, FilterError> {
    if c.len() + 1 == level {
        return Ok(in_d1(&hf(c), iset));
    }
    let mut values = Vec::new();
    for i in 0..=NAT_PROBE {
        c.push(i);
        let v = nat_member(hf, level, c, iset);
        c.pop();
        values.push(v?);
    }
    if let Some(u) = values.iter().find(|v| v.is_unknown()) {
        return Ok(*u);
    }
    let first_true = values.iter().position(|v| v.is_true());
    match first_true {
        None => Ok(TruthValue::False),
        Some(p) if values[p..].iter().all(|v| v.is_true()) => Ok(TruthValue::True),
        Some(_) => Err(FilterError::Unsupported(
            "shortened horizon family is not up-closed on the probe grid".into(),
        )),
    }
}

/// The family generated by one level: free extension above it, existential
/// projection below it.
#[derive(Clone, Debug)]
pub struct GeneratedFamily {
    pub base: ContextFamily,
    pub iset: IndexSet,
}

pub fn generate_family(base: ContextFamily, iset: &IndexSet) -> GeneratedFamily {
    GeneratedFamily {
        base,
        iset: iset.clone(),
    }
}

impl GeneratedFamily {
    /// Membership of a context of any length.
    pub fn contains(&self, c: &[Index]) -> Result<TruthValue, FilterError> {
        let n = self.base.level();
        if c.len() >= n {
            return Ok(self.base.contains(&self.iset, &c[..n]));
        }
        match &self.base {
            ContextFamily::All { .. } => Ok(TruthValue::True),
            ContextFamily::Explicit { contexts, .. } => {
                Ok(TruthValue::from_bool(contexts.iter().any(|d| d[..c.len()] == *c)))
            }
            ContextFamily::Horizon { f, .. } => {
                // Up-sets are non-empty, so a horizon family whose values are
                // all non-empty projects onto every shorter context.
                let missing = n - 1 - c.len();
                let extensions: Vec<Context> = match self.iset.indices() {
                    Some(_) => self.iset.all_contexts(missing),
                    None => {
                        let grid = IndexSet::Poset(crate::system::Poset::chain(NAT_PROBE as usize + 1).expect("chain"));
                        grid.all_contexts(missing)
                    }
                };
                let mut unknown = None;
                for e in extensions {
                    let mut d = c.to_vec();
                    d.extend(e);
                    match f(&d) {
                        IndexSetRepr::Empty => {}
                        IndexSetRepr::Explicit(s) if s.is_empty() => {}
                        IndexSetRepr::UnknownBeyond { budget, known } if known.is_empty() => {
                            unknown = Some(budget)
                        }
                        _ => return Ok(TruthValue::True),
                    }
                }
                match (unknown, self.iset.is_finite()) {
                    (Some(budget), _) => Ok(TruthValue::Unknown { budget }),
                    (None, true) => Ok(TruthValue::False),
                    (None, false) => Err(FilterError::Unsupported(
                        "projection of a horizon family with empty values over the naturals".into(),
                    )),
                }
            }
        }
    }

    /// The level-`m` part as an explicit family (finite index sets).
    pub fn level_members(&self, m: usize) -> Result<BTreeSet<Context>, FilterError> {
        if !self.iset.is_finite() {
            return Err(FilterError::Unsupported("enumerating a family over the naturals".into()));
        }
        let mut out = BTreeSet::new();
        for c in self.iset.all_contexts(m) {
            if self.contains(&c)?.is_true() {
                out.insert(c);
            }
        }
        Ok(out)
    }
}

/// Pointwise intersection of two families of the same level.
pub fn intersect(f: &ContextFamily, g: &ContextFamily, iset: &IndexSet) -> Result<ContextFamily, FilterError> {
    if f.level() != g.level() {
        return Err(FilterError::LevelMismatch(f.level(), g.level()));
    }
    let level = f.level();
    Ok(match (f, g) {
        (ContextFamily::All { .. }, x) | (x, ContextFamily::All { .. }) => x.clone(),
        (ContextFamily::Explicit { contexts, .. }, x) | (x, ContextFamily::Explicit { contexts, .. }) => {
            ContextFamily::Explicit {
                level,
                contexts: contexts
                    .iter()
                    .filter(|c| x.contains(iset, c).is_true())
                    .cloned()
                    .collect(),
            }
        }
        (ContextFamily::Horizon { f: a, .. }, ContextFamily::Horizon { f: b, .. }) => {
            let (a, b, iset) = (a.clone(), b.clone(), iset.clone());
            ContextFamily::horizon(level, move |c| a(c).intersect(&b(c), &iset))
        }
    })
}

/// Every relation symbol's signature contexts form a member of `𝔇ₙ`.
pub fn is_indefinitely_large_signature(sys: &StageSystem) -> Result<TruthValue, FilterError> {
    let mut acc = TruthValue::True;
    for r in sys.relations() {
        let family = match &r.signature {
            crate::system::SignatureMode::AllContexts => ContextFamily::All { level: r.arity },
            crate::system::SignatureMode::Explicit(set) => ContextFamily::explicit(r.arity, set.iter().cloned()),
        };
        acc = acc.and(in_dn(&family, sys.index_set())?);
    }
    Ok(acc)
}

/// Where a `≪`-relation comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    AllIndices,
    Pointwise,
    UserTable,
    Computed,
    Restricted(Box<Provenance>),
}

/// A relation `C ≪ i`. Implementors give the raw relation; queries through
/// [`ll_holds`] additionally require `C` to be a `≪`-context, which makes
/// every answer satisfy the shortening law.
pub trait LlRelation: Send + Sync {
    fn raw(&self, sys: &StageSystem, c: &[Index], i: Index) -> TruthValue;

    /// `{i | C ≪ i}` for the raw relation.
    fn successors_raw(&self, sys: &StageSystem, c: &[Index]) -> IndexSetRepr {
        let iset = sys.index_set();
        match iset.indices() {
            Some(list) => {
                let mut out = BTreeSet::new();
                let mut open = None;
                for &i in list {
                    match self.raw(sys, c, i) {
                        TruthValue::True => {
                            out.insert(i);
                        }
                        TruthValue::False => {}
                        TruthValue::Unknown { budget } => open = Some(budget),
                    }
                }
                match open {
                    Some(budget) => IndexSetRepr::UnknownBeyond { budget, known: out },
                    None => IndexSetRepr::Explicit(out).normalize(iset),
                }
            }
            None => IndexSetRepr::UnknownBeyond {
                budget: 0,
                known: BTreeSet::new(),
            },
        }
    }

    fn provenance(&self) -> Provenance;
}

/// `C` is a `≪`-context: every prefix relation `(i₀…i_{k-1}) ≪ i_k` holds.
pub fn is_ll_context(ll: &dyn LlRelation, sys: &StageSystem, c: &[Index]) -> TruthValue {
    let mut acc = TruthValue::True;
    for k in 0..c.len() {
        acc = acc.and(ll.raw(sys, &c[..k], c[k]));
        if acc.is_false() {
            break;
        }
    }
    acc
}

pub fn ll_holds(ll: &dyn LlRelation, sys: &StageSystem, c: &[Index], i: Index) -> TruthValue {
    let ctx = is_ll_context(ll, sys, c);
    if ctx.is_false() {
        return ctx;
    }
    ctx.and(ll.raw(sys, c, i))
}

/// `C^≪`, empty when `C` is not a `≪`-context.
pub fn successors(ll: &dyn LlRelation, sys: &StageSystem, c: &[Index]) -> IndexSetRepr {
    match is_ll_context(ll, sys, c) {
        TruthValue::False => IndexSetRepr::Empty,
        TruthValue::True => ll.successors_raw(sys, c),
        TruthValue::Unknown { budget } => IndexSetRepr::UnknownBeyond {
            budget,
            known: BTreeSet::new(),
        },
    }
}

/// Pairs `(C, i)` of the raw relation whose shortening fails, for all `C`
/// up to length `max_len` (finite index sets).
pub fn raw_shortening_violations(ll: &dyn LlRelation, sys: &StageSystem, max_len: usize) -> Vec<(Context, Index)> {
    let iset = sys.index_set();
    let list = iset.indices().expect("finite");
    let mut out = Vec::new();
    for n in 1..=max_len {
        for c in iset.all_contexts(n) {
            let (last, init) = c.split_last().expect("non-empty");
            if !ll.raw(sys, init, *last).is_true() && !ll.raw(sys, init, *last).is_unknown() {
                for &i in list {
                    if ll.raw(sys, &c, i).is_true() {
                        out.push((c.clone(), i));
                    }
                }
            }
        }
    }
    out
}

/// `{Ci | C ≪ i}` at level `n + 1`, over a finite index set.
pub fn ll_family(ll: &dyn LlRelation, sys: &StageSystem, n: usize) -> ContextFamily {
    let iset = sys.index_set();
    let mut contexts = BTreeSet::new();
    for c in iset.all_contexts(n) {
        if let IndexSetRepr::Explicit(s) | IndexSetRepr::UnknownBeyond { known: s, .. } = successors(ll, sys, &c).normalize(iset) {
            for i in s {
                let mut d = c.clone();
                d.push(i);
                contexts.insert(d);
            }
        } else if successors(ll, sys, &c).normalize(iset) == IndexSetRepr::All {
            for &i in iset.indices().expect("finite") {
                let mut d = c.clone();
                d.push(i);
                contexts.insert(d);
            }
        }
    }
    ContextFamily::Explicit {
        level: n + 1,
        contexts,
    }
}

/// Every level up to `max_n + 1` of `≪` is a member of `𝔇`.
pub fn is_indefinitely_large_ll(ll: &dyn LlRelation, sys: &StageSystem, max_n: usize) -> Result<bool, FilterError> {
    for n in 0..=max_n {
        if !in_dn(&ll_family(ll, sys, n), sys.index_set())?.is_true() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `𝓘*`: every index is indefinitely large relative to every context.
#[derive(Clone, Copy, Debug, Default)]
pub struct AllRelation;

impl LlRelation for AllRelation {
    fn raw(&self, _: &StageSystem, _: &[Index], _: Index) -> TruthValue {
        TruthValue::True
    }

    fn successors_raw(&self, _: &StageSystem, _: &[Index]) -> IndexSetRepr {
        IndexSetRepr::All
    }

    fn provenance(&self) -> Provenance {
        Provenance::AllIndices
    }
}

/// `C ≪ i` iff `i` is above every index of `C`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pointwise;

impl LlRelation for Pointwise {
    fn raw(&self, sys: &StageSystem, c: &[Index], i: Index) -> TruthValue {
        TruthValue::from_bool(c.iter().all(|&k| sys.index_set().le(k, i)))
    }

    fn successors_raw(&self, sys: &StageSystem, c: &[Index]) -> IndexSetRepr {
        let iset = sys.index_set();
        if iset.is_finite() {
            let s = iset
                .indices()
                .expect("finite")
                .iter()
                .copied()
                .filter(|&i| self.raw(sys, c, i).is_true())
                .collect();
            IndexSetRepr::Explicit(s).normalize(iset)
        } else {
            IndexSetRepr::UpFrom(c.iter().copied().max().unwrap_or(0)).normalize(iset)
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::Pointwise
    }
}

/// A relation given by rows `(C, i)`.
#[derive(Clone, Debug, Default)]
pub struct TableRelation {
    pub rows: BTreeSet<(Context, Index)>,
}

impl LlRelation for TableRelation {
    fn raw(&self, _: &StageSystem, c: &[Index], i: Index) -> TruthValue {
        TruthValue::from_bool(self.rows.contains(&(c.to_vec(), i)))
    }

    fn successors_raw(&self, sys: &StageSystem, c: &[Index]) -> IndexSetRepr {
        let s = self
            .rows
            .iter()
            .filter(|(d, _)| d == c)
            .map(|(_, i)| *i)
            .collect();
        IndexSetRepr::Explicit(s).normalize(sys.index_set())
    }

    fn provenance(&self) -> Provenance {
        Provenance::UserTable
    }
}

/// The restriction of a relation on `full` to a subset of its indices.
/// Queries are answered on `full` whatever system is passed in.
#[derive(Clone)]
pub struct Restricted {
    pub inner: Arc<dyn LlRelation>,
    pub full: Arc<StageSystem>,
    pub members: BTreeSet<Index>,
}

impl LlRelation for Restricted {
    fn raw(&self, _: &StageSystem, c: &[Index], i: Index) -> TruthValue {
        if !self.members.contains(&i) || !c.iter().all(|k| self.members.contains(k)) {
            return TruthValue::False;
        }
        self.inner.raw(&self.full, c, i)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Restricted(Box::new(self.inner.provenance()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{make_nat_system, oracles, Poset};

    fn chain3() -> IndexSet {
        IndexSet::Poset(Poset::chain(3).unwrap())
    }

    fn set(v: &[Index]) -> BTreeSet<Index> {
        v.iter().copied().collect()
    }

    #[test]
    fn d1_examples() {
        assert!(in_d1(&IndexSetRepr::UpFrom(22), &IndexSet::Naturals).is_true());
        assert!(in_d1(&IndexSetRepr::Explicit(set(&[3, 5])), &IndexSet::Naturals).is_false());
        assert!(in_d1(&IndexSetRepr::Explicit(set(&[1, 2])), &chain3()).is_true());
        assert!(in_d1(&IndexSetRepr::Explicit(set(&[0, 1])), &chain3()).is_false());
        assert!(in_d1(
            &IndexSetRepr::UnknownBeyond { budget: 9, known: set(&[]) },
            &IndexSet::Naturals
        )
        .is_unknown());
    }

    #[test]
    fn dn_examples() {
        let iset = chain3();
        assert!(in_dn(&ContextFamily::All { level: 3 }, &iset).unwrap().is_true());
        let upper = ContextFamily::explicit(
            2,
            iset.all_contexts(2).into_iter().filter(|c| c[1] >= c[0]),
        );
        assert!(in_dn(&upper, &iset).unwrap().is_true());
        assert!(in_dn(&ContextFamily::explicit(1, []), &iset).unwrap().is_false());
        assert!(in_dn(&ContextFamily::explicit(0, [vec![]]), &iset).unwrap().is_true());
    }

    #[test]
    fn dn_over_naturals() {
        let nat = IndexSet::Naturals;
        let f = ContextFamily::horizon(2, |c| IndexSetRepr::UpFrom(c[0] + 1));
        assert!(in_dn(&f, &nat).unwrap().is_true());
        let g = ContextFamily::horizon(2, |c| {
            if c[0] % 2 == 0 {
                IndexSetRepr::All
            } else {
                IndexSetRepr::Empty
            }
        });
        assert!(matches!(in_dn(&g, &nat), Err(FilterError::Unsupported(_))));
        assert!(in_dn(&ContextFamily::explicit(1, [vec![3]]), &nat).unwrap().is_false());
    }

    #[test]
    fn intersections() {
        let nat = IndexSet::Naturals;
        assert_eq!(
            IndexSetRepr::UpFrom(7).intersect(&IndexSetRepr::UpFrom(22), &nat),
            IndexSetRepr::UpFrom(22)
        );
        let f = ContextFamily::horizon(1, |_| IndexSetRepr::UpFrom(4));
        let all = ContextFamily::All { level: 1 };
        let g = intersect(&all, &f, &nat).unwrap();
        assert!(g.contains(&nat, &[4]).is_true());
        assert!(g.contains(&nat, &[3]).is_false());
        let h = intersect(&f, &ContextFamily::horizon(1, |_| IndexSetRepr::UpFrom(9)), &nat).unwrap();
        assert!(h.contains(&nat, &[8]).is_false());
        assert!(h.contains(&nat, &[9]).is_true());
    }

    #[test]
    fn generated_family_levels() {
        let nat = IndexSet::Naturals;
        let base = ContextFamily::horizon(2, |c| IndexSetRepr::UpFrom(c[0] + 3));
        let g = generate_family(base, &nat);
        assert!(g.contains(&[]).unwrap().is_true());
        assert!(g.contains(&[17]).unwrap().is_true());
        assert!(g.contains(&[1, 4, 0]).unwrap().is_true());
        assert!(g.contains(&[1, 3, 9]).unwrap().is_false());

        let iset = chain3();
        let g = generate_family(ContextFamily::explicit(2, [vec![1, 2]]), &iset);
        assert_eq!(g.level_members(1).unwrap(), [vec![1]].into_iter().collect());
        assert_eq!(g.level_members(0).unwrap(), [vec![]].into_iter().collect());
    }

    #[test]
    fn signature_largeness() {
        let sys = make_nat_system(vec![("<=".into(), 2, oracles::leq())]).unwrap();
        assert!(is_indefinitely_large_signature(&sys).unwrap().is_true());
    }

    #[test]
    fn pointwise_successors_and_shortening() {
        let sys = make_nat_system(vec![]).unwrap();
        assert_eq!(Pointwise.successors_raw(&sys, &[3, 1]), IndexSetRepr::UpFrom(3));
        assert_eq!(successors(&Pointwise, &sys, &[]), IndexSetRepr::All);
        // (3, 1) is not a ≪-context, so nothing is above it.
        assert!(ll_holds(&Pointwise, &sys, &[3, 1], 5).is_false());
        assert!(ll_holds(&Pointwise, &sys, &[1, 3], 5).is_true());
        assert_eq!(successors(&Pointwise, &sys, &[3, 1]), IndexSetRepr::Empty);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::corpus::{random_system, rng, CorpusLimits};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn up_sets_are_large_and_meets_stay_large(a in 0u64..200, b in 0u64..200, k in 0u64..50) {
            let nat = IndexSet::Naturals;
            let meet = IndexSetRepr::UpFrom(a).intersect(&IndexSetRepr::UpFrom(b), &nat);
            prop_assert!(in_d1(&meet, &nat).is_true());
            let finite: BTreeSet<Index> = (k..k + 5).collect();
            prop_assert!(in_d1(&IndexSetRepr::Explicit(finite), &nat).is_false());
        }

        #[test]
        fn filter_laws_on_random_posets(seed in any::<u64>(), n in 1usize..3) {
            let sys = random_system(&mut rng(seed), &CorpusLimits::default());
            let iset = sys.index_set();
            prop_assert!(in_dn(&ContextFamily::explicit(n, []), iset).unwrap().is_false());
            for c in iset.all_contexts(n) {
                let up: Vec<Context> = iset
                    .all_contexts(n)
                    .into_iter()
                    .filter(|d| c.iter().zip(d).all(|(&x, &y)| iset.le(x, y)))
                    .collect();
                prop_assert!(in_dn(&ContextFamily::explicit(n, up), iset).unwrap().is_true());
            }
        }

        #[test]
        fn generated_families_shorten(seed in any::<u64>(), n in 1usize..3, mask in any::<u64>()) {
            let sys = random_system(&mut rng(seed), &CorpusLimits::default());
            let iset = sys.index_set();
            let base: Vec<Context> = iset
                .all_contexts(n)
                .into_iter()
                .enumerate()
                .filter(|(k, _)| mask >> (k % 64) & 1 == 1)
                .map(|(_, c)| c)
                .collect();
            let fam = generate_family(ContextFamily::explicit(n, base), iset);
            for m in 1..=n + 1 {
                for c in fam.level_members(m).unwrap() {
                    prop_assert!(fam.contains(&c[..m - 1]).unwrap().is_true());
                }
            }
        }

        #[test]
        fn enforced_shortening(seed in any::<u64>()) {
            let sys = random_system(&mut rng(seed), &CorpusLimits::default());
            let list = sys.index_set().indices().unwrap().to_vec();
            let rows: BTreeSet<(Context, Index)> = sys
                .index_set()
                .all_contexts(2)
                .into_iter()
                .flat_map(|c| list.iter().map(move |&i| (c.clone(), i)))
                .enumerate()
                .filter(|(k, _)| (seed >> (k % 64)) & 1 == 1)
                .map(|(_, r)| r)
                .collect();
            let table = TableRelation { rows };
            for c in sys.index_set().all_contexts(2) {
                for &i in &list {
                    if ll_holds(&table, &sys, &c, i).is_true() {
                        prop_assert!(ll_holds(&table, &sys, &c[..1], c[1]).is_true());
                    }
                }
            }
        }
    }
}
