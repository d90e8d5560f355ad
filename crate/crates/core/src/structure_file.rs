//! Text format for stage systems and `≪` tables.
//!
//! ```text
//! # comment
//! [index]
//! kind = poset            # poset | powerset | naturals
//! names = a, b, c         # poset only
//! order = a < c, b < c    # poset only, closed reflexively and transitively
//!
//! [carrier]
//! elements = 0, 1, w      # required for poset and powerset
//!
//! [stages]                # poset only
//! a = 0
//! b = 1
//! c = 0, 1, w
//!
//! [relations]             # name arity source
//! in 2 tuples
//! E 1 table
//! R 2 perfect_sum         # also leq, lt, identity, ge:N
//!
//! [tuples in]             # one tuple per row, `()` for the empty tuple
//! 0 w
//! 1 w
//!
//! [table E]               # per-context extension
//! (a) = (0)
//! (c) = (0) (w)
//!
//! [signature R]           # optional explicit signature
//! (c, c)
//!
//! [ll]                    # optional `≪` table
//! () << a
//! (a) << c
//! ```
//!
//! Lists split on commas outside braces, so indices such as `{0,w}` can be
//! used as poset names.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::filters::{ll_holds, LlRelation, TableRelation};
use crate::system::{
    cartesian, oracles, Context, Elem, Index, IndexSet, Oracle, Poset, Relation, RelationFamily, SignatureMode,
    StageSystem, Stages, SystemError,
};

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("only finite systems can be exported")]
    Infinite,
}

fn syntax(line: usize, msg: impl Into<String>) -> StructureError {
    StructureError::Syntax { line, msg: msg.into() }
}

/// A loaded system with its optional `≪` table.
pub struct StructureFile {
    pub system: StageSystem,
    pub ll: Option<TableRelation>,
}

/// Splits on commas at brace depth zero, trimming and dropping empty parts.
pub fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '{' => depth += 1,
            '}' => depth -= 1,
            _ => {}
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    out.push(cur.trim().to_string());
    out.retain(|p| !p.is_empty());
    out
}

/// Parses `(a, b, …)` with index names resolved by `sys`.
pub fn parse_context(sys: &StageSystem, s: &str) -> Result<Context, SystemError> {
    let s = s.trim();
    let inner = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(s);
    split_list(inner).iter().map(|p| sys.parse_index(p)).collect()
}

#[derive(Default)]
struct Raw {
    index: BTreeMap<String, (usize, String)>,
    elements: Option<(usize, Vec<String>)>,
    stages: Vec<(usize, String, Vec<String>)>,
    relations: Vec<(usize, String, usize, String)>,
    tuples: BTreeMap<String, Vec<(usize, String)>>,
    tables: BTreeMap<String, Vec<(usize, String)>>,
    signatures: BTreeMap<String, Vec<(usize, String)>>,
    ll: Option<Vec<(usize, String)>>,
}

fn key_value(line: usize, s: &str) -> Result<(String, String), StructureError> {
    let (k, v) = s.split_once('=').ok_or_else(|| syntax(line, "expected `key = value`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn read_sections(text: &str) -> Result<Raw, StructureError> {
    let mut raw = Raw::default();
    let mut section: Option<(String, Option<String>)> = None;
    for (n, line) in text.lines().enumerate() {
        let no = n + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(head) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let mut parts = head.split_whitespace();
            let kind = parts.next().ok_or_else(|| syntax(no, "empty section header"))?.to_string();
            let arg = parts.next().map(str::to_string);
            let needs_arg = matches!(kind.as_str(), "tuples" | "table" | "signature");
            if needs_arg != arg.is_some() || parts.next().is_some() {
                return Err(syntax(no, format!("bad section header `[{head}]`")));
            }
            match (kind.as_str(), &arg) {
                ("tuples", Some(r)) => {
                    raw.tuples.entry(r.clone()).or_default();
                }
                ("table", Some(r)) => {
                    raw.tables.entry(r.clone()).or_default();
                }
                ("signature", Some(r)) => {
                    raw.signatures.entry(r.clone()).or_default();
                }
                ("ll", None) => {
                    raw.ll.get_or_insert_with(Vec::new);
                }
                ("index" | "carrier" | "stages" | "relations", None) => {}
                _ => return Err(syntax(no, format!("unknown section `[{head}]`"))),
            }
            section = Some((kind, arg));
            continue;
        }
        let Some((kind, arg)) = &section else {
            return Err(syntax(no, "content before the first section"));
        };
        let row = (no, line.to_string());
        match kind.as_str() {
            "index" => {
                let (k, v) = key_value(no, line)?;
                raw.index.insert(k, (no, v));
            }
            "carrier" => {
                let (k, v) = key_value(no, line)?;
                if k != "elements" {
                    return Err(syntax(no, format!("unknown key `{k}`")));
                }
                raw.elements = Some((no, split_list(&v)));
            }
            "stages" => {
                let (k, v) = key_value(no, line)?;
                raw.stages.push((no, k, split_list(&v)));
            }
            "relations" => {
                let parts: Vec<&str> = line.split_whitespace().collect();
                let [name, arity, source] = parts[..] else {
                    return Err(syntax(no, "expected `name arity source`"));
                };
                let arity = arity.parse().map_err(|_| syntax(no, format!("bad arity `{arity}`")))?;
                raw.relations.push((no, name.to_string(), arity, source.to_string()));
            }
            "tuples" => raw.tuples.get_mut(arg.as_ref().unwrap()).unwrap().push(row),
            "table" => raw.tables.get_mut(arg.as_ref().unwrap()).unwrap().push(row),
            "signature" => raw.signatures.get_mut(arg.as_ref().unwrap()).unwrap().push(row),
            "ll" => raw.ll.as_mut().unwrap().push(row),
            _ => unreachable!(),
        }
    }
    Ok(raw)
}

fn index_set(raw: &Raw, elements: Option<&[String]>) -> Result<(IndexSet, Stages), StructureError> {
    let (kind_line, kind) = raw
        .index
        .get("kind")
        .cloned()
        .ok_or_else(|| StructureError::Missing("[index] needs `kind`".into()))?;
    let need_elements = || elements.ok_or_else(|| StructureError::Missing("[carrier] needs `elements`".into()));
    match kind.as_str() {
        "naturals" => Ok((IndexSet::Naturals, Stages::Naturals)),
        "powerset" => Ok((IndexSet::powerset(need_elements()?.len())?, Stages::Powerset)),
        "poset" => {
            let elements = need_elements()?;
            let (_, names) = raw
                .index
                .get("names")
                .ok_or_else(|| StructureError::Missing("[index] needs `names` for a poset".into()))?;
            let names = split_list(names);
            let pos = |line: usize, s: &str| {
                names
                    .iter()
                    .position(|n| n == s)
                    .ok_or_else(|| syntax(line, format!("unknown index `{s}`")))
            };
            let mut pairs = Vec::new();
            if let Some((line, order)) = raw.index.get("order") {
                for item in split_list(order) {
                    let (a, b) = item
                        .split_once('<')
                        .ok_or_else(|| syntax(*line, format!("expected `a < b`, got `{item}`")))?;
                    pairs.push((pos(*line, a.trim())?, pos(*line, b.trim())?));
                }
            }
            let poset = Poset::from_pairs(names.clone(), &pairs)?;
            let mut stages = vec![None; names.len()];
            for (line, name, items) in &raw.stages {
                let i = pos(*line, name)?;
                let mut set = BTreeSet::new();
                for e in items {
                    let p = elements
                        .iter()
                        .position(|x| x == e)
                        .ok_or_else(|| syntax(*line, format!("unknown element `{e}`")))?;
                    set.insert(p as Elem);
                }
                stages[i] = Some(set.into_iter().collect::<Vec<_>>());
            }
            let stages = stages
                .into_iter()
                .zip(&names)
                .map(|(s, n)| s.ok_or_else(|| StructureError::Missing(format!("[stages] has no row for `{n}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((IndexSet::Poset(poset), Stages::Table(stages)))
        }
        other => Err(syntax(kind_line, format!("unknown index kind `{other}`"))),
    }
}

/// Parses `(a, b)` element tuples, or whitespace-separated names.
fn parse_tuple(sys: &StageSystem, line: usize, s: &str) -> Result<Vec<Elem>, StructureError> {
    let s = s.trim();
    let items: Vec<String> = match s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        Some(inner) => split_list(inner),
        None => s.split_whitespace().map(str::to_string).collect(),
    };
    items
        .iter()
        .map(|e| sys.parse_element(e).map_err(|err| syntax(line, err.to_string())))
        .collect()
}

fn parse_tuple_row(sys: &StageSystem, line: usize, s: &str, arity: usize) -> Result<Vec<Elem>, StructureError> {
    let t = parse_tuple(sys, line, s)?;
    if t.len() != arity {
        return Err(syntax(line, format!("tuple of length {} for arity {arity}", t.len())));
    }
    Ok(t)
}

/// Splits `(x) (y, z) ()` into its parenthesised groups.
fn groups(line: usize, s: &str) -> Result<Vec<String>, StructureError> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        if !rest.starts_with('(') {
            return Err(syntax(line, format!("expected `(` at `{rest}`")));
        }
        let end = rest.find(')').ok_or_else(|| syntax(line, "unclosed `(`"))?;
        out.push(rest[..=end].to_string());
        rest = rest[end + 1..].trim_start();
    }
    Ok(out)
}

fn context_at(sys: &StageSystem, line: usize, s: &str) -> Result<Context, StructureError> {
    parse_context(sys, s).map_err(|e| syntax(line, e.to_string()))
}

fn builtin(source: &str) -> Option<Oracle> {
    match source {
        "leq" => Some(oracles::leq()),
        "lt" => Some(oracles::lt()),
        "identity" => Some(oracles::identity()),
        "perfect_sum" => Some(oracles::perfect_sum()),
        _ => source.strip_prefix("ge:")?.parse().ok().map(oracles::at_least),
    }
}

/// Parses a structure file.
pub fn parse_structure(text: &str) -> Result<StructureFile, StructureError> {
    let raw = read_sections(text)?;
    let elements = raw.elements.as_ref().map(|(_, e)| e.clone());
    let (index, stages) = index_set(&raw, elements.as_deref())?;
    // A relation-free system resolves names for the tables below.
    let bare = StageSystem::new(index.clone(), elements.clone(), stages.clone(), Vec::new())?;
    let mut relations = Vec::new();
    for (line, name, arity, source) in &raw.relations {
        let (line, arity) = (*line, *arity);
        let mut rel = match source.as_str() {
            "tuples" => {
                let rows = raw
                    .tuples
                    .get(name)
                    .ok_or_else(|| StructureError::Missing(format!("no [tuples {name}] section")))?;
                let mut set = BTreeSet::new();
                for (l, row) in rows {
                    set.insert(parse_tuple_row(&bare, *l, row, arity)?);
                }
                Relation::oracle(name.clone(), arity, Oracle::table(set))
            }
            "table" => {
                let rows = raw
                    .tables
                    .get(name)
                    .ok_or_else(|| StructureError::Missing(format!("no [table {name}] section")))?;
                let mut table = BTreeMap::new();
                for (l, row) in rows {
                    let (ctx, ext) = row.split_once('=').ok_or_else(|| syntax(*l, "expected `(C) = tuples`"))?;
                    let c = context_at(&bare, *l, ctx)?;
                    let mut set = BTreeSet::new();
                    for g in groups(*l, ext)? {
                        set.insert(parse_tuple_row(&bare, *l, &g, arity)?);
                    }
                    table.insert(c, set);
                }
                Relation::tabled(name.clone(), arity, table)
            }
            other => match builtin(other) {
                Some(o) => Relation::oracle(name.clone(), arity, o),
                None => return Err(syntax(line, format!("unknown relation source `{other}`"))),
            },
        };
        if let Some(rows) = raw.signatures.get(name) {
            let mut set = BTreeSet::new();
            for (l, row) in rows {
                set.insert(context_at(&bare, *l, row)?);
            }
            rel.signature = SignatureMode::Explicit(set);
        }
        relations.push(rel);
    }
    let declared: BTreeSet<&String> = raw.relations.iter().map(|(_, n, _, _)| n).collect();
    for name in raw.tuples.keys().chain(raw.tables.keys()).chain(raw.signatures.keys()) {
        if !declared.contains(name) {
            return Err(StructureError::Missing(format!("relation `{name}` is not declared in [relations]")));
        }
    }
    let ll = match &raw.ll {
        None => None,
        Some(rows) => {
            let mut set = BTreeSet::new();
            for (l, row) in rows {
                let (c, i) = row.split_once("<<").ok_or_else(|| syntax(*l, "expected `(C) << i`"))?;
                let c = context_at(&bare, *l, c)?;
                let i = bare.parse_index(i).map_err(|e| syntax(*l, e.to_string()))?;
                set.insert((c, i));
            }
            Some(TableRelation { rows: set })
        }
    };
    let system = StageSystem::new(index, elements, stages, relations)?;
    Ok(StructureFile { system, ll })
}

pub fn load_structure(path: &Path) -> Result<StructureFile, StructureError> {
    parse_structure(&std::fs::read_to_string(path)?)
}

/// The rows `(C, i)` of `ll` with `|C| <= max_len` over a finite system.
pub fn ll_rows(ll: &dyn LlRelation, sys: &StageSystem, max_len: usize) -> BTreeSet<(Context, Index)> {
    let iset = sys.index_set();
    let list = iset.indices().expect("finite");
    let mut rows = BTreeSet::new();
    for n in 0..=max_len {
        for c in iset.all_contexts(n) {
            for &i in list {
                if ll_holds(ll, sys, &c, i).is_true() {
                    rows.insert((c.clone(), i));
                }
            }
        }
    }
    rows
}

/// Writes a finite system as an explicit poset, materialising predicate
/// relations over the union of its stages.
pub fn export_structure(
    sys: &StageSystem,
    ll: Option<&BTreeSet<(Context, Index)>>,
) -> Result<String, StructureError> {
    let iset = sys.index_set();
    let list = iset.indices().ok_or(StructureError::Infinite)?;
    let union = sys.union_elements().ok_or(StructureError::Infinite)?;
    let elements: Vec<String> = match sys.element_names() {
        Some(names) => names.to_vec(),
        None => {
            let top = union.iter().copied().max().map_or(0, |m| m + 1);
            (0..top).map(|e| e.to_string()).collect()
        }
    };
    let name = |i: Index| sys.index_name(i);
    let ctx = |c: &[Index]| sys.format_context(c);
    let mut out = String::new();
    out.push_str("[index]\nkind = poset\n");
    out.push_str(&format!("names = {}\n", list.iter().map(|&i| name(i)).collect::<Vec<_>>().join(", ")));
    let mut covers = Vec::new();
    for &a in list {
        for &b in list {
            let below = a != b && iset.le(a, b);
            let covered = below && !list.iter().any(|&m| m != a && m != b && iset.le(a, m) && iset.le(m, b));
            if covered {
                covers.push(format!("{} < {}", name(a), name(b)));
            }
        }
    }
    out.push_str(&format!("order = {}\n", covers.join(", ")));
    out.push_str(&format!("\n[carrier]\nelements = {}\n", elements.join(", ")));
    out.push_str("\n[stages]\n");
    for &i in list {
        let items: Vec<String> = sys.stage(i).iter().map(|&e| sys.element_name(e)).collect();
        out.push_str(&format!("{} = {}\n", name(i), items.join(", ")));
    }
    out.push_str("\n[relations]\n");
    for r in sys.relations() {
        let source = match r.family {
            RelationFamily::Tabled(_) => "table",
            RelationFamily::Oracle(_) => "tuples",
        };
        out.push_str(&format!("{} {} {source}\n", r.name, r.arity));
    }
    for r in sys.relations() {
        match &r.family {
            RelationFamily::Oracle(o) => {
                out.push_str(&format!("\n[tuples {}]\n", r.name));
                for t in cartesian(&union, r.arity) {
                    if o.call(&t) {
                        out.push_str(&format!("{}\n", sys.format_tuple(&t)));
                    }
                }
                if let SignatureMode::Explicit(set) = &r.signature {
                    out.push_str(&format!("\n[signature {}]\n", r.name));
                    for c in set {
                        out.push_str(&format!("{}\n", ctx(c)));
                    }
                }
            }
            RelationFamily::Tabled(table) => {
                out.push_str(&format!("\n[table {}]\n", r.name));
                for (c, set) in table {
                    let ts: Vec<String> = set.iter().map(|t| sys.format_tuple(t)).collect();
                    out.push_str(&format!("{} = {}\n", ctx(c), ts.join(" ")).replace(" \n", "\n"));
                }
                let keys: BTreeSet<Context> = table.keys().cloned().collect();
                if let SignatureMode::Explicit(set) = &r.signature {
                    if *set != keys {
                        out.push_str(&format!("\n[signature {}]\n", r.name));
                        for c in set {
                            out.push_str(&format!("{}\n", ctx(c)));
                        }
                    }
                }
            }
        }
    }
    if let Some(rows) = ll {
        out.push_str("\n[ll]\n");
        for (c, i) in rows {
            out.push_str(&format!("{} << {}\n", ctx(c), name(*i)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::zfc_system;
    use crate::filters::Pointwise;
    use crate::submodel::restrict;

    const SMALL: &str = "
[index]
kind = poset
names = a, b, c
order = a < c, b < c

[carrier]
elements = 0, 1, w

[stages]
a = 0
b = 1
c = 0, 1, w

[relations]
in 2 tuples
E 1 table
L 2 leq

[tuples in]
0 w
(1, w)

[table E]
(a) = (0)
(c) = (0) (w)

[signature L]
(c, c)

[ll]
() << a
(a) << c
";

    #[test]
    fn loads_small_file() {
        let f = parse_structure(SMALL).unwrap();
        let sys = &f.system;
        let c = sys.parse_index("c").unwrap();
        assert_eq!(sys.stage(c).len(), 3);
        let r = sys.relation("in").unwrap();
        let w = sys.parse_element("w").unwrap();
        assert!(sys.holds(r, &[c, c], &[0, w]));
        assert!(!sys.holds(r, &[c, c], &[w, 0]));
        let e = sys.relation("E").unwrap();
        assert!(sys.holds(e, &[c], &[w]));
        assert!(!sys.has_assignment(e, &[sys.parse_index("b").unwrap()]));
        let l = sys.relation("L").unwrap();
        assert!(!sys.has_assignment(l, &[0, 0]));
        assert_eq!(f.ll.unwrap().rows.len(), 2);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = SMALL.replace("a = 0\n", "a = 0, zz\n");
        match parse_structure(&bad) {
            Err(StructureError::Syntax { line, msg }) => {
                assert_eq!(line, 11);
                assert!(msg.contains("zz"));
            }
            other => panic!("{:?}", other.err()),
        }
        assert!(parse_structure("[index]\nkind = torus\n").is_err());
        assert!(parse_structure("kind = poset\n").is_err());
    }

    #[test]
    fn export_round_trips() {
        let f = parse_structure(SMALL).unwrap();
        let rows = ll_rows(&f.ll.clone().unwrap(), &f.system, 1);
        let text = export_structure(&f.system, Some(&rows)).unwrap();
        let g = parse_structure(&text).unwrap();
        assert_eq!(export_structure(&g.system, Some(&g.ll.unwrap().rows)).unwrap(), text);
    }

    #[test]
    fn restriction_of_powerset_exports() {
        let sys = zfc_system();
        let names = ["{0}", "{1}", "{0,1}"];
        let j: Vec<Index> = names.iter().map(|n| sys.parse_index(n).unwrap()).collect();
        let sub = restrict(&sys, &j).unwrap();
        let rows = ll_rows(&Pointwise, &sub, 1);
        let text = export_structure(&sub, Some(&rows)).unwrap();
        assert!(text.contains("names = {0}, {1}, {0,1}"), "{text}");
        let g = parse_structure(&text).unwrap();
        let top = g.system.parse_index("{0,1}").unwrap();
        assert_eq!(g.system.stage(top).len(), 2);
        let r = g.system.relation("in").unwrap();
        assert!(g.system.holds(r, &[top, top], &[0, 1]));
    }

    #[test]
    fn list_split_respects_braces() {
        assert_eq!(split_list("{a,b}, c ,, {}"), vec!["{a,b}", "c", "{}"]);
    }
}
