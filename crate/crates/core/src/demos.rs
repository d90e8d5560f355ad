//! Built-in systems: `ℕ` with its order, `ℕ` with the perfect-sum relation,
//! and a small universe of hereditarily finite sets.

use crate::syntax::{Formula, FormulaSet, Node};
use crate::system::{make_nat_system, make_powerset_system, oracles, Index, StageSystem};

/// `ℕ` with `<=` and `=`.
pub fn nat_system() -> StageSystem {
    make_nat_system(vec![("<=".into(), 2, oracles::leq()), ("=".into(), 2, oracles::identity())])
        .expect("valid system")
}

/// `ℕ` with `R(a, b)` iff `a + b` is perfect.
pub fn perfect_system() -> StageSystem {
    make_nat_system(vec![("R".into(), 2, oracles::perfect_sum())]).expect("valid system")
}

/// `ℕ` with unary `G0 … Gn`, `Gk(a)` iff `a >= k`.
pub fn threshold_system(n: u32) -> StageSystem {
    make_nat_system((0..=n).map(|k| (format!("G{k}"), 1, oracles::at_least(k))).collect()).expect("valid system")
}

/// Element names of the set universe: `w` is the truncated `ω`, `Pw` its
/// power set, and the last three are the pairs `{0,Pw}`, `{w,1}`, `{w,Pw}`.
pub const ZFC_ELEMENTS: [&str; 8] = ["0", "1", "2", "w", "Pw", "0Pw", "w1", "wPw"];

const ZFC_MEMBERS: [(&str, &str); 16] = [
    ("0", "1"),
    ("0", "2"),
    ("1", "2"),
    ("0", "w"),
    ("1", "w"),
    ("2", "w"),
    ("0", "Pw"),
    ("1", "Pw"),
    ("2", "Pw"),
    ("w", "Pw"),
    ("0", "0Pw"),
    ("Pw", "0Pw"),
    ("w", "w1"),
    ("1", "w1"),
    ("w", "wPw"),
    ("Pw", "wPw"),
];

fn zfc_pos(name: &str) -> usize {
    ZFC_ELEMENTS.iter().position(|e| *e == name).expect("known element")
}

/// The membership table of the universe, `table[a][b]` iff `a ∈ b`.
pub fn zfc_membership() -> Vec<Vec<bool>> {
    let n = ZFC_ELEMENTS.len();
    let mut t = vec![vec![false; n]; n];
    for (a, b) in ZFC_MEMBERS {
        t[zfc_pos(a)][zfc_pos(b)] = true;
    }
    t
}

/// The lattice of subsets of the eight-element universe with `M_i = i`.
pub fn zfc_system() -> StageSystem {
    let n = ZFC_ELEMENTS.len();
    let eq: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| a == b).collect()).collect();
    make_powerset_system(
        ZFC_ELEMENTS.iter().map(|s| s.to_string()).collect(),
        &zfc_membership(),
        &eq,
    )
    .expect("valid system")
}

/// The subset of the universe with the given element names.
pub fn zfc_index(names: &[&str]) -> Index {
    names.iter().fold(0, |m, n| m | 1 << zfc_pos(n))
}

/// The four stages `i₀ … i₃` used for the first quantifier levels.
pub fn zfc_chain() -> [Index; 4] {
    [
        zfc_index(&["0", "w"]),
        zfc_index(&["1", "Pw"]),
        zfc_index(&["0", "w", "2", "0Pw", "w1", "wPw"]),
        zfc_index(&["0", "1", "w"]),
    ]
}

fn mem(a: usize, b: usize) -> Node {
    Node::atom("in", [a, b])
}

fn eq(a: usize, b: usize) -> Node {
    Node::atom("=", [a, b])
}

/// `x_v ∈ x_a \ x_b`.
fn in_diff(v: usize, a: usize, b: usize) -> Node {
    Node::and(mem(v, a), Node::not(mem(v, b)))
}

/// `x_s = suc x_p`, using level `fresh` for the bound variable.
fn is_suc(s: usize, p: usize, fresh: usize) -> Node {
    Node::forall(Node::iff(mem(fresh, s), Node::or(eq(fresh, p), mem(fresh, p))))
}

/// Extensionality, pairing, the empty set, power set and infinity. The
/// constant `0` in the infinity axiom is expressed as "every empty set is
/// a member".
pub fn zfc_axioms() -> Vec<(&'static str, Formula)> {
    let ext = Node::forall(Node::forall(Node::implies(
        Node::not(eq(0, 1)),
        Node::exists(Node::or(in_diff(2, 0, 1), in_diff(2, 1, 0))),
    )));
    let pair = Node::forall(Node::forall(Node::exists(Node::forall(Node::iff(
        mem(3, 2),
        Node::or(eq(3, 0), eq(3, 1)),
    )))));
    let empty = Node::exists(Node::forall(Node::not(mem(1, 0))));
    let subset = Node::forall(Node::implies(mem(3, 2), mem(3, 0)));
    let pow = Node::forall(Node::exists(Node::forall(Node::and(
        Node::implies(mem(2, 1), subset),
        Node::implies(Node::not(mem(2, 1)), Node::exists(in_diff(3, 2, 0))),
    ))));
    let zero_in = Node::forall(Node::implies(Node::forall(Node::not(mem(2, 1))), mem(1, 0)));
    let closed = Node::forall(Node::implies(
        mem(1, 0),
        Node::exists(Node::and(mem(2, 0), is_suc(2, 1, 3))),
    ));
    let inf = Node::exists(Node::and(zero_in, closed));
    [("Ext", ext), ("Pair", pair), ("Empty", empty), ("Pow", pow), ("Inf", inf)]
        .into_iter()
        .map(|(n, node)| (n, Formula::new(0, node).expect("closed axiom")))
        .collect()
}

pub fn zfc_theory() -> FormulaSet {
    zfc_axioms().into_iter().map(|(_, f)| f).collect()
}

/// Demos selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Demo {
    Nat,
    Perfect,
    Zfc,
}

impl Demo {
    pub fn from_name(s: &str) -> Option<Demo> {
        match s {
            "nat" => Some(Demo::Nat),
            "perfect" => Some(Demo::Perfect),
            "zfc" => Some(Demo::Zfc),
            _ => None,
        }
    }

    pub fn system(self) -> StageSystem {
        match self {
            Demo::Nat => nat_system(),
            Demo::Perfect => perfect_system(),
            Demo::Zfc => zfc_system(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::pretty;

    #[test]
    fn truncated_omega() {
        let sys = zfc_system();
        let w = zfc_pos("w") as u32;
        let r = sys.relation("in").unwrap();
        let [_, _, i2, i3] = zfc_chain();
        let at = |i: Index| -> Vec<String> {
            sys.stage(i)
                .into_iter()
                .filter(|&b| sys.holds(r, &[i, i], &[b, w]))
                .map(|b| sys.element_name(b))
                .collect()
        };
        assert_eq!(at(i2), vec!["0", "2"]);
        assert_eq!(at(i3), vec!["0", "1"]);
    }

    #[test]
    fn axioms_are_sentences() {
        for (name, phi) in zfc_axioms() {
            assert_eq!(phi.arity, 0, "{name}: {}", pretty(&phi));
        }
        assert_eq!(zfc_theory().len(), 5);
    }
}
