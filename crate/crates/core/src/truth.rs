use std::fmt;

/// Three-valued verdict. `Unknown` records the search budget that ran out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TruthValue {
    True,
    False,
    Unknown { budget: u64 },
}

impl TruthValue {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            TruthValue::True => Some(true),
            TruthValue::False => Some(false),
            TruthValue::Unknown { .. } => None,
        }
    }

    pub fn is_true(self) -> bool {
        self == TruthValue::True
    }

    pub fn is_false(self) -> bool {
        self == TruthValue::False
    }

    pub fn is_unknown(self) -> bool {
        matches!(self, TruthValue::Unknown { .. })
    }

    fn budget(self) -> u64 {
        match self {
            TruthValue::Unknown { budget } => budget,
            _ => 0,
        }
    }

    /// Kleene conjunction.
    pub fn and(self, other: Self) -> Self {
        match (self, other) {
            (TruthValue::False, _) | (_, TruthValue::False) => TruthValue::False,
            (TruthValue::True, TruthValue::True) => TruthValue::True,
            (a, b) => TruthValue::Unknown {
                budget: a.budget().max(b.budget()),
            },
        }
    }

    /// Kleene disjunction.
    pub fn or(self, other: Self) -> Self {
        match (self, other) {
            (TruthValue::True, _) | (_, TruthValue::True) => TruthValue::True,
            (TruthValue::False, TruthValue::False) => TruthValue::False,
            (a, b) => TruthValue::Unknown {
                budget: a.budget().max(b.budget()),
            },
        }
    }

    pub fn not(self) -> Self {
        match self {
            TruthValue::True => TruthValue::False,
            TruthValue::False => TruthValue::True,
            u => u,
        }
    }

    pub fn implies(self, other: Self) -> Self {
        self.not().or(other)
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruthValue::True => f.write_str("True"),
            TruthValue::False => f.write_str("False"),
            TruthValue::Unknown { budget } => write!(f, "Unknown (budget {budget})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::TruthValue::*;


    #[test]
    fn kleene_tables() {
        let u = Unknown { budget: 4 };
        assert_eq!(False.and(u), False);
        assert_eq!(True.and(u), u);
        assert_eq!(True.or(u), True);
        assert_eq!(False.or(u), u);
        assert_eq!(u.implies(True), True);
        assert_eq!(False.implies(u), True);
        assert_eq!(u.not(), u);
    }
}
