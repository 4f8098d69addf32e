use std::collections::BTreeSet;
use std::fmt;

/// A positive boolean formula: the constant `true` or a disjunction of
/// variables. The empty disjunction is `false`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula<V: Ord> {
    True,
    Or(BTreeSet<V>),
}

impl<V: Ord> Formula<V> {
    pub fn falsum() -> Self {
        Formula::Or(BTreeSet::new())
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::Or(vars) if vars.is_empty())
    }

    /// Variables of the disjunction; empty for the constants.
    pub fn vars(&self) -> impl Iterator<Item = &V> {
        let set = match self {
            Formula::True => None,
            Formula::Or(vars) => Some(vars),
        };
        set.into_iter().flatten()
    }

    pub fn var_count(&self) -> usize {
        match self {
            Formula::True => 0,
            Formula::Or(vars) => vars.len(),
        }
    }
}

impl<V: Ord> Default for Formula<V> {
    fn default() -> Self {
        Formula::falsum()
    }
}

impl<V: Ord> FromIterator<V> for Formula<V> {
    fn from_iter<I: IntoIterator<Item = V>>(iter: I) -> Self {
        Formula::Or(iter.into_iter().collect())
    }
}

impl<V: Ord + fmt::Debug> fmt::Debug for Formula<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Or(vars) if vars.is_empty() => f.write_str("false"),
            Formula::Or(vars) => {
                for (i, v) in vars.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "X{v:?}")?;
                }
                Ok(())
            }
        }
    }
}
