use std::fmt;

use serde::{Deserialize, Serialize};

/// Name of the no-dialect class.
pub const STANDARD: &str = "Standard";
/// Name of the mixed-dialect hard-negative class.
pub const UNKNOWN: &str = "Unknown";

/// A class name: one of the configured target dialects, `Standard` or `Unknown`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialectLabel(String);

impl DialectLabel {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn standard() -> Self {
        Self(STANDARD.to_owned())
    }

    pub fn unknown() -> Self {
        Self(UNKNOWN.to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_standard(&self) -> bool {
        self.0 == STANDARD
    }

    pub fn is_unknown(&self) -> bool {
        self.0 == UNKNOWN
    }

    /// True for target-dialect classes (anything but `Standard` and `Unknown`).
    pub fn is_dialect(&self) -> bool {
        !self.is_standard() && !self.is_unknown()
    }
}

impl fmt::Display for DialectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DialectLabel {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Canonical class order: dialects sorted by name, then `Standard`, then `Unknown`.
///
/// Only labels present in `labels` are returned; duplicates are collapsed.
pub fn canonical_order<'a, I>(labels: I) -> Vec<DialectLabel>
where
    I: IntoIterator<Item = &'a DialectLabel>,
{
    let set: std::collections::BTreeSet<&DialectLabel> = labels.into_iter().collect();
    let mut out: Vec<DialectLabel> = set.iter().filter(|l| l.is_dialect()).map(|l| (*l).clone()).collect();
    if set.iter().any(|l| l.is_standard()) {
        out.push(DialectLabel::standard());
    }
    if set.iter().any(|l| l.is_unknown()) {
        out.push(DialectLabel::unknown());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_puts_special_classes_last() {
        let labels = [
            DialectLabel::unknown(),
            DialectLabel::new("Jeju"),
            DialectLabel::standard(),
            DialectLabel::new("Gyeongsang"),
            DialectLabel::new("Jeju"),
        ];
        let names: Vec<String> = canonical_order(&labels).iter().map(|l| l.to_string()).collect();
        assert_eq!(names, ["Gyeongsang", "Jeju", "Standard", "Unknown"]);
    }
}
