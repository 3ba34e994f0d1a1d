use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmId {
    SortBased,
    HashSort,
    OriginalHH,
    SharedHH,
    DynamicDestaging,
    PrePartitioning,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::SortBased,
        AlgorithmId::HashSort,
        AlgorithmId::OriginalHH,
        AlgorithmId::SharedHH,
        AlgorithmId::DynamicDestaging,
        AlgorithmId::PrePartitioning,
    ];

    pub const HYBRID: [AlgorithmId; 4] = [
        AlgorithmId::OriginalHH,
        AlgorithmId::SharedHH,
        AlgorithmId::DynamicDestaging,
        AlgorithmId::PrePartitioning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::SortBased => "sort",
            AlgorithmId::HashSort => "hash-sort",
            AlgorithmId::OriginalHH => "original-hh",
            AlgorithmId::SharedHH => "shared-hh",
            AlgorithmId::DynamicDestaging => "dynamic-destaging",
            AlgorithmId::PrePartitioning => "pre-partitioning",
        }
    }

    pub fn is_hybrid(self) -> bool {
        Self::HYBRID.contains(&self)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorInput {
    pub sorted: bool,
    pub skewed: bool,
    pub cardinality_confident: bool,
    pub g_estimate: f64,
}

/// Sorted input goes to Sort-based, skewed input to Hash-Sort, anything else
/// to Pre-Partitioning (which tolerates an underestimated cardinality).
pub fn select_algorithm(s: &SelectorInput) -> AlgorithmId {
    if s.sorted {
        AlgorithmId::SortBased
    } else if s.skewed {
        AlgorithmId::HashSort
    } else {
        AlgorithmId::PrePartitioning
    }
}
