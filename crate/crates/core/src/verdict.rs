use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Online-judge verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    /// Accepted.
    AC,
    /// Wrong answer.
    WA,
    /// Runtime error.
    RE,
    /// Time limit exceeded.
    TLE,
    /// Memory limit exceeded.
    MLE,
    /// Compile (syntax) error.
    CE,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [
        Verdict::AC,
        Verdict::WA,
        Verdict::RE,
        Verdict::TLE,
        Verdict::MLE,
        Verdict::CE,
    ];

    pub fn is_accepted(self) -> bool {
        self == Verdict::AC
    }

    /// Everything except a compile error got past the front end.
    pub fn is_compilable(self) -> bool {
        self != Verdict::CE
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::AC => "AC",
            Verdict::WA => "WA",
            Verdict::RE => "RE",
            Verdict::TLE => "TLE",
            Verdict::MLE => "MLE",
            Verdict::CE => "CE",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown verdict `{0}`")]
pub struct UnknownVerdict(pub String);

impl FromStr for Verdict {
    type Err = UnknownVerdict;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verdict::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVerdict(s.to_string()))
    }
}
