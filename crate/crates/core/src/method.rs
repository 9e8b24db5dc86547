use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Control method. Declaration order is the report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Pi,
    ShortestPath,
    DeterministicDp,
    StochasticDp,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Pi,
        Method::ShortestPath,
        Method::DeterministicDp,
        Method::StochasticDp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pi => "pi",
            Method::ShortestPath => "shortest-path",
            Method::DeterministicDp => "deterministic-dp",
            Method::StochasticDp => "stochastic-dp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Pi => "PI-Control",
            Method::ShortestPath => "shortest path",
            Method::DeterministicDp => "deterministic DP",
            Method::StochasticDp => "stochastic DP",
        }
    }

    /// Whether the method produces an offline policy table.
    pub fn has_policy(self) -> bool {
        self != Method::Pi
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// A method together with the corrective-action switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControllerKind {
    pub method: Method,
    pub corrective: bool,
}

impl ControllerKind {
    pub fn new(method: Method, corrective: bool) -> Self {
        ControllerKind { method, corrective }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.corrective {
            write!(f, "{}+corrective", self.method)
        } else {
            write!(f, "{}", self.method)
        }
    }
}
