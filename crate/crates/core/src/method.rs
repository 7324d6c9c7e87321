use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LordError;

/// Sketched approximation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ssvd,
    Xdiag,
    LorThenD,
    DThenLor,
    Sketchlord,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ssvd,
        Method::Xdiag,
        Method::LorThenD,
        Method::DThenLor,
        Method::Sketchlord,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ssvd => "ssvd",
            Method::Xdiag => "xdiag",
            Method::LorThenD => "lor_then_d",
            Method::DThenLor => "d_then_lor",
            Method::Sketchlord => "sketchlord",
        }
    }

    /// Number of width-`p` measurement rounds, not counting oversampled cores.
    pub fn rounds(self) -> usize {
        match self {
            Method::Ssvd | Method::Xdiag | Method::Sketchlord => 2,
            Method::LorThenD | Method::DThenLor => 3,
        }
    }

    /// XDiag produces no low-rank factors, so the recovery strategy is moot.
    pub fn uses_recovery(self) -> bool {
        !matches!(self, Method::Xdiag)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = LordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ssvd" => Ok(Method::Ssvd),
            "xdiag" => Ok(Method::Xdiag),
            "lor_then_d" | "lor->d" | "lortod" => Ok(Method::LorThenD),
            "d_then_lor" | "d->lor" | "dtolor" => Ok(Method::DThenLor),
            "sketchlord" => Ok(Method::Sketchlord),
            other => Err(LordError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// How sketches are turned into SVD factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    Singlepass,
    Compact,
    Oversampled,
}

impl Recovery {
    pub const ALL: [Recovery; 3] = [Recovery::Singlepass, Recovery::Compact, Recovery::Oversampled];

    pub fn as_str(self) -> &'static str {
        match self {
            Recovery::Singlepass => "singlepass",
            Recovery::Compact => "compact",
            Recovery::Oversampled => "oversampled",
        }
    }
}

impl fmt::Display for Recovery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Recovery {
    type Err = LordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "singlepass" | "single_pass" => Ok(Recovery::Singlepass),
            "compact" => Ok(Recovery::Compact),
            "oversampled" => Ok(Recovery::Oversampled),
            other => Err(LordError::Config(format!("unknown recovery '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        for r in Recovery::ALL {
            assert_eq!(r.to_string().parse::<Recovery>().unwrap(), r);
        }
    }

    #[test]
    fn unknown_names_are_config_errors() {
        assert!(matches!("svd".parse::<Method>(), Err(LordError::Config(_))));
        assert!(matches!("twopass".parse::<Recovery>(), Err(LordError::Config(_))));
    }
}
