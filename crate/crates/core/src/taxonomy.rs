//! Labels, reentrancy subtypes and provenance shared across the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{other}`", stringify!($name))),
                }
            }
        }
    };
}

/// Ground-truth label. The positive class is `Vulnerable` everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Vulnerable,
    Secure,
}

string_enum!(Label { Vulnerable => "vulnerable", Secure => "secure" });

/// Reentrancy subtypes, in the order used for tie-breaking and remainders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    SingleFunction,
    CrossFunction,
    CrossContract,
    ReadOnly,
}

string_enum!(Subtype {
    SingleFunction => "single_function",
    CrossFunction => "cross_function",
    CrossContract => "cross_contract",
    ReadOnly => "read_only",
});

impl Subtype {
    /// Subtypes whose labels the static detector can confirm.
    pub fn is_detector_decidable(self) -> bool {
        matches!(self, Subtype::SingleFunction | Subtype::CrossFunction)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SyntheticBasic,
    SyntheticAdvanced,
    ModernizedReal,
    RealExploit,
}

string_enum!(Provenance {
    SyntheticBasic => "synthetic_basic",
    SyntheticAdvanced => "synthetic_advanced",
    ModernizedReal => "modernized_real",
    RealExploit => "real_exploit",
});

/// Generation technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    VulnBasic,
    VulnAdvanced,
    SecureBasic,
    SecureAdvanced,
}

string_enum!(GenKind {
    VulnBasic => "vuln_basic",
    VulnAdvanced => "vuln_advanced",
    SecureBasic => "secure_basic",
    SecureAdvanced => "secure_advanced",
});

impl GenKind {
    pub fn label(self) -> Label {
        match self {
            GenKind::VulnBasic | GenKind::VulnAdvanced => Label::Vulnerable,
            GenKind::SecureBasic | GenKind::SecureAdvanced => Label::Secure,
        }
    }

    pub fn provenance(self) -> Provenance {
        match self {
            GenKind::VulnBasic | GenKind::SecureBasic => Provenance::SyntheticBasic,
            GenKind::VulnAdvanced | GenKind::SecureAdvanced => Provenance::SyntheticAdvanced,
        }
    }
}

/// Defense realized by a basic secure template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecurePattern {
    Cei,
    ReentrancyGuard,
    PullPayment,
    Mutex,
}

string_enum!(SecurePattern {
    Cei => "cei",
    ReentrancyGuard => "reentrancy_guard",
    PullPayment => "pull_payment",
    Mutex => "mutex",
});

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for s in Subtype::ALL {
            assert_eq!(s.as_str().parse::<Subtype>().unwrap(), *s);
            assert_eq!(serde_json::to_string(s).unwrap(), format!("\"{}\"", s.as_str()));
        }
        assert!("five".parse::<Subtype>().is_err());
        assert_eq!(GenKind::SecureAdvanced.label(), Label::Secure);
    }
}
