use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Language code in `xxx_Scri` form, e.g. `eng_Latn`, `arz_Arab`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Result<Self> {
        let b = code.as_bytes();
        let ok = b.len() == 8 && b[..3].iter().all(u8::is_ascii_lowercase) && b[3] == b'_' && b[4].is_ascii_uppercase() && b[5..].iter().all(u8::is_ascii_lowercase);
        if ok {
            Ok(LangCode(code.to_string()))
        } else {
            Err(Error::invalid(format!("`{code}` is not a language code of the form xxx_Scri")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for LangCode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LangCode::new(s)
    }
}

impl TryFrom<String> for LangCode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        LangCode::new(&s)
    }
}

impl From<LangCode> for String {
    fn from(c: LangCode) -> String {
        c.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A translation direction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    pub src: LangCode,
    pub tgt: LangCode,
}

impl Direction {
    pub fn new(src: LangCode, tgt: LangCode) -> Self {
        Direction { src, tgt }
    }

    pub fn reversed(&self) -> Self {
        Direction { src: self.tgt.clone(), tgt: self.src.clone() }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once('-').ok_or_else(|| Error::invalid(format!("direction `{s}` is not of the form src-tgt")))?;
        Ok(Direction::new(a.parse()?, b.parse()?))
    }
}
