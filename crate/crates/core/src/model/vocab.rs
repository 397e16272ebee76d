//! Character vocabulary with special and language-tag tokens.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::lang::LangCode;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const SPECIALS: [(&str, &str); 4] = [("<pad>", "pad"), ("<s>", "bos"), ("</s>", "eos"), ("<unk>", "unk")];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum TokenKind {
    Special(String),
    Lang(LangCode),
    Char(char),
}

/// Token table. Layout: the four specials (pad is 0), language tags sorted by
/// code, then characters sorted by code point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TokenKind>", into = "Vec<TokenKind>")]
pub struct Vocab {
    tokens: Vec<TokenKind>,
    chars: HashMap<char, usize>,
    lang_tags: BTreeMap<LangCode, usize>,
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

impl Vocab {
    /// Builds a vocabulary covering `languages` and every character of `texts`
    /// after NFC normalization.
    pub fn build<'a>(languages: impl IntoIterator<Item = &'a LangCode>, texts: impl IntoIterator<Item = &'a str>) -> Self {
        let langs: BTreeSet<LangCode> = languages.into_iter().cloned().collect();
        let chars: BTreeSet<char> = texts.into_iter().flat_map(|t| t.nfc().collect::<Vec<_>>()).collect();
        let mut tokens: Vec<TokenKind> = SPECIALS.iter().map(|(_, k)| TokenKind::Special((*k).to_string())).collect();
        tokens.extend(langs.into_iter().map(TokenKind::Lang));
        tokens.extend(chars.into_iter().map(TokenKind::Char));
        Vocab::try_from(tokens).expect("freshly built vocabulary is consistent")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[TokenKind] {
        &self.tokens
    }

    pub fn lang_tag(&self, lang: &LangCode) -> Result<usize> {
        self.lang_tags.get(lang).copied().ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    pub fn languages(&self) -> impl Iterator<Item = &LangCode> {
        self.lang_tags.keys()
    }

    pub fn is_lang_tag(&self, id: usize) -> bool {
        matches!(self.tokens.get(id), Some(TokenKind::Lang(_)))
    }

    /// Whether a decoder may emit `id`: characters, unk and eos.
    pub fn is_generable(&self, id: usize) -> bool {
        id == EOS || matches!(self.tokens.get(id), Some(TokenKind::Char(_)))
    }

    pub fn char_id(&self, c: char) -> Option<usize> {
        self.chars.get(&c).copied()
    }

    /// NFC-normalizes `text` and maps each character to its id, or to unk.
    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        text.nfc().map(|c| self.chars.get(&c).copied().unwrap_or(UNK)).collect()
    }

    /// Concatenates character tokens; specials and tags are skipped.
    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter_map(|&i| match self.tokens.get(i) {
                Some(TokenKind::Char(c)) => Some(*c),
                _ => None,
            })
            .collect()
    }

    /// One token per line: the token as a JSON string, a tab, and its kind.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            let (text, kind) = match t {
                TokenKind::Special(k) => {
                    let name = SPECIALS.iter().find(|(_, n)| n == k).map(|(s, _)| *s).unwrap_or("?");
                    (name.to_string(), format!("special:{k}"))
                }
                TokenKind::Lang(code) => (format!("__{code}__"), "lang".to_string()),
                TokenKind::Char(c) => (c.to_string(), "char".to_string()),
            };
            out.push_str(&serde_json::to_string(&text).expect("strings serialize"));
            out.push('\t');
            out.push_str(&kind);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let (tok, kind) = line.rsplit_once('\t').ok_or_else(|| Error::invalid(format!("vocab line {}: missing kind column", n + 1)))?;
            let tok: String = serde_json::from_str(tok)?;
            let t = match kind {
                "lang" => {
                    let code = tok.strip_prefix("__").and_then(|s| s.strip_suffix("__")).ok_or_else(|| Error::invalid(format!("vocab line {}: bad language tag {tok}", n + 1)))?;
                    TokenKind::Lang(code.parse()?)
                }
                "char" => {
                    let mut it = tok.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) => TokenKind::Char(c),
                        _ => return Err(Error::invalid(format!("vocab line {}: `{tok}` is not one character", n + 1))),
                    }
                }
                k => match k.strip_prefix("special:") {
                    Some(name) => TokenKind::Special(name.to_string()),
                    None => return Err(Error::invalid(format!("vocab line {}: unknown kind `{k}`", n + 1))),
                },
            };
            tokens.push(t);
        }
        Vocab::try_from(tokens)
    }
}

impl TryFrom<Vec<TokenKind>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<TokenKind>) -> Result<Self> {
        for (i, (_, kind)) in SPECIALS.iter().enumerate() {
            if tokens.get(i) != Some(&TokenKind::Special((*kind).to_string())) {
                return Err(Error::invalid(format!("vocab slot {i} must hold the `{kind}` special")));
            }
        }
        let mut chars = HashMap::new();
        let mut lang_tags = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate().skip(SPECIALS.len()) {
            let dup = match t {
                TokenKind::Char(c) => chars.insert(*c, i).is_some(),
                TokenKind::Lang(l) => lang_tags.insert(l.clone(), i).is_some(),
                TokenKind::Special(k) => return Err(Error::invalid(format!("extra special token `{k}` at {i}"))),
            };
            if dup {
                return Err(Error::invalid(format!("duplicate vocab entry at {i}")));
            }
        }
        Ok(Vocab { tokens, chars, lang_tags })
    }
}

impl From<Vocab> for Vec<TokenKind> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}
