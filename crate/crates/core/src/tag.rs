//! Reserved-token tagging of synthetic sources.
//!
//! A tag family is derived from one base tag: `⟨BT⟩` itself in constant mode,
//! and `⟨BT_<value>⟩` in per-metadata mode (e.g. `⟨BT_2012⟩` for year tags).
//! Every member of the family is reserved and may not occur in untagged input.

use std::collections::BTreeMap;

use crate::corpus::{Origin, Sentence, SentencePair, Token};
use crate::{Error, Result};

pub const DEFAULT_TAG: &str = "⟨BT⟩";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagMode {
    Constant,
    PerMetadata { key: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSpec {
    tag: Token,
    mode: TagMode,
}

impl Default for TagSpec {
    fn default() -> Self {
        TagSpec::constant(Token::new(DEFAULT_TAG).expect("default tag is a valid token"))
    }
}

impl TagSpec {
    pub fn constant(tag: Token) -> Self {
        TagSpec {
            tag,
            mode: TagMode::Constant,
        }
    }

    pub fn per_metadata(tag: Token, key: impl Into<String>) -> Self {
        TagSpec {
            tag,
            mode: TagMode::PerMetadata { key: key.into() },
        }
    }

    pub fn tag(&self) -> &Token {
        &self.tag
    }

    pub fn mode(&self) -> &TagMode {
        &self.mode
    }

    /// Splits the base tag into the part before the closing bracket and the
    /// closing bracket itself (empty if the tag has none).
    fn stem_and_close(&self) -> (&str, &str) {
        let t = self.tag.as_str();
        for close in ['⟩', '>', ']'] {
            if let Some(stem) = t.strip_suffix(close) {
                if !stem.is_empty() {
                    return (stem, &t[stem.len()..]);
                }
            }
        }
        (t, "")
    }

    /// The family member for one metadata value.
    pub fn tag_for_value(&self, value: &str) -> Result<Token> {
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return Err(Error::InvalidMetadata(value.to_owned()));
        }
        let (stem, close) = self.stem_and_close();
        Token::new(format!("{stem}_{value}{close}"))
    }

    /// The tag to prepend given this line's metadata.
    pub fn resolve(&self, metadata: Option<&BTreeMap<String, String>>) -> Result<Token> {
        match &self.mode {
            TagMode::Constant => Ok(self.tag.clone()),
            TagMode::PerMetadata { key } => {
                let value = metadata
                    .and_then(|m| m.get(key))
                    .ok_or_else(|| Error::MissingMetadata(key.clone()))?;
                self.tag_for_value(value)
            }
        }
    }

    pub fn is_reserved(&self, token: &Token) -> bool {
        let t = token.as_str();
        if t == self.tag.as_str() {
            return true;
        }
        let (stem, close) = self.stem_and_close();
        t.len() > stem.len() + close.len() + 1
            && t.starts_with(stem)
            && t[stem.len()..].starts_with('_')
            && t.ends_with(close)
    }
}

/// Prepends the resolved tag. Input that already contains a reserved tag
/// anywhere is rejected.
pub fn apply_tag(
    s: &Sentence,
    spec: &TagSpec,
    metadata: Option<&BTreeMap<String, String>>,
) -> Result<Sentence> {
    if let Some(position) = s.tokens().iter().position(|t| spec.is_reserved(t)) {
        return Err(Error::ReservedCollision {
            token: s.tokens()[position].to_string(),
            position,
        });
    }
    let tag = spec.resolve(metadata)?;
    let mut tokens = Vec::with_capacity(s.len() + 1);
    tokens.push(tag);
    tokens.extend_from_slice(s.tokens());
    Ok(Sentence::from_tokens(tokens))
}

/// Removes a leading reserved tag if present.
pub fn strip_tag(s: &Sentence, spec: &TagSpec) -> Sentence {
    match s.tokens().first() {
        Some(first) if spec.is_reserved(first) => Sentence::from_tokens(s.tokens()[1..].to_vec()),
        _ => s.clone(),
    }
}

/// Tags the source of a pair. Bitext pairs pass through untouched unless
/// `tag_bitext` is set.
pub fn tag_pair(
    pair: SentencePair,
    spec: &TagSpec,
    metadata: Option<&BTreeMap<String, String>>,
    tag_bitext: bool,
) -> Result<SentencePair> {
    if pair.origin() == Origin::Bitext && !tag_bitext {
        return Ok(pair);
    }
    let source = apply_tag(&pair.source, spec, metadata)?;
    Ok(pair.with_source(source))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based line number.
    pub line: u64,
    pub position: usize,
    pub token: String,
}

/// Lists every occurrence of a reserved token. Line numbers are 1-based.
pub fn validate_reserved<I>(corpus: I, reserved: &[Token]) -> Vec<Violation>
where
    I: IntoIterator<Item = Sentence>,
{
    let mut out = Vec::new();
    for (i, s) in corpus.into_iter().enumerate() {
        out.extend(find_reserved(&s, reserved, i as u64 + 1));
    }
    out
}

pub fn find_reserved(s: &Sentence, reserved: &[Token], line: u64) -> Vec<Violation> {
    s.tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| reserved.contains(t))
        .map(|(position, t)| Violation {
            line,
            position,
            token: t.to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn year(y: &str) -> BTreeMap<String, String> {
        BTreeMap::from([("year".to_owned(), y.to_owned())])
    }

    #[test]
    fn tags_table_sentence() {
        let s = Sentence::tokenize("Raise the child, love the child.");
        let out = apply_tag(&s, &TagSpec::default(), None).unwrap();
        assert_eq!(out.render(), "⟨BT⟩ Raise the child, love the child.");
    }

    #[test]
    fn tags_noised_sentence() {
        let s = Sentence::tokenize("Raise, the child the ⟨BLANK⟩ love.");
        let out = apply_tag(&s, &TagSpec::default(), None).unwrap();
        assert_eq!(out.render(), "⟨BT⟩ Raise, the child the ⟨BLANK⟩ love.");
    }

    #[test]
    fn per_metadata_tags() {
        let spec = TagSpec::per_metadata(Token::new(DEFAULT_TAG).unwrap(), "year");
        let out = apply_tag(&Sentence::tokenize("a b"), &spec, Some(&year("2012"))).unwrap();
        assert_eq!(out.tokens()[0], "⟨BT_2012⟩");
        assert!(spec.is_reserved(&out.tokens()[0]));
        assert!(matches!(
            apply_tag(&Sentence::tokenize("a"), &spec, None),
            Err(Error::MissingMetadata(_))
        ));
        assert!(apply_tag(&Sentence::tokenize("a"), &spec, Some(&year("20 12"))).is_err());
        assert_eq!(strip_tag(&out, &spec).render(), "a b");
    }

    #[test]
    fn ascii_tags_get_family_names() {
        let spec = TagSpec::constant(Token::new("<BT>").unwrap());
        assert_eq!(spec.tag_for_value("x").unwrap(), "<BT_x>");
        let spec = TagSpec::constant(Token::new("@@BT").unwrap());
        assert_eq!(spec.tag_for_value("x").unwrap(), "@@BT_x");
        assert!(!spec.is_reserved(&Token::new("@@BT_").unwrap()));
    }

    #[test]
    fn rejects_already_tagged_input() {
        let spec = TagSpec::default();
        assert!(matches!(
            apply_tag(&Sentence::tokenize("⟨BT⟩ a"), &spec, None),
            Err(Error::ReservedCollision { position: 0, .. })
        ));
        assert!(matches!(
            apply_tag(&Sentence::tokenize("a ⟨BT_2010⟩ b"), &spec, None),
            Err(Error::ReservedCollision { position: 1, .. })
        ));
    }

    #[test]
    fn strip_examples() {
        let spec = TagSpec::default();
        assert_eq!(strip_tag(&Sentence::tokenize("⟨BT⟩ a b"), &spec).render(), "a b");
        let plain = Sentence::tokenize("a b");
        assert_eq!(strip_tag(&plain, &spec), plain);
    }

    #[test]
    fn bitext_is_not_tagged_by_default() {
        let p = SentencePair::new(Sentence::tokenize("a"), Sentence::tokenize("b"), Origin::Bitext);
        let spec = TagSpec::default();
        assert_eq!(tag_pair(p.clone(), &spec, None, false).unwrap(), p);
        assert_eq!(tag_pair(p, &spec, None, true).unwrap().source.render(), "⟨BT⟩ a");
        let bt = SentencePair::new(Sentence::tokenize("a"), Sentence::tokenize("b"), Origin::Bt);
        let tagged = tag_pair(bt, &spec, None, false).unwrap();
        assert_eq!(tagged.source.render(), "⟨BT⟩ a");
        assert_eq!(tagged.target.render(), "b");
    }

    #[test]
    fn validation_reports_lines() {
        let reserved = [Token::new(DEFAULT_TAG).unwrap(), Token::new("⟨BLANK⟩").unwrap()];
        let clean = ["a b", "c d"].map(Sentence::tokenize);
        assert!(validate_reserved(clean, &reserved).is_empty());
        let dirty = ["a b", "c ⟨BT⟩ d", "e", "⟨BLANK⟩ f"].map(Sentence::tokenize);
        let v = validate_reserved(dirty, &reserved);
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].line, v[0].position, v[0].token.as_str()), (2, 1, "⟨BT⟩"));
        assert_eq!((v[1].line, v[1].position), (4, 0));
    }

    proptest! {
        #[test]
        fn tag_round_trip(words in proptest::collection::vec("[a-z,.]{1,6}", 0..20)) {
            let s = Sentence::from_words(&words).unwrap();
            let spec = TagSpec::default();
            let tagged = apply_tag(&s, &spec, None).unwrap();
            prop_assert_eq!(tagged.len(), s.len() + 1);
            prop_assert_eq!(&tagged.tokens()[1..], s.tokens());
            prop_assert_eq!(strip_tag(&tagged, &spec), s);
        }
    }
}
