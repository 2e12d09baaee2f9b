use serde::{Deserialize, Serialize};

use super::RawAspect;
use crate::ae::AspectSpan;
use crate::crf::{BioSequence, Tag};
use crate::error::{Error, Result};

/// A lowercased token with byte offsets into the original text (end exclusive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits on whitespace; every punctuation character becomes its own token.
pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut open: Option<usize> = None;
    let close = |tokens: &mut Vec<Token>, start: usize, end: usize| {
        tokens.push(Token {
            text: text[start..end].to_lowercase(),
            start,
            end,
        });
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() || is_punct(c) {
            if let Some(s) = open.take() {
                close(&mut tokens, s, i);
            }
            if is_punct(c) {
                close(&mut tokens, i, i + c.len_utf8());
            }
        } else if open.is_none() {
            open = Some(i);
        }
    }
    if let Some(s) = open {
        close(&mut tokens, s, text.len());
    }
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("cannot tokenize empty text".into()));
    }
    Ok(tokens)
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '…' | '–' | '—')
}

/// Indices of the tokens whose byte range overlaps `from..to`.
pub fn overlapping_span(tokens: &[Token], aspect: &RawAspect) -> Result<AspectSpan> {
    let mut hit = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < aspect.to && aspect.from < t.end)
        .map(|(i, _)| i);
    let first = hit
        .next()
        .ok_or_else(|| Error::Alignment(format!("aspect `{}` ({}..{}) matches no token", aspect.term, aspect.from, aspect.to)))?;
    let last = hit.last().unwrap_or(first);
    Ok(AspectSpan { start: first, end: last })
}

/// B on the first token overlapping each aspect, I on the rest, O elsewhere.
pub fn align_bio(tokens: &[Token], aspects: &[RawAspect]) -> Result<BioSequence> {
    let mut tags = vec![Tag::O; tokens.len()];
    let mut owner: Vec<Option<usize>> = vec![None; tokens.len()];
    for (k, a) in aspects.iter().enumerate() {
        let span = overlapping_span(tokens, a)?;
        for i in span.start..=span.end {
            if let Some(other) = owner[i] {
                return Err(Error::Alignment(format!(
                    "aspects `{}` and `{}` overlap at token {}",
                    aspects[other].term, a.term, i
                )));
            }
            owner[i] = Some(k);
            tags[i] = if i == span.start { Tag::B } else { Tag::I };
        }
    }
    Ok(BioSequence::new(tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RawPolarity;

    fn texts(ts: &[Token]) -> Vec<&str> {
        ts.iter().map(|t| t.text.as_str()).collect()
    }

    fn aspect(text: &str, term: &str) -> RawAspect {
        let from = text.find(term).unwrap();
        RawAspect {
            term: term.into(),
            polarity: RawPolarity::Positive,
            from,
            to: from + term.len(),
        }
    }

    #[test]
    fn splits_punctuation() {
        let t = tokenize("Great battery!").unwrap();
        assert_eq!(texts(&t), ["great", "battery", "!"]);
        assert_eq!((t[2].start, t[2].end), (13, 14));
        assert_eq!(texts(&tokenize("windows 8").unwrap()), ["windows", "8"]);
        assert!(tokenize("  \t").is_err());
    }

    #[test]
    fn offsets_reproduce_text() {
        let s = "It's  GREAT, (really) – fast…ok";
        let t = tokenize(s).unwrap();
        let joined: String = t.iter().map(|x| &s[x.start..x.end]).collect();
        let expected: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(joined, expected);
    }

    #[test]
    fn bio_alignment() {
        let s = "the battery life rocks";
        let t = tokenize(s).unwrap();
        let tags = align_bio(&t, &[aspect(s, "battery life")]).unwrap();
        assert_eq!(tags.to_string(), "OBIO");

        let s = "the batteries die";
        let t = tokenize(s).unwrap();
        let a = RawAspect {
            to: 11,
            ..aspect(s, "batteries")
        };
        assert_eq!(align_bio(&t, &[a]).unwrap().to_string(), "OBO");
        assert_eq!(align_bio(&t, &[]).unwrap().to_string(), "OOO");
    }

    #[test]
    fn alignment_errors() {
        let s = "good food here";
        let t = tokenize(s).unwrap();
        let a = aspect(s, "good food");
        let b = aspect(s, "food");
        assert!(matches!(align_bio(&t, &[a, b]), Err(Error::Alignment(_))));
        let none = RawAspect {
            term: "ghost".into(),
            polarity: RawPolarity::Neutral,
            from: 40,
            to: 45,
        };
        let err = align_bio(&t, &[none]).unwrap_err().to_string();
        assert!(err.contains("ghost"));
    }
}
