use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alsa::Polarity;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Laptop,
    Restaurant,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Laptop, Domain::Restaurant];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Laptop => "laptop",
            Domain::Restaurant => "restaurant",
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laptop" | "laptops" => Ok(Domain::Laptop),
            "restaurant" | "restaurants" => Ok(Domain::Restaurant),
            _ => Err(Error::Config(format!("unknown domain `{}`", s))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawPolarity {
    Positive,
    Negative,
    Neutral,
    Conflict,
}

impl RawPolarity {
    /// `None` for conflict, which has no sentiment class.
    pub fn label(self) -> Option<Polarity> {
        match self {
            RawPolarity::Positive => Some(Polarity::Positive),
            RawPolarity::Negative => Some(Polarity::Negative),
            RawPolarity::Neutral => Some(Polarity::Neutral),
            RawPolarity::Conflict => None,
        }
    }
}

impl From<Polarity> for RawPolarity {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Positive => RawPolarity::Positive,
            Polarity::Negative => RawPolarity::Negative,
            Polarity::Neutral => RawPolarity::Neutral,
        }
    }
}

impl FromStr for RawPolarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(RawPolarity::Positive),
            "negative" => Ok(RawPolarity::Negative),
            "neutral" => Ok(RawPolarity::Neutral),
            "conflict" => Ok(RawPolarity::Conflict),
            _ => Err(Error::InvalidArgument(format!("unknown polarity `{}`", s))),
        }
    }
}

/// An annotated aspect term. `from`/`to` are byte offsets into the sentence
/// text (end exclusive); the XML's character offsets are converted on parse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAspect {
    pub term: String,
    pub polarity: RawPolarity,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSentence {
    pub id: String,
    pub text: String,
    pub aspects: Vec<RawAspect>,
}

/// Parses a SemEval-2014 Task 4 file. Sentences without aspect terms are kept.
pub fn parse_semeval(xml: &str) -> Result<Vec<RawSentence>> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        Error::Xml(format!("line {} column {}: {}", pos.row, pos.col, e))
    })?;
    let mut out = Vec::new();
    for (index, node) in doc
        .descendants()
        .filter(|n| n.has_tag_name("sentence"))
        .enumerate()
    {
        let id = node
            .attribute("id")
            .map(str::to_string)
            .unwrap_or_else(|| index.to_string());
        let located = |msg: String| {
            let line = doc.text_pos_at(node.range().start).row;
            Error::Xml(format!("sentence `{}` (line {}): {}", id, line, msg))
        };
        let text = node
            .children()
            .find(|c| c.has_tag_name("text"))
            .and_then(|t| t.text())
            .ok_or_else(|| located("missing <text>".into()))?
            .to_string();
        let mut aspects = Vec::new();
        for term in node.descendants().filter(|n| n.has_tag_name("aspectTerm")) {
            let attr = |name: &str| {
                term.attribute(name)
                    .ok_or_else(|| located(format!("aspectTerm without `{}`", name)))
            };
            let term_text = attr("term")?.to_string();
            let polarity: RawPolarity = attr("polarity")?.parse().map_err(|e: Error| located(e.to_string()))?;
            let offset = |name: &str| -> Result<usize> {
                attr(name)?
                    .trim()
                    .parse()
                    .map_err(|_| located(format!("`{}` is not an offset", name)))
            };
            let (from_c, to_c) = (offset("from")?, offset("to")?);
            let from = char_to_byte(&text, from_c)
                .ok_or_else(|| located(format!("offset {} beyond the text", from_c)))?;
            let to = char_to_byte(&text, to_c)
                .ok_or_else(|| located(format!("offset {} beyond the text", to_c)))?;
            if from >= to {
                return Err(located(format!("empty aspect range {}..{} for `{}`", from_c, to_c, term_text)));
            }
            aspects.push(RawAspect {
                term: term_text,
                polarity,
                from,
                to,
            });
        }
        out.push(RawSentence { id, text, aspects });
    }
    Ok(out)
}

fn char_to_byte(text: &str, chars: usize) -> Option<usize> {
    if chars == text.chars().count() {
        return Some(text.len());
    }
    text.char_indices().nth(chars).map(|(b, _)| b)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="7">
    <text>The battery life is great but the screen is dim.</text>
    <aspectTerms>
      <aspectTerm term="battery life" polarity="positive" from="4" to="16"/>
      <aspectTerm term="screen" polarity="negative" from="34" to="40"/>
    </aspectTerms>
  </sentence>
  <sentence id="8">
    <text>Nothing to say.</text>
  </sentence>
</sentences>"#;

    #[test]
    fn two_aspects_one_record() {
        let s = parse_semeval(FIXTURE).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].id, "7");
        assert_eq!(s[0].aspects.len(), 2);
        let a = &s[0].aspects[0];
        assert_eq!(&s[0].text[a.from..a.to], "battery life");
        assert_eq!(s[0].aspects[1].polarity, RawPolarity::Negative);
        assert!(s[1].aspects.is_empty());
    }

    #[test]
    fn character_offsets_become_byte_offsets() {
        let xml = r#"<sentences><sentence id="1"><text>Café food</text><aspectTerms>
            <aspectTerm term="food" polarity="neutral" from="5" to="9"/></aspectTerms></sentence></sentences>"#;
        let s = parse_semeval(xml).unwrap();
        let a = &s[0].aspects[0];
        assert_eq!(&s[0].text[a.from..a.to], "food");
    }

    #[test]
    fn errors_are_located() {
        let err = parse_semeval("<sentences><sentence id=\"1\"><text>x</sentence>").unwrap_err();
        assert!(err.to_string().contains("line"), "{}", err);
        let xml = r#"<sentences><sentence id="s9"><text>good food</text><aspectTerms>
            <aspectTerm term="food" from="5" to="9"/></aspectTerms></sentence></sentences>"#;
        let err = parse_semeval(xml).unwrap_err().to_string();
        assert!(err.contains("s9") && err.contains("polarity"), "{}", err);
    }
}
