//! Synthetic SemEval-style corpora with exact label and SA/MA counts, for
//! tests and offline runs when the real files are not available.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::semeval::{Domain, RawAspect, RawPolarity, RawSentence};
use crate::alsa::Polarity;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub domain: Domain,
    /// Positive, negative, neutral aspect counts.
    pub labels: [usize; 3],
    /// Aspects alone in their sentence; the rest share a sentence with at least one other.
    pub single_aspect: usize,
    /// Extra conflict-polarity aspects, placed in multi-aspect sentences.
    pub conflicts: usize,
    /// Sentences without aspects.
    pub plain: usize,
    pub seed: u64,
    pub id_prefix: String,
}

impl SynthSpec {
    pub fn total(&self) -> usize {
        self.labels.iter().sum()
    }

    pub fn multi_aspect(&self) -> usize {
        self.total().saturating_sub(self.single_aspect)
    }

    /// Counts of the SemEval-2014 splits: class distribution and SA/MA partition.
    pub fn semeval(domain: Domain, split: Split, seed: u64) -> Self {
        let (labels, sa, conflicts) = match (domain, split) {
            (Domain::Restaurant, Split::Train) => ([2164, 807, 637], 1063, 20),
            (Domain::Restaurant, Split::Test) => ([728, 196, 196], 302, 5),
            (Domain::Laptop, Split::Train) => ([994, 870, 464], 957, 20),
            (Domain::Laptop, Split::Test) => ([341, 128, 169], 269, 5),
        };
        SynthSpec {
            domain,
            labels,
            single_aspect: sa,
            conflicts,
            plain: sa / 4,
            seed,
            id_prefix: format!("{}-{}-", domain, split.as_str()),
        }
    }

    /// A small corpus of `n` aspects split roughly evenly over the classes.
    pub fn small(domain: Domain, n: usize, single_aspect: usize, seed: u64) -> Self {
        let base = n / 3;
        let labels = [base + usize::from(n % 3 > 0), base + usize::from(n % 3 > 1), base];
        SynthSpec {
            domain,
            labels,
            single_aspect,
            conflicts: 0,
            plain: 0,
            seed,
            id_prefix: format!("{}-", domain),
        }
    }
}

const LAPTOP_TERMS: [&str; 16] = [
    "battery life",
    "screen",
    "keyboard",
    "trackpad",
    "hard drive",
    "price",
    "speakers",
    "operating system",
    "charger",
    "graphics card",
    "memory",
    "fan",
    "webcam",
    "customer support",
    "boot time",
    "warranty",
];

const RESTAURANT_TERMS: [&str; 16] = [
    "food",
    "service",
    "wait staff",
    "pizza",
    "wine list",
    "dessert",
    "prices",
    "ambience",
    "sushi",
    "menu",
    "bartender",
    "portions",
    "decor",
    "coffee",
    "brunch",
    "noise level",
];

const POSITIVE: [&str; 6] = ["great", "excellent", "amazing", "wonderful", "superb", "fantastic"];
const NEGATIVE: [&str; 6] = ["terrible", "awful", "horrible", "disappointing", "poor", "dreadful"];
const NEUTRAL: [&str; 6] = ["standard", "ordinary", "typical", "unremarkable", "average", "plain"];
const CONFLICT: [&str; 3] = ["good but pricey", "fast but noisy", "nice but small"];
const OPENERS: [&str; 5] = ["", "honestly ,", "i think", "overall ,", "in my opinion"];
const FILLER: [&str; 4] = [
    "we went there last week .",
    "i bought it for school .",
    "nothing else to add .",
    "my friend recommended it .",
];

fn adjective<R: Rng>(p: RawPolarity, rng: &mut R) -> &'static str {
    let list: &[&str] = match p {
        RawPolarity::Positive => &POSITIVE,
        RawPolarity::Negative => &NEGATIVE,
        RawPolarity::Neutral => &NEUTRAL,
        RawPolarity::Conflict => &CONFLICT,
    };
    list[rng.random_range(0..list.len())]
}

/// Group sizes for `n` multi-aspect slots: pairs and triples only.
fn groups(n: usize) -> Result<Vec<usize>> {
    if n == 1 {
        return Err(Error::InvalidArgument("a single multi-aspect sample cannot share a sentence".into()));
    }
    let mut out = vec![2; n / 2];
    if n % 2 == 1 {
        out[0] = 3;
    }
    Ok(out)
}

fn sentence<R: Rng>(id: String, terms: &[&str], polarities: &[RawPolarity], rng: &mut R) -> RawSentence {
    let mut text = String::new();
    let opener = OPENERS[rng.random_range(0..OPENERS.len())];
    if !opener.is_empty() {
        text.push_str(opener);
        text.push(' ');
    }
    let mut aspects = Vec::new();
    for (i, (&term, &p)) in terms.iter().zip(polarities).enumerate() {
        if i > 0 {
            text.push_str(if rng.random_bool(0.5) { " and " } else { " , while " });
        }
        text.push_str("the ");
        let from = text.len();
        text.push_str(term);
        aspects.push(RawAspect {
            term: term.to_string(),
            polarity: p,
            from,
            to: text.len(),
        });
        text.push_str(" is ");
        text.push_str(adjective(p, rng));
    }
    text.push_str(" .");
    RawSentence { id, text, aspects }
}

/// Generates sentences whose non-conflict aspects match `spec` exactly.
pub fn generate(spec: &SynthSpec) -> Result<Vec<RawSentence>> {
    let total = spec.total();
    if spec.single_aspect > total {
        return Err(Error::InvalidArgument(format!(
            "{} single-aspect samples but only {} labelled aspects",
            spec.single_aspect, total
        )));
    }
    let mut rng = rng_from_seed(derive_seed(spec.seed, "synth"));
    let mut labels: Vec<RawPolarity> = Polarity::ALL
        .iter()
        .zip(spec.labels)
        .flat_map(|(&p, c)| std::iter::repeat_n(RawPolarity::from(p), c))
        .collect();
    labels.shuffle(&mut rng);
    let pool: &[&str] = match spec.domain {
        Domain::Laptop => &LAPTOP_TERMS,
        Domain::Restaurant => &RESTAURANT_TERMS,
    };
    let mut sizes = vec![1; spec.single_aspect];
    let ma = spec.multi_aspect();
    if ma > 0 {
        sizes.extend(groups(ma)?);
    }
    let ma_sentences = sizes.len() - spec.single_aspect;
    if spec.conflicts > 0 && ma_sentences == 0 {
        return Err(Error::InvalidArgument("conflict aspects need multi-aspect sentences".into()));
    }
    let mut conflicts_per = vec![0usize; sizes.len()];
    for k in 0..spec.conflicts {
        conflicts_per[spec.single_aspect + k % ma_sentences] += 1;
    }
    let mut kinds: Vec<Option<usize>> = (0..sizes.len()).map(Some).collect();
    kinds.extend(std::iter::repeat_n(None, spec.plain));
    kinds.shuffle(&mut rng);

    let mut next = labels.into_iter();
    let mut out = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.into_iter().enumerate() {
        let id = format!("{}{}", spec.id_prefix, i);
        match kind {
            None => {
                let text = FILLER[rng.random_range(0..FILLER.len())].to_string();
                out.push(RawSentence {
                    id,
                    text,
                    aspects: Vec::new(),
                });
            }
            Some(k) => {
                let mut pols: Vec<RawPolarity> = (0..sizes[k]).map(|_| next.next().expect("label count")).collect();
                pols.extend(std::iter::repeat_n(RawPolarity::Conflict, conflicts_per[k]));
                if pols.len() > pool.len() {
                    return Err(Error::InvalidArgument("too many aspects for one sentence".into()));
                }
                pols.shuffle(&mut rng);
                let terms: Vec<&str> = pool.choose_multiple(&mut rng, pols.len()).copied().collect();
                out.push(sentence(id, &terms, &pols, &mut rng));
            }
        }
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// SemEval-2014 XML with character offsets.
pub fn to_xml(sentences: &[RawSentence]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<sentences>\n");
    for s in sentences {
        out.push_str(&format!("  <sentence id=\"{}\">\n    <text>{}</text>\n", escape(&s.id), escape(&s.text)));
        if !s.aspects.is_empty() {
            out.push_str("    <aspectTerms>\n");
            for a in &s.aspects {
                let from = s.text[..a.from].chars().count();
                let to = s.text[..a.to].chars().count();
                let pol = match a.polarity {
                    RawPolarity::Positive => "positive",
                    RawPolarity::Negative => "negative",
                    RawPolarity::Neutral => "neutral",
                    RawPolarity::Conflict => "conflict",
                };
                out.push_str(&format!(
                    "      <aspectTerm term=\"{}\" polarity=\"{}\" from=\"{}\" to=\"{}\"/>\n",
                    escape(&a.term),
                    pol,
                    from,
                    to
                ));
            }
            out.push_str("    </aspectTerms>\n");
        }
        out.push_str("  </sentence>\n");
    }
    out.push_str("</sentences>\n");
    out
}
