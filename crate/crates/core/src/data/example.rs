use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const LITERAL: u8 = 0;
pub const METAPHOR: u8 = 1;

/// The four genres of the VU Amsterdam corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Academic,
    Conversation,
    Fiction,
    News,
}

impl Genre {
    pub const ALL: [Genre; 4] = [Genre::Academic, Genre::Conversation, Genre::Fiction, Genre::News];

    pub fn as_str(self) -> &'static str {
        match self {
            Genre::Academic => "academic",
            Genre::Conversation => "conversation",
            Genre::Fiction => "fiction",
            Genre::News => "news",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Genre {
    type Err = String;

    /// Accepts the canonical names and the VUA file codes (`acprose`, `convrsn`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "academic" | "acprose" => Ok(Genre::Academic),
            "conversation" | "convrsn" => Ok(Genre::Conversation),
            "fiction" => Ok(Genre::Fiction),
            "news" => Ok(Genre::News),
            other => Err(format!("unknown genre '{other}'")),
        }
    }
}

/// One annotated sentence.
///
/// For classification corpora `target_index` marks the verb whose label is
/// gold; every other token is labeled literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub genre: Option<Genre>,
    pub tokens: Vec<String>,
    pub pos: Option<Vec<String>>,
    pub labels: Vec<u8>,
    pub target_index: Option<usize>,
}

impl Example {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn target_label(&self) -> Option<u8> {
        self.target_index.map(|i| self.labels[i])
    }

    /// Sentence-level label used for stratification: the target label when
    /// there is a target, otherwise whether any token is metaphorical.
    pub fn stratum(&self) -> u8 {
        self.target_label()
            .unwrap_or_else(|| u8::from(self.labels.contains(&METAPHOR)))
    }

    pub fn pos_at(&self, i: usize) -> Option<&str> {
        self.pos.as_ref().map(|p| p[i].as_str())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tokens.is_empty() {
            return Err("empty sentence".into());
        }
        if self.labels.len() != self.tokens.len() {
            return Err(format!(
                "{} tokens but {} labels",
                self.tokens.len(),
                self.labels.len()
            ));
        }
        if let Some(pos) = &self.pos {
            if pos.len() != self.tokens.len() {
                return Err(format!("{} tokens but {} POS tags", self.tokens.len(), pos.len()));
            }
        }
        if let Some(bad) = self.labels.iter().find(|&&l| l > METAPHOR) {
            return Err(format!("label {bad} is not 0 or 1"));
        }
        if let Some(t) = self.target_index {
            if t >= self.tokens.len() {
                return Err(format!(
                    "target index {t} out of range for {} tokens",
                    self.tokens.len()
                ));
            }
        }
        Ok(())
    }
}
