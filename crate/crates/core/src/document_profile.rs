//! Document profiles: instruction steps segmented from plain text, each
//! tagged with the key object it concerns.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSource {
    Rule,
    Model,
    Manual,
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionStep {
    pub id: String,
    pub text: String,
    pub key_object: Option<String>,
    pub confidence: f64,
    pub source: StepSource,
    #[serde(rename = "pref_pos")]
    pub preferred_position: Option<[f64; 3]>,
}

impl InstructionStep {
    pub fn unassigned(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            key_object: None,
            confidence: 0.0,
            source: StepSource::Unassigned,
            preferred_position: None,
        }
    }

    pub fn preferred(&self) -> Option<Vec3> {
        self.preferred_position.map(Vec3::from)
    }

    fn clear_label(&mut self) {
        self.key_object = None;
        self.confidence = 0.0;
        self.source = StepSource::Unassigned;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentMode {
    Paragraph,
    Sentence,
}

/// Known key-object labels plus phrase aliases that map onto them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVocabulary {
    labels: Vec<String>,
    aliases: Vec<(String, String)>,
}

impl Default for LabelVocabulary {
    /// The nine kitchen labels; "coffee machine" is an alias of "coffee maker".
    fn default() -> Self {
        let labels = [
            "blender",
            "cabinet",
            "coffee maker",
            "countertop",
            "fridge",
            "microwave",
            "oven",
            "sink",
            "toaster",
        ];
        Self::new(labels.map(String::from).to_vec(), vec![("coffee machine".into(), "coffee maker".into())])
            .expect("built-in vocabulary is valid")
    }
}

impl LabelVocabulary {
    pub fn new(labels: Vec<String>, aliases: Vec<(String, String)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for l in &labels {
            if l.trim().is_empty() || *l != l.to_lowercase() || tokens(l).join(" ") != *l {
                return Err(Error::InvalidArgument(format!("label `{l}` must be lowercase words")));
            }
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate label `{l}`")));
            }
        }
        for (alias, target) in &aliases {
            if !seen.contains(target.as_str()) {
                return Err(Error::InvalidArgument(format!("alias `{alias}` targets unknown label `{target}`")));
            }
        }
        let aliases = aliases.into_iter().map(|(a, t)| (tokens(&a).join(" "), t)).collect();
        Ok(Self { labels, aliases })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// Every phrase that signals a label, the label itself first.
    fn phrases(&self) -> impl Iterator<Item = (&str, &str)> {
        self.labels
            .iter()
            .map(|l| (l.as_str(), l.as_str()))
            .chain(self.aliases.iter().map(|(a, t)| (a.as_str(), t.as_str())))
    }
}

/// Lowercase alphanumeric tokens.
fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatch {
    /// Set only when exactly one distinct label matched.
    pub label: Option<String>,
    pub matches: BTreeSet<String>,
}

/// Labels whose words (or an alias's words) appear in `text` as a whole
/// phrase, case-insensitively.
pub fn rule_label(text: &str, vocab: &LabelVocabulary) -> RuleMatch {
    let toks = tokens(text);
    let matches: BTreeSet<String> = vocab
        .phrases()
        .filter(|(phrase, _)| {
            let words: Vec<&str> = phrase.split(' ').collect();
            toks.windows(words.len()).any(|w| w.iter().zip(&words).all(|(a, b)| a == b))
        })
        .map(|(_, label)| label.to_string())
        .collect();
    let label = (matches.len() == 1).then(|| matches.iter().next().cloned()).flatten();
    RuleMatch { label, matches }
}

fn split_sentences(paragraph: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = paragraph.char_indices().collect();
    for (i, &(pos, ch)) in chars.iter().enumerate() {
        let terminator = matches!(ch, '.' | '!' | '?');
        if terminator && chars.get(i + 1).is_some_and(|&(_, next)| next.is_whitespace()) {
            let end = pos + ch.len_utf8();
            out.push(paragraph[start..end].trim().to_string());
            start = end;
        }
    }
    out.push(paragraph[start..].trim().to_string());
    out.retain(|s| !s.is_empty());
    out
}

/// Splits `text` into steps `s1`, `s2`, ... Paragraphs are separated by
/// blank lines; whitespace runs inside a step collapse to one space.
pub fn segment_document(text: &str, mode: SegmentMode) -> Result<Vec<InstructionStep>> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join(" "));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join(" "));
    }
    let collapse = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let texts: Vec<String> = paragraphs
        .iter()
        .map(|p| collapse(p))
        .flat_map(|p| match mode {
            SegmentMode::Paragraph => vec![p],
            SegmentMode::Sentence => split_sentences(&p),
        })
        .collect();
    if texts.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| InstructionStep::unassigned(format!("s{}", i + 1), t))
        .collect())
}

/// Ranked `(label, confidence)` predictions per step id, in file order.
pub type Predictions = BTreeMap<String, Vec<(String, f64)>>;

const TSV_HEADER: [&str; 3] = ["step_id", "label", "confidence"];

/// Parses `step_id \t label \t confidence` rows; a header row is optional.
pub fn parse_predictions_tsv(text: &str) -> Result<Predictions> {
    let mut out = Predictions::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if n == 0 && cols == TSV_HEADER {
            continue;
        }
        let [id, label, conf] = cols[..] else {
            return Err(Error::Parse(format!("predictions line {}: expected 3 tab-separated columns", n + 1)));
        };
        let conf: f64 = conf
            .parse()
            .map_err(|_| Error::Parse(format!("predictions line {}: bad confidence `{conf}`", n + 1)))?;
        if !(0.0..=1.0).contains(&conf) {
            return Err(Error::Parse(format!("predictions line {}: confidence {conf} outside [0, 1]", n + 1)));
        }
        if id.is_empty() || label.is_empty() {
            return Err(Error::Parse(format!("predictions line {}: empty field", n + 1)));
        }
        out.entry(id.to_string()).or_default().push((label.to_lowercase(), conf));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentProfile {
    pub title: String,
    pub available_key_objects: BTreeSet<String>,
    pub steps: Vec<InstructionStep>,
}

impl DocumentProfile {
    pub fn new(title: impl Into<String>, available: BTreeSet<String>, steps: Vec<InstructionStep>) -> Result<Self> {
        let p = Self {
            title: title.into(),
            available_key_objects: available,
            steps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut ids = HashSet::new();
        for s in &self.steps {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::InvalidProfile(format!("duplicate step id `{}`", s.id)));
            }
            if s.text.trim().is_empty() {
                return Err(Error::InvalidProfile(format!("step `{}` has empty text", s.id)));
            }
            if !(0.0..=1.0).contains(&s.confidence) {
                return Err(Error::InvalidProfile(format!("step `{}` confidence {} outside [0, 1]", s.id, s.confidence)));
            }
            match (&s.key_object, s.source) {
                (Some(k), StepSource::Unassigned) => {
                    return Err(Error::InvalidProfile(format!("step `{}` is unassigned but labelled `{k}`", s.id)))
                }
                (None, src) if src != StepSource::Unassigned => {
                    return Err(Error::InvalidProfile(format!("step `{}` has source {src:?} but no label", s.id)))
                }
                (Some(k), _) if !self.available_key_objects.contains(k) => {
                    return Err(Error::InvalidProfile(format!(
                        "step `{}` is labelled `{k}`, which is not an available key object",
                        s.id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let p: Self = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profiles serialize")
    }

    pub fn step(&self, id: &str) -> Result<&InstructionStep> {
        self.steps.iter().find(|s| s.id == id).ok_or_else(|| Error::UnknownStep(id.into()))
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.steps.iter().position(|s| s.id == id).ok_or_else(|| Error::UnknownStep(id.into()))
    }

    fn next_id(&self) -> String {
        let max = self
            .steps
            .iter()
            .filter_map(|s| s.id.strip_prefix('s')?.parse::<usize>().ok())
            .max()
            .unwrap_or(0);
        format!("s{}", max + 1)
    }

    /// Splits a step at byte offset `at` of its text. The first half keeps
    /// the id; the second half gets a fresh one. Both lose their labels.
    pub fn split_step(&self, id: &str, at: usize) -> Result<Self> {
        let i = self.index(id)?;
        let text = &self.steps[i].text;
        if !text.is_char_boundary(at) {
            return Err(Error::InvalidArgument(format!("offset {at} is not a character boundary")));
        }
        let (a, b) = (text[..at].trim(), text[at..].trim());
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument(format!("splitting `{id}` at {at} leaves an empty step")));
        }
        let mut out = self.clone();
        let mut second = InstructionStep::unassigned(self.next_id(), b);
        second.preferred_position = self.steps[i].preferred_position;
        out.steps[i].text = a.to_string();
        out.steps[i].clear_label();
        out.steps.insert(i + 1, second);
        Ok(out)
    }

    /// Merges two adjacent steps into the earlier one, texts joined by a
    /// space.
    pub fn merge_steps(&self, a: &str, b: &str) -> Result<Self> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let (first, second) = (ia.min(ib), ia.max(ib));
        if second != first + 1 {
            return Err(Error::NonAdjacentMerge(a.into(), b.into()));
        }
        let mut out = self.clone();
        let tail = out.steps.remove(second);
        let head = &mut out.steps[first];
        head.text = format!("{} {}", head.text, tail.text);
        head.clear_label();
        Ok(out)
    }

    pub fn delete_step(&self, id: &str) -> Result<Self> {
        let i = self.index(id)?;
        if self.steps.len() == 1 {
            return Err(Error::EmptyDocument);
        }
        let mut out = self.clone();
        out.steps.remove(i);
        Ok(out)
    }

    pub fn edit_text(&self, id: &str, text: &str) -> Result<Self> {
        let i = self.index(id)?;
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument(format!("step `{id}` text would be empty")));
        }
        let mut out = self.clone();
        out.steps[i].text = text.trim().to_string();
        out.steps[i].clear_label();
        Ok(out)
    }

    /// Author override; never replaced by rules or predictions.
    pub fn assign_manual(&self, id: &str, label: &str) -> Result<Self> {
        let i = self.index(id)?;
        if !self.available_key_objects.contains(label) {
            return Err(Error::UnknownKeyObject(label.into()));
        }
        let mut out = self.clone();
        let s = &mut out.steps[i];
        s.key_object = Some(label.into());
        s.confidence = 1.0;
        s.source = StepSource::Manual;
        Ok(out)
    }

    /// Rule-labels every unassigned step whose unique match is available.
    pub fn apply_rules(&self, vocab: &LabelVocabulary) -> Self {
        let mut out = self.clone();
        for s in out.steps.iter_mut().filter(|s| s.source == StepSource::Unassigned) {
            if let Some(label) = rule_label(&s.text, vocab).label {
                if self.available_key_objects.contains(&label) {
                    s.key_object = Some(label);
                    s.confidence = 1.0;
                    s.source = StepSource::Rule;
                }
            }
        }
        out
    }

    /// Gives each unassigned or model-labelled step with predictions the
    /// most confident predicted label that is available; steps with no
    /// qualifying label end up unassigned.
    pub fn apply_predictions(&self, predictions: &Predictions) -> Result<Self> {
        if self.available_key_objects.is_empty() {
            return Err(Error::EmptyAvailableSet);
        }
        if let Some(id) = predictions.keys().find(|id| self.index(id).is_err()) {
            return Err(Error::UnknownStep(id.clone()));
        }
        let mut out = self.clone();
        for s in &mut out.steps {
            if !matches!(s.source, StepSource::Unassigned | StepSource::Model) {
                continue;
            }
            let Some(ranked) = predictions.get(&s.id) else { continue };
            let pick = ranked
                .iter()
                .filter(|(label, _)| self.available_key_objects.contains(label))
                .fold(None::<&(String, f64)>, |best, cand| match best {
                    Some(b) if b.1 >= cand.1 => Some(b),
                    _ => Some(cand),
                });
            match pick {
                Some((label, conf)) => {
                    s.key_object = Some(label.clone());
                    s.confidence = *conf;
                    s.source = StepSource::Model;
                }
                None => s.clear_label(),
            }
        }
        Ok(out)
    }
}
