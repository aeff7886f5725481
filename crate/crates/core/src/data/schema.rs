//! Column roles and the JSON schema config that maps CSV headers onto them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six Perspective-style toxicity attributes, in the order the
/// Jigsaw Unintended Bias dataset lists them.
pub const DEFAULT_TOXICITY_TYPES: [&str; 6] = [
    "toxicity",
    "severe_toxicity",
    "obscene",
    "identity_attack",
    "insult",
    "threat",
];

/// The 24 identity columns of the Jigsaw Unintended Bias dataset, grouped by
/// gender, sexual orientation, religion, race and disability.
pub const DEFAULT_DEMOGRAPHICS: [&str; 24] = [
    "male",
    "female",
    "transgender",
    "other_gender",
    "heterosexual",
    "homosexual_gay_or_lesbian",
    "bisexual",
    "other_sexual_orientation",
    "christian",
    "jewish",
    "muslim",
    "hindu",
    "buddhist",
    "atheist",
    "other_religion",
    "black",
    "white",
    "asian",
    "latino",
    "other_race_or_ethnicity",
    "physical_disability",
    "intellectual_or_learning_disability",
    "psychiatric_or_mental_illness",
    "other_disability",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    ToxicityAnnotation,
    DemographicAnnotation,
    ModelScore,
}

/// One named column role in a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeChannel {
    pub name: String,
    pub kind: ChannelKind,
    /// Set iff `kind` is `ModelScore`.
    pub model_id: Option<String>,
    /// For model scores, the toxicity annotation the score predicts.
    pub target_attribute: Option<String>,
}

impl AttributeChannel {
    pub fn annotation(name: impl Into<String>, kind: ChannelKind) -> Self {
        AttributeChannel {
            name: name.into(),
            kind,
            model_id: None,
            target_attribute: None,
        }
    }

    pub fn model_score(name: impl Into<String>, model: impl Into<String>, target: impl Into<String>) -> Self {
        AttributeChannel {
            name: name.into(),
            kind: ChannelKind::ModelScore,
            model_id: Some(model.into()),
            target_attribute: Some(target.into()),
        }
    }
}

/// Checks name uniqueness and that every score channel targets an existing
/// toxicity annotation.
pub fn validate_channels(channels: &[AttributeChannel]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in channels {
        if !seen.insert(c.name.as_str()) {
            return Err(Error::Schema(format!("duplicate channel name `{}`", c.name)));
        }
    }
    for c in channels {
        match c.kind {
            ChannelKind::ModelScore => {
                if c.model_id.is_none() {
                    return Err(Error::Schema(format!(
                        "model-score channel `{}` has no model id",
                        c.name
                    )));
                }
                let target = c.target_attribute.as_deref().unwrap_or_default();
                let ok = channels
                    .iter()
                    .any(|t| t.kind == ChannelKind::ToxicityAnnotation && t.name == target);
                if !ok {
                    return Err(Error::Schema(format!(
                        "model-score channel `{}` targets unknown toxicity annotation `{}`",
                        c.name, target
                    )));
                }
            }
            _ => {
                if c.model_id.is_some() {
                    return Err(Error::Schema(format!(
                        "annotation channel `{}` must not carry a model id",
                        c.name
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreColumnConfig {
    pub column: String,
    pub model: String,
    pub target: String,
}

/// JSON document mapping CSV headers onto channel roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaConfig {
    #[serde(default)]
    pub id_column: Option<String>,
    pub text_column: String,
    pub toxicity_annotations: Vec<String>,
    pub demographic_annotations: Vec<String>,
    #[serde(default)]
    pub model_scores: Vec<ScoreColumnConfig>,
}

impl SchemaConfig {
    /// The Jigsaw Unintended Bias layout (`id`, `comment_text`, six toxicity
    /// attributes, 24 identities, no model scores).
    pub fn jigsaw() -> Self {
        SchemaConfig {
            id_column: Some("id".into()),
            text_column: "comment_text".into(),
            toxicity_annotations: DEFAULT_TOXICITY_TYPES.iter().map(|s| s.to_string()).collect(),
            demographic_annotations: DEFAULT_DEMOGRAPHICS.iter().map(|s| s.to_string()).collect(),
            model_scores: Vec::new(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn channels(&self) -> Vec<AttributeChannel> {
        let mut out = Vec::new();
        out.extend(
            self.toxicity_annotations
                .iter()
                .map(|n| AttributeChannel::annotation(n, ChannelKind::ToxicityAnnotation)),
        );
        out.extend(
            self.demographic_annotations
                .iter()
                .map(|n| AttributeChannel::annotation(n, ChannelKind::DemographicAnnotation)),
        );
        out.extend(
            self.model_scores
                .iter()
                .map(|s| AttributeChannel::model_score(&s.column, &s.model, &s.target)),
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        validate_channels(&self.channels())?;
        let reserved = [Some(self.text_column.as_str()), self.id_column.as_deref()];
        for c in self.channels() {
            if reserved.contains(&Some(c.name.as_str())) {
                return Err(Error::Schema(format!(
                    "column `{}` is mapped both as a channel and as id/text",
                    c.name
                )));
            }
        }
        Ok(())
    }
}
