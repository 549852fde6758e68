//! Prompt templates and rendering.
//!
//! English texts are the probe prompts as used in the study. The Arabic texts
//! are translations and can be replaced from a directory of `.txt` files.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::DatasetInstance;
use crate::templatic::{apply_pattern, attach_affixes, compile_pattern, Root, RootCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    RootPattern,
    AffixBuild,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RootPattern => "root_pattern",
            Self::AffixBuild => "affix_build",
        }
    }

    /// The field of a record the model is expected to produce.
    pub fn target(self, instance: &DatasetInstance) -> &str {
        match self {
            Self::RootPattern => &instance.base_form,
            Self::AffixBuild => &instance.full_form,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "root_pattern" => Ok(Self::RootPattern),
            "affix_build" => Ok(Self::AffixBuild),
            _ => Err(format!("unknown task {s:?} (root-pattern | affix-build)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Ar,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::En => "en",
            Self::Ar => "ar",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(Self::En),
            "ar" => Ok(Self::Ar),
            _ => Err(format!("unknown prompt language {s:?} (en | ar)")),
        }
    }
}

/// Which prompt to render, and the worked example for one-shot prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub task: Task,
    pub language: Language,
    pub shots: u8,
    pub exemplar: Option<DatasetInstance>,
}

impl PromptSpec {
    pub fn zero_shot(task: Task, language: Language) -> Self {
        Self { task, language, shots: 0, exemplar: None }
    }

    pub fn one_shot(task: Task, language: Language, exemplar: DatasetInstance) -> Self {
        Self { task, language, shots: 1, exemplar: Some(exemplar) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Part {
    Query,
    OneShot,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("no {part} template for {task}/{language}")]
    MissingTemplate {
        task: Task,
        language: &'static str,
        part: &'static str,
    },
    #[error("shots must be 0 or 1, got {0}")]
    Shots(u8),
    #[error("one-shot prompt needs an exemplar")]
    MissingExemplar,
    #[error("exemplar uses the queried root and template ({root}, {template})")]
    ExemplarIsQuery { root: String, template: String },
    #[error("cannot build exemplar: {0}")]
    Exemplar(String),
}

/// Template texts keyed by task, language, and part.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    texts: HashMap<(Task, Language, Part), String>,
}

const BUILTIN: [(Task, Language, Part, &str); 8] = [
    (Task::RootPattern, Language::En, Part::Query, include_str!("../../templates/en_root_pattern.txt")),
    (Task::AffixBuild, Language::En, Part::Query, include_str!("../../templates/en_affix_build.txt")),
    (Task::RootPattern, Language::En, Part::OneShot, include_str!("../../templates/en_one_shot_root_pattern.txt")),
    (Task::AffixBuild, Language::En, Part::OneShot, include_str!("../../templates/en_one_shot_affix_build.txt")),
    (Task::RootPattern, Language::Ar, Part::Query, include_str!("../../templates/ar_root_pattern.txt")),
    (Task::AffixBuild, Language::Ar, Part::Query, include_str!("../../templates/ar_affix_build.txt")),
    (Task::RootPattern, Language::Ar, Part::OneShot, include_str!("../../templates/ar_one_shot_root_pattern.txt")),
    (Task::AffixBuild, Language::Ar, Part::OneShot, include_str!("../../templates/ar_one_shot_affix_build.txt")),
];

fn file_name(task: Task, language: Language, part: Part) -> String {
    let shot = match part {
        Part::Query => "",
        Part::OneShot => "one_shot_",
    };
    format!("{}_{}{}.txt", language.as_str(), shot, task.as_str())
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let mut set = Self::default();
        for (task, language, part, text) in BUILTIN {
            set.texts.insert((task, language, part), text.trim_end().to_owned());
        }
        set
    }

    /// Built-in templates, overridden by any `<lang>_[one_shot_]<task>.txt` in `dir`.
    pub fn builtin_with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::builtin();
        for (task, language, part, _) in BUILTIN {
            let path = dir.join(file_name(task, language, part));
            if path.exists() {
                let text = std::fs::read_to_string(path)?;
                set.texts.insert((task, language, part), text.trim_end().to_owned());
            }
        }
        Ok(set)
    }

    /// Drop a template, e.g. to exercise the missing-template path.
    pub fn remove(&mut self, task: Task, language: Language, one_shot: bool) {
        let part = if one_shot { Part::OneShot } else { Part::Query };
        self.texts.remove(&(task, language, part));
    }

    fn get(&self, task: Task, language: Language, part: Part) -> Result<&str, RenderError> {
        self.texts
            .get(&(task, language, part))
            .map(String::as_str)
            .ok_or(RenderError::MissingTemplate {
                task,
                language: language.as_str(),
                part: match part {
                    Part::Query => "query",
                    Part::OneShot => "one-shot",
                },
            })
    }

    /// Render the prompt for `instance`.
    pub fn render(&self, instance: &DatasetInstance, spec: &PromptSpec) -> Result<String, RenderError> {
        let mut prompt = substitute(self.get(spec.task, spec.language, Part::Query)?, instance);
        match spec.shots {
            0 => {}
            1 => {
                let exemplar = spec.exemplar.as_ref().ok_or(RenderError::MissingExemplar)?;
                if exemplar.root == instance.root && exemplar.template == instance.template {
                    return Err(RenderError::ExemplarIsQuery {
                        root: instance.root.clone(),
                        template: instance.template.clone(),
                    });
                }
                prompt.push_str("\n\n");
                prompt.push_str(&substitute(self.get(spec.task, spec.language, Part::OneShot)?, exemplar));
            }
            n => return Err(RenderError::Shots(n)),
        }
        Ok(prompt)
    }
}

fn substitute(template: &str, instance: &DatasetInstance) -> String {
    template
        .replace("{root}", &instance.root)
        .replace("{template}", &instance.template)
        .replace("{base_form}", &instance.base_form)
        .replace("{prefix}", &instance.prefix)
        .replace("{suffix}", &instance.suffix)
        .replace("{full_form}", &instance.full_form)
}

/// Render with the built-in templates.
pub fn render_prompt(instance: &DatasetInstance, spec: &PromptSpec) -> Result<String, RenderError> {
    TemplateSet::builtin().render(instance, spec)
}

/// Root used for the one-shot worked example.
pub const EXEMPLAR_ROOT: &str = "زرع";
const FALLBACK_EXEMPLAR_ROOT: &str = "درس";

/// The worked example for a query: the same template and affixes applied to
/// زرع (or درس when the query root is زرع).
pub fn default_exemplar(instance: &DatasetInstance) -> Result<DatasetInstance, RenderError> {
    let root_text = if instance.root == EXEMPLAR_ROOT {
        FALLBACK_EXEMPLAR_ROOT
    } else {
        EXEMPLAR_ROOT
    };
    let root = Root::parse(root_text, RootCategory::RealHighFrequency)
        .map_err(|e| RenderError::Exemplar(e.to_string()))?;
    let pattern = compile_pattern(&instance.template).map_err(|e| RenderError::Exemplar(e.to_string()))?;
    let base_form = apply_pattern(&root, &pattern).map_err(|e| RenderError::Exemplar(e.to_string()))?;
    Ok(DatasetInstance {
        root: root.text(),
        template: instance.template.clone(),
        full_form: attach_affixes(&base_form, &instance.prefix, &instance.suffix),
        base_form,
        prefix: instance.prefix.clone(),
        suffix: instance.suffix.clone(),
        has_affix: instance.has_affix,
        root_category: RootCategory::RealHighFrequency,
    })
}

/// The spec for `instance` under a task, language and shot count, filling in
/// the default exemplar for one-shot prompts.
pub fn spec_for(
    instance: &DatasetInstance,
    task: Task,
    language: Language,
    shots: u8,
) -> Result<PromptSpec, RenderError> {
    match shots {
        0 => Ok(PromptSpec::zero_shot(task, language)),
        1 => Ok(PromptSpec::one_shot(task, language, default_exemplar(instance)?)),
        n => Err(RenderError::Shots(n)),
    }
}
