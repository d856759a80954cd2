//! Environment configuration and the editable data files (lexicon, markers,
//! prompt templates, rules). Built-in copies of the shipped files are used
//! when no config directory is given.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use nyaya_core::agents::PromptTemplates;
use nyaya_core::{AgentKind, Lexicon, MarkerTable, RuleSet};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_DATA_DIR: &str = "./nyaya-data";

const BUILTIN_LEXICON: &str = include_str!("../../../config/lexicon.jsonl");
const BUILTIN_MARKERS: &str = include_str!("../../../config/markers.jsonl");
const BUILTIN_RULES: &str = include_str!("../../../config/rules.jsonl");
const BUILTIN_SCRIPT: &str = include_str!("../../../config/script.json");
const BUILTIN_GENERAL: &str = include_str!("../../../config/templates/general.txt");
const BUILTIN_RESEARCH: &str = include_str!("../../../config/templates/research.txt");
const BUILTIN_CASE_ANALYSIS: &str = include_str!("../../../config/templates/case_analysis.txt");
const BUILTIN_SUMMARIZATION: &str = include_str!("../../../config/templates/summarization.txt");
const BUILTIN_DRAFTING: &str = include_str!("../../../config/templates/drafting.txt");
pub const BUILTIN_SAMPLE_CORPUS: &str = include_str!("../../../config/corpus/sample_corpus.jsonl");

#[derive(Debug, Clone, PartialEq)]
pub enum LlmConfig {
    /// Deterministic script; the built-in demo script when `script_path` is unset.
    Scripted { script_path: Option<PathBuf> },
    Remote { base_url: String, model: String, api_key: Option<String>, timeout: Duration },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbedderConfig {
    Local { dimension: usize },
    Remote { base_url: String, model: String, api_key: Option<String>, dimension: usize, timeout: Duration },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub port: u16,
    pub data_dir: PathBuf,
    pub config_dir: Option<PathBuf>,
    pub rules_path: Option<PathBuf>,
    /// Seed corpus loaded at startup; the built-in sample when unset.
    pub corpus_path: Option<PathBuf>,
    pub llm: LlmConfig,
    pub embedder: EmbedderConfig,
}

impl Config {
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Build from any key lookup; empty values count as unset.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let var = |k: &str| get(k).filter(|v| !v.trim().is_empty());
        let port = match var("NYAYA_PORT") {
            Some(p) => p.parse().with_context(|| format!("NYAYA_PORT `{p}` is not a port number"))?,
            None => DEFAULT_PORT,
        };
        let timeout = match var("NYAYA_LLM_TIMEOUT_SECS") {
            Some(t) => Duration::from_secs(t.parse().with_context(|| format!("NYAYA_LLM_TIMEOUT_SECS `{t}`"))?),
            None => crate::gateway::DEFAULT_TIMEOUT,
        };
        let llm = match var("NYAYA_LLM_PROVIDER").as_deref().unwrap_or("scripted") {
            "scripted" => LlmConfig::Scripted { script_path: var("NYAYA_SCRIPT_PATH").map(PathBuf::from) },
            "remote" => LlmConfig::Remote {
                base_url: var("NYAYA_LLM_BASE_URL").context("NYAYA_LLM_BASE_URL is required for the remote provider")?,
                model: var("NYAYA_LLM_MODEL").context("NYAYA_LLM_MODEL is required for the remote provider")?,
                api_key: var("NYAYA_LLM_API_KEY"),
                timeout,
            },
            other => bail!("NYAYA_LLM_PROVIDER must be `remote` or `scripted`, got `{other}`"),
        };
        let dimension = match var("NYAYA_EMBED_DIM") {
            Some(d) => d.parse().with_context(|| format!("NYAYA_EMBED_DIM `{d}`"))?,
            None => nyaya_core::embedding::DEFAULT_DIMENSION,
        };
        let embedder = match var("NYAYA_EMBEDDER").as_deref().unwrap_or("local") {
            "local" => EmbedderConfig::Local { dimension },
            "remote" => EmbedderConfig::Remote {
                base_url: var("NYAYA_EMBED_BASE_URL")
                    .or_else(|| var("NYAYA_LLM_BASE_URL"))
                    .context("NYAYA_EMBED_BASE_URL or NYAYA_LLM_BASE_URL is required for the remote embedder")?,
                model: var("NYAYA_EMBED_MODEL").context("NYAYA_EMBED_MODEL is required for the remote embedder")?,
                api_key: var("NYAYA_EMBED_API_KEY").or_else(|| var("NYAYA_LLM_API_KEY")),
                dimension,
                timeout,
            },
            other => bail!("NYAYA_EMBEDDER must be `local` or `remote`, got `{other}`"),
        };
        Ok(Self {
            port,
            data_dir: var("NYAYA_DATA_DIR").map_or_else(|| PathBuf::from(DEFAULT_DATA_DIR), PathBuf::from),
            config_dir: var("NYAYA_CONFIG_DIR").map(PathBuf::from),
            rules_path: var("NYAYA_RULES_PATH").map(PathBuf::from),
            corpus_path: var("NYAYA_CORPUS_PATH").map(PathBuf::from),
            llm,
            embedder,
        })
    }
}

/// Parsed data files.
#[derive(Debug, Clone)]
pub struct Assets {
    pub lexicon: Lexicon,
    pub markers: MarkerTable,
    pub templates: PromptTemplates,
    pub rules: RuleSet,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn templates(general: String, [research, case_analysis, summarization, drafting]: [String; 4]) -> Result<PromptTemplates> {
    let agents = BTreeMap::from([
        (AgentKind::Research, research),
        (AgentKind::CaseAnalysis, case_analysis),
        (AgentKind::Summarization, summarization),
        (AgentKind::Drafting, drafting),
    ]);
    Ok(PromptTemplates::new(general, agents)?)
}

impl Assets {
    pub fn builtin() -> Self {
        Self::parse(
            BUILTIN_LEXICON,
            BUILTIN_MARKERS,
            BUILTIN_RULES,
            BUILTIN_GENERAL.into(),
            [BUILTIN_RESEARCH, BUILTIN_CASE_ANALYSIS, BUILTIN_SUMMARIZATION, BUILTIN_DRAFTING].map(String::from),
        )
        .expect("built-in assets are valid")
    }

    fn parse(lexicon: &str, markers: &str, rules: &str, general: String, agents: [String; 4]) -> Result<Self> {
        Ok(Self {
            lexicon: Lexicon::from_jsonl(lexicon).context("lexicon")?,
            markers: MarkerTable::from_jsonl(markers).context("marker table")?,
            templates: templates(general, agents).context("prompt templates")?,
            rules: RuleSet::from_jsonl(rules).context("compliance rules")?,
        })
    }

    /// Load from `config_dir` (same layout as the shipped `config/`), falling
    /// back to built-ins per file; `rules_path` overrides the rules file.
    pub fn load(config_dir: Option<&Path>, rules_path: Option<&Path>) -> Result<Self> {
        let file = |rel: &str, builtin: &str| -> Result<String> {
            match config_dir {
                Some(dir) => read(&dir.join(rel)),
                None => Ok(builtin.to_string()),
            }
        };
        let rules = match rules_path {
            Some(p) => read(p)?,
            None => file("rules.jsonl", BUILTIN_RULES)?,
        };
        Self::parse(
            &file("lexicon.jsonl", BUILTIN_LEXICON)?,
            &file("markers.jsonl", BUILTIN_MARKERS)?,
            &rules,
            file("templates/general.txt", BUILTIN_GENERAL)?,
            [
                file("templates/research.txt", BUILTIN_RESEARCH)?,
                file("templates/case_analysis.txt", BUILTIN_CASE_ANALYSIS)?,
                file("templates/summarization.txt", BUILTIN_SUMMARIZATION)?,
                file("templates/drafting.txt", BUILTIN_DRAFTING)?,
            ],
        )
    }
}

pub fn builtin_script() -> &'static str {
    BUILTIN_SCRIPT
}
