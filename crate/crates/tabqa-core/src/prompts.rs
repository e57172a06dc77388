//! Prompt templates for every LLM stage. The bundled set ships inside the
//! binary; a directory of identically named `.txt` files can replace it.
//! Templates use `{placeholder}` markers filled by the stage-specific
//! `fill_*` methods.

use std::path::Path;

use thiserror::Error;

use crate::query::TaskKind;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("failed to read prompt file {name}: {source}")]
    Read { name: &'static str, source: std::io::Error },
    #[error("template {name} is missing placeholder {placeholder}")]
    MissingPlaceholder { name: &'static str, placeholder: &'static str },
}

const TEMPLATE_FILES: [(&str, &[&str]); 13] = [
    ("step_back", &["{examples}", "{sub_table}", "{query}"]),
    ("step_back_examples", &[]),
    ("sub_query", &["{examples}", "{sub_table}", "{query}"]),
    ("sub_query_examples", &[]),
    ("schema_aug", &["{examples}", "{sub_table}"]),
    ("schema_aug_examples", &[]),
    ("semantic_aug", &["{examples}", "{sub_table}"]),
    ("semantic_aug_examples", &[]),
    ("literal_aug", &["{examples}", "{sub_table}"]),
    ("literal_aug_examples", &[]),
    ("col_filter", &["{schema_aug}", "{semantic_aug}", "{sub_table}", "{query}"]),
    ("sql_gen", &["{augmentation}", "{sub_table}", "{query}"]),
    ("sql_repair", &["{failed_sql}", "{error}"]),
];

#[derive(Debug, Clone)]
pub struct PromptSet {
    step_back: String,
    step_back_examples: String,
    sub_query: String,
    sub_query_examples: String,
    schema_aug: String,
    schema_aug_examples: String,
    semantic_aug: String,
    semantic_aug_examples: String,
    literal_aug: String,
    literal_aug_examples: String,
    col_filter: String,
    sql_gen: String,
    sql_repair: String,
    sub_answer: String,
    joint_qa: String,
    joint_fv: String,
}

impl PromptSet {
    /// The templates compiled into the library.
    pub fn bundled() -> Self {
        PromptSet {
            step_back: include_str!("../assets/prompts/step_back.txt").to_string(),
            step_back_examples: include_str!("../assets/prompts/step_back_examples.txt")
                .to_string(),
            sub_query: include_str!("../assets/prompts/sub_query.txt").to_string(),
            sub_query_examples: include_str!("../assets/prompts/sub_query_examples.txt")
                .to_string(),
            schema_aug: include_str!("../assets/prompts/schema_aug.txt").to_string(),
            schema_aug_examples: include_str!("../assets/prompts/schema_aug_examples.txt")
                .to_string(),
            semantic_aug: include_str!("../assets/prompts/semantic_aug.txt").to_string(),
            semantic_aug_examples: include_str!("../assets/prompts/semantic_aug_examples.txt")
                .to_string(),
            literal_aug: include_str!("../assets/prompts/literal_aug.txt").to_string(),
            literal_aug_examples: include_str!("../assets/prompts/literal_aug_examples.txt")
                .to_string(),
            col_filter: include_str!("../assets/prompts/col_filter.txt").to_string(),
            sql_gen: include_str!("../assets/prompts/sql_gen.txt").to_string(),
            sql_repair: include_str!("../assets/prompts/sql_repair.txt").to_string(),
            sub_answer: include_str!("../assets/prompts/sub_answer.txt").to_string(),
            joint_qa: include_str!("../assets/prompts/joint_qa.txt").to_string(),
            joint_fv: include_str!("../assets/prompts/joint_fv.txt").to_string(),
        }
    }

    /// Loads `<name>.txt` for every template from a directory, falling back
    /// to the bundled text for files that are absent.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::bundled();
        let load = |name: &'static str, slot: &mut String| -> Result<(), PromptError> {
            let path = dir.join(format!("{name}.txt"));
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    *slot = text;
                    Ok(())
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
                Err(source) => Err(PromptError::Read { name, source }),
            }
        };
        load("step_back", &mut set.step_back)?;
        load("step_back_examples", &mut set.step_back_examples)?;
        load("sub_query", &mut set.sub_query)?;
        load("sub_query_examples", &mut set.sub_query_examples)?;
        load("schema_aug", &mut set.schema_aug)?;
        load("schema_aug_examples", &mut set.schema_aug_examples)?;
        load("semantic_aug", &mut set.semantic_aug)?;
        load("semantic_aug_examples", &mut set.semantic_aug_examples)?;
        load("literal_aug", &mut set.literal_aug)?;
        load("literal_aug_examples", &mut set.literal_aug_examples)?;
        load("col_filter", &mut set.col_filter)?;
        load("sql_gen", &mut set.sql_gen)?;
        load("sql_repair", &mut set.sql_repair)?;
        load("sub_answer", &mut set.sub_answer)?;
        load("joint_qa", &mut set.joint_qa)?;
        load("joint_fv", &mut set.joint_fv)?;
        set.validate()?;
        Ok(set)
    }

    fn template(&self, name: &str) -> &str {
        match name {
            "step_back" => &self.step_back,
            "step_back_examples" => &self.step_back_examples,
            "sub_query" => &self.sub_query,
            "sub_query_examples" => &self.sub_query_examples,
            "schema_aug" => &self.schema_aug,
            "schema_aug_examples" => &self.schema_aug_examples,
            "literal_aug" => &self.literal_aug,
            "literal_aug_examples" => &self.literal_aug_examples,
            "semantic_aug" => &self.semantic_aug,
            "semantic_aug_examples" => &self.semantic_aug_examples,
            "col_filter" => &self.col_filter,
            "sql_gen" => &self.sql_gen,
            "sql_repair" => &self.sql_repair,
            _ => unreachable!("unknown template {name}"),
        }
    }

    /// Checks each template still carries the placeholders its fill method
    /// will substitute.
    pub fn validate(&self) -> Result<(), PromptError> {
        for (name, placeholders) in TEMPLATE_FILES {
            let text = self.template(name);
            for placeholder in placeholders {
                if !text.contains(placeholder) {
                    return Err(PromptError::MissingPlaceholder { name, placeholder });
                }
            }
        }
        Ok(())
    }

    pub fn fill_step_back(&self, sub_table_html: &str, query: &str) -> String {
        self.step_back
            .replace("{examples}", self.step_back_examples.trim_end())
            .replace("{sub_table}", sub_table_html)
            .replace("{query}", query)
    }

    pub fn fill_sub_query(&self, sub_table_html: &str, query: &str) -> String {
        self.sub_query
            .replace("{examples}", self.sub_query_examples.trim_end())
            .replace("{sub_table}", sub_table_html)
            .replace("{query}", query)
    }

    pub fn fill_schema_aug(&self, table_html: &str) -> String {
        self.schema_aug
            .replace("{examples}", self.schema_aug_examples.trim_end())
            .replace("{sub_table}", table_html)
    }

    pub fn fill_semantic_aug(&self, table_html: &str) -> String {
        self.semantic_aug
            .replace("{examples}", self.semantic_aug_examples.trim_end())
            .replace("{sub_table}", table_html)
    }

    pub fn fill_literal_aug(&self, sub_table_html: &str) -> String {
        self.literal_aug
            .replace("{examples}", self.literal_aug_examples.trim_end())
            .replace("{sub_table}", sub_table_html)
    }

    pub fn fill_col_filter(
        &self,
        schema_block: &str,
        semantic_block: &str,
        sub_table_html: &str,
        query: &str,
    ) -> String {
        self.col_filter
            .replace("{schema_aug}", schema_block)
            .replace("{semantic_aug}", semantic_block)
            .replace("{sub_table}", sub_table_html)
            .replace("{query}", query)
    }

    pub fn fill_sql_gen(&self, augmentation_block: &str, sub_table_html: &str, query: &str) -> String {
        self.sql_gen
            .replace("{augmentation}", augmentation_block)
            .replace("{sub_table}", sub_table_html)
            .replace("{query}", query)
    }

    /// Repair prompts append the failure to the original generation prompt.
    pub fn fill_sql_repair(&self, base_prompt: &str, failed_sql: &str, error: &str) -> String {
        let suffix =
            self.sql_repair.replace("{failed_sql}", failed_sql).replace("{error}", error);
        format!("{base_prompt}\n{suffix}")
    }

    pub fn fill_sub_answer(&self, result_table_html: &str, sub_query: &str, original: &str) -> String {
        self.sub_answer
            .replace("{result_table}", result_table_html)
            .replace("{sub_query}", sub_query)
            .replace("{original}", original)
    }

    pub fn fill_joint(
        &self,
        task: TaskKind,
        result_table_html: &str,
        sub_answers_block: &str,
        query: &str,
    ) -> String {
        let template = match task {
            TaskKind::Qa => &self.joint_qa,
            TaskKind::FactVerification => &self.joint_fv,
        };
        template
            .replace("{result_table}", result_table_html)
            .replace("{sub_answers}", sub_answers_block)
            .replace("{query}", query)
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::bundled()
    }
}
