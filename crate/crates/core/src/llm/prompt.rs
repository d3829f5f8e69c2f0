//! Prompt templates and their plain-text file format.

use std::path::Path;

use super::LlmError;
use crate::datamodel::Item;

/// A structured LLM instruction: free-form body plus hints that pin down the
/// input and output formats. Templates serialize to a plain-text file with
/// `---` separated sections (id, body, input hint, output instruction); a
/// bare `---` line inside a section is therefore not representable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub body: String,
    pub input_hint: String,
    pub output_instruction: String,
}

impl PromptTemplate {
    /// Default prompt for condensing one item's content into a title.
    pub fn default_condense() -> Self {
        Self {
            id: "condense-default".into(),
            body: "You are given the contents of one item. Condense all of the \
                   information into a succinct yet informative title that keeps \
                   the most important words."
                .into(),
            input_hint: "[title]{title}, [abs]{abs}, [cat]{cat}".into(),
            output_instruction: "[new_title]{new_title}".into(),
        }
    }

    /// Default prompt for extracting a user's interests from clicked titles.
    pub fn default_interests() -> Self {
        Self {
            id: "interests-default".into(),
            body: "You are given the titles of items one user clicked. List the \
                   user's interests as short phrases, most prominent first."
                .into(),
            input_hint: "(1){title}, (2){title}, (3){title}, ...".into(),
            output_instruction: "[interests] -interest1, -interest2, ...".into(),
        }
    }

    fn render(&self, filled_input: &str) -> String {
        format!(
            "{}\n\nHints on the format of input:\n{}\n\nInstructions on the format of output:\n{}\n\nInput:\n{}\n",
            self.body, self.input_hint, self.output_instruction, filled_input
        )
    }

    /// Renders the full message for condensing `item`. Every content field
    /// of the item appears in the message.
    pub fn render_item(&self, item: &Item) -> String {
        let filled = self
            .input_hint
            .replace("{title}", &item.title)
            .replace("{abs}", &item.abstract_text)
            .replace("{cat}", &item.category);
        self.render(&filled)
    }

    /// Renders the full message for interest extraction over clicked titles.
    pub fn render_history(&self, titles: &[&str]) -> String {
        let filled = titles
            .iter()
            .enumerate()
            .map(|(i, t)| format!("({}){}", i + 1, t))
            .collect::<Vec<_>>()
            .join(", ");
        self.render(&filled)
    }

    pub fn to_file_text(&self) -> String {
        format!(
            "{}\n---\n{}\n---\n{}\n---\n{}\n",
            self.id, self.body, self.input_hint, self.output_instruction
        )
    }

    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let mut sections: Vec<String> = vec![String::new()];
        for line in text.lines() {
            if line.trim() == "---" {
                sections.push(String::new());
            } else {
                let cur = sections.last_mut().unwrap();
                if !cur.is_empty() {
                    cur.push('\n');
                }
                cur.push_str(line);
            }
        }
        if sections.len() != 4 {
            return Err(LlmError::Template(format!(
                "expected 4 sections separated by ---, found {}",
                sections.len()
            )));
        }
        let mut sections = sections.into_iter().map(|s| s.trim().to_string());
        let template = Self {
            id: sections.next().unwrap(),
            body: sections.next().unwrap(),
            input_hint: sections.next().unwrap(),
            output_instruction: sections.next().unwrap(),
        };
        if template.id.is_empty() || template.id.lines().count() != 1 {
            return Err(LlmError::Template("template id must be one nonempty line".into()));
        }
        if template.body.is_empty() {
            return Err(LlmError::Template("template body is empty".into()));
        }
        Ok(template)
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        std::fs::write(path, self.to_file_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
