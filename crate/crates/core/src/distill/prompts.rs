//! Prompt templates for the three dialogue stages.
//!
//! All texts live in the config file; the defaults below are plain
//! paraphrases. Placeholders use `{name}` form: `{question}`, `{answer}`,
//! `{mask_question}`, `{candidate}`, `{recovered}`.

use crate::validate::{Classification, FormatErrorKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    /// Stage 1 opener over (question, answer).
    pub cot_solve: String,
    /// Follow-up asking for the bare equation.
    pub extract_knowledge: String,
    /// Stage 2 opener over the masked question.
    pub mask_solve: String,
    pub correction_improper_percent: String,
    pub correction_latex_notation: String,
    pub correction_multiple_expressions: String,
    pub correction_extraneous_text: String,
    pub correction_non_compliant_number: String,
    /// Fallback when a failure matches none of the five categories.
    pub generic_reformat: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            cot_solve: "Question: {question}\nThe correct final answer is {answer}.\nSolve the question step by step and explain the reasoning that leads to this answer."
                .into(),
            extract_knowledge: "From the reasoning above, write the single equation that computes the answer, in the form x = <expression>. Use only the numbers that appear in the question, the constants 1, 100 and pi, and the operators + - * / ^. Reply with the equation only."
                .into(),
            mask_solve: "Here is the same question with every number replaced by a mask token:\n{mask_question}\nSolve it step by step again, reasoning directly over the mask tokens instead of the concrete numbers."
                .into(),
            correction_improper_percent: "Your equation contains a percent sign: {candidate}\nPercent values are already expressed as plain numbers here. Rewrite it as a single equation x = <expression> without the % symbol."
                .into(),
            correction_latex_notation: "Your equation uses LaTeX notation: {candidate}\nRewrite it as a single plain-text equation x = <expression> using only the operators + - * / ^."
                .into(),
            correction_multiple_expressions: "You returned more than one expression: {candidate}\nCombine them into a single equation x = <expression> with exactly one equals sign."
                .into(),
            correction_extraneous_text: "Your reply contains extra text around the expression: {candidate}\nThe expression part appears to be: {recovered}\nReply with the equation only, in the form x = <expression>."
                .into(),
            correction_non_compliant_number: "Your equation uses a number or token that does not appear in the question: {candidate}\nUse only the numbers from the question, the constants 1, 100 and pi, and the existing mask tokens. Rewrite it as x = <expression>."
                .into(),
            generic_reformat: "Your reply is not in the required format: {candidate}\nReply with a single equation of the form x = <expression>, using only numbers from the question, the constants 1, 100 and pi, and the operators + - * / ^."
                .into(),
        }
    }
}

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in pairs {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

impl PromptTemplates {
    /// Every template must render non-empty.
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("cot_solve", &self.cot_solve),
            ("extract_knowledge", &self.extract_knowledge),
            ("mask_solve", &self.mask_solve),
            ("correction_improper_percent", &self.correction_improper_percent),
            ("correction_latex_notation", &self.correction_latex_notation),
            ("correction_multiple_expressions", &self.correction_multiple_expressions),
            ("correction_extraneous_text", &self.correction_extraneous_text),
            ("correction_non_compliant_number", &self.correction_non_compliant_number),
            ("generic_reformat", &self.generic_reformat),
        ];
        for (name, text) in fields {
            if text.trim().is_empty() {
                return Err(format!("prompt template `{name}` is empty"));
            }
        }
        Ok(())
    }

    pub fn render_cot_solve(&self, question: &str, answer: &str) -> String {
        fill(&self.cot_solve, &[("question", question), ("answer", answer)])
    }

    pub fn render_mask_solve(&self, mask_question: &str) -> String {
        fill(&self.mask_solve, &[("mask_question", mask_question)])
    }

    /// Correction prompt for a classified failure; unclassifiable
    /// failures get the generic reformat instruction.
    pub fn render_correction(&self, classification: Option<&Classification>, candidate: &str) -> String {
        let Some(c) = classification else {
            return fill(&self.generic_reformat, &[("candidate", candidate)]);
        };
        let template = match c.kind {
            FormatErrorKind::ImproperPercent => &self.correction_improper_percent,
            FormatErrorKind::LatexNotation => &self.correction_latex_notation,
            FormatErrorKind::MultipleExpressions => &self.correction_multiple_expressions,
            FormatErrorKind::ExtraneousText => &self.correction_extraneous_text,
            FormatErrorKind::NonCompliantNumber => &self.correction_non_compliant_number,
        };
        let recovered = c.recovered.as_deref().unwrap_or("unclear");
        fill(template, &[("candidate", candidate), ("recovered", recovered)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_render_non_empty() {
        let templates = PromptTemplates::default();
        templates.validate().unwrap();
        let p = templates.render_cot_solve("Q text", "4");
        assert!(p.contains("Q text") && p.contains('4'));
        let p = templates.render_mask_solve("masked Q");
        assert!(p.contains("masked Q"));
        let p = templates.render_correction(None, "gibberish");
        assert!(p.contains("gibberish"));
    }

    #[test]
    fn correction_prompt_quotes_recovered_expression() {
        let templates = PromptTemplates::default();
        let c = Classification {
            kind: FormatErrorKind::ExtraneousText,
            recovered: Some("(temp_a * temp_b)".into()),
        };
        let p = templates.render_correction(Some(&c), "the whole reply");
        assert!(p.contains("(temp_a * temp_b)"));
        assert!(p.contains("the whole reply"));
    }

    #[test]
    fn empty_template_fails_validation() {
        let templates = PromptTemplates {
            mask_solve: "  ".into(),
            ..PromptTemplates::default()
        };
        assert!(templates.validate().is_err());
    }
}
