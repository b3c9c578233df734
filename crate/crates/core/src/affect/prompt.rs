use super::estimator::EstimateError;

/// Literal reply template the estimator is asked to follow.
pub const OUTPUT_TEMPLATE: &str = "Pleasure: XX.X%, Misery: YY.Y%, Arousal: ZZ.Z%, Sleepiness: AA.A%";

pub const DEFAULT_PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");

/// Circumplex labels and their angles, in order around the circle.
pub const CIRCUMPLEX_LABELS: [(&str, u16); 8] = [
    ("pleasure", 0),
    ("excitement", 45),
    ("arousal", 90),
    ("distress", 135),
    ("misery", 180),
    ("depression", 225),
    ("sleepiness", 270),
    ("contentment", 315),
];

const SECTIONS: [&str; 6] = [
    "objective",
    "model_explanation",
    "procedure_criteria",
    "output_format",
    "considerations",
    "language_note",
];

/// The six prompt sections. Loaded from a template file with `[name]`
/// section markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub objective: String,
    pub model_explanation: String,
    pub procedure_criteria: String,
    pub output_format: String,
    pub considerations: String,
    pub language_note: String,
}

impl PromptSpec {
    pub fn from_template(text: &str) -> Result<Self, EstimateError> {
        let mut spec = PromptSpec {
            objective: String::new(),
            model_explanation: String::new(),
            procedure_criteria: String::new(),
            output_format: String::new(),
            considerations: String::new(),
            language_note: String::new(),
        };
        let mut current: Option<&str> = None;
        let mut seen = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = SECTIONS
                    .iter()
                    .find(|s| **s == name)
                    .ok_or_else(|| EstimateError::Config(format!("prompt template line {}: unknown section [{name}]", lineno + 1)))?;
                if seen.contains(name) {
                    return Err(EstimateError::Config(format!("prompt template: duplicate section [{name}]")));
                }
                seen.push(*name);
                current = Some(name);
                continue;
            }
            match current {
                None => {
                    if !(trimmed.is_empty() || trimmed.starts_with('#')) {
                        return Err(EstimateError::Config(format!(
                            "prompt template line {}: text before first section marker",
                            lineno + 1
                        )));
                    }
                }
                Some(name) => {
                    let slot = spec.section_mut(name);
                    slot.push_str(line);
                    slot.push('\n');
                }
            }
        }
        for name in SECTIONS {
            let slot = spec.section_mut(name);
            *slot = slot.trim().to_string();
        }
        Ok(spec)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, EstimateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EstimateError::Config(format!("prompt template {}: {e}", path.display())))?;
        Self::from_template(&text)
    }

    fn section_mut(&mut self, name: &str) -> &mut String {
        match name {
            "objective" => &mut self.objective,
            "model_explanation" => &mut self.model_explanation,
            "procedure_criteria" => &mut self.procedure_criteria,
            "output_format" => &mut self.output_format,
            "considerations" => &mut self.considerations,
            "language_note" => &mut self.language_note,
            _ => unreachable!("unknown section {name}"),
        }
    }

    fn sections(&self) -> [(&'static str, &str); 6] {
        [
            ("objective", &self.objective),
            ("model_explanation", &self.model_explanation),
            ("procedure_criteria", &self.procedure_criteria),
            ("output_format", &self.output_format),
            ("considerations", &self.considerations),
            ("language_note", &self.language_note),
        ]
    }
}

/// The shipped English template.
impl Default for PromptSpec {
    fn default() -> Self {
        static DEFAULT: std::sync::OnceLock<PromptSpec> = std::sync::OnceLock::new();
        DEFAULT
            .get_or_init(|| PromptSpec::from_template(DEFAULT_PROMPT_TEMPLATE).expect("shipped prompt template parses"))
            .clone()
    }
}

/// Renders the system prompt: objective, model explanation, procedure,
/// output format, then considerations with the language note.
pub fn build_prompt(spec: &PromptSpec) -> Result<String, EstimateError> {
    for (name, body) in spec.sections() {
        if body.trim().is_empty() {
            return Err(EstimateError::Config(format!("prompt section `{name}` is empty")));
        }
    }
    if spec.output_format.matches(OUTPUT_TEMPLATE).count() != 1 {
        return Err(EstimateError::Config(
            "prompt output_format must contain the reply template exactly once".into(),
        ));
    }
    for (name, body) in spec.sections() {
        if name != "output_format" && body.contains(OUTPUT_TEMPLATE) {
            return Err(EstimateError::Config(format!(
                "prompt section `{name}` repeats the reply template"
            )));
        }
    }
    let explanation = spec.model_explanation.to_lowercase();
    for (label, angle) in CIRCUMPLEX_LABELS {
        if !explanation.contains(label) || !explanation.contains(&format!("{angle}°")) {
            return Err(EstimateError::Config(format!(
                "prompt model_explanation must name `{label}` at {angle}°"
            )));
        }
    }

    Ok(format!(
        "## Objective\n{}\n\n## Russell's circumplex model\n{}\n\n## Procedure and criteria\n{}\n\n## Output format\n{}\n\n## Important considerations\n{}\n{}\n",
        spec.objective,
        spec.model_explanation,
        spec.procedure_criteria,
        spec.output_format,
        spec.considerations,
        spec.language_note,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_spec() -> PromptSpec {
        PromptSpec::default()
    }

    #[test]
    fn default_prompt_has_template_once() {
        let p = build_prompt(&default_spec()).unwrap();
        assert_eq!(p.matches("Pleasure: XX.X%").count(), 1);
        assert_eq!(p.matches(OUTPUT_TEMPLATE).count(), 1);
    }

    #[test]
    fn default_prompt_names_all_labels() {
        let p = build_prompt(&default_spec()).unwrap().to_lowercase();
        for label in [
            "pleasure",
            "excitement",
            "arousal",
            "distress",
            "misery",
            "depression",
            "sleepiness",
            "contentment",
        ] {
            assert!(p.contains(label), "{label}");
        }
        assert!(p.contains("sleepiness (270°)"));
        assert!(p.contains("contentment (315°)"));
    }

    #[test]
    fn sections_in_order() {
        let spec = default_spec();
        let p = build_prompt(&spec).unwrap();
        let idx: Vec<usize> = spec.sections().iter().map(|(_, body)| p.find(*body).unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]), "{idx:?}");
        assert!(p.contains("will be in Japanese"));
    }

    #[test]
    fn empty_section_is_config_error() {
        let mut spec = default_spec();
        spec.objective = "   ".into();
        assert!(matches!(build_prompt(&spec), Err(EstimateError::Config(_))));
    }

    #[test]
    fn template_parser_rejects_unknown_and_duplicate() {
        assert!(PromptSpec::from_template("[objective]\na\n[bogus]\nb").is_err());
        assert!(PromptSpec::from_template("[objective]\na\n[objective]\nb").is_err());
        assert!(PromptSpec::from_template("stray\n[objective]\na").is_err());
    }

    #[test]
    fn missing_label_rejected() {
        let mut spec = default_spec();
        spec.model_explanation = spec.model_explanation.replace("contentment (315°)", "calm");
        assert!(build_prompt(&spec).is_err());
    }
}
