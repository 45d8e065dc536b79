//! Prompt templates: text with `{name}` placeholders filled from the state.

use crate::prism::SymbolicModel;
use crate::semantics::StateVector;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error("placeholder '{{{placeholder}}}' maps to '{variable}', which is not a model variable")]
    UnresolvedPlaceholder {
        placeholder: String,
        variable: String,
    },
}

/// A prompt template. Placeholders are `{ident}`; anything else, including
/// unmatched braces, is literal text.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    text: String,
    required_vars: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let mut required_vars = BTreeSet::new();
        scan(&text, |_, name| {
            if !name.is_empty() {
                required_vars.insert(name.to_string());
            }
        });
        PromptTemplate {
            text,
            required_vars,
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(std::fs::read_to_string(path)?))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Placeholder names appearing in the template.
    pub fn required_vars(&self) -> &BTreeSet<String> {
        &self.required_vars
    }
}

/// Walk the template, calling `visit(literal_prefix, name)` for each
/// `{name}` (with an empty name for literal braces); returns the trailing
/// literal text.
fn scan<'a>(text: &'a str, mut visit: impl FnMut(&'a str, &'a str)) -> &'a str {
    let mut rest = text;
    loop {
        let Some(open) = rest.find('{') else {
            return rest;
        };
        let after = &rest[open + 1..];
        let end = after
            .char_indices()
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'));
        match end {
            Some((close, '}'))
                if close > 0
                    && after[..close]
                        .starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') =>
            {
                visit(&rest[..open], &after[..close]);
                rest = &after[close + 1..];
            }
            _ => {
                // not a placeholder, keep the brace literal
                visit(&rest[..open + 1], "");
                rest = after;
            }
        }
    }
}

/// Render the template for a state. Each `{name}` is resolved through
/// `var_map` (falling back to the name itself) to a model variable and
/// replaced by its decimal value. Byte-deterministic.
pub fn encode_state(
    template: &PromptTemplate,
    model: &SymbolicModel,
    s: &StateVector,
    var_map: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.text.len());
    let mut err = None;
    let tail = scan(&template.text, |literal, name| {
        out.push_str(literal);
        if name.is_empty() {
            return;
        }
        let variable = var_map.get(name).map(String::as_str).unwrap_or(name);
        match model.variable_index(variable) {
            Some(idx) => out.push_str(&s.0[idx].to_string()),
            None => {
                if err.is_none() {
                    err = Some(TemplateError::UnresolvedPlaceholder {
                        placeholder: name.to_string(),
                        variable: variable.to_string(),
                    });
                }
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    out.push_str(tail);
    Ok(out)
}

/// A template together with its placeholder-to-variable map.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoder {
    pub template: PromptTemplate,
    pub var_map: BTreeMap<String, String>,
}

impl StateEncoder {
    pub fn new(template: PromptTemplate, var_map: BTreeMap<String, String>) -> Self {
        StateEncoder { template, var_map }
    }

    pub fn encode(&self, model: &SymbolicModel, s: &StateVector) -> Result<String, TemplateError> {
        encode_state(&self.template, model, s, &self.var_map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::parse_model;

    fn taxi_like() -> SymbolicModel {
        parse_model("mdp module m x:[0..3] init 0; y:[0..3] init 0; fuel:[0..9] init 3; endmodule")
            .unwrap()
    }

    #[test]
    fn placeholders_render_decimal_values() {
        let t = PromptTemplate::new(
            "current x-coordinate={x};current y-coordinate={y};remaining fuel={fuel}",
        );
        let out = encode_state(
            &t,
            &taxi_like(),
            &StateVector(vec![1, 0, 3]),
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(
            out,
            "current x-coordinate=1;current y-coordinate=0;remaining fuel=3"
        );
    }

    #[test]
    fn var_map_aliases_resolve() {
        let t = PromptTemplate::new("pos={cell}");
        let m = parse_model("mdp module m pos:[0..16] init 0; endmodule").unwrap();
        let map = BTreeMap::from([("cell".to_string(), "pos".to_string())]);
        assert_eq!(
            encode_state(&t, &m, &StateVector(vec![7]), &map).unwrap(),
            "pos=7"
        );
    }

    #[test]
    fn templates_without_placeholders_pass_through() {
        let t = PromptTemplate::new("no placeholders { not one } {0bad}");
        assert!(t.required_vars().is_empty());
        let out = encode_state(
            &t,
            &taxi_like(),
            &StateVector(vec![0, 0, 0]),
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(out, "no placeholders { not one } {0bad}");
    }

    #[test]
    fn unresolved_placeholders_error() {
        let t = PromptTemplate::new("{nope}");
        let err = encode_state(
            &t,
            &taxi_like(),
            &StateVector(vec![0, 0, 0]),
            &BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, TemplateError::UnresolvedPlaceholder { .. }));
    }
}
