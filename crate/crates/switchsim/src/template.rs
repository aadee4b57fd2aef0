//! JSON test-case templates and the field-config that drives value
//! generation. A template names a transaction, fixes some fields
//! verbatim, marks others for randomization, and states what the
//! response must look like:
//!
//! ```json
//! {
//!   "name": "balance-ok",
//!   "mti": "0200",
//!   "fields": {"3": "310000", "41": "TERM0001"},
//!   "randomize": [2, 11],
//!   "expected": {"39": "00"}
//! }
//! ```
//!
//! Randomized fields draw their pattern from the template's optional
//! `patterns` block first, then from the field config. Expected values
//! are exact strings, or regexes when wrapped in `/.../`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_core::SeedableRng;
use serde::Deserialize;
use switchsim_core::{FieldValue, IsoMsg, Mti, Pattern, PatternError, MAX_FIELD, MIN_FIELD};

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("invalid mti {0:?}")]
    InvalidMti(String),
    #[error("field number {0} out of range 2..=128")]
    UnknownFieldNumber(u16),
    #[error("field {field}: {source}")]
    UnsupportedRegex { field: u16, source: PatternError },
    #[error("no pattern available for randomized field {0}")]
    MissingPattern(u16),
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> TemplateError {
    TemplateError::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestTemplate {
    pub name: String,
    pub mti: Mti,
    /// Literal field values, copied verbatim unless the field is randomized.
    pub fields: BTreeMap<u16, String>,
    /// Fields whose values are generated from a pattern on every instantiation.
    pub randomize: Vec<u16>,
    /// Response assertions: exact strings, or `/regex/` full matches.
    pub expected: BTreeMap<u16, String>,
    /// Template-local pattern overrides; beat the field config.
    pub patterns: BTreeMap<u16, Pattern>,
}

/// Per-field generation patterns, applied to every template that does not
/// override them.
#[derive(Debug, Clone)]
pub struct FieldConfig {
    pub patterns: BTreeMap<u16, Pattern>,
}

impl FieldConfig {
    pub fn empty() -> FieldConfig {
        FieldConfig {
            patterns: BTreeMap::new(),
        }
    }

    /// The built-in default: a visa-prefixed PAN, a balance-inquiry
    /// processing code, and a six-digit trace number.
    pub fn default_config() -> FieldConfig {
        let mut patterns = BTreeMap::new();
        for (field, pattern) in [(2, "4[0-9]{15}"), (3, "31[0-9]{4}"), (11, "[0-9]{6}")] {
            patterns.insert(field, Pattern::parse(pattern).expect("built-in pattern"));
        }
        FieldConfig { patterns }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDoc {
    name: String,
    mti: String,
    #[serde(default)]
    fields: BTreeMap<String, String>,
    #[serde(default)]
    randomize: Vec<u16>,
    expected: BTreeMap<String, String>,
    #[serde(default)]
    patterns: BTreeMap<String, String>,
}

fn parse_field_number(key: &str, context: &str) -> Result<u16, TemplateError> {
    let number: u16 = key
        .parse()
        .map_err(|_| schema(context, format!("key {key:?} is not a field number")))?;
    if !(MIN_FIELD..=MAX_FIELD).contains(&number) {
        return Err(TemplateError::UnknownFieldNumber(number));
    }
    Ok(number)
}

fn check_printable(field: u16, value: &str, context: &str) -> Result<(), TemplateError> {
    FieldValue::text(value)
        .map(|_| ())
        .map_err(|e| schema(context, format!("field {field}: {e}")))
}

pub fn parse_template(text: &str) -> Result<TestTemplate, TemplateError> {
    let doc: TemplateDoc =
        serde_json::from_str(text).map_err(|e| schema("template", e.to_string()))?;

    let mti = Mti::new(&doc.mti).map_err(|_| TemplateError::InvalidMti(doc.mti.clone()))?;

    let mut fields = BTreeMap::new();
    for (key, value) in doc.fields {
        let number = parse_field_number(&key, "fields")?;
        check_printable(number, &value, "fields")?;
        fields.insert(number, value);
    }

    let mut expected = BTreeMap::new();
    for (key, value) in doc.expected {
        let number = parse_field_number(&key, "expected")?;
        check_printable(number, &value, "expected")?;
        if let Some(inner) = regex_expectation(&value) {
            // validate eagerly so a bad expectation fails at load, not at
            // comparison time deep into a run
            regex::Regex::new(&format!("^(?:{inner})$"))
                .map_err(|e| schema("expected", format!("field {number}: bad regex: {e}")))?;
        }
        expected.insert(number, value);
    }
    if expected.is_empty() {
        return Err(schema("expected", "a template must assert at least one field"));
    }

    let mut patterns = BTreeMap::new();
    for (key, value) in doc.patterns {
        let number = parse_field_number(&key, "patterns")?;
        let pattern = Pattern::parse(&value)
            .map_err(|source| TemplateError::UnsupportedRegex { field: number, source })?;
        patterns.insert(number, pattern);
    }

    let randomize = doc.randomize;
    let mut seen = std::collections::BTreeSet::new();
    for &number in &randomize {
        if !(MIN_FIELD..=MAX_FIELD).contains(&number) {
            return Err(TemplateError::UnknownFieldNumber(number));
        }
        if !seen.insert(number) {
            return Err(schema("randomize", format!("field {number} listed twice")));
        }
    }

    Ok(TestTemplate {
        name: doc.name,
        mti,
        fields,
        randomize,
        expected,
        patterns,
    })
}

/// Returns the inner regex when an expected value uses the `/.../` form.
pub fn regex_expectation(value: &str) -> Option<&str> {
    value
        .strip_prefix('/')
        .and_then(|rest| rest.strip_suffix('/'))
}

pub fn load_template(path: &Path) -> Result<TestTemplate, TemplateError> {
    let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_template(&text)
}

pub fn parse_field_config(text: &str) -> Result<FieldConfig, TemplateError> {
    let doc: BTreeMap<String, String> =
        serde_json::from_str(text).map_err(|e| schema("field-config", e.to_string()))?;
    let mut patterns = BTreeMap::new();
    for (key, value) in doc {
        let number = parse_field_number(&key, "field-config")?;
        let pattern = Pattern::parse(&value)
            .map_err(|source| TemplateError::UnsupportedRegex { field: number, source })?;
        patterns.insert(number, pattern);
    }
    Ok(FieldConfig { patterns })
}

pub fn load_field_config(path: &Path) -> Result<FieldConfig, TemplateError> {
    let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_field_config(&text)
}

/// Loads every `*.json` in a directory as a template, ordered by filename.
pub fn load_suite(dir: &Path) -> Result<Vec<(String, TestTemplate)>, TemplateError> {
    let entries = std::fs::read_dir(dir).map_err(|source| TemplateError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    let mut suite = Vec::new();
    for path in files {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let template = load_template(&path).map_err(|e| match e {
            TemplateError::Schema { path: _, reason } => schema(name.clone(), reason),
            e @ TemplateError::Io { .. } => e,
            other => schema(name.clone(), other.to_string()),
        })?;
        suite.push((name, template));
    }
    Ok(suite)
}

/// Builds a concrete message from a template: the MTI and non-randomized
/// fields come over verbatim, each randomized field is drawn from its
/// pattern. Equal seeds give byte-identical messages.
pub fn instantiate(
    template: &TestTemplate,
    config: &FieldConfig,
    seed: u64,
) -> Result<IsoMsg, TemplateError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut msg = IsoMsg::new(template.mti);
    for (&number, value) in &template.fields {
        if !template.randomize.contains(&number) {
            msg.set_text(number, value)
                .map_err(|e| schema("fields", format!("field {number}: {e}")))?;
        }
    }
    for &number in &template.randomize {
        let pattern = template
            .patterns
            .get(&number)
            .or_else(|| config.patterns.get(&number))
            .ok_or(TemplateError::MissingPattern(number))?;
        let value = pattern.generate(&mut rng);
        msg.set_text(number, &value)
            .map_err(|e| schema("patterns", format!("field {number}: {e}")))?;
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    const BALANCE_OK: &str = r#"{
        "name": "balance-ok",
        "mti": "0200",
        "fields": {"3": "310000", "41": "TERM0001"},
        "randomize": [2, 11],
        "expected": {"39": "00"}
    }"#;

    #[test]
    fn parses_the_balance_template() {
        let t = parse_template(BALANCE_OK).unwrap();
        assert_eq!(t.name, "balance-ok");
        assert_eq!(t.mti.as_str(), "0200");
        assert_eq!(t.fields.get(&3).map(String::as_str), Some("310000"));
        assert_eq!(t.randomize, vec![2, 11]);
        assert_eq!(t.expected.get(&39).map(String::as_str), Some("00"));
    }

    #[test]
    fn rejects_empty_expected() {
        let text = r#"{"name":"t","mti":"0200","fields":{},"randomize":[],"expected":{}}"#;
        assert!(matches!(
            parse_template(text),
            Err(TemplateError::Schema { .. })
        ));
    }

    #[test]
    fn rejects_bad_mti() {
        let text = r#"{"name":"t","mti":"02X0","expected":{"39":"00"}}"#;
        assert!(matches!(
            parse_template(text),
            Err(TemplateError::InvalidMti(_))
        ));
    }

    #[test]
    fn rejects_unknown_top_level_keys() {
        let text = r#"{"name":"t","mti":"0200","expected":{"39":"00"},"bogus":1}"#;
        assert!(matches!(
            parse_template(text),
            Err(TemplateError::Schema { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_field_numbers() {
        for text in [
            r#"{"name":"t","mti":"0200","fields":{"1":"x"},"expected":{"39":"00"}}"#,
            r#"{"name":"t","mti":"0200","fields":{"129":"x"},"expected":{"39":"00"}}"#,
            r#"{"name":"t","mti":"0200","randomize":[129],"expected":{"39":"00"}}"#,
        ] {
            assert!(matches!(
                parse_template(text),
                Err(TemplateError::UnknownFieldNumber(_))
            ));
        }
    }

    #[test]
    fn rejects_unsupported_pattern_in_template() {
        let text = r#"{"name":"t","mti":"0200","randomize":[2],
                       "patterns":{"2":"\\d+"},"expected":{"39":"00"}}"#;
        match parse_template(text) {
            Err(TemplateError::UnsupportedRegex { field: 2, .. }) => {}
            other => panic!("got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_expected_regex() {
        let text = r#"{"name":"t","mti":"0200","expected":{"39":"/(/"}}"#;
        assert!(matches!(
            parse_template(text),
            Err(TemplateError::Schema { .. })
        ));
    }

    #[test]
    fn field_config_parses_and_validates() {
        let cfg =
            parse_field_config(r#"{"2":"4[0-9]{15}","11":"[0-9]{6}","3":"31[0-9]{4}"}"#).unwrap();
        assert_eq!(cfg.patterns.len(), 3);
        assert!(cfg.patterns.contains_key(&2));
    }

    #[test]
    fn field_config_rejects_backreference() {
        match parse_field_config(r#"{"2":"(a)\\1"}"#) {
            Err(TemplateError::UnsupportedRegex { field: 2, .. }) => {}
            other => panic!("got {other:?}"),
        }
    }

    #[test]
    fn empty_field_config_is_valid() {
        let cfg = parse_field_config("{}").unwrap();
        assert!(cfg.patterns.is_empty());
    }

    #[test]
    fn instantiate_fills_randomized_fields() {
        let t = parse_template(BALANCE_OK).unwrap();
        let cfg = FieldConfig::default_config();
        let msg = instantiate(&t, &cfg, 7).unwrap();
        assert_eq!(msg.mti().as_str(), "0200");
        assert_eq!(msg.get_text(3), Some("310000"));
        assert_eq!(msg.get_text(41), Some("TERM0001"));
        let pan = msg.get_text(2).unwrap();
        assert!(regex::Regex::new("^4[0-9]{15}$").unwrap().is_match(pan));
        let stan = msg.get_text(11).unwrap();
        assert!(regex::Regex::new("^[0-9]{6}$").unwrap().is_match(stan));
    }

    #[test]
    fn instantiate_is_deterministic_per_seed() {
        let t = parse_template(BALANCE_OK).unwrap();
        let cfg = FieldConfig::default_config();
        assert_eq!(
            instantiate(&t, &cfg, 7).unwrap(),
            instantiate(&t, &cfg, 7).unwrap()
        );
    }

    #[test]
    fn seeds_diverge() {
        let t = parse_template(BALANCE_OK).unwrap();
        let cfg = FieldConfig::default_config();
        let distinct: BTreeSet<String> = (0..100)
            .map(|seed| {
                let msg = instantiate(&t, &cfg, seed).unwrap();
                format!("{}|{}", msg.get_text(2).unwrap(), msg.get_text(11).unwrap())
            })
            .collect();
        assert!(distinct.len() >= 99, "only {} distinct", distinct.len());
    }

    #[test]
    fn template_pattern_overrides_config() {
        let text = r#"{"name":"t","mti":"0200","randomize":[2],
                       "patterns":{"2":"9{4}"},"expected":{"39":"00"}}"#;
        let t = parse_template(text).unwrap();
        let cfg = FieldConfig::default_config();
        let msg = instantiate(&t, &cfg, 1).unwrap();
        assert_eq!(msg.get_text(2), Some("9999"));
    }

    #[test]
    fn empty_randomize_copies_fields_exactly() {
        let text = r#"{"name":"t","mti":"0800","fields":{"7":"0825101500"},"expected":{"39":"00"}}"#;
        let t = parse_template(text).unwrap();
        let msg = instantiate(&t, &FieldConfig::empty(), 99).unwrap();
        assert_eq!(msg.mti().as_str(), "0800");
        assert_eq!(msg.get_text(7), Some("0825101500"));
        assert_eq!(msg.len(), 1);
    }

    #[test]
    fn missing_pattern_is_an_error() {
        let text = r#"{"name":"t","mti":"0200","randomize":[55],"expected":{"39":"00"}}"#;
        let t = parse_template(text).unwrap();
        match instantiate(&t, &FieldConfig::default_config(), 1) {
            Err(TemplateError::MissingPattern(55)) => {}
            other => panic!("got {other:?}"),
        }
    }

    #[test]
    fn randomized_literal_is_replaced() {
        let text = r#"{"name":"t","mti":"0200","fields":{"2":"0000000000000000"},
                       "randomize":[2],"expected":{"39":"00"}}"#;
        let t = parse_template(text).unwrap();
        let msg = instantiate(&t, &FieldConfig::default_config(), 3).unwrap();
        assert!(msg.get_text(2).unwrap().starts_with('4'));
    }

    #[test]
    fn suite_loads_in_filename_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("20-second.json"),
            r#"{"name":"second","mti":"0800","expected":{"39":"00"}}"#,
        )
        .unwrap();
        std::fs::write(
            dir.path().join("10-first.json"),
            r#"{"name":"first","mti":"0200","fields":{"3":"310000"},"expected":{"39":"00"}}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let suite = load_suite(dir.path()).unwrap();
        let names: Vec<&str> = suite.iter().map(|(_, t)| t.name.as_str()).collect();
        assert_eq!(names, vec!["first", "second"]);
        assert_eq!(suite[0].0, "10-first.json");
    }
}
