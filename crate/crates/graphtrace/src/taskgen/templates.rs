//! Versioned prompt templates.
//!
//! Templates are plain-text files with `{name}` placeholders, embedded at
//! compile time. They are part of the external interface: editing one is a
//! breaking change to every golden file that pins rendered output.

pub const INSTRUCTION_NTP_USER: &str = include_str!("../../templates/instruction_ntp_user.txt");
pub const PREFILLED_NTP_USER: &str = include_str!("../../templates/prefilled_ntp_user.txt");
pub const PREFILLED_NTP_PREFILL: &str = include_str!("../../templates/prefilled_ntp_prefill.txt");
pub const AWM_USER: &str = include_str!("../../templates/awm_user.txt");
pub const AWM_PREFILL: &str = include_str!("../../templates/awm_prefill.txt");
pub const AWM_USER_MESSAGE: &str = include_str!("../../templates/awm_user_message.txt");
pub const AWM_EXPLICIT_PREFILL: &str = include_str!("../../templates/awm_explicit_prefill.txt");
pub const AWM_METALEARNING_PREFILL: &str =
    include_str!("../../templates/awm_metalearning_prefill.txt");
pub const HINT_PREAMBLE: &str = include_str!("../../templates/hint_preamble.txt");
pub const DESCRIBE_USER: &str = include_str!("../../templates/describe_user.txt");
pub const AUTORATER_USER: &str = include_str!("../../templates/autorater_user.txt");

/// Substitute `{name}` placeholders. Placeholders with no matching
/// substitution are left untouched.
pub fn render_template(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in substitutions {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_are_substituted() {
        let out = render_template("a {x} b {y} {x}", &[("x", "1"), ("y", "2")]);
        assert_eq!(out, "a 1 b 2 1");
    }

    #[test]
    fn templates_have_expected_placeholders() {
        assert!(INSTRUCTION_NTP_USER.contains("{walk_words}"));
        assert!(AWM_PREFILL.contains("{shot_lines}"));
        assert!(AWM_PREFILL.contains("{query_word}"));
        assert!(AWM_EXPLICIT_PREFILL.contains("{coordinate_lines}"));
        assert!(HINT_PREAMBLE.contains("{shape}"));
        assert!(AUTORATER_USER.contains("{description}"));
    }
}
