//! Golden-file tests pinning the exact rendered bytes of every prompt
//! condition for fixed seeds.
//!
//! The templates are part of the external interface: any change to them, to
//! the wordlist, or to walk/shot sampling shows up here as a byte diff.
//! Regenerate intentionally with:
//!
//! ```bash
//! UPDATE_GOLDENS=1 cargo test -p graphtrace --test golden_prompts
//! ```

use std::path::PathBuf;

use graphtrace::oracle::build_autorater_prompt;
use graphtrace::taskgen::{
    assign_words, generate_adjacency_pairs, generate_walk, render_awm_prompt,
    render_awm_prompt_with_style, render_describe_prompt, render_explicit_prompt, render_hints,
    render_metalearning_prompt, render_ntp_prompt, Condition, PromptBundle, PromptStyle, Wordlist,
};
use graphtrace::topology::{Rule, Topology};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check_golden(name: &str, bundle: &PromptBundle) {
    let rendered = serde_json::to_string_pretty(bundle).expect("bundle serializes");
    let path = golden_dir().join(format!("{name}.json"));
    if std::env::var("UPDATE_GOLDENS").is_ok() {
        std::fs::write(&path, &rendered).expect("write golden");
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(
        expected,
        rendered,
        "rendered bundle diverged from {}",
        path.display()
    );
}

#[test]
fn golden_instruction_ntp() {
    let topo = Topology::grid(4).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 101).unwrap();
    let walk = generate_walk(&topo, 12, 102).unwrap();
    let bundle = render_ntp_prompt(&walk, &words, Condition::InstructionNtp).unwrap();
    check_golden("instruction_ntp_grid4", &bundle);
}

#[test]
fn golden_prefilled_ntp() {
    let topo = Topology::line(16).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 103).unwrap();
    let pairs = generate_adjacency_pairs(&topo, 6, 104).unwrap();
    let bundle = render_ntp_prompt(&pairs, &words, Condition::PrefilledNtp).unwrap();
    check_golden("prefilled_ntp_line16", &bundle);
}

#[test]
fn golden_awm_prefill() {
    let topo = Topology::grid(4).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 105).unwrap();
    let walk = generate_walk(&topo, 20, 106).unwrap();
    let bundle = render_awm_prompt(&walk, &words, Rule::TwoStep, 6, 107).unwrap();
    check_golden("awm_grid4_two_step", &bundle);
}

#[test]
fn golden_awm_user_message() {
    let topo = Topology::grid(5).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 108).unwrap();
    let walk = generate_walk(&topo, 15, 109).unwrap();
    let bundle = render_awm_prompt_with_style(
        &walk,
        &words,
        Rule::OneStep,
        10,
        110,
        PromptStyle::UserMessage,
    )
    .unwrap();
    check_golden("awm_grid5_user_message", &bundle);
}

#[test]
fn golden_awm_explicit() {
    let topo = Topology::grid(4).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 111).unwrap();
    let bundle = render_explicit_prompt(&topo, &words, Rule::TwoStep, 6, 112).unwrap();
    check_golden("awm_explicit_grid4", &bundle);
}

#[test]
fn golden_awm_metalearning() {
    let topo = Topology::grid(5).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 113).unwrap();
    let bundle = render_metalearning_prompt(&topo, &words, Rule::TwoStep, 114).unwrap();
    check_golden("awm_metalearning_grid5", &bundle);
}

#[test]
fn golden_awm_hints() {
    let topo = Topology::grid(5).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 115).unwrap();
    let walk = generate_walk(&topo, 15, 116).unwrap();
    let base = render_awm_prompt(&walk, &words, Rule::ThreeStep, 10, 117).unwrap();
    let bundle = render_hints(&base, &topo, Rule::ThreeStep).unwrap();
    check_golden("awm_hints_grid5", &bundle);
}

#[test]
fn golden_describe() {
    let topo = Topology::grid(4).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 118).unwrap();
    let walk = generate_walk(&topo, 18, 119).unwrap();
    let bundle = render_describe_prompt(&walk, &words).unwrap();
    check_golden("describe_grid4", &bundle);
}

#[test]
fn golden_autorater() {
    let topo = Topology::grid(4).unwrap();
    let bundle =
        build_autorater_prompt("The words seem to form a 4 by 4 lattice of rooms.", &topo)
            .unwrap();
    check_golden("autorater_grid4", &bundle);
}

#[test]
fn rerender_is_byte_identical() {
    let topo = Topology::grid(5).unwrap();
    let words = assign_words(&topo, Wordlist::bundled(), 120).unwrap();
    let walk = generate_walk(&topo, 30, 121).unwrap();
    let a = render_awm_prompt(&walk, &words, Rule::OneStep, 10, 122).unwrap();
    let b = render_awm_prompt(&walk, &words, Rule::OneStep, 10, 122).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}
