//! Bundled example programs.

use crate::counter::{parse_ca, CounterAutomaton};
use crate::dsl::parse_program;
use crate::dynprog::DynamicProgram;

pub const CONST_AUX: &str = include_str!("../corpus/const_aux.dyn");
pub const COPY: &str = include_str!("../corpus/copy.dyn");
pub const EDGES_BIT: &str = include_str!("../corpus/edges_bit.dyn");
pub const EDGES_FALSE: &str = include_str!("../corpus/edges_false.dyn");
pub const EDGES_LOOP: &str = include_str!("../corpus/edges_loop.dyn");
pub const EXAMPLE1: &str = include_str!("../corpus/example1.dyn");
pub const EXAMPLE1_UNGUARDED: &str = include_str!("../corpus/example1_unguarded.dyn");
pub const TOGGLE: &str = include_str!("../corpus/toggle.dyn");

/// Unary-input, unary-aux quantifier-free programs.
pub const PROP11: &[(&str, &str)] = &[
    ("p01_false", include_str!("../corpus/prop11/p01_false.dyn")),
    ("p02_first_insert", include_str!("../corpus/prop11/p02_first_insert.dyn")),
    ("p03_delete_present", include_str!("../corpus/prop11/p03_delete_present.dyn")),
    ("p04_both_colors", include_str!("../corpus/prop11/p04_both_colors.dyn")),
    ("p05_reinsert", include_str!("../corpus/prop11/p05_reinsert.dyn")),
    ("p06_second_element", include_str!("../corpus/prop11/p06_second_element.dyn")),
    ("p07_init_size", include_str!("../corpus/prop11/p07_init_size.dyn")),
    ("p08_init_unary", include_str!("../corpus/prop11/p08_init_unary.dyn")),
    ("p09_unary_query", include_str!("../corpus/prop11/p09_unary_query.dyn")),
    ("p10_unary_query_empty", include_str!("../corpus/prop11/p10_unary_query_empty.dyn")),
    ("p11_contradiction", include_str!("../corpus/prop11/p11_contradiction.dyn")),
    ("p12_parity", include_str!("../corpus/prop11/p12_parity.dyn")),
    ("p13_bit_chain", include_str!("../corpus/prop11/p13_bit_chain.dyn")),
    ("p14_not_last", include_str!("../corpus/prop11/p14_not_last.dyn")),
    ("p15_spurious_mark", include_str!("../corpus/prop11/p15_spurious_mark.dyn")),
    ("p16_input_bit", include_str!("../corpus/prop11/p16_input_bit.dyn")),
    ("p17_bit_never", include_str!("../corpus/prop11/p17_bit_never.dyn")),
    ("p18_singleton_domain", include_str!("../corpus/prop11/p18_singleton_domain.dyn")),
    ("p19_toggle_mark", include_str!("../corpus/prop11/p19_toggle_mark.dyn")),
    ("p20_shrinking_mark", include_str!("../corpus/prop11/p20_shrinking_mark.dyn")),
];

/// Consistent unary programs with first-order updates.
pub const CONSISTENT: &[(&str, &str)] = &[
    ("c01_nonempty", include_str!("../corpus/consistent/c01_nonempty.dyn")),
    ("c02_false", include_str!("../corpus/consistent/c02_false.dyn")),
    ("c03_common", include_str!("../corpus/consistent/c03_common.dyn")),
    ("c04_two_elements", include_str!("../corpus/consistent/c04_two_elements.dyn")),
    ("c05_everything", include_str!("../corpus/consistent/c05_everything.dyn")),
    ("c06_unary_query", include_str!("../corpus/consistent/c06_unary_query.dyn")),
    ("c07_contradiction", include_str!("../corpus/consistent/c07_contradiction.dyn")),
    ("c08_domain_size", include_str!("../corpus/consistent/c08_domain_size.dyn")),
    ("c09_mirror", include_str!("../corpus/consistent/c09_mirror.dyn")),
    ("c10_input_bit", include_str!("../corpus/consistent/c10_input_bit.dyn")),
];

/// Semi-deterministic two-counter automata.
pub const CA: &[(&str, &str)] = &[
    ("m01_inc_accept", include_str!("../corpus/ca/m01_inc_accept.ca")),
    ("m02_zero_accept", include_str!("../corpus/ca/m02_zero_accept.ca")),
    ("m03_inc_dec", include_str!("../corpus/ca/m03_inc_dec.ca")),
    ("m04_count_two", include_str!("../corpus/ca/m04_count_two.ca")),
    ("m05_no_accept", include_str!("../corpus/ca/m05_no_accept.ca")),
    ("m06_drain", include_str!("../corpus/ca/m06_drain.ca")),
    ("m07_blocked_dec", include_str!("../corpus/ca/m07_blocked_dec.ca")),
    ("m08_two_counters", include_str!("../corpus/ca/m08_two_counters.ca")),
    ("m09_initial_accept", include_str!("../corpus/ca/m09_initial_accept.ca")),
    ("m10_stuck", include_str!("../corpus/ca/m10_stuck.ca")),
];

/// Parses a bundled program; bundled texts are known to be valid.
pub fn load(text: &str) -> DynamicProgram {
    parse_program(text).unwrap_or_else(|e| panic!("bundled program does not parse: {e:?}")).0
}

/// Every bundled program with its name.
pub fn all() -> Vec<(String, DynamicProgram)> {
    let mut out: Vec<(String, DynamicProgram)> = vec![
        ("const_aux".to_string(), load(CONST_AUX)),
        ("copy".to_string(), load(COPY)),
        ("edges_bit".to_string(), load(EDGES_BIT)),
        ("edges_false".to_string(), load(EDGES_FALSE)),
        ("edges_loop".to_string(), load(EDGES_LOOP)),
        ("example1".to_string(), load(EXAMPLE1)),
        ("example1_unguarded".to_string(), load(EXAMPLE1_UNGUARDED)),
        ("toggle".to_string(), load(TOGGLE)),
    ];
    for (name, text) in PROP11.iter().chain(CONSISTENT) {
        out.push((name.to_string(), load(text)));
    }
    out
}

/// Programs that must be rejected with a positioned diagnostic.
pub const MALFORMED: &[(&str, &str)] = &[
    ("m01_unknown_symbol", include_str!("../corpus/malformed/m01_unknown_symbol.dyn")),
    ("m02_head_arity", include_str!("../corpus/malformed/m02_head_arity.dyn")),
    ("m03_duplicate_declaration", include_str!("../corpus/malformed/m03_duplicate_declaration.dyn")),
    ("m04_free_variable", include_str!("../corpus/malformed/m04_free_variable.dyn")),
    ("m05_missing_query", include_str!("../corpus/malformed/m05_missing_query.dyn")),
    ("m06_bad_token", include_str!("../corpus/malformed/m06_bad_token.dyn")),
    ("m07_unclosed_paren", include_str!("../corpus/malformed/m07_unclosed_paren.dyn")),
    ("m08_init_after_rule", include_str!("../corpus/malformed/m08_init_after_rule.dyn")),
    ("m09_duplicate_rule", include_str!("../corpus/malformed/m09_duplicate_rule.dyn")),
    ("m10_update_of_input", include_str!("../corpus/malformed/m10_update_of_input.dyn")),
    ("m11_query_input", include_str!("../corpus/malformed/m11_query_input.dyn")),
    ("m12_init_mentions_aux", include_str!("../corpus/malformed/m12_init_mentions_aux.dyn")),
    ("m13_repeated_parameter", include_str!("../corpus/malformed/m13_repeated_parameter.dyn")),
    ("m14_trailing_input", include_str!("../corpus/malformed/m14_trailing_input.dyn")),
    ("m15_rule_arity", include_str!("../corpus/malformed/m15_rule_arity.dyn")),
    ("m16_atom_arity", include_str!("../corpus/malformed/m16_atom_arity.dyn")),
    ("m17_unclosed_schema", include_str!("../corpus/malformed/m17_unclosed_schema.dyn")),
    ("m18_quantifier_without_variable", include_str!("../corpus/malformed/m18_quantifier_without_variable.dyn")),
];

/// Parses a bundled automaton.
pub fn load_ca(text: &str) -> CounterAutomaton {
    parse_ca(text).unwrap_or_else(|e| panic!("bundled automaton does not parse: {e:?}"))
}
