use dynrel::corpus;
use dynrel::dsl::{parse_program, parse_sequence, Severity};

#[test]
fn malformed_programs_are_positioned() {
    let expected = [
        ("m01_unknown_symbol", 2, 25, "unknown symbol V"),
        ("m02_head_arity", 2, 18, "head has 1 variables"),
        ("m03_duplicate_declaration", 1, 30, "duplicate declaration of U"),
        ("m04_free_variable", 2, 25, "free variable b"),
        ("m05_missing_query", 3, 1, "`query`"),
        ("m06_bad_token", 2, 30, "unexpected character"),
        ("m07_unclosed_paren", 2, 37, "expected `)`"),
        ("m08_init_after_rule", 3, 1, "initializations must precede"),
        ("m09_duplicate_rule", 3, 4, "duplicate rule for ins_U"),
        ("m10_update_of_input", 2, 18, "not an auxiliary symbol"),
        ("m11_query_input", 2, 7, "not an auxiliary symbol"),
        ("m12_init_mentions_aux", 2, 13, "mentions auxiliary symbol R"),
        ("m13_repeated_parameter", 2, 11, "occurs twice"),
        ("m14_trailing_input", 3, 1, "end of input"),
        ("m15_rule_arity", 2, 11, "rule has 2 parameters"),
        ("m16_atom_arity", 2, 25, "used with 0 arguments"),
        ("m17_unclosed_schema", 2, 1, "expected `input`"),
        ("m18_quantifier_without_variable", 2, 32, "expected a name"),
    ];
    assert_eq!(expected.len(), corpus::MALFORMED.len());
    for ((name, text), (ename, line, column, msg)) in corpus::MALFORMED.iter().zip(expected) {
        assert_eq!(*name, ename);
        let ds = parse_program(text).expect_err(name);
        let d = &ds[0];
        assert_eq!(d.severity, Severity::Error);
        assert_eq!((d.line, d.column), (line, column), "{name}: {d}");
        assert!(d.message.contains(msg), "{name}: {d}");
    }
}

#[test]
fn malformed_sequences_are_positioned() {
    let sc = corpus::load(corpus::EXAMPLE1);
    for (text, line) in [("+U(1)", 1), ("domain 3\n+U(4)", 2), ("domain 2\n+V(1)", 2), ("domain 2\n+U(1,2)", 2), ("domain 2\nU(1)", 2)] {
        let ds = parse_sequence(sc.schema(), text).expect_err(text);
        assert_eq!(ds[0].line, line, "{text}: {}", ds[0]);
        assert!(ds[0].column >= 1);
    }
}
