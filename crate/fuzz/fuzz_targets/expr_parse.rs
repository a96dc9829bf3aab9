#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudoroll::expr::Expr;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(e) = Expr::parse(src) else {
        return;
    };
    // The printed form must parse back to the same tree.
    let text = e.to_string();
    let again = Expr::parse(&text).expect("printed expression parses");
    assert_eq!(again.to_string(), text);
    let _ = e.eval(0.5);
});
