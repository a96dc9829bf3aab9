#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudoroll_cli::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(sc) = Scenario::from_json(src) else {
        return;
    };
    let _ = sc.hyperquadric();
    let _ = sc.control();
    if sc.t_end / sc.step <= 1e5 {
        let _ = sc.times();
    }
});
