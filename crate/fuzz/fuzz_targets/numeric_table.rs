#![no_main]

use libfuzzer_sys::fuzz_target;
use pseudoroll_cli::table::NumericTable;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(table) = NumericTable::parse(src, "table.csv") else {
        return;
    };
    for row in &table.rows {
        assert_eq!(row.len(), table.header.len());
    }
    let _ = table.columns(&["t".to_string()], "table.csv");
});
