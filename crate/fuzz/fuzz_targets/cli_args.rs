#![no_main]

use libfuzzer_sys::fuzz_target;

// One argument per line.
fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let args: Vec<String> = s.lines().map(String::from).collect();
        _ = fracheat_cli::parse_config(&args, None);
    }
});
