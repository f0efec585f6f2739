#![no_main]

use libfuzzer_sys::fuzz_target;

// A `[grid]` section plus simulation settings; checks the point cap holds for anything accepted.
fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let text = format!("command = \"simulate\"\n{s}");
        if let Ok(cfg) = fracheat_cli::parse_config(&[], Some(&text)) {
            assert!(cfg.grid.times * cfg.grid.sites <= cfg.grid.max_points);
        }
    }
});
