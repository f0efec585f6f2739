#![no_main]

use fracheat::KernelFamily;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(family) = s.parse::<KernelFamily>() {
            assert_eq!(family.name().parse::<KernelFamily>().ok(), Some(family));
        }
    }
});
