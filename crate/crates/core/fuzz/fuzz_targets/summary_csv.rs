#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let summary = corrspec::finance::read_summary(data);
    let rho_bar = corrspec::finance::read_rho_bar(data);
    if let (Ok(s), Ok(r)) = (summary, rho_bar) {
        let _ = corrspec::finance::regress_summary(&s, &r);
    }
});
