#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((labels, c)) = corrspec::finance::read_heatmap(data) {
        assert_eq!(labels.len(), c.nrows());
        assert_eq!(c.nrows(), c.ncols());
    }
});
