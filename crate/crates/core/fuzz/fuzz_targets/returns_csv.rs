#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((dates, tickers, x)) = corrspec::finance::parse_returns(data) {
        assert_eq!(dates.len(), x.t());
        assert_eq!(tickers.len(), x.n());
    }
});
