#![no_main]

use idp_core::assessment::ReviewDecision;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = serde_json::from_slice::<ReviewDecision>(data) {
        let again = serde_json::to_vec(&d).unwrap();
        assert_eq!(serde_json::from_slice::<ReviewDecision>(&again).unwrap(), d);
    }
});
