#![no_main]

use libfuzzer_sys::fuzz_target;
use rbwe::nn::Checkpoint;
use rbwe::trainer::Model;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = Checkpoint::decode(data) {
        // Anything that decodes must re-encode, and a model built from it
        // must either load or be rejected cleanly.
        let bytes = ckpt.encode().expect("decoded checkpoint re-encodes");
        assert_eq!(Checkpoint::decode(&bytes).expect("round trip").encode().unwrap(), bytes);
        let _ = Model::from_checkpoint(&ckpt);
    }
});
