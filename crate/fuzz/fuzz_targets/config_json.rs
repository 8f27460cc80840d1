#![no_main]

use libfuzzer_sys::fuzz_target;
use rbwe::controller::GateConfig;
use rbwe::trainer::TrainConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<TrainConfig>(data) {
        if cfg.validate().is_ok() {
            let _ = cfg.policy_config();
            let _ = cfg.critic_config();
        }
    }
    let _ = serde_json::from_slice::<GateConfig>(data);
});
