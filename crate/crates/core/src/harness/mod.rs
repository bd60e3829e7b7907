//! Scenario configuration, end-to-end pipelines and report emission.

pub mod config;
pub mod selfcheck;
pub mod sense;
pub mod sweep;
pub mod table;

pub use config::{ScenarioConfig, TargetSpec};
pub use selfcheck::{run_selfcheck, CheckOutcome, CheckStatus, SelfcheckOptions};
pub use sense::{run_sense, SenseOutput};
pub use sweep::{sweep_csv, sweep_power, sweep_power_with_threads, SweepPoint};
pub use table::{ambiguity_table, ambiguity_table_csv, AmbiguityCell, TABLE_COMBS, TABLE_SCS_HZ};

/// SplitMix64 finaliser; derives independent per-trial seeds.
pub fn derive_seed(master: u64, index: u64, stream: u64) -> u64 {
    let mut z = master
        ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
