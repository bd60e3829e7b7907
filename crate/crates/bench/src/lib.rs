//! Shared fixtures for the pipeline benchmarks.

use isac_core::harness::ScenarioConfig;
use isac_core::ofdm_channel::apply_channel_freq;
use isac_core::resource_grid::{build_grid, ResourceGrid};
use isac_core::sensing::reciprocal_filter;
use isac_core::CMatrix;

/// Two-target scenario at the given PRB count and comb size.
pub fn scenario(prb_count: usize, comb_size: usize) -> ScenarioConfig {
    ScenarioConfig {
        prb_count,
        prs_comb_size: comb_size,
        trial_count: 1,
        ..ScenarioConfig::default()
    }
}

pub struct Fixture {
    pub cfg: ScenarioConfig,
    pub grid: ResourceGrid,
    pub received: CMatrix,
    pub g_prs: CMatrix,
    pub g_dmrs: CMatrix,
}

/// Noiseless received grid with both reciprocal-filtered layers.
pub fn fixture(cfg: ScenarioConfig) -> Fixture {
    let params = cfg.params().expect("valid scenario");
    let layout = cfg.layout().expect("valid scenario");
    let grid = build_grid(&layout, cfg.split().expect("valid scenario"), cfg.payload_seed).expect("grid");
    let received = apply_channel_freq(&grid.combined, &cfg.targets().expect("targets"), &params);
    let g_prs = reciprocal_filter(&received, &grid.prs_layer).expect("shape");
    let g_dmrs = reciprocal_filter(&received, &grid.dmrs_layer).expect("shape");
    Fixture {
        cfg,
        grid,
        received,
        g_prs,
        g_dmrs,
    }
}
