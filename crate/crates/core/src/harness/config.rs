//! Flat `key=value` scenario files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors; absent keys keep the defaults of [`ScenarioConfig::default`],
//! which describe the two-target 25 GHz / 120 kHz scenario. When only one of
//! `split.gamma_s` / `split.gamma_c` is given the other is `1 - value`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::comms::EstimationMethod;
use crate::error::{IsacError, Result};
use crate::ofdm_channel::{ChannelConfig, OfdmParams, Target, NORMAL_CP_FRACTION};
use crate::resource_grid::{DmrsConfig, GridDims, GridLayout, PdschConfig, PowerSplit, PrsConfig};
use crate::sensing::{max_range, DopplerTimeBase, ProfileKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub alpha: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub delta_f_hz: f64,
    pub f_c_hz: f64,
    /// `None` means normal CP for the configured spacing.
    pub t_cp_s: Option<f64>,

    pub prb_count: usize,
    pub slots: usize,
    pub prs_comb_size: usize,
    pub prs_start_symbol: usize,
    pub prs_num_symbols: usize,
    pub prs_comb_offset: usize,
    pub prs_id: u32,
    pub dmrs_symbol_index: usize,
    pub dmrs_id: u32,
    pub pdsch_symbols: Vec<usize>,
    pub payload_seed: u64,

    pub targets: Vec<TargetSpec>,
    pub snr_db: f64,
    pub noise_seed: u64,

    pub gamma_s: f64,
    pub gamma_c: f64,

    pub master_seed: u64,
    pub trial_count: usize,

    pub algorithm: ProfileKind,
    pub doppler_time_base: DopplerTimeBase,
    pub min_separation_bins: usize,

    pub sweep_sqrt_gamma_c: Vec<f64>,
    pub sweep_comb_sizes: Vec<usize>,
    pub channel_estimation: EstimationMethod,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            delta_f_hz: 120e3,
            f_c_hz: 25e9,
            t_cp_s: None,
            prb_count: 272,
            slots: 4,
            prs_comb_size: 4,
            prs_start_symbol: 1,
            prs_num_symbols: 12,
            prs_comb_offset: 0,
            prs_id: 0,
            dmrs_symbol_index: 0,
            dmrs_id: 0,
            pdsch_symbols: (0..=12).collect(),
            payload_seed: 1,
            targets: vec![
                TargetSpec {
                    range_m: 711.0,
                    velocity_mps: 2.0,
                    alpha: Complex64::ONE,
                },
                TargetSpec {
                    range_m: 846.0,
                    velocity_mps: 10.0,
                    alpha: Complex64::ONE,
                },
            ],
            snr_db: 15.0,
            noise_seed: 2,
            gamma_s: 0.25,
            gamma_c: 0.75,
            master_seed: 1,
            trial_count: 200,
            algorithm: ProfileKind::Alg1,
            doppler_time_base: DopplerTimeBase::T0,
            min_separation_bins: 2,
            sweep_sqrt_gamma_c: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            sweep_comb_sizes: vec![2, 12],
            channel_estimation: EstimationMethod::LsInterp,
        }
    }
}

pub const KEYS: &[&str] = &[
    "ofdm.delta_f_hz",
    "ofdm.f_c_hz",
    "ofdm.t_cp_s",
    "grid.prb_count",
    "grid.slots",
    "grid.prs.comb_size",
    "grid.prs.start_symbol",
    "grid.prs.num_symbols",
    "grid.prs.comb_offset",
    "grid.prs.id",
    "grid.dmrs.symbol_index",
    "grid.dmrs.id",
    "grid.pdsch.symbols",
    "grid.pdsch.payload_seed",
    "channel.targets",
    "channel.snr_db",
    "channel.noise_seed",
    "split.gamma_s",
    "split.gamma_c",
    "seeds.master_seed",
    "seeds.trial_count",
    "estimator.algorithm",
    "estimator.doppler_time_base",
    "estimator.min_separation_bins",
    "sweep.sqrt_gamma_c",
    "sweep.comb_sizes",
    "sweep.channel_estimation",
];

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as a number"))
}

fn parse_f64(value: &str) -> std::result::Result<f64, String> {
    match value.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => parse_num(value),
    }
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_num)
        .collect()
}

/// `0-12` or `0,2,4-6`.
fn parse_index_set(value: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (parse_num(a.trim())?, parse_num(b.trim())?);
                if a > b {
                    return Err(format!("descending range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_num(part)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn format_index_set(values: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let start = values[i];
        let mut end = start;
        while i + 1 < values.len() && values[i + 1] == end + 1 {
            i += 1;
            end = values[i];
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}-{end}")
        });
        i += 1;
    }
    parts.join(",")
}

/// `range:velocity[:alpha_re[:alpha_im]]`, comma separated.
fn parse_targets(value: &str) -> std::result::Result<Vec<TargetSpec>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|t| {
            let fields: Vec<f64> = t
                .split(':')
                .map(|f| parse_f64(f.trim()))
                .collect::<std::result::Result<_, _>>()?;
            match fields.as_slice() {
                [r, v] => Ok((*r, *v, 1.0, 0.0)),
                [r, v, a] => Ok((*r, *v, *a, 0.0)),
                [r, v, a, b] => Ok((*r, *v, *a, *b)),
                _ => Err(format!("target `{t}` needs range:velocity[:alpha_re[:alpha_im]]")),
            }
            .map(|(r, v, a, b)| TargetSpec {
                range_m: r,
                velocity_mps: v,
                alpha: Complex64::new(a, b),
            })
        })
        .collect()
}

fn parse_algorithm(value: &str) -> std::result::Result<ProfileKind, String> {
    match value.to_ascii_lowercase().as_str() {
        "prs_only" => Ok(ProfileKind::PrsOnly),
        "alg1" => Ok(ProfileKind::Alg1),
        "alg2" => Ok(ProfileKind::Alg2),
        _ => Err(format!("unknown algorithm `{value}` (prs_only, alg1, alg2)")),
    }
}

fn parse_time_base(value: &str) -> std::result::Result<DopplerTimeBase, String> {
    match value.to_ascii_lowercase().as_str() {
        "t0" => Ok(DopplerTimeBase::T0),
        "ts" => Ok(DopplerTimeBase::Ts),
        _ => Err(format!("unknown time base `{value}` (t0, ts)")),
    }
}

fn parse_estimation(value: &str) -> std::result::Result<EstimationMethod, String> {
    match value.to_ascii_lowercase().as_str() {
        "ls_interp" => Ok(EstimationMethod::LsInterp),
        "perfect" => Ok(EstimationMethod::Perfect),
        _ => Err(format!("unknown channel estimation `{value}` (ls_interp, perfect)")),
    }
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| IsacError::config("path", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let mut gamma_s = None;
        let mut gamma_c = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| IsacError::Parse {
                line: line_no,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(parse_err(format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(parse_err(format!("duplicate key `{key}`")));
            }
            let with_key = |e: String| parse_err(format!("{key}: {e}"));
            match key {
                "ofdm.delta_f_hz" => cfg.delta_f_hz = parse_f64(value).map_err(with_key)?,
                "ofdm.f_c_hz" => cfg.f_c_hz = parse_f64(value).map_err(with_key)?,
                "ofdm.t_cp_s" => cfg.t_cp_s = Some(parse_f64(value).map_err(with_key)?),
                "grid.prb_count" => cfg.prb_count = parse_num(value).map_err(with_key)?,
                "grid.slots" => cfg.slots = parse_num(value).map_err(with_key)?,
                "grid.prs.comb_size" => cfg.prs_comb_size = parse_num(value).map_err(with_key)?,
                "grid.prs.start_symbol" => cfg.prs_start_symbol = parse_num(value).map_err(with_key)?,
                "grid.prs.num_symbols" => cfg.prs_num_symbols = parse_num(value).map_err(with_key)?,
                "grid.prs.comb_offset" => cfg.prs_comb_offset = parse_num(value).map_err(with_key)?,
                "grid.prs.id" => cfg.prs_id = parse_num(value).map_err(with_key)?,
                "grid.dmrs.symbol_index" => cfg.dmrs_symbol_index = parse_num(value).map_err(with_key)?,
                "grid.dmrs.id" => cfg.dmrs_id = parse_num(value).map_err(with_key)?,
                "grid.pdsch.symbols" => cfg.pdsch_symbols = parse_index_set(value).map_err(with_key)?,
                "grid.pdsch.payload_seed" => cfg.payload_seed = parse_num(value).map_err(with_key)?,
                "channel.targets" => cfg.targets = parse_targets(value).map_err(with_key)?,
                "channel.snr_db" => cfg.snr_db = parse_f64(value).map_err(with_key)?,
                "channel.noise_seed" => cfg.noise_seed = parse_num(value).map_err(with_key)?,
                "split.gamma_s" => gamma_s = Some(parse_f64(value).map_err(with_key)?),
                "split.gamma_c" => gamma_c = Some(parse_f64(value).map_err(with_key)?),
                "seeds.master_seed" => cfg.master_seed = parse_num(value).map_err(with_key)?,
                "seeds.trial_count" => cfg.trial_count = parse_num(value).map_err(with_key)?,
                "estimator.algorithm" => cfg.algorithm = parse_algorithm(value).map_err(with_key)?,
                "estimator.doppler_time_base" => {
                    cfg.doppler_time_base = parse_time_base(value).map_err(with_key)?
                }
                "estimator.min_separation_bins" => {
                    cfg.min_separation_bins = parse_num(value).map_err(with_key)?
                }
                "sweep.sqrt_gamma_c" => cfg.sweep_sqrt_gamma_c = parse_list(value).map_err(with_key)?,
                "sweep.comb_sizes" => cfg.sweep_comb_sizes = parse_list(value).map_err(with_key)?,
                "sweep.channel_estimation" => {
                    cfg.channel_estimation = parse_estimation(value).map_err(with_key)?
                }
                _ => unreachable!("key list and match arms diverged"),
            }
        }
        match (gamma_s, gamma_c) {
            (Some(s), Some(c)) => (cfg.gamma_s, cfg.gamma_c) = (s, c),
            (Some(s), None) => (cfg.gamma_s, cfg.gamma_c) = (s, 1.0 - s),
            (None, Some(c)) => (cfg.gamma_s, cfg.gamma_c) = (1.0 - c, c),
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its effective value, in [`KEYS`] order.
    pub fn serialize(&self) -> String {
        let list = |v: &[String]| v.join(",");
        let targets: Vec<String> = self
            .targets
            .iter()
            .map(|t| format!("{}:{}:{}:{}", t.range_m, t.velocity_mps, t.alpha.re, t.alpha.im))
            .collect();
        let sqrt_gc: Vec<String> = self.sweep_sqrt_gamma_c.iter().map(f64::to_string).collect();
        let combs: Vec<String> = self.sweep_comb_sizes.iter().map(usize::to_string).collect();
        let values = [
            self.delta_f_hz.to_string(),
            self.f_c_hz.to_string(),
            self.t_cp().to_string(),
            self.prb_count.to_string(),
            self.slots.to_string(),
            self.prs_comb_size.to_string(),
            self.prs_start_symbol.to_string(),
            self.prs_num_symbols.to_string(),
            self.prs_comb_offset.to_string(),
            self.prs_id.to_string(),
            self.dmrs_symbol_index.to_string(),
            self.dmrs_id.to_string(),
            format_index_set(&self.pdsch_symbols),
            self.payload_seed.to_string(),
            list(&targets),
            if self.snr_db.is_infinite() { "inf".into() } else { self.snr_db.to_string() },
            self.noise_seed.to_string(),
            self.gamma_s.to_string(),
            self.gamma_c.to_string(),
            self.master_seed.to_string(),
            self.trial_count.to_string(),
            self.algorithm.name().to_string(),
            self.doppler_time_base.name().to_string(),
            self.min_separation_bins.to_string(),
            list(&sqrt_gc),
            list(&combs),
            self.channel_estimation.name().to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn t_cp(&self) -> f64 {
        self.t_cp_s.unwrap_or(NORMAL_CP_FRACTION / self.delta_f_hz)
    }

    pub fn params(&self) -> Result<OfdmParams> {
        OfdmParams::with_cp(self.delta_f_hz, self.f_c_hz, self.t_cp())
    }

    pub fn split(&self) -> Result<PowerSplit> {
        PowerSplit::new(self.gamma_s, self.gamma_c)
    }

    pub fn layout(&self) -> Result<GridLayout> {
        self.layout_with_comb(self.prs_comb_size)
    }

    pub fn layout_with_comb(&self, comb_size: usize) -> Result<GridLayout> {
        let layout = GridLayout {
            dims: GridDims::new(self.prb_count, self.slots)?,
            prs: PrsConfig::new(
                comb_size,
                self.prs_start_symbol,
                self.prs_num_symbols,
                self.prs_comb_offset,
                self.prs_id,
            )?,
            dmrs: DmrsConfig::new(self.dmrs_symbol_index, self.dmrs_id)?,
            pdsch: PdschConfig::new(self.pdsch_symbols.iter().copied())?,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn targets(&self) -> Result<Vec<Target>> {
        self.targets
            .iter()
            .map(|t| Target::new(t.range_m, t.velocity_mps, t.alpha))
            .collect()
    }

    pub fn channel(&self) -> Result<ChannelConfig> {
        Ok(ChannelConfig {
            targets: self.targets()?,
            snr_db: self.snr_db,
            noise_seed: self.noise_seed,
        })
    }

    /// Re-checks every component invariant plus the cross-field rules.
    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        self.split()?;
        self.layout()?;
        for &k in &self.sweep_comb_sizes {
            self.layout_with_comb(k)
                .map_err(|e| IsacError::config("sweep.comb_sizes", e.to_string()))?;
        }
        for &a in &self.sweep_sqrt_gamma_c {
            if !(a > 0.0 && a < 1.0) {
                return Err(IsacError::config("sweep.sqrt_gamma_c", format!("{a} outside (0, 1)")));
            }
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(IsacError::config("channel.snr_db", "must be finite or inf"));
        }
        if self.targets.is_empty() {
            return Err(IsacError::config("channel.targets", "at least one target"));
        }
        if self.trial_count == 0 {
            return Err(IsacError::config("seeds.trial_count", "at least one trial"));
        }
        let targets = self.targets()?;
        let r_max = max_range(&params);
        let v_max = crate::ofdm_channel::C0
            / (2.0 * self.doppler_time_base.duration(&params) * params.f_c());
        for t in &targets {
            if t.bistatic_range >= r_max {
                return Err(IsacError::config(
                    "channel.targets",
                    format!("range {} m beyond maximum {r_max:.1} m", t.bistatic_range),
                ));
            }
            if t.velocity.abs() >= v_max {
                return Err(IsacError::config(
                    "channel.targets",
                    format!("velocity {} m/s beyond maximum {v_max:.1} m/s", t.velocity),
                ));
            }
        }
        Ok(())
    }
}
