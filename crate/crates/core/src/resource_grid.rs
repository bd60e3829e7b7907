//! OFDM resource grid: PRS comb mapping, type-2 DMRS footprint, QPSK payload
//! and the power-weighted superposition of communication and sensing layers.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IsacError, Result};
use crate::sequences::{gen_reference_sequence, qpsk_symbol, RefKind};
use crate::CMatrix;

pub const SYMBOLS_PER_SLOT: usize = 14;
pub const SUBCARRIERS_PER_PRB: usize = 12;
pub const MIN_PRBS: usize = 24;
pub const MAX_PRBS: usize = 272;

pub const COMB_SIZES: [usize; 4] = [2, 4, 6, 12];
pub const PRS_SYMBOL_COUNTS: [usize; 5] = [1, 2, 4, 6, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    subcarriers: usize,
    symbols: usize,
    slots: usize,
}

impl GridDims {
    pub fn new(prb_count: usize, slots: usize) -> Result<Self> {
        if !(MIN_PRBS..=MAX_PRBS).contains(&prb_count) {
            return Err(IsacError::config(
                "grid.prb_count",
                format!("{prb_count} outside [{MIN_PRBS}, {MAX_PRBS}]"),
            ));
        }
        if slots == 0 {
            return Err(IsacError::config("grid.slots", "at least one slot"));
        }
        Ok(Self {
            subcarriers: prb_count * SUBCARRIERS_PER_PRB,
            symbols: slots * SYMBOLS_PER_SLOT,
            slots,
        })
    }

    /// M
    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// N
    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// S
    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn prb_count(&self) -> usize {
        self.subcarriers / SUBCARRIERS_PER_PRB
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.subcarriers, self.symbols)
    }
}

/// Per-symbol comb offsets applied on top of `comb_offset`.
pub fn standard_stagger(comb_size: usize) -> &'static [usize] {
    match comb_size {
        2 => &[0, 1],
        4 => &[0, 2, 1, 3],
        6 => &[0, 3, 1, 4, 2, 5],
        12 => &[0, 6, 3, 9, 1, 7, 4, 10, 2, 8, 5, 11],
        _ => &[0],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrsConfig {
    comb_size: usize,
    start_symbol: usize,
    num_symbols: usize,
    comb_offset: usize,
    id: u32,
    stagger_override: Option<Vec<usize>>,
}

impl PrsConfig {
    pub fn new(
        comb_size: usize,
        start_symbol: usize,
        num_symbols: usize,
        comb_offset: usize,
        id: u32,
    ) -> Result<Self> {
        if !COMB_SIZES.contains(&comb_size) {
            return Err(IsacError::config(
                "grid.prs.comb_size",
                format!("{comb_size} not in {{2,4,6,12}}"),
            ));
        }
        if !PRS_SYMBOL_COUNTS.contains(&num_symbols) {
            return Err(IsacError::config(
                "grid.prs.num_symbols",
                format!("{num_symbols} not in {{1,2,4,6,12}}"),
            ));
        }
        if start_symbol + num_symbols > SYMBOLS_PER_SLOT {
            return Err(IsacError::config(
                "grid.prs.start_symbol",
                format!("PRS span {start_symbol}+{num_symbols} exceeds the slot"),
            ));
        }
        if comb_offset >= comb_size {
            return Err(IsacError::config(
                "grid.prs.comb_offset",
                format!("{comb_offset} must be below comb size {comb_size}"),
            ));
        }
        if id > crate::sequences::MAX_SEQUENCE_ID {
            return Err(IsacError::config("grid.prs.id", format!("{id} must be below 4096")));
        }
        Ok(Self {
            comb_size,
            start_symbol,
            num_symbols,
            comb_offset,
            id,
            stagger_override: None,
        })
    }

    /// Test hook: replaces the standard stagger table.
    pub fn with_stagger_override(mut self, stagger: Vec<usize>) -> Self {
        self.stagger_override = Some(stagger);
        self
    }

    pub fn comb_size(&self) -> usize {
        self.comb_size
    }

    pub fn start_symbol(&self) -> usize {
        self.start_symbol
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn comb_offset(&self) -> usize {
        self.comb_offset
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn stagger(&self) -> &[usize] {
        self.stagger_override
            .as_deref()
            .unwrap_or_else(|| standard_stagger(self.comb_size))
    }

    pub fn contains_symbol(&self, symbol_in_slot: usize) -> bool {
        (self.start_symbol..self.start_symbol + self.num_symbols).contains(&symbol_in_slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmrsConfig {
    symbol_index: usize,
    id: u32,
}

impl DmrsConfig {
    pub fn new(symbol_index: usize, id: u32) -> Result<Self> {
        if symbol_index >= SYMBOLS_PER_SLOT {
            return Err(IsacError::config(
                "grid.dmrs.symbol_index",
                format!("{symbol_index} outside the slot"),
            ));
        }
        if id > crate::sequences::MAX_SEQUENCE_ID {
            return Err(IsacError::config("grid.dmrs.id", format!("{id} must be below 4096")));
        }
        Ok(Self { symbol_index, id })
    }

    pub fn symbol_index(&self) -> usize {
        self.symbol_index
    }

    pub fn id(&self) -> u32 {
        self.id
    }
}

/// QPSK-only PDSCH allocation inside each slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdschConfig {
    symbols: BTreeSet<usize>,
}

impl PdschConfig {
    pub fn new(symbols: impl IntoIterator<Item = usize>) -> Result<Self> {
        let symbols: BTreeSet<usize> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(IsacError::config("grid.pdsch.symbols", "empty allocation"));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s >= SYMBOLS_PER_SLOT) {
            return Err(IsacError::config(
                "grid.pdsch.symbols",
                format!("symbol {bad} outside the slot"),
            ));
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> impl Iterator<Item = usize> + '_ {
        self.symbols.iter().copied()
    }

    pub fn contains(&self, symbol_in_slot: usize) -> bool {
        self.symbols.contains(&symbol_in_slot)
    }
}

/// gamma_s + gamma_c = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    gamma_s: f64,
    gamma_c: f64,
}

impl PowerSplit {
    pub fn new(gamma_s: f64, gamma_c: f64) -> Result<Self> {
        for (name, v) in [("split.gamma_s", gamma_s), ("split.gamma_c", gamma_c)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(IsacError::config(name, format!("{v} outside [0, 1]")));
            }
        }
        if (gamma_s + gamma_c - 1.0).abs() > 1e-12 {
            return Err(IsacError::config(
                "split",
                format!("gamma_s + gamma_c = {} != 1", gamma_s + gamma_c),
            ));
        }
        Ok(Self { gamma_s, gamma_c })
    }

    pub fn from_sqrt_gamma_s(amplitude: f64) -> Result<Self> {
        let gamma_s = amplitude * amplitude;
        Self::new(gamma_s, 1.0 - gamma_s)
    }

    pub fn from_sqrt_gamma_c(amplitude: f64) -> Result<Self> {
        let gamma_c = amplitude * amplitude;
        Self::new(1.0 - gamma_c, gamma_c)
    }

    pub fn gamma_s(&self) -> f64 {
        self.gamma_s
    }

    pub fn gamma_c(&self) -> f64 {
        self.gamma_c
    }

    pub fn sensing_amplitude(&self) -> f64 {
        self.gamma_s.sqrt()
    }

    pub fn comm_amplitude(&self) -> f64 {
        self.gamma_c.sqrt()
    }
}

/// Returns the subcarriers carrying PRS on `symbol_in_slot`.
pub fn prs_re_pattern(cfg: &PrsConfig, symbol_in_slot: usize, subcarriers: usize) -> Result<Vec<usize>> {
    if !cfg.contains_symbol(symbol_in_slot) {
        return Err(IsacError::config(
            "symbol_in_slot",
            format!(
                "symbol {symbol_in_slot} outside PRS span [{}, {})",
                cfg.start_symbol,
                cfg.start_symbol + cfg.num_symbols
            ),
        ));
    }
    let k = cfg.comb_size;
    let stagger = cfg.stagger();
    let rel = (symbol_in_slot - cfg.start_symbol) % k;
    let phase = (stagger[rel % stagger.len()] + cfg.comb_offset) % k;
    Ok((phase..subcarriers).step_by(k).collect())
}

/// Type-2 DMRS, CDM group 0: subcarriers {0, 1, 6, 7} of every PRB.
pub fn dmrs_re_pattern(subcarriers: usize) -> Vec<usize> {
    (0..subcarriers / SUBCARRIERS_PER_PRB)
        .flat_map(|p| [0, 1, 6, 7].map(|q| SUBCARRIERS_PER_PRB * p + q))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapReport {
    pub symbol_in_slot: usize,
}

/// PRS and DMRS may not share an OFDM symbol.
pub fn validate_no_overlap(prs: &PrsConfig, dmrs: &DmrsConfig) -> std::result::Result<(), OverlapReport> {
    if prs.contains_symbol(dmrs.symbol_index) {
        Err(OverlapReport {
            symbol_in_slot: dmrs.symbol_index,
        })
    } else {
        Ok(())
    }
}

/// Everything that fixes where each layer lives in the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub dims: GridDims,
    pub prs: PrsConfig,
    pub dmrs: DmrsConfig,
    pub pdsch: PdschConfig,
}

impl GridLayout {
    pub fn validate(&self) -> Result<()> {
        if let Err(report) = validate_no_overlap(&self.prs, &self.dmrs) {
            let m = prs_re_pattern(&self.prs, report.symbol_in_slot, self.dims.subcarriers)?
                .into_iter()
                .find(|m| m % SUBCARRIERS_PER_PRB % 6 < 2)
                .unwrap_or(self.prs.comb_offset);
            return Err(IsacError::Overlap {
                m,
                n: report.symbol_in_slot,
            });
        }
        if !self.pdsch.contains(self.dmrs.symbol_index) {
            return Err(IsacError::config(
                "grid.dmrs.symbol_index",
                format!(
                    "DMRS symbol {} is not inside the PDSCH allocation",
                    self.dmrs.symbol_index
                ),
            ));
        }
        Ok(())
    }

    /// Absolute symbol indices (over all slots) that carry PRS.
    pub fn prs_columns(&self) -> Vec<usize> {
        (0..self.dims.symbols)
            .filter(|n| self.prs.contains_symbol(n % SYMBOLS_PER_SLOT))
            .collect()
    }

    /// Absolute symbol indices that carry DMRS, one per slot.
    pub fn dmrs_columns(&self) -> Vec<usize> {
        (0..self.dims.slots)
            .map(|s| s * SYMBOLS_PER_SLOT + self.dmrs.symbol_index)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Prs,
    Dmrs,
    Data,
    Combined,
}

impl Layer {
    pub fn name(self) -> &'static str {
        match self {
            Layer::Prs => "prs",
            Layer::Dmrs => "dmrs",
            Layer::Data => "data",
            Layer::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResourceGrid {
    pub layout: GridLayout,
    pub split: PowerSplit,
    pub prs_layer: CMatrix,
    pub dmrs_layer: CMatrix,
    pub data_layer: CMatrix,
    pub combined: CMatrix,
    /// Payload bits in mapping order, two per entry of `data_res`.
    pub tx_bits: Vec<u8>,
    /// Data REs (m, n), frequency-first then time.
    pub data_res: Vec<(usize, usize)>,
}

impl ResourceGrid {
    pub fn dims(&self) -> GridDims {
        self.layout.dims
    }

    pub fn layer(&self, layer: Layer) -> &CMatrix {
        match layer {
            Layer::Prs => &self.prs_layer,
            Layer::Dmrs => &self.dmrs_layer,
            Layer::Data => &self.data_layer,
            Layer::Combined => &self.combined,
        }
    }

    /// REs carrying any layer.
    pub fn allocated_mask(&self) -> Array2<bool> {
        let mut mask = Array2::from_elem(self.combined.dim(), false);
        ndarray::Zip::from(&mut mask)
            .and(&self.prs_layer)
            .and(&self.dmrs_layer)
            .and(&self.data_layer)
            .for_each(|flag, p, d, x| {
                *flag = *p != Complex64::ZERO || *d != Complex64::ZERO || *x != Complex64::ZERO;
            });
        mask
    }

    /// Debug dump: `m,n,layer,re,im` for every nonzero RE of every layer.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("m,n,layer,re,im\n");
        for layer in [Layer::Prs, Layer::Dmrs, Layer::Data, Layer::Combined] {
            let mat = self.layer(layer);
            for n in 0..mat.ncols() {
                for m in 0..mat.nrows() {
                    let v = mat[[m, n]];
                    if v != Complex64::ZERO {
                        let _ = writeln!(out, "{m},{n},{},{},{}", layer.name(), v.re, v.im);
                    }
                }
            }
        }
        out
    }
}

pub fn build_grid(layout: &GridLayout, split: PowerSplit, rng_seed: u64) -> Result<ResourceGrid> {
    layout.validate()?;
    let dims = layout.dims;
    let (m_count, n_count) = dims.shape();
    let mut prs_layer = CMatrix::zeros((m_count, n_count));
    let mut dmrs_layer = CMatrix::zeros((m_count, n_count));
    let mut data_layer = CMatrix::zeros((m_count, n_count));

    let dmrs_res = dmrs_re_pattern(m_count);
    let mut is_dmrs_sc = vec![false; m_count];
    for &m in &dmrs_res {
        is_dmrs_sc[m] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut tx_bits = Vec::new();
    let mut data_res = Vec::new();

    for n in 0..n_count {
        let slot = n / SYMBOLS_PER_SLOT;
        let sym = n % SYMBOLS_PER_SLOT;

        if layout.prs.contains_symbol(sym) {
            let res = prs_re_pattern(&layout.prs, sym, m_count)?;
            let seq = gen_reference_sequence(RefKind::Prs, slot, sym, layout.prs.id, res.len())?;
            for (&m, &v) in res.iter().zip(&seq.values) {
                prs_layer[[m, n]] = v;
            }
        }

        let is_dmrs_symbol = sym == layout.dmrs.symbol_index;
        if is_dmrs_symbol {
            let seq = gen_reference_sequence(RefKind::Dmrs, slot, sym, layout.dmrs.id, dmrs_res.len())?;
            for (&m, &v) in dmrs_res.iter().zip(&seq.values) {
                dmrs_layer[[m, n]] = v;
            }
        }

        if layout.pdsch.contains(sym) {
            for m in 0..m_count {
                if is_dmrs_symbol && is_dmrs_sc[m] {
                    continue;
                }
                let b0: u8 = rng.random_range(0..=1);
                let b1: u8 = rng.random_range(0..=1);
                data_layer[[m, n]] = qpsk_symbol(b0, b1);
                tx_bits.push(b0);
                tx_bits.push(b1);
                data_res.push((m, n));
            }
        }
    }

    let a_c = split.comm_amplitude();
    let a_s = split.sensing_amplitude();
    let mut combined = CMatrix::zeros((m_count, n_count));
    ndarray::Zip::from(&mut combined)
        .and(&data_layer)
        .and(&dmrs_layer)
        .and(&prs_layer)
        .for_each(|c, &d, &r, &p| *c = (d + r) * a_c + p * a_s);

    Ok(ResourceGrid {
        layout: layout.clone(),
        split,
        prs_layer,
        dmrs_layer,
        data_layer,
        combined,
        tx_bits,
        data_res,
    })
}
