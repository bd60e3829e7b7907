//! Length-31 Gold sequence generation and QPSK mapping of reference signals.
//!
//! The generator is the usual pair of 31-bit Fibonacci registers: the first
//! starts from the unit state with feedback x(n+31) = x(n+3) + x(n), the
//! second is loaded from `c_init` with feedback
//! x(n+31) = x(n+3) + x(n+2) + x(n+1) + x(n). Output bit i is the XOR of both
//! registers after discarding `advance_offset` warm-up bits.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{IsacError, Result};

pub const DEFAULT_ADVANCE_OFFSET: usize = 1600;

const REG_MASK: u32 = (1 << 31) - 1;

/// Seed separating DMRS identities from PRS identities in `c_init`.
pub const DMRS_KIND_OFFSET: u64 = 1 << 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoldSeed {
    c_init: u32,
    advance_offset: usize,
}

impl GoldSeed {
    pub fn new(c_init: u32) -> Result<Self> {
        if c_init > REG_MASK {
            return Err(IsacError::config("c_init", format!("{c_init} exceeds 31 bits")));
        }
        Ok(Self {
            c_init,
            advance_offset: DEFAULT_ADVANCE_OFFSET,
        })
    }

    pub fn with_advance_offset(mut self, advance_offset: usize) -> Self {
        self.advance_offset = advance_offset;
        self
    }

    pub fn c_init(&self) -> u32 {
        self.c_init
    }

    pub fn advance_offset(&self) -> usize {
        self.advance_offset
    }
}

/// Bit i of the register word is x(n+i); the oldest bit sits at position 0.
struct Lfsr31 {
    state: u32,
    taps: u32,
}

impl Lfsr31 {
    #[inline]
    fn step(&mut self) -> u8 {
        let out = (self.state & 1) as u8;
        let fb = (self.state & self.taps).count_ones() & 1;
        self.state = (self.state >> 1) | (fb << 30);
        out
    }
}

/// Returns c(0), ..., c(length-1).
pub fn gold_sequence(seed: &GoldSeed, length: usize) -> Vec<u8> {
    let mut x1 = Lfsr31 {
        state: 1,
        taps: 0b1001,
    };
    let mut x2 = Lfsr31 {
        state: seed.c_init & REG_MASK,
        taps: 0b1111,
    };
    for _ in 0..seed.advance_offset {
        x1.step();
        x2.step();
    }
    (0..length).map(|_| x1.step() ^ x2.step()).collect()
}

/// Maps bit pairs to (1 - 2 c(2m))/sqrt2 + j (1 - 2 c(2m+1))/sqrt2.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(IsacError::OddBitCount(bits.len()));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|pair| qpsk_symbol(pair[0], pair[1]))
        .collect())
}

#[inline]
pub fn qpsk_symbol(b0: u8, b1: u8) -> Complex64 {
    let level = |b: u8| if b & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    Complex64::new(level(b0), level(b1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefKind {
    Prs,
    Dmrs,
}

impl RefKind {
    fn offset(self) -> u64 {
        match self {
            RefKind::Prs => 0,
            RefKind::Dmrs => DMRS_KIND_OFFSET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSequence {
    pub values: Vec<Complex64>,
    pub origin: RefKind,
}

pub const MAX_SEQUENCE_ID: u32 = 4095;

/// Simplified seeding: c_init = (2^10 (14 slot + symbol + 1)(2 id + 1) + id + kind_offset) mod 2^31.
pub fn reference_c_init(kind: RefKind, slot: usize, symbol: usize, id: u32) -> u32 {
    const MOD: u128 = 1 << 31;
    let time = 14 * slot as u128 + symbol as u128 + 1;
    let id = id as u128;
    let v = (1024 * time % MOD) * (2 * id + 1) + id + kind.offset() as u128;
    (v % MOD) as u32
}

pub fn gen_reference_sequence(
    kind: RefKind,
    slot: usize,
    symbol: usize,
    id: u32,
    length: usize,
) -> Result<SymbolSequence> {
    if id > MAX_SEQUENCE_ID {
        return Err(IsacError::config("id", format!("{id} must be below 4096")));
    }
    let seed = GoldSeed::new(reference_c_init(kind, slot, symbol, id))?;
    let bits = gold_sequence(&seed, 2 * length);
    Ok(SymbolSequence {
        values: qpsk_map(&bits)?,
        origin: kind,
    })
}
