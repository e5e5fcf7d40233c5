//! Radio numerology: subcarrier/Fourier scaling, the integer tick time base,
//! packet formats and the MCS -> transport block size table.
//!
//! All timing is expressed in ticks of 1/576000 s so that symbols, slots,
//! sub-slots and frames are exact integers and day-long runs accumulate no
//! floating-point drift.

use thiserror::Error;

/// Simulation time in ticks of `1/TICKS_PER_SECOND` seconds.
pub type Ticks = u64;

pub const TICKS_PER_SECOND: u64 = 576_000;
pub const TICKS_PER_SLOT: u64 = 240;
pub const TICKS_PER_SYMBOL: u64 = 24;
pub const SYMBOLS_PER_SLOT: u64 = 10;
pub const SLOTS_PER_FRAME: u64 = 24;
pub const TICKS_PER_FRAME: u64 = TICKS_PER_SLOT * SLOTS_PER_FRAME;

/// Base subcarrier spacing in Hz (scaled by mu).
pub const BASE_SCS_HZ: u32 = 27_000;
/// Base occupied bandwidth in Hz for mu = beta = 1 (64-point FFT).
pub const BASE_BANDWIDTH_HZ: u32 = 1_728_000;
/// FFT size at beta = 1.
pub const BASE_FFT: u32 = 64;

pub const VALID_MU: [u8; 4] = [1, 2, 4, 8];
pub const VALID_BETA: [u8; 6] = [1, 2, 4, 8, 12, 16];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumerologyError {
    #[error("subcarrier scaling mu={0} not in {{1,2,4,8}}")]
    InvalidMu(u8),
    #[error("fourier scaling beta={0} not in {{1,2,4,8,12,16}}")]
    InvalidBeta(u8),
    #[error("sub-slots per slot {0} must divide {TICKS_PER_SLOT} ticks")]
    InvalidSubslots(u64),
    #[error("unknown MCS `{0}`")]
    UnknownMcs(String),
    #[error("airtime of zero slots and zero sub-slots")]
    EmptyAirtime,
}

/// Subcarrier spacing in Hz for a subcarrier scaling factor.
pub fn subcarrier_spacing_hz(mu: u8) -> Result<u32, NumerologyError> {
    if !VALID_MU.contains(&mu) {
        return Err(NumerologyError::InvalidMu(mu));
    }
    Ok(BASE_SCS_HZ * mu as u32)
}

/// Occupied channel bandwidth in Hz for a (mu, beta) pair.
pub fn channel_bandwidth_hz(mu: u8, beta: u8) -> Result<u32, NumerologyError> {
    if !VALID_MU.contains(&mu) {
        return Err(NumerologyError::InvalidMu(mu));
    }
    if !VALID_BETA.contains(&beta) {
        return Err(NumerologyError::InvalidBeta(beta));
    }
    Ok(BASE_BANDWIDTH_HZ * mu as u32 * beta as u32)
}

// ======================================================================
// Time base
// ======================================================================

/// Frame/slot/sub-slot geometry on the integer tick grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeBase {
    pub subslots_per_slot: u64,
}

impl Default for TimeBase {
    fn default() -> Self {
        TimeBase { subslots_per_slot: 2 }
    }
}

impl TimeBase {
    pub fn new(subslots_per_slot: u64) -> Result<Self, NumerologyError> {
        if subslots_per_slot == 0 || TICKS_PER_SLOT % subslots_per_slot != 0 {
            return Err(NumerologyError::InvalidSubslots(subslots_per_slot));
        }
        Ok(TimeBase { subslots_per_slot })
    }

    pub fn ticks_per_subslot(&self) -> u64 {
        TICKS_PER_SLOT / self.subslots_per_slot
    }

    /// Airtime of a transmission spanning whole slots plus sub-slots.
    pub fn airtime(&self, n_slots: u64, n_subslots: u64) -> Result<Ticks, NumerologyError> {
        if n_slots == 0 && n_subslots == 0 {
            return Err(NumerologyError::EmptyAirtime);
        }
        Ok(n_slots * TICKS_PER_SLOT + n_subslots * self.ticks_per_subslot())
    }

    /// First sub-slot boundary at or after `t`.
    pub fn next_subslot_boundary(&self, t: Ticks) -> Ticks {
        let step = self.ticks_per_subslot();
        t.div_ceil(step) * step
    }

    /// First slot boundary at or after `t`.
    pub fn next_slot_boundary(&self, t: Ticks) -> Ticks {
        t.div_ceil(TICKS_PER_SLOT) * TICKS_PER_SLOT
    }
}

pub fn ticks_to_secs(t: Ticks) -> f64 {
    t as f64 / TICKS_PER_SECOND as f64
}

pub fn ticks_to_ms(t: Ticks) -> f64 {
    t as f64 * 1000.0 / TICKS_PER_SECOND as f64
}

pub fn secs_to_ticks(s: f64) -> Ticks {
    (s * TICKS_PER_SECOND as f64).round() as Ticks
}

// ======================================================================
// Packet formats
// ======================================================================

/// Physical control channel variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PccType {
    Type1,
    Type2,
}

/// Control-channel payload in information bits.
pub fn pcc_info_bits(t: PccType) -> u32 {
    match t {
        PccType::Type1 => 40,
        PccType::Type2 => 80,
    }
}

/// Subcarriers occupied by the physical control channel.
pub const PCC_SUBCARRIERS: u32 = 98;

/// On-air packet layout: control part plus data part airtime.
#[derive(Debug, Clone, Copy)]
pub struct PacketFormat {
    pub pcc: PccType,
    pub data_slots: u64,
    pub data_subslots: u64,
}

// ======================================================================
// MCS table
// ======================================================================

/// Modulation and coding scheme entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Mcs {
    pub name: &'static str,
    /// Bits per modulation symbol (2 = QPSK).
    pub modulation_order: u32,
    pub code_rate: f64,
    /// Transport block bits carried by one full slot.
    pub tb_bits_per_slot: u32,
}

/// Default table: single QPSK 3/4 entry carrying 456 bits per slot.
pub const MCS_QPSK_3_4: Mcs = Mcs {
    name: "qpsk-3/4",
    modulation_order: 2,
    code_rate: 0.75,
    tb_bits_per_slot: 456,
};

pub fn lookup_mcs(name: &str) -> Result<&'static Mcs, NumerologyError> {
    match name {
        "qpsk-3/4" => Ok(&MCS_QPSK_3_4),
        other => Err(NumerologyError::UnknownMcs(other.to_string())),
    }
}

/// Transport block size in bits for a whole-slot allocation.
pub fn transport_block_bits(mcs: &Mcs, n_slots: u64) -> u64 {
    mcs.tb_bits_per_slot as u64 * n_slots
}

/// Transport block size for mixed slot/sub-slot allocations.
///
/// Sub-slot capacity is the per-slot capacity split evenly, which is exact
/// for the default table (456 / 2 = 228 bits per half-slot).
pub fn transport_block_bits_mixed(mcs: &Mcs, tb: &TimeBase, n_slots: u64, n_subslots: u64) -> u64 {
    let per_slot = mcs.tb_bits_per_slot as u64;
    per_slot * n_slots + per_slot * n_subslots / tb.subslots_per_slot
}
