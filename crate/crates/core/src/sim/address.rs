//! Scratchpad/accumulator address encoding.

/// The "no address" sentinel (`0xffffffff`).
pub const NO_ADDRESS: u32 = 0xffff_ffff;

const ACC_BIT: u32 = 1 << 31;
const ACCUMULATE_BIT: u32 = 1 << 30;
const FULL_WIDTH_BIT: u32 = 1 << 29;
const ROW_MASK: u32 = 0x1fff_ffff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Scratchpad,
    Accumulator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalAddress {
    pub raw: u32,
    pub space: Space,
    /// Write to the accumulator adds to the stored value.
    pub accumulate: bool,
    /// Read from the accumulator returns accumulator-width data.
    pub full_width_read: bool,
    pub row: usize,
}

impl LocalAddress {
    pub fn decode(raw: u32, access: Access) -> LocalAddress {
        let acc = raw & ACC_BIT != 0;
        LocalAddress {
            raw,
            space: if acc { Space::Accumulator } else { Space::Scratchpad },
            accumulate: acc && access == Access::Write && raw & ACCUMULATE_BIT != 0,
            full_width_read: acc && access == Access::Read && raw & FULL_WIDTH_BIT != 0,
            row: (raw & ROW_MASK) as usize,
        }
    }

    pub fn decode_read(raw: u32) -> LocalAddress {
        Self::decode(raw, Access::Read)
    }

    pub fn decode_write(raw: u32) -> LocalAddress {
        Self::decode(raw, Access::Write)
    }

    /// Inverse of [`decode`](Self::decode) for in-range rows.
    pub fn encode(space: Space, accumulate: bool, full_width_read: bool, row: usize) -> u32 {
        let mut raw = row as u32 & ROW_MASK;
        if space == Space::Accumulator {
            raw |= ACC_BIT;
            if accumulate {
                raw |= ACCUMULATE_BIT;
            }
            if full_width_read {
                raw |= FULL_WIDTH_BIT;
            }
        }
        raw
    }

    pub fn is_accumulator(&self) -> bool {
        self.space == Space::Accumulator
    }
}
