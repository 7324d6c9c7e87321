//! Per-cell seeds that depend only on the master seed and the cell index.

/// One round of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds for the matrix and the sketches of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub sample: u64,
    pub sketch: u64,
}

pub fn cell_seeds(master: u64, cell: u64) -> CellSeeds {
    let sample = splitmix64(master ^ splitmix64(cell));
    CellSeeds {
        sample,
        sketch: splitmix64(sample),
    }
}
