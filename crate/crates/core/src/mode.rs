//! Mode labels of the entangling apparatus.
//!
//! Photon modes 12–15 belong to the single-photon interferometer and the
//! eraser outputs; field modes 21–25 and 31–35 carry the two coherent beams.
//! The kind of a mode is fixed by its label.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    /// 0/1 photon occupancy.
    Photon,
    /// Coherent field amplitude.
    Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeId(u8);

impl ModeId {
    pub const M12: ModeId = ModeId(12);
    pub const M13: ModeId = ModeId(13);
    pub const M14: ModeId = ModeId(14);
    pub const M15: ModeId = ModeId(15);
    pub const M21: ModeId = ModeId(21);
    pub const M22: ModeId = ModeId(22);
    pub const M23: ModeId = ModeId(23);
    pub const M24: ModeId = ModeId(24);
    pub const M25: ModeId = ModeId(25);
    pub const M31: ModeId = ModeId(31);
    pub const M32: ModeId = ModeId(32);
    pub const M33: ModeId = ModeId(33);
    pub const M34: ModeId = ModeId(34);
    pub const M35: ModeId = ModeId(35);

    /// The four output modes, ordered as side 1 (24, 25) then side 2 (34, 35).
    pub const OUTPUTS: [ModeId; 4] = [Self::M24, Self::M25, Self::M34, Self::M35];

    pub fn new(label: u8) -> Result<Self> {
        match label {
            12..=15 | 21..=25 | 31..=35 => Ok(ModeId(label)),
            _ => Err(Error::Structural(format!("unknown mode label {label}"))),
        }
    }

    pub fn label(self) -> u8 {
        self.0
    }

    pub fn kind(self) -> ModeKind {
        if self.0 < 20 {
            ModeKind::Photon
        } else {
            ModeKind::Field
        }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
