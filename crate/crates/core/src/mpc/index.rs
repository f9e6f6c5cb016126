use std::collections::HashMap;
use std::fmt;

use amod_milp::VarId;

use crate::model::Station;

/// Identity of one formulation variable. `step` is the offset into the
/// horizon: controls live on `0..H`, states on `1..=H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    /// `v[k][i][j][tau]`, carry a customer.
    Pickup { vehicle: usize, from: Station, to: Station, step: u32 },
    /// `w[k][i][j][tau]`, drive empty.
    Rebalance { vehicle: usize, from: Station, to: Station, step: u32 },
    /// `u[k][i][tau]`, waiting at a station.
    Waiting { vehicle: usize, station: Station, step: u32 },
    /// `p[k][i][T][tau]`, `remaining` steps away from `dest`.
    Traveling { vehicle: usize, dest: Station, remaining: u32, step: u32 },
    /// `d[i][j][tau]`, customers waiting.
    Demand { from: Station, to: Station, step: u32 },
    /// `q[k][tau]`, state of charge.
    Charge { vehicle: usize, step: u32 },
    /// `s[i]`, deviation from a uniform fleet at the end of the horizon.
    Uniformity { station: Station },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::Pickup { vehicle, from, to, step } => write!(f, "v[{vehicle}][{from}][{to}][{step}]"),
            VarKey::Rebalance { vehicle, from, to, step } => write!(f, "w[{vehicle}][{from}][{to}][{step}]"),
            VarKey::Waiting { vehicle, station, step } => write!(f, "u[{vehicle}][{station}][{step}]"),
            VarKey::Traveling { vehicle, dest, remaining, step } => {
                write!(f, "p[{vehicle}][{dest}][{remaining}][{step}]")
            }
            VarKey::Demand { from, to, step } => write!(f, "d[{from}][{to}][{step}]"),
            VarKey::Charge { vehicle, step } => write!(f, "q[{vehicle}][{step}]"),
            VarKey::Uniformity { station } => write!(f, "s[{station}]"),
        }
    }
}

/// Bijection between [`VarKey`]s and the problem's variable ids.
#[derive(Debug, Clone, Default)]
pub struct VarIndex {
    keys: Vec<VarKey>,
    ids: HashMap<VarKey, VarId>,
}

impl VarIndex {
    pub(crate) fn insert(&mut self, key: VarKey, id: VarId) {
        debug_assert_eq!(id.index(), self.keys.len());
        self.keys.push(key);
        self.ids.insert(key, id);
    }

    pub fn get(&self, key: &VarKey) -> Option<VarId> {
        self.ids.get(key).copied()
    }

    pub fn key(&self, id: VarId) -> VarKey {
        self.keys[id.index()]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }
}
