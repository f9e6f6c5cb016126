use serde::{Deserialize, Serialize};

use super::ModelError;

pub type Station = usize;

/// Stations joined by deterministic integer travel times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NetworkData", into = "NetworkData")]
pub struct Network {
    travel_time: Vec<Vec<u32>>,
    /// Longest remaining-time counter for a vehicle bound to each station.
    t_max: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct NetworkData {
    travel_time: Vec<Vec<u32>>,
}

impl TryFrom<NetworkData> for Network {
    type Error = ModelError;

    fn try_from(data: NetworkData) -> Result<Self, ModelError> {
        Network::new(data.travel_time)
    }
}

impl From<Network> for NetworkData {
    fn from(net: Network) -> Self {
        NetworkData {
            travel_time: net.travel_time,
        }
    }
}

impl Network {
    /// The diagonal is ignored and stored as zero.
    pub fn new(mut travel_time: Vec<Vec<u32>>) -> Result<Self, ModelError> {
        let n = travel_time.len();
        if n == 0 {
            return Err(ModelError::InvalidNetwork("at least one station is required".into()));
        }
        for (i, row) in travel_time.iter_mut().enumerate() {
            if row.len() != n {
                return Err(ModelError::InvalidNetwork(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            row[i] = 0;
            if let Some(j) = (0..n).find(|&j| j != i && row[j] == 0) {
                return Err(ModelError::InvalidNetwork(format!("travel time {i}->{j} must be at least 1")));
            }
        }
        let t_max = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| travel_time[j][i] - 1)
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        Ok(Network { travel_time, t_max })
    }

    /// Every off-diagonal entry equal to `t`.
    pub fn uniform(n: usize, t: u32) -> Result<Self, ModelError> {
        Network::new(vec![vec![t; n]; n])
    }

    pub fn n_stations(&self) -> usize {
        self.travel_time.len()
    }

    pub fn travel_time(&self, from: Station, to: Station) -> u32 {
        self.travel_time[from][to]
    }

    pub fn matrix(&self) -> &[Vec<u32>] {
        &self.travel_time
    }

    /// `max_j t_ji - 1`; zero for a single-station network.
    pub fn t_max(&self, station: Station) -> u32 {
        self.t_max[station]
    }

    pub fn max_travel_time(&self) -> u32 {
        self.travel_time.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Station, Station)> + '_ {
        let n = self.n_stations();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }
}
