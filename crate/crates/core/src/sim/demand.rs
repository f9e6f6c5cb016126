use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::ArrivalBatch;

/// Rates in force from step `start` until the next piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePiece {
    pub start: u64,
    /// Expected arrivals per step, `rates[origin][dest]`.
    pub rates: Vec<Vec<f64>>,
}

/// Piecewise-constant Poisson arrival rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RatePiece>", into = "Vec<RatePiece>")]
pub struct RateSchedule {
    pieces: Vec<RatePiece>,
}

impl TryFrom<Vec<RatePiece>> for RateSchedule {
    type Error = SimError;

    fn try_from(pieces: Vec<RatePiece>) -> Result<Self, SimError> {
        RateSchedule::new(pieces)
    }
}

impl From<RateSchedule> for Vec<RatePiece> {
    fn from(s: RateSchedule) -> Self {
        s.pieces
    }
}

impl RateSchedule {
    pub fn new(pieces: Vec<RatePiece>) -> Result<Self, SimError> {
        let Some(first) = pieces.first() else {
            return Err(SimError::InvalidRates("schedule has no pieces".into()));
        };
        if first.start != 0 {
            return Err(SimError::InvalidRates("first piece must start at step 0".into()));
        }
        let n = first.rates.len();
        for (k, piece) in pieces.iter().enumerate() {
            if k > 0 && piece.start <= pieces[k - 1].start {
                return Err(SimError::InvalidRates(format!("piece {k} does not start after piece {}", k - 1)));
            }
            if piece.rates.len() != n || piece.rates.iter().any(|r| r.len() != n) {
                return Err(SimError::InvalidRates(format!("piece {k} is not {n}x{n}")));
            }
            for (i, row) in piece.rates.iter().enumerate() {
                for (j, &rate) in row.iter().enumerate() {
                    if !(rate.is_finite() && rate >= 0.0) {
                        return Err(SimError::InvalidRates(format!("piece {k} rate[{i}][{j}] = {rate}")));
                    }
                    if i == j && rate != 0.0 {
                        return Err(SimError::InvalidRates(format!("piece {k} has nonzero diagonal at {i}")));
                    }
                }
            }
        }
        Ok(RateSchedule { pieces })
    }

    pub fn constant(rates: Vec<Vec<f64>>) -> Result<Self, SimError> {
        RateSchedule::new(vec![RatePiece { start: 0, rates }])
    }

    pub fn zero(n: usize) -> Self {
        RateSchedule {
            pieces: vec![RatePiece {
                start: 0,
                rates: vec![vec![0.0; n]; n],
            }],
        }
    }

    pub fn n_stations(&self) -> usize {
        self.pieces[0].rates.len()
    }

    pub fn pieces(&self) -> &[RatePiece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.rates.iter().flatten().all(|&r| r == 0.0))
    }

    pub fn at(&self, t: u64) -> &[Vec<f64>] {
        let k = self.pieces.partition_point(|p| p.start <= t) - 1;
        &self.pieces[k].rates
    }

    /// Expected arrivals per pair over steps `start .. start + len`.
    pub fn expected_counts(&self, start: u64, len: u64) -> Vec<Vec<f64>> {
        let n = self.n_stations();
        let mut out = vec![vec![0.0; n]; n];
        for t in start..start + len {
            for (acc, rates) in out.iter_mut().zip(self.at(t)) {
                for (a, r) in acc.iter_mut().zip(rates) {
                    *a += r;
                }
            }
        }
        out
    }
}

/// Independent Poisson draws for every pair and step in
/// `start .. start + len`, consumed from `rng` in step, origin,
/// destination order.
pub fn generate_arrivals<R: Rng + ?Sized>(schedule: &RateSchedule, start: u64, len: u64, rng: &mut R) -> Vec<ArrivalBatch> {
    let n = schedule.n_stations();
    (start..start + len)
        .map(|t| {
            let mut batch = ArrivalBatch::zero(n, t);
            for (i, row) in schedule.at(t).iter().enumerate() {
                for (j, &rate) in row.iter().enumerate() {
                    if rate > 0.0 {
                        let draw: f64 = Poisson::new(rate).expect("validated rate").sample(rng);
                        batch.counts[i][j] = draw as u32;
                    }
                }
            }
            batch
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct TripRecord {
    pickup_step: u64,
    origin_station: usize,
    dest_station: usize,
}

/// Bins trip records `pickup_step,origin_station,dest_station` into
/// per-step rates over windows of `bin_width` steps.
pub fn ingest_trip_records<R: Read>(source: R, n_stations: usize, bin_width: u64) -> Result<RateSchedule, SimError> {
    if bin_width == 0 {
        return Err(SimError::InvalidRates("bin width must be at least 1".into()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| SimError::TripRecord { line: 1, message: e.to_string() })?
        .clone();
    let mut counts: Vec<Vec<Vec<u64>>> = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| SimError::TripRecord {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let rec: TripRecord = record
            .deserialize(Some(&headers))
            .map_err(|e| SimError::TripRecord { line, message: e.to_string() })?;
        for station in [rec.origin_station, rec.dest_station] {
            if station >= n_stations {
                return Err(SimError::TripRecord {
                    line,
                    message: format!("station {station} is outside 0..{n_stations}"),
                });
            }
        }
        if rec.origin_station == rec.dest_station {
            return Err(SimError::TripRecord {
                line,
                message: format!("trip starts and ends at station {}", rec.origin_station),
            });
        }
        let bin = (rec.pickup_step / bin_width) as usize;
        if counts.len() <= bin {
            counts.resize(bin + 1, vec![vec![0; n_stations]; n_stations]);
        }
        counts[bin][rec.origin_station][rec.dest_station] += 1;
    }
    if counts.is_empty() {
        return Ok(RateSchedule::zero(n_stations));
    }
    let pieces = counts
        .into_iter()
        .enumerate()
        .map(|(b, m)| RatePiece {
            start: b as u64 * bin_width,
            rates: m
                .into_iter()
                .map(|row| row.into_iter().map(|c| c as f64 / bin_width as f64).collect())
                .collect(),
        })
        .collect();
    RateSchedule::new(pieces)
}

pub fn ingest_trip_records_file(path: impl AsRef<Path>, n_stations: usize, bin_width: u64) -> Result<RateSchedule, SimError> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_trip_records(file, n_stations, bin_width)
}
