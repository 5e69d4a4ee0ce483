//! Optimal-trajectory dataset: generation, splits and JSON-lines storage.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lhs::lhs_sample;
use super::optimizer::{optimize, OptimizerSettings};
use super::rollout::{sample_controls, FlightCondition};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::vehicle::VehicleConfig;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub v: u32,
    pub condition: FlightCondition,
    /// Normalized (P, θ) at consecutive 0.1 s steps.
    pub controls: Vec<[f64; 2]>,
    pub energy_wh: f64,
    pub feasible: bool,
    pub split: Split,
}

impl DatasetEntry {
    pub fn validate(&self) -> Result<()> {
        if self.v != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {}", self.v)));
        }
        if self.controls.is_empty() {
            return Err(Error::Format("dataset entry without controls".into()));
        }
        if self.controls.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Format("normalized control outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Split sizes: floor for train, floor for validation, remainder for test.
pub fn split_counts(n: usize, fractions: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = fractions;
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("split fractions must be non-negative and sum to 1, got {fractions:?}")));
    }
    let train = (n as f64 * a + 1e-9).floor() as usize;
    let val = ((n as f64 * b + 1e-9).floor() as usize).min(n - train);
    Ok((train, val, n - train - val))
}

/// Assigns splits to `n` items through a seeded shuffle of their indices.
pub fn assign_splits(n: usize, fractions: (f64, f64, f64), rng: &mut impl Rng) -> Result<Vec<Split>> {
    let (train, val, _) = split_counts(n, fractions)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut splits = vec![Split::Test; n];
    for (rank, i) in idx.into_iter().enumerate() {
        splits[i] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(splits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSettings {
    pub n: usize,
    pub seed: u64,
    pub split: (f64, f64, f64),
    pub optimizer: OptimizerSettings,
    pub path_constraints: bool,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        DatasetSettings {
            n: 64,
            seed: 0,
            split: (0.75, 0.15, 0.10),
            optimizer: OptimizerSettings::default(),
            path_constraints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub entries: Vec<DatasetEntry>,
    /// Conditions whose optimization ended infeasible.
    pub excluded: Vec<FlightCondition>,
}

/// Optimizes every LHS condition and keeps the feasible trajectories.
/// Conditions run sequentially; each optimizer evaluates its population in
/// parallel, so results do not depend on the thread count.
pub fn build_dataset(vehicle: &VehicleConfig, env: &EnvConfig, settings: &DatasetSettings) -> Result<BuildReport> {
    split_counts(settings.n, settings.split)?;
    let conditions = lhs_sample(settings.n, settings.seed, settings.path_constraints)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed_da7a);
    let seeds: Vec<u64> = conditions.iter().map(|_| rng.gen()).collect();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (cond, seed) in conditions.iter().zip(seeds) {
        let opt = OptimizerSettings { seed, ..settings.optimizer.clone() };
        let result = optimize(cond, vehicle, env, &opt)?;
        if !result.feasible {
            excluded.push(*cond);
            continue;
        }
        let controls = sample_controls(&result.control, env.dt)?.iter().map(|u| u.normalized()).collect();
        kept.push((cond, controls, result.energy_wh));
    }
    let splits = assign_splits(kept.len(), settings.split, &mut rng)?;
    let entries = kept
        .into_iter()
        .zip(splits)
        .map(|((cond, controls, energy_wh), split)| DatasetEntry {
            v: DATASET_VERSION,
            condition: *cond,
            controls,
            energy_wh,
            feasible: true,
            split,
        })
        .collect();
    Ok(BuildReport { entries, excluded })
}

pub fn write_jsonl(entries: &[DatasetEntry], mut out: impl Write) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> Result<Vec<DatasetEntry>> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: DatasetEntry =
            serde_json::from_str(&line).map_err(|err| Error::Format(format!("dataset line {}: {err}", i + 1)))?;
        e.validate()?;
        entries.push(e);
    }
    Ok(entries)
}

pub fn by_split(entries: &[DatasetEntry], split: Split) -> Vec<&DatasetEntry> {
    entries.iter().filter(|e| e.split == split).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_rounding() {
        assert_eq!(split_counts(1000, (0.75, 0.15, 0.10)).unwrap(), (750, 150, 100));
        assert_eq!(split_counts(64, (0.75, 0.15, 0.10)).unwrap(), (48, 9, 7));
        assert_eq!(split_counts(0, (0.75, 0.15, 0.10)).unwrap(), (0, 0, 0));
        assert!(split_counts(10, (0.5, 0.5, 0.5)).is_err());
    }

    #[test]
    fn splits_are_shuffled_and_counted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = assign_splits(64, (0.75, 0.15, 0.10), &mut rng).unwrap();
        assert_eq!(s.iter().filter(|x| **x == Split::Train).count(), 48);
        assert_eq!(s.iter().filter(|x| **x == Split::Val).count(), 9);
        assert_ne!(&s[..48], &[Split::Train; 48][..]);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let e = DatasetEntry {
            v: 1,
            condition: FlightCondition::verification(),
            controls: vec![[0.1, 1.0 / 3.0], [0.123456789012345678, 0.0]],
            energy_wh: 1693.0000000000002,
            feasible: true,
            split: Split::Val,
        };
        let mut buf = Vec::new();
        write_jsonl(&[e.clone(), e.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"v\":1,\"condition\":{\"alpha_max_deg\":15.0,"));
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, vec![e.clone(), e]);
        let mut again = Vec::new();
        write_jsonl(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(read_jsonl(&b"{\"v\":2}\n"[..]).is_err());
        let line = "{\"v\":1,\"condition\":{\"alpha_max_deg\":15.0,\"a_max_g\":0.4,\"k_w\":1.0,\"eta\":0.9,\"s_ref\":1.0,\"path_constraints\":false},\"controls\":[[1.5,0.0]],\"energy_wh\":1.0,\"feasible\":true,\"split\":\"test\"}";
        assert!(read_jsonl(line.as_bytes()).is_err());
    }
}
