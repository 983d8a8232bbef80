//! Seeded coincidence-count simulation and the count-to-probability
//! estimation pipeline.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{FpbError, Result};
use crate::error_model::{cell_index, OutcomeProbs};
use crate::probe::{self, Bb84State, JointDistribution, SiftBasis, PE_MAX};

/// Coincidence counts of one experimental configuration.
///
/// `counts` follows the `(Bob bit, Eve bit)` cell order
/// `(1,0), (1,1), (0,1), (0,0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub alice: Bb84State,
    pub bob_basis: SiftBasis,
    pub pe_nominal: f64,
    pub counts: [u64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

impl CountsRecord {
    pub fn new(alice: Bb84State, bob_basis: SiftBasis, pe_nominal: f64, counts: [u64; 4]) -> Self {
        Self {
            alice,
            bob_basis,
            pe_nominal,
            counts,
            duration_s: None,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, bob_bit: usize, eve_bit: usize) -> u64 {
        self.counts[cell_index(bob_bit, eve_bit)]
    }

    /// Whether Bob measured in the basis Alice prepared in.
    pub fn is_sifted(&self) -> bool {
        self.alice.basis() == self.bob_basis
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=PE_MAX).contains(&self.pe_nominal) {
            return Err(FpbError::PeOutOfRange(self.pe_nominal));
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!("{}/{} pe={}", self.alice, self.bob_basis, self.pe_nominal)
    }
}

/// Seed for the count generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// How records are pooled when several feed one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Each record normalized by its own total first.
    #[default]
    Equal,
    /// Raw counts summed across records.
    Counts,
}

/// Multinomial sample of `n_pairs` events over the four outcomes.
pub fn simulate_counts(probs: &OutcomeProbs, n_pairs: u64, seed: RngSeed) -> Result<[u64; 4]> {
    simulate_counts_with(probs, n_pairs, &mut seed.rng())
}

/// As [`simulate_counts`], drawing from a caller-owned generator.
pub fn simulate_counts_with<R: Rng + ?Sized>(
    probs: &OutcomeProbs,
    n_pairs: u64,
    rng: &mut R,
) -> Result<[u64; 4]> {
    if n_pairs == 0 {
        return Err(FpbError::InvalidArgument(
            "n_pairs must be at least 1".into(),
        ));
    }
    if probs.0.iter().any(|p| !p.is_finite() || *p < 0.0) || probs.total() <= 0.0 {
        return Err(FpbError::DegenerateDistribution(format!(
            "invalid outcome probabilities {:?}",
            probs.0
        )));
    }
    // Sequential conditional binomials.
    let mut counts = [0u64; 4];
    let mut remaining = n_pairs;
    let mut mass = probs.total();
    for (i, &p) in probs.0.iter().take(3).enumerate() {
        if remaining == 0 {
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(remaining, q)
            .map_err(|e| FpbError::InvalidArgument(e.to_string()))?
            .sample(rng);
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    counts[3] = remaining;
    Ok(counts)
}

/// Expected counts `n * p` rounded half-to-even, with the largest cell
/// adjusted so the total is exactly `n`.
pub fn noise_free_counts(probs: &OutcomeProbs, n: u64) -> [u64; 4] {
    let total = probs.total();
    let mut counts = probs
        .0
        .map(|p| (n as f64 * p / total).round_ties_even().max(0.0) as u64);
    let sum: u64 = counts.iter().sum();
    let largest = (0..4)
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    if sum > n {
        counts[largest] -= (sum - n).min(counts[largest]);
    } else {
        counts[largest] += n - sum;
    }
    counts
}

/// Counts divided by the record total.
pub fn estimate_probabilities(record: &CountsRecord) -> Result<OutcomeProbs> {
    let total = record.total();
    if total == 0 {
        return Err(FpbError::ZeroCounts(record.label()));
    }
    Ok(OutcomeProbs(record.counts.map(|c| c as f64 / total as f64)))
}

/// Sifted records of one basis and one pe, pooled by Alice's state.
struct SiftPair {
    counts: [[u64; 4]; 2],
}

fn pair_records(records: &[CountsRecord]) -> Result<(SiftBasis, SiftPair)> {
    let first = records
        .first()
        .ok_or_else(|| FpbError::MissingRecord("no records supplied".into()))?;
    let basis = first.bob_basis;
    let pe = first.pe_nominal;
    let mut counts = [[0u64; 4]; 2];
    let mut seen = [false; 2];
    for r in records {
        if r.bob_basis != basis || r.pe_nominal != pe {
            return Err(FpbError::InvalidArgument(format!(
                "records mix configurations: {} vs {}",
                first.label(),
                r.label()
            )));
        }
        if !r.is_sifted() {
            return Err(FpbError::InvalidArgument(format!(
                "{} is not a sift record (Alice and Bob bases differ)",
                r.label()
            )));
        }
        let b = r.alice.bit();
        seen[b] = true;
        for (acc, c) in counts[b].iter_mut().zip(r.counts.iter()) {
            *acc += c;
        }
    }
    for (b, s) in seen.iter().enumerate() {
        if !s {
            return Err(FpbError::MissingRecord(format!(
                "basis {basis} at pe={pe} lacks Alice state {}",
                basis.states()[b]
            )));
        }
    }
    for (b, c) in counts.iter().enumerate() {
        if c.iter().sum::<u64>() == 0 {
            return Err(FpbError::ZeroCounts(format!(
                "{}/{basis} pe={pe}",
                basis.states()[b]
            )));
        }
    }
    Ok((basis, SiftPair { counts }))
}

/// Fraction of sift events where Bob's bit differs from Alice's.
///
/// All records must share one basis and one pe and cover both of Alice's
/// states in that basis.
pub fn sifted_error_rate(records: &[CountsRecord], weighting: Weighting) -> Result<f64> {
    let (_, pair) = pair_records(records)?;
    let errors = |a: usize| -> (u64, u64) {
        let c = &pair.counts[a];
        let wrong = 1 - a;
        let err = c[cell_index(wrong, 0)] + c[cell_index(wrong, 1)];
        (err, c.iter().sum())
    };
    let (e0, n0) = errors(0);
    let (e1, n1) = errors(1);
    Ok(match weighting {
        Weighting::Equal => (e0 as f64 / n0 as f64 + e1 as f64 / n1 as f64) / 2.0,
        Weighting::Counts => (e0 + e1) as f64 / (n0 + n1) as f64,
    })
}

/// Bob/Eve joint distribution over error-free sift cells of paired records.
pub fn measured_joint_distribution(
    records: &[CountsRecord],
    weighting: Weighting,
) -> Result<JointDistribution> {
    let (basis, pair) = pair_records(records)?;
    let mut raw = [[0.0; 2]; 2];
    for b in 0..2 {
        let c = &pair.counts[b];
        let correct = c[cell_index(b, 0)] + c[cell_index(b, 1)];
        if correct == 0 {
            return Err(FpbError::ZeroCounts(format!(
                "no error-free sift counts for {}/{basis}",
                basis.states()[b]
            )));
        }
        let norm = match weighting {
            Weighting::Equal => c.iter().sum::<u64>() as f64,
            Weighting::Counts => 1.0,
        };
        for (e, cell) in raw[b].iter_mut().enumerate() {
            *cell = c[cell_index(b, e)] as f64 / norm;
        }
    }
    JointDistribution::from_weights(raw)
}

/// Renyi information estimated from paired count records.
pub fn measured_renyi(records: &[CountsRecord], weighting: Weighting) -> Result<f64> {
    Ok(probe::renyi_information(&measured_joint_distribution(
        records, weighting,
    )?))
}

/// Key identifying records that share a basis and nominal pe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiftGroupKey {
    pub basis: SiftBasis,
    pe_bits: u64,
}

impl SiftGroupKey {
    pub fn pe(&self) -> f64 {
        f64::from_bits(self.pe_bits)
    }
}

/// Groups sift records by (basis, pe), ordered by basis then pe.
pub fn group_sift_records(records: &[CountsRecord]) -> BTreeMap<SiftGroupKey, Vec<CountsRecord>> {
    let mut groups: BTreeMap<SiftGroupKey, Vec<CountsRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_sifted()) {
        // pe values are nonnegative, so bit order is numeric order
        let key = SiftGroupKey {
            basis: r.bob_basis,
            pe_bits: (r.pe_nominal + 0.0).to_bits(),
        };
        groups.entry(key).or_default().push(r.clone());
    }
    groups
}
