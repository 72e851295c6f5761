//! Benchmark instances: the paradigmatic logic gates, the COPY family and
//! uniform random distributions on the probability simplex.
//!
//! Gates are built from independent uniform bits `W1, W2, ...`. Tuple-valued
//! variables are packed into a single integer label, first component most
//! significant.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::distributions::{JointDistribution, Outcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rdn,
    Unq,
    Xor,
    And,
    RdnXor,
    RdnUnqXor,
    XorAnd,
}

impl GateKind {
    pub const ALL: [GateKind; 7] = [
        GateKind::Rdn,
        GateKind::Unq,
        GateKind::Xor,
        GateKind::And,
        GateKind::RdnXor,
        GateKind::RdnUnqXor,
        GateKind::XorAnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rdn => "RDN",
            GateKind::Unq => "UNQ",
            GateKind::Xor => "XOR",
            GateKind::And => "AND",
            GateKind::RdnXor => "RDNXOR",
            GateKind::RdnUnqXor => "RDNUNQXOR",
            GateKind::XorAnd => "XORAND",
        }
    }

    /// Number of primitive bits the construction draws.
    fn bits(self) -> u32 {
        match self {
            GateKind::Rdn => 1,
            GateKind::Unq | GateKind::Xor | GateKind::And | GateKind::XorAnd => 2,
            GateKind::RdnXor => 3,
            GateKind::RdnUnqXor => 5,
        }
    }

    /// `(x, y, z)` for one assignment of the primitive bits `w[0..]`.
    fn construct(self, w: &[i64]) -> (i64, i64, i64) {
        let pack = |parts: &[i64]| parts.iter().fold(0, |acc, &b| 2 * acc + b);
        match self {
            GateKind::Rdn => (w[0], w[0], w[0]),
            GateKind::Unq => (pack(&[w[0], w[1]]), w[0], w[1]),
            GateKind::Xor => (w[0] ^ w[1], w[0], w[1]),
            GateKind::And => (w[0] & w[1], w[0], w[1]),
            GateKind::RdnXor => (
                pack(&[w[0] ^ w[1], w[2]]),
                pack(&[w[0], w[2]]),
                pack(&[w[1], w[2]]),
            ),
            GateKind::RdnUnqXor => (
                pack(&[w[0] ^ w[1], w[2], w[3], w[4]]),
                pack(&[w[0], w[2], w[3]]),
                pack(&[w[1], w[2], w[4]]),
            ),
            GateKind::XorAnd => (pack(&[w[0] ^ w[1], w[0] & w[1]]), w[0], w[1]),
        }
    }

    /// Reference decomposition `(SI, UIY, UIZ, CI)` in bits.
    pub fn expected_bits(self) -> [f64; 4] {
        match self {
            GateKind::Rdn => [1.0, 0.0, 0.0, 0.0],
            GateKind::Unq => [0.0, 1.0, 1.0, 0.0],
            GateKind::Xor => [0.0, 0.0, 0.0, 1.0],
            // SI = I(X;Y) = 3/2 - (3/4) log2 3.
            GateKind::And => [1.5 - 0.75 * 3f64.log2(), 0.0, 0.0, 0.5],
            GateKind::RdnXor => [1.0, 0.0, 0.0, 1.0],
            GateKind::RdnUnqXor => [1.0, 1.0, 1.0, 1.0],
            GateKind::XorAnd => [0.5, 0.0, 0.0, 1.0],
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        GateKind::ALL
            .into_iter()
            .find(|g| g.name() == upper)
            .ok_or_else(|| Error::UnknownGate(s.to_owned()))
    }
}

/// The distribution of `(X, Y, Z)` under the gate's construction.
pub fn gate(kind: GateKind) -> JointDistribution {
    let n = kind.bits();
    let weight = 1.0 / f64::from(1u32 << n);
    let mut weights: BTreeMap<Outcome, f64> = BTreeMap::new();
    for mask in 0..(1i64 << n) {
        let w: Vec<i64> = (0..n).map(|k| (mask >> (n - 1 - k)) & 1).collect();
        let (x, y, z) = kind.construct(&w);
        *weights.entry(Outcome::new(x, y, z)).or_insert(0.0) += weight;
    }
    JointDistribution::from_weights(weights)
}

/// Look a gate up by name.
pub fn gate_by_name(name: &str) -> Result<JointDistribution> {
    name.parse().map(gate)
}

/// Uniform over `((y, z), y, z)` for `y < m`, `z < n`, with `x = y n + z`.
pub fn copy_gate(m: usize, n: usize) -> Result<JointDistribution> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidSize(format!(
            "COPY needs m, n >= 1, got m = {m}, n = {n}"
        )));
    }
    let weight = 1.0 / (m * n) as f64;
    let mut weights = BTreeMap::new();
    for y in 0..m {
        for z in 0..n {
            weights.insert(Outcome::new((y * n + z) as i64, y as i64, z as i64), weight);
        }
    }
    Ok(JointDistribution::from_weights(weights))
}

/// A point drawn uniformly from the `(nx ny nz - 1)`-simplex by normalizing
/// independent standard exponential draws.
pub fn random_simplex_distribution(
    nx: usize,
    ny: usize,
    nz: usize,
    seed: u64,
) -> Result<JointDistribution> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidSize(format!(
            "alphabet sizes must be >= 1, got {nx} x {ny} x {nz}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = BTreeMap::new();
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let w: f64 = Exp1.sample(&mut rng);
                weights.insert(Outcome::new(x as i64, y as i64, z as i64), w);
            }
        }
    }
    // Exp1 draws are almost surely positive; guard the measure-zero case.
    weights.retain(|_, w| *w > 0.0);
    Ok(JointDistribution::from_weights(weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triplets(d: &JointDistribution) -> Vec<(String, f64)> {
        d.entries().map(|(o, p)| (o.to_string(), p)).collect()
    }

    #[test]
    fn and_gate_matches_reference_table() {
        let d = gate(GateKind::And);
        let expect = [
            Outcome::new(0, 0, 0),
            Outcome::new(0, 0, 1),
            Outcome::new(0, 1, 0),
            Outcome::new(1, 1, 1),
        ];
        assert_eq!(d.len(), 4);
        for o in &expect {
            assert_eq!(d.prob(o), 0.25);
        }
    }

    #[test]
    fn xor_and_rdn_supports() {
        let d = gate(GateKind::Xor);
        assert_eq!(d.len(), 4);
        for (o, p) in d.entries() {
            assert_eq!(p, 0.25);
            let bit = |l: &crate::distributions::Label| match l {
                crate::distributions::Label::Int(v) => *v,
                _ => unreachable!(),
            };
            assert_eq!(bit(&o.x), bit(&o.y) ^ bit(&o.z));
        }
        let d = gate(GateKind::Rdn);
        assert_eq!(
            triplets(&d),
            vec![
                ("(0, 0, 0)".to_string(), 0.5),
                ("(1, 1, 1)".to_string(), 0.5)
            ]
        );
    }

    #[test]
    fn composite_gate_sizes() {
        assert_eq!(gate(GateKind::Unq).len(), 4);
        assert_eq!(gate(GateKind::RdnXor).len(), 8);
        assert_eq!(gate(GateKind::RdnUnqXor).len(), 32);
        assert_eq!(gate(GateKind::XorAnd).len(), 4);
        for g in GateKind::ALL {
            let total: f64 = gate(g).cells().iter().map(|c| c.prob).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn names_round_trip() {
        for g in GateKind::ALL {
            assert_eq!(g.name().parse::<GateKind>().unwrap(), g);
            assert_eq!(g.name().to_lowercase().parse::<GateKind>().unwrap(), g);
        }
        assert!(matches!(gate_by_name("NAND"), Err(Error::UnknownGate(_))));
    }

    #[test]
    fn copy_gate_examples() {
        let d = copy_gate(2, 2).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.x_labels().len(), 4);
        let d = copy_gate(2, 3).unwrap();
        assert_eq!(d.len(), 6);
        for c in d.cells() {
            assert!((c.prob - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!(matches!(copy_gate(0, 3), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn random_simplex_basics() {
        let d = random_simplex_distribution(1, 1, 1, 5).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.cells()[0].prob, 1.0);
        let a = random_simplex_distribution(2, 3, 4, 42).unwrap();
        let b = random_simplex_distribution(2, 3, 4, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_simplex_distribution(2, 3, 4, 43).unwrap());
        assert!(random_simplex_distribution(0, 1, 1, 0).is_err());
    }

    #[test]
    fn random_simplex_mean_is_uniform() {
        // Flat Dirichlet on 8 coordinates: mean 1/8, variance (1/8)(7/8)/9.
        let draws = 100_000;
        let mut sums = [0.0; 8];
        for seed in 0..draws {
            let d = random_simplex_distribution(2, 2, 2, seed).unwrap();
            for (k, c) in d.cells().iter().enumerate() {
                sums[k] += c.prob;
            }
        }
        let se = ((1.0 / 8.0) * (7.0 / 8.0) / 9.0 / draws as f64).sqrt();
        for s in sums {
            let mean = s / draws as f64;
            assert!((mean - 0.125).abs() <= 3.0 * se, "mean {mean}, se {se}");
        }
    }
}
