//! Finite joint distributions of `(X, Y, Z)`, their pairwise marginals, and
//! the entropy functionals the estimator needs. Everything here is in nats.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of caller-supplied weights.
pub const INPUT_MASS_TOL: f64 = 1e-9;

/// An opaque alphabet symbol. Integers order before strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl Label {
    /// Integer when the text parses as one, otherwise a string label.
    pub fn parse(text: &str) -> Self {
        match text.trim().parse::<i64>() {
            Ok(v) => Label::Int(v),
            Err(_) => Label::Str(text.trim().to_owned()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Str(s.to_owned())
    }
}

/// One outcome `(x, y, z)` of the three variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub x: Label,
    pub y: Label,
    pub z: Label,
}

impl Outcome {
    pub fn new(x: impl Into<Label>, y: impl Into<Label>, z: impl Into<Label>) -> Self {
        Self {
            x: x.into(),
            y: y.into(),
            z: z.into(),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A stored cell: alphabet indices plus its (strictly positive) probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub prob: f64,
}

/// Sparse joint distribution of `(X, Y, Z)`.
///
/// Alphabets are the sorted sets of symbols that actually occur, and cells are
/// sorted by `(x, y, z)` index, so iteration order is canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    xs: Vec<Label>,
    ys: Vec<Label>,
    zs: Vec<Label>,
    cells: Vec<Cell>,
}

/// Validate raw weights and build a distribution.
///
/// Zero weights are dropped. Weights summing to within `1e-9` of one are
/// rescaled to sum to one exactly; anything further off is rejected.
pub fn build_distribution<I>(raw: I) -> Result<JointDistribution>
where
    I: IntoIterator<Item = (Outcome, f64)>,
{
    let mut acc: BTreeMap<Outcome, f64> = BTreeMap::new();
    for (outcome, w) in raw {
        if w.is_nan() {
            return Err(Error::NotNormalized { sum: f64::NAN });
        }
        if w < 0.0 {
            return Err(Error::NegativeProbability {
                outcome: outcome.to_string(),
                value: w,
            });
        }
        *acc.entry(outcome).or_insert(0.0) += w;
    }
    acc.retain(|_, w| *w > 0.0);
    if acc.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let sum: f64 = acc.values().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > INPUT_MASS_TOL {
        return Err(Error::NotNormalized { sum });
    }
    Ok(JointDistribution::from_weights(acc))
}

impl JointDistribution {
    /// Build from positive weights, rescaling them to unit mass. Callers are
    /// responsible for having checked signs and the mass tolerance.
    pub(crate) fn from_weights(weights: BTreeMap<Outcome, f64>) -> Self {
        let sum: f64 = weights.values().sum();
        let mut xs: Vec<Label> = weights.keys().map(|o| o.x.clone()).collect();
        let mut ys: Vec<Label> = weights.keys().map(|o| o.y.clone()).collect();
        let mut zs: Vec<Label> = weights.keys().map(|o| o.z.clone()).collect();
        for alphabet in [&mut xs, &mut ys, &mut zs] {
            alphabet.sort();
            alphabet.dedup();
        }
        let find =
            |alphabet: &[Label], l: &Label| alphabet.binary_search(l).expect("symbol present");
        let mut cells: Vec<Cell> = weights
            .iter()
            .map(|(o, &w)| Cell {
                x: find(&xs, &o.x),
                y: find(&ys, &o.y),
                z: find(&zs, &o.z),
                prob: w / sum,
            })
            .collect();
        cells.sort_by_key(|c| (c.x, c.y, c.z));
        Self { xs, ys, zs, cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn x_labels(&self) -> &[Label] {
        &self.xs
    }

    pub fn y_labels(&self) -> &[Label] {
        &self.ys
    }

    pub fn z_labels(&self) -> &[Label] {
        &self.zs
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn outcome(&self, cell: &Cell) -> Outcome {
        Outcome {
            x: self.xs[cell.x].clone(),
            y: self.ys[cell.y].clone(),
            z: self.zs[cell.z].clone(),
        }
    }

    /// `(outcome, probability)` pairs in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (Outcome, f64)> + '_ {
        self.cells.iter().map(|c| (self.outcome(c), c.prob))
    }

    /// Probability of an outcome; zero when absent.
    pub fn prob(&self, outcome: &Outcome) -> f64 {
        let (Ok(x), Ok(y), Ok(z)) = (
            self.xs.binary_search(&outcome.x),
            self.ys.binary_search(&outcome.y),
            self.zs.binary_search(&outcome.z),
        ) else {
            return 0.0;
        };
        self.cells
            .binary_search_by_key(&(x, y, z), |c| (c.x, c.y, c.z))
            .map(|i| self.cells[i].prob)
            .unwrap_or(0.0)
    }

    fn entropy_by<K: Ord>(&self, key: impl Fn(&Cell) -> K) -> f64 {
        let mut masses: BTreeMap<K, f64> = BTreeMap::new();
        for c in &self.cells {
            *masses.entry(key(c)).or_insert(0.0) += c.prob;
        }
        masses
            .values()
            .filter(|&&m| m > 0.0)
            .map(|&m| -m * m.ln())
            .sum()
    }

    pub(crate) fn h_x(&self) -> f64 {
        self.entropy_by(|c| c.x)
    }
    pub(crate) fn h_y(&self) -> f64 {
        self.entropy_by(|c| c.y)
    }
    pub(crate) fn h_z(&self) -> f64 {
        self.entropy_by(|c| c.z)
    }
    pub(crate) fn h_xy(&self) -> f64 {
        self.entropy_by(|c| (c.x, c.y))
    }
    pub(crate) fn h_xz(&self) -> f64 {
        self.entropy_by(|c| (c.x, c.z))
    }
    pub(crate) fn h_yz(&self) -> f64 {
        self.entropy_by(|c| (c.y, c.z))
    }
    pub(crate) fn h_xyz(&self) -> f64 {
        self.entropy_by(|c| (c.x, c.y, c.z))
    }
}

/// The `(X, Y)` and `(X, Z)` marginals, indexed by alphabet positions of the
/// distribution they came from. Zero cells are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPair {
    pub xs: Vec<Label>,
    pub ys: Vec<Label>,
    pub zs: Vec<Label>,
    pub b_y: BTreeMap<(usize, usize), f64>,
    pub b_z: BTreeMap<(usize, usize), f64>,
}

impl MarginalPair {
    /// `P(X = x)` read off the XY marginal.
    pub fn x_mass_from_y(&self, x: usize) -> f64 {
        self.b_y
            .range((x, 0)..=(x, usize::MAX))
            .map(|(_, v)| v)
            .sum()
    }

    /// `P(X = x)` read off the XZ marginal.
    pub fn x_mass_from_z(&self, x: usize) -> f64 {
        self.b_z
            .range((x, 0)..=(x, usize::MAX))
            .map(|(_, v)| v)
            .sum()
    }
}

pub fn marginals(p: &JointDistribution) -> MarginalPair {
    let mut b_y = BTreeMap::new();
    let mut b_z = BTreeMap::new();
    for c in p.cells() {
        *b_y.entry((c.x, c.y)).or_insert(0.0) += c.prob;
        *b_z.entry((c.x, c.z)).or_insert(0.0) += c.prob;
    }
    b_y.retain(|_, v: &mut f64| *v > 0.0);
    b_z.retain(|_, v: &mut f64| *v > 0.0);
    MarginalPair {
        xs: p.xs.clone(),
        ys: p.ys.clone(),
        zs: p.zs.clone(),
        b_y,
        b_z,
    }
}

/// `H(X | Y, Z) = -sum q ln(q / q_{*,y,z})`, with `0 ln 0 = 0`.
pub fn conditional_entropy_x_given_yz(q: &JointDistribution) -> f64 {
    let mut yz: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in q.cells() {
        *yz.entry((c.y, c.z)).or_insert(0.0) += c.prob;
    }
    let h: f64 = q
        .cells()
        .iter()
        .filter(|c| c.prob > 0.0)
        .map(|c| -c.prob * (c.prob / yz[&(c.y, c.z)]).ln())
        .sum();
    h.max(0.0)
}

/// Which (conditional) mutual information to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Grouping {
    /// `I(X; (Y, Z))`
    XWithYZ,
    /// `I(X; Y)`
    XWithY,
    /// `I(X; Z)`
    XWithZ,
    /// `I(Y; Z)`
    YWithZ,
    /// `I(X; Y | Z)`
    XWithYGivenZ,
    /// `I(X; Z | Y)`
    XWithZGivenY,
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.to_ascii_uppercase().as_str() {
            "X;(Y,Z)" | "X;Y,Z" | "X;YZ" => Ok(Grouping::XWithYZ),
            "X;Y" => Ok(Grouping::XWithY),
            "X;Z" => Ok(Grouping::XWithZ),
            "Y;Z" => Ok(Grouping::YWithZ),
            "X;Y|Z" => Ok(Grouping::XWithYGivenZ),
            "X;Z|Y" => Ok(Grouping::XWithZGivenY),
            _ => Err(Error::UnknownGrouping(s.to_owned())),
        }
    }
}

/// Mutual information in nats, from entropies of the relevant marginals.
pub fn mutual_information(p: &JointDistribution, grouping: Grouping) -> f64 {
    let mi = match grouping {
        Grouping::XWithYZ => p.h_x() + p.h_yz() - p.h_xyz(),
        Grouping::XWithY => p.h_x() + p.h_y() - p.h_xy(),
        Grouping::XWithZ => p.h_x() + p.h_z() - p.h_xz(),
        Grouping::YWithZ => p.h_y() + p.h_z() - p.h_yz(),
        Grouping::XWithYGivenZ => p.h_xz() + p.h_yz() - p.h_xyz() - p.h_z(),
        Grouping::XWithZGivenY => p.h_xy() + p.h_yz() - p.h_xyz() - p.h_y(),
    };
    // Rounding can leave values of order -1e-16 for independent variables.
    mi.max(0.0)
}
