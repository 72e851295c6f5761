//! Assembly of the exponential cone program
//!
//! ```text
//! minimize    -sum r
//! subject to  q_{x,y,*} = b_y(x,y)               (XY marginal rows)
//!             q_{x,*,z} = b_z(x,z)               (XZ marginal rows)
//!             q_{*,y,z} - p_{x,y,z} = 0          (coupling rows)
//!             (r, p, q)_{x,y,z} in K_exp
//! ```
//!
//! over the admissible triplets, i.e. those with both marginal cells positive.
//! Variables are laid out block-wise, `[r, p, q]` for triplet `i` at columns
//! `3i, 3i+1, 3i+2`. Rows are ordered XY marginals, XZ marginals, then one
//! coupling row per triplet in triplet order.

use std::collections::BTreeMap;

use crate::cone::ConePoint;
use crate::distributions::{JointDistribution, Label, MarginalPair};
use crate::error::{Error, Result};

/// Offset subtracted from `r` in the interior starting point.
pub const INITIAL_SLACK: f64 = 100.0;

/// Feasibility tolerance accepted by [`embed_cp_point`].
pub const EMBED_TOL: f64 = 1e-9;

pub type Triplet = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TripletIndex {
    triplets: Vec<Triplet>,
    position: BTreeMap<Triplet, usize>,
}

impl TripletIndex {
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn position(&self, t: &Triplet) -> Option<usize> {
        self.position.get(t).copied()
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

/// Row membership of one triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletRows {
    /// Position among the XY marginal rows.
    pub y_row: usize,
    /// Position among the XZ marginal rows.
    pub z_row: usize,
    /// Which `(y, z)` coupling group the triplet belongs to.
    pub group: usize,
}

/// A sparse equality row `sum coeff * w[col] = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpConeModel {
    pub index: TripletIndex,
    pub marginals: MarginalPair,
    /// Keys of the XY rows, in row order.
    pub y_rows: Vec<(usize, usize)>,
    /// Keys of the XZ rows, in row order.
    pub z_rows: Vec<(usize, usize)>,
    /// `(y, z)` key of every coupling group.
    pub group_keys: Vec<(usize, usize)>,
    /// Triplet positions in each coupling group.
    pub groups: Vec<Vec<usize>>,
    pub rows_of: Vec<TripletRows>,
}

/// Problem data in the generic `min c^T w, A w = b, w in K^n` form.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericConeProgram {
    pub c: Vec<f64>,
    pub a: Vec<SparseRow>,
    /// Column triples forming one exponential cone block each.
    pub cone_blocks: Vec<[usize; 3]>,
}

impl GenericConeProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.c.len();
        let cols_ok = self
            .a
            .iter()
            .all(|row| row.coeffs.iter().all(|&(j, _)| j < n));
        let blocks_ok =
            self.cone_blocks.len() * 3 == n && self.cone_blocks.iter().flatten().all(|&j| j < n);
        cols_ok && blocks_ok
    }
}

pub fn build_model(m: &MarginalPair) -> Result<ExpConeModel> {
    let mut triplets = Vec::new();
    for &(x, y) in m.b_y.keys() {
        for &(xz, z) in m.b_z.range((x, 0)..=(x, usize::MAX)).map(|(k, _)| k) {
            debug_assert_eq!(x, xz);
            triplets.push((x, y, z));
        }
    }
    if triplets.is_empty() {
        return Err(Error::EmptyModel);
    }
    triplets.sort_unstable();
    let position: BTreeMap<Triplet, usize> =
        triplets.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    let y_rows: Vec<(usize, usize)> = m.b_y.keys().copied().collect();
    let z_rows: Vec<(usize, usize)> = m.b_z.keys().copied().collect();
    let y_pos: BTreeMap<(usize, usize), usize> =
        y_rows.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let z_pos: BTreeMap<(usize, usize), usize> =
        z_rows.iter().enumerate().map(|(i, &k)| (k, i)).collect();

    let mut by_group: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, &(_, y, z)) in triplets.iter().enumerate() {
        by_group.entry((y, z)).or_default().push(i);
    }
    let group_keys: Vec<(usize, usize)> = by_group.keys().copied().collect();
    let group_pos: BTreeMap<(usize, usize), usize> = group_keys
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, i))
        .collect();
    let groups: Vec<Vec<usize>> = by_group.into_values().collect();

    let rows_of = triplets
        .iter()
        .map(|&(x, y, z)| TripletRows {
            y_row: y_pos[&(x, y)],
            z_row: z_pos[&(x, z)],
            group: group_pos[&(y, z)],
        })
        .collect();

    Ok(ExpConeModel {
        index: TripletIndex { triplets, position },
        marginals: m.clone(),
        y_rows,
        z_rows,
        group_keys,
        groups,
        rows_of,
    })
}

impl ExpConeModel {
    pub fn num_triplets(&self) -> usize {
        self.index.len()
    }

    pub fn num_vars(&self) -> usize {
        3 * self.index.len()
    }

    pub fn num_marginal_rows(&self) -> usize {
        self.y_rows.len() + self.z_rows.len()
    }

    pub fn num_rows(&self) -> usize {
        self.num_marginal_rows() + self.index.len()
    }

    /// Right-hand side of the marginal rows (XY then XZ). Coupling rows have
    /// zero right-hand side.
    pub fn marginal_rhs(&self) -> Vec<f64> {
        self.y_rows
            .iter()
            .map(|k| self.marginals.b_y[k])
            .chain(self.z_rows.iter().map(|k| self.marginals.b_z[k]))
            .collect()
    }

    pub fn equality_rows(&self) -> Vec<SparseRow> {
        let n_y = self.y_rows.len();
        let mut rows: Vec<SparseRow> = self
            .marginal_rhs()
            .into_iter()
            .map(|rhs| SparseRow {
                coeffs: Vec::new(),
                rhs,
            })
            .collect();
        for (i, tr) in self.rows_of.iter().enumerate() {
            rows[tr.y_row].coeffs.push((3 * i + 2, 1.0));
            rows[n_y + tr.z_row].coeffs.push((3 * i + 2, 1.0));
        }
        for (i, tr) in self.rows_of.iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = self.groups[tr.group]
                .iter()
                .map(|&j| (3 * j + 2, 1.0))
                .collect();
            coeffs.push((3 * i + 1, -1.0));
            coeffs.sort_by_key(|&(j, _)| j);
            rows.push(SparseRow { coeffs, rhs: 0.0 });
        }
        rows
    }

    pub fn objective_vector(&self) -> Vec<f64> {
        (0..self.num_vars())
            .map(|j| if j % 3 == 0 { -1.0 } else { 0.0 })
            .collect()
    }

    pub fn to_generic(&self) -> GenericConeProgram {
        GenericConeProgram {
            c: self.objective_vector(),
            a: self.equality_rows(),
            cone_blocks: (0..self.num_triplets())
                .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
                .collect(),
        }
    }

    /// `-sum r`.
    pub fn primal_objective(&self, w: &[ConePoint]) -> f64 {
        -w.iter().map(|b| b.r).sum::<f64>()
    }

    /// `-(sum lambda_y b_y + sum lambda_z b_z)`.
    pub fn dual_objective(&self, lambda_y: &[f64], lambda_z: &[f64]) -> f64 {
        -lambda_dot_b(self, lambda_y, lambda_z)
    }

    /// `q_{*,y,z}` per coupling group.
    pub fn group_mass(&self, q: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&j| q[j]).sum())
            .collect()
    }

    /// `A w - b`, in row order.
    pub fn residual(&self, w: &[ConePoint]) -> Vec<f64> {
        let n_y = self.y_rows.len();
        let mut res: Vec<f64> = self.marginal_rhs().into_iter().map(|b| -b).collect();
        for (i, tr) in self.rows_of.iter().enumerate() {
            res[tr.y_row] += w[i].q;
            res[n_y + tr.z_row] += w[i].q;
        }
        let q: Vec<f64> = w.iter().map(|b| b.q).collect();
        let mass = self.group_mass(&q);
        res.extend(
            self.rows_of
                .iter()
                .zip(w)
                .map(|(tr, b)| mass[tr.group] - b.p),
        );
        res
    }

    /// Per-triplet vector of `dist` restricted to the model support.
    ///
    /// Fails with [`Error::InfeasiblePoint`] when `dist` puts mass on a symbol
    /// or triplet outside the support.
    pub fn support_vector(&self, dist: &JointDistribution) -> Result<Vec<f64>> {
        let mut q = vec![0.0; self.num_triplets()];
        fn find(alphabet: &[Label], l: &Label) -> Result<usize> {
            alphabet.binary_search(l).map_err(|_| {
                Error::InfeasiblePoint(format!("symbol {l} is outside the model alphabets"))
            })
        }
        for (o, prob) in dist.entries() {
            let t = (
                find(&self.marginals.xs, &o.x)?,
                find(&self.marginals.ys, &o.y)?,
                find(&self.marginals.zs, &o.z)?,
            );
            let i = self.index.position(&t).ok_or_else(|| {
                Error::InfeasiblePoint(format!("outcome {o} lies outside the admissible support"))
            })?;
            q[i] = prob;
        }
        Ok(q)
    }
}

pub(crate) fn lambda_dot_b(model: &ExpConeModel, lambda_y: &[f64], lambda_z: &[f64]) -> f64 {
    let ly: f64 = model
        .y_rows
        .iter()
        .zip(lambda_y)
        .map(|(k, l)| l * model.marginals.b_y[k])
        .sum();
    let lz: f64 = model
        .z_rows
        .iter()
        .zip(lambda_z)
        .map(|(k, l)| l * model.marginals.b_z[k])
        .sum();
    ly + lz
}

/// The strictly interior starting point
/// `q = b_y(x,y) b_z(x,z) / b_y(x,*)`, `p = q_{*,y,z}`, `r = q ln(p/q) - 100`.
pub fn initial_point(model: &ExpConeModel) -> Vec<ConePoint> {
    let m = &model.marginals;
    let x_mass: BTreeMap<usize, f64> = model
        .index
        .triplets()
        .iter()
        .map(|&(x, _, _)| (x, m.x_mass_from_y(x)))
        .collect();
    let q: Vec<f64> = model
        .index
        .triplets()
        .iter()
        .map(|&(x, y, z)| m.b_y[&(x, y)] * m.b_z[&(x, z)] / x_mass[&x])
        .collect();
    let mass = model.group_mass(&q);
    model
        .rows_of
        .iter()
        .zip(&q)
        .map(|(tr, &q)| {
            let p = mass[tr.group];
            ConePoint::new(q * (p / q).ln() - INITIAL_SLACK, p, q)
        })
        .collect()
}

/// Map a feasible point of the convex program onto the cone program:
/// `(q ln(q_{*,y,z}/q), q_{*,y,z}, q)` for positive `q`, `(0, q_{*,y,z}, 0)`
/// for zero `q`.
pub fn embed_cp_point(model: &ExpConeModel, q: &[f64]) -> Result<Vec<ConePoint>> {
    if q.len() != model.num_triplets() {
        return Err(Error::InfeasiblePoint(format!(
            "expected {} entries, got {}",
            model.num_triplets(),
            q.len()
        )));
    }
    if let Some((i, v)) = q
        .iter()
        .enumerate()
        .find(|(_, &v)| v < -EMBED_TOL || v.is_nan())
    {
        return Err(Error::InfeasiblePoint(format!(
            "entry {i} is negative ({v})"
        )));
    }
    let q: Vec<f64> = q.iter().map(|&v| v.max(0.0)).collect();
    let mass = model.group_mass(&q);
    let w: Vec<ConePoint> = model
        .rows_of
        .iter()
        .zip(&q)
        .map(|(tr, &q)| {
            let p = mass[tr.group];
            if q > 0.0 {
                ConePoint::new(q * (p / q).ln(), p, q)
            } else {
                ConePoint::new(0.0, p, 0.0)
            }
        })
        .collect();
    let worst = model
        .residual(&w)
        .iter()
        .take(model.num_marginal_rows())
        .fold(0.0_f64, |a, r| a.max(r.abs()));
    if worst > EMBED_TOL {
        return Err(Error::InfeasiblePoint(format!(
            "marginal residual {worst:e} exceeds {EMBED_TOL:e}"
        )));
    }
    Ok(w)
}
