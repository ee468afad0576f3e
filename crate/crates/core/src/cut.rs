//! Two-way MAXCUT partitioning from the top eigenvector of the symmetric
//! Laplacian, with cut evaluation, spectral bounds and an exhaustive oracle.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, sym_laplacian, Graph};
use crate::linalg::{
    canonicalize_sign, dot, jacobi_eigh, power_iteration, Matrix, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL,
};
use crate::rng;

/// Random cut expectation; the lower bound on `MAXCUT / |E|`.
pub const RANDOM_CUT_FRACTION: f64 = 0.5;

/// Optimal `τ` in the recursive spectral guarantee.
pub const TREVISAN_TAU: f64 = 0.0549;

/// Largest graph [`brute_force_maxcut`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 22;

/// `2(1 − τ)`: below this `λ^s_max` the spectral cut is no longer guaranteed to
/// beat a random one.
pub fn trevisan_threshold() -> f64 {
    2.0 * (1.0 - TREVISAN_TAU)
}

/// Approximation ratio of the recursive spectral scheme for a given `τ`.
pub fn trevisan_ratio(tau: f64) -> f64 {
    (1.0 - 4.0 * tau.sqrt() + 8.0 * tau) / (1.0 - tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMethod {
    Spectral,
    Random,
}

impl fmt::Display for CutMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutMethod::Spectral => "spectral",
            CutMethod::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// `+1` for kept nodes (V⁺), `−1` for dropped ones (V⁻).
    pub assignment: Vec<i8>,
    pub keep: Vec<usize>,
    pub drop: Vec<usize>,
    pub gamma: f64,
    pub method: CutMethod,
    /// Largest eigenvalue of `L_s`, when it was computed along the way.
    pub lambda_s_max: Option<f64>,
}

impl Partition {
    fn from_assignment(g: &Graph, assignment: Vec<i8>, method: CutMethod, lambda_s_max: Option<f64>) -> Self {
        let keep = (0..assignment.len()).filter(|&i| assignment[i] > 0).collect();
        let drop = (0..assignment.len()).filter(|&i| assignment[i] < 0).collect();
        let gamma = cut_fraction_unchecked(g, &assignment);
        Partition {
            assignment,
            keep,
            drop,
            gamma,
            method,
            lambda_s_max,
        }
    }

    /// The same cut with V⁺ and V⁻ swapped.
    pub fn flipped(&self) -> Partition {
        Partition {
            assignment: self.assignment.iter().map(|z| -z).collect(),
            keep: self.drop.clone(),
            drop: self.keep.clone(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutReport {
    pub gamma: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub trevisan_ok: bool,
    pub lambda_s_max: f64,
}

/// Fraction of edge weight crossing the partition,
/// `γ(z) = zᵀLz / (2 Σ_ij a_ij)`; zero for a graph without edges.
pub fn cut_fraction(g: &Graph, assignment: &[i8]) -> Result<f64> {
    if assignment.len() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "assignment of length {} for {} nodes",
            assignment.len(),
            g.n()
        )));
    }
    if let Some(z) = assignment.iter().find(|&&z| z != 1 && z != -1) {
        return Err(Error::InvalidArgument(format!(
            "assignment entry {z} not in {{+1, -1}}"
        )));
    }
    Ok(cut_fraction_unchecked(g, assignment))
}

fn cut_fraction_unchecked(g: &Graph, z: &[i8]) -> f64 {
    let total = g.total_weight();
    if total <= 0.0 {
        return 0.0;
    }
    // zᵀLz = Σ_{i<j} a_ij (z_i − z_j)² = 4 · crossing weight; summing the
    // crossing weight directly keeps integer-weighted graphs exact.
    let mut crossing = 0.0;
    for i in 0..g.n() {
        for (j, &w) in g.adjacency().row(i).iter().enumerate().skip(i + 1) {
            if z[i] != z[j] {
                crossing += w;
            }
        }
    }
    4.0 * crossing / (2.0 * total)
}

/// `zᵀLz / (2 Σ a_ij)` evaluated literally through the Laplacian quadratic form.
pub fn cut_fraction_quadratic(g: &Graph, assignment: &[i8]) -> f64 {
    let total = g.total_weight();
    if total <= 0.0 {
        return 0.0;
    }
    let z: Vec<f64> = assignment.iter().map(|&x| f64::from(x)).collect();
    let lz = laplacian(g).mul_vec(&z).expect("matching length");
    dot(&z, &lz) / (2.0 * total)
}

/// Dominant eigenpair of a symmetric PSD matrix: power iteration first, the
/// full Jacobi solve when it fails to converge.
pub(crate) fn top_eigenpair(m: &Matrix) -> Result<(f64, Vec<f64>)> {
    match power_iteration(m, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER, 0) {
        Ok(p) => Ok((p.value, p.vector)),
        Err(Error::NoConvergence { .. }) => {
            let spec = jacobi_eigh(m)?;
            let mut v = spec.vector(0).unwrap_or_default();
            canonicalize_sign(&mut v);
            Ok((spec.max(), v))
        }
        Err(e) => Err(e),
    }
}

/// Largest eigenvalue of the symmetric Laplacian.
pub fn lambda_s_max(g: &Graph) -> Result<f64> {
    if g.n() == 0 {
        return Err(Error::InvalidGraph("graph has no nodes".into()));
    }
    Ok(top_eigenpair(&sym_laplacian(g))?.0)
}

/// Rounds the top eigenvector of `L_s` to a ±1 partition: nodes with a
/// non-negative entry form V⁺.
///
/// A graph without edges puts every node in V⁺ with `γ = 0`.
pub fn spectral_partition(g: &Graph) -> Result<Partition> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidGraph("graph has no nodes".into()));
    }
    if !g.has_edges() {
        return Ok(Partition::from_assignment(g, vec![1; n], CutMethod::Spectral, None));
    }
    let (lambda, v) = top_eigenpair(&sym_laplacian(g))?;
    let assignment = v.iter().map(|&x| if x >= 0.0 { 1 } else { -1 }).collect();
    Ok(Partition::from_assignment(
        g,
        assignment,
        CutMethod::Spectral,
        Some(lambda),
    ))
}

/// Each node independently `±1` with probability ½.
pub fn random_partition(g: &Graph, seed: u64) -> Partition {
    let mut r = rng::seeded(seed);
    let assignment = (0..g.n()).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
    Partition::from_assignment(g, assignment, CutMethod::Random, None)
}

/// Spectral partition, replaced by a single random draw when its cut fraction
/// is below ½.
pub fn partition_with_fallback(g: &Graph, seed: u64) -> Result<Partition> {
    let spectral = spectral_partition(g)?;
    if !keeps_spectral(spectral.gamma) {
        let mut random = random_partition(g, seed);
        random.lambda_s_max = spectral.lambda_s_max;
        return Ok(random);
    }
    Ok(spectral)
}

/// The spectral cut is kept unless it is strictly worse than a random cut
/// in expectation.
pub fn keeps_spectral(gamma: f64) -> bool {
    gamma >= RANDOM_CUT_FRACTION
}

/// Whether the recursive spectral guarantee applies at this `λ^s_max`, and the
/// approximation ratio it secures (½ otherwise).
pub fn trevisan_guarantee(lambda_s_max: f64) -> Result<(bool, f64)> {
    if !(0.0..=2.0 + 1e-9).contains(&lambda_s_max) {
        return Err(Error::InvalidArgument(format!(
            "λ^s_max must lie in [0, 2], got {lambda_s_max}"
        )));
    }
    if lambda_s_max >= trevisan_threshold() {
        Ok((true, trevisan_ratio(TREVISAN_TAU)))
    } else {
        Ok((false, RANDOM_CUT_FRACTION))
    }
}

/// Bounds and guarantee flags for a given partition.
pub fn evaluate_cut(g: &Graph, partition: &Partition) -> Result<CutReport> {
    if !g.has_edges() {
        return Err(Error::InvalidGraph("cut bounds need at least one edge".into()));
    }
    let lambda = match partition.lambda_s_max {
        Some(l) => l,
        None => lambda_s_max(g)?,
    };
    Ok(CutReport {
        gamma: partition.gamma,
        upper_bound: lambda / 2.0,
        lower_bound: RANDOM_CUT_FRACTION,
        trevisan_ok: lambda >= trevisan_threshold(),
        lambda_s_max: lambda,
    })
}

/// `λ^s_max / 2` upper bound on `MAXCUT / |E|`, reported alongside the plain
/// spectral cut.
pub fn maxcut_upper_bound(g: &Graph) -> Result<CutReport> {
    let p = spectral_partition(g)?;
    evaluate_cut(g, &p)
}

/// Exact maximum cut by enumerating all `2^{n−1}` partitions with node 0
/// pinned to `+1`, walking them in Gray-code order.
pub fn brute_force_maxcut(g: &Graph) -> Result<(Vec<i8>, f64)> {
    let n = g.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let a = g.adjacency();
    let mut z = vec![1i8; n];
    let mut crossing = 0.0f64;
    let mut best = 0.0f64;
    let mut best_z = z.clone();
    let free = n - 1;
    for step in 1u64..(1u64 << free) {
        // Gray code: flip the bit at the lowest set position of `step`.
        let node = step.trailing_zeros() as usize + 1;
        let zi = f64::from(z[node]);
        let mut delta = 0.0;
        for (j, &w) in a.row(node).iter().enumerate() {
            if j != node && w != 0.0 {
                // Same side before the flip → becomes cut; opposite → uncut.
                delta += w * zi * f64::from(z[j]);
            }
        }
        crossing += delta;
        z[node] = -z[node];
        if crossing > best + 1e-12 {
            best = crossing;
            best_z.copy_from_slice(&z);
        }
    }
    let gamma = cut_fraction_unchecked(g, &best_z);
    Ok((best_z, gamma))
}
