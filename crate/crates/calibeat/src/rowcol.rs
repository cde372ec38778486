//! Weighted row/column/overall averages of concave functions on a matrix of
//! points, the constancy predicates, the universality equivalence harness,
//! and the calibeating snapshot built on top of them.
//!
//! Given points `x_ij ∈ R^m` with weights `w_ij` (summing to one), define
//! `E(F) = Σ w_ij F(x_ij)`, `R(F) = Σ w_i· F(r_i)` over row averages, and
//! `C(F) = Σ w_·j F(c_j)` over column averages.  Concavity gives
//! `C ≥ E` and `R ≥ E` always; whether `C(Q) ≤ R(Q)` for the quadratic
//! `Q(z) = −‖z‖²` forces `C(F) ≤ R(F)` for *every* concave `F` depends on
//! the structure of the matrix: for non-row-constant matrices with more
//! than two distinct entries it happens exactly when the matrix is
//! column-constant.  The calibeating translation keys rows by reference
//! bins, columns by forecast bins, entries by per-bin action averages, and
//! `F` by scoring-rule entropies.

use crate::error::{Error, Result};
use crate::sampling;
use crate::scoring::ScoringRule;
use crate::simplex::{ActionSet, Dist};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Equality tolerance for float comparisons of the functionals.
pub const EQ_TOL: f64 = 1e-9;
/// Hypothesis slack when testing `C(Q) ≤ R(Q)`.
pub const HYP_TOL: f64 = 1e-12;

/// An `I×J` matrix of `R^m` points with a weight matrix summing to one.
#[derive(Clone, Debug)]
pub struct WeightedMatrix {
    points: Vec<Vec<Vec<f64>>>,
    weights: Vec<Vec<f64>>,
    dim: usize,
}

impl WeightedMatrix {
    pub fn new(points: Vec<Vec<Vec<f64>>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let rows = points.len();
        if rows == 0 || weights.len() != rows {
            return Err(Error::LengthMismatch(weights.len(), rows));
        }
        let cols = points[0].len();
        let dim = points[0].first().map(|p| p.len()).unwrap_or(0);
        if cols == 0 || dim == 0 {
            return Err(Error::EmptyInput);
        }
        let mut total = 0.0;
        for (xr, wr) in points.iter().zip(&weights) {
            if xr.len() != cols || wr.len() != cols {
                return Err(Error::LengthMismatch(xr.len(), cols));
            }
            for (x, &w) in xr.iter().zip(wr) {
                if x.len() != dim {
                    return Err(Error::LengthMismatch(x.len(), dim));
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight { index: 0, value: w.to_string() });
                }
                total += w;
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::MassNotOne { mass: total.to_string(), tolerance: 1e-12 });
        }
        Ok(WeightedMatrix { points, weights, dim })
    }

    /// Scalar entries (m = 1).
    pub fn scalar(points: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        WeightedMatrix::new(
            points.into_iter().map(|r| r.into_iter().map(|x| vec![x]).collect()).collect(),
            weights,
        )
    }

    pub fn rows(&self) -> usize {
        self.points.len()
    }

    pub fn cols(&self) -> usize {
        self.points[0].len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize, j: usize) -> &[f64] {
        &self.points[i][j]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    pub fn row_weight(&self, i: usize) -> f64 {
        self.weights[i].iter().sum()
    }

    pub fn col_weight(&self, j: usize) -> f64 {
        self.weights.iter().map(|r| r[j]).sum()
    }

    /// Weighted row average `r_i`; `None` for zero-weight rows.
    pub fn row_average(&self, i: usize) -> Option<Vec<f64>> {
        let wi = self.row_weight(i);
        if wi <= 0.0 {
            return None;
        }
        let mut avg = vec![0.0; self.dim];
        for (x, &w) in self.points[i].iter().zip(&self.weights[i]) {
            for (a, v) in avg.iter_mut().zip(x) {
                *a += w * v;
            }
        }
        for a in avg.iter_mut() {
            *a /= wi;
        }
        Some(avg)
    }

    /// Weighted column average `c_j`; `None` for zero-weight columns.
    pub fn col_average(&self, j: usize) -> Option<Vec<f64>> {
        let wj = self.col_weight(j);
        if wj <= 0.0 {
            return None;
        }
        let mut avg = vec![0.0; self.dim];
        for (xr, wr) in self.points.iter().zip(&self.weights) {
            for (a, v) in avg.iter_mut().zip(&xr[j]) {
                *a += wr[j] * v;
            }
        }
        for a in avg.iter_mut() {
            *a /= wj;
        }
        Some(avg)
    }

    /// Positive-weight column averages (the candidate hull for row
    /// averages).
    pub fn support_col_averages(&self) -> Vec<Vec<f64>> {
        (0..self.cols()).filter_map(|j| self.col_average(j)).collect()
    }

    pub fn with_weights(&self, weights: Vec<Vec<f64>>) -> Result<Self> {
        WeightedMatrix::new(self.points.clone(), weights)
    }
}

/// Concave test functions.
#[derive(Clone, Debug)]
pub enum ConcaveFn {
    /// `Q(z) = −‖z‖²`, the strict witness.
    Quadratic,
    /// `Q(z) − n · max(v·z − α, 0)²`: flat on the half-space `v·z ≤ α`,
    /// steeply penalized beyond it.
    Hinge { v: Vec<f64>, alpha: f64, n: f64 },
    /// Smooth entropy-like `−√(1 + ‖z‖²)` with gradient bounded by 1.
    SoftNorm,
    /// Affine functions satisfy `C = E = R` identically.
    Affine { coeffs: Vec<f64>, constant: f64 },
    /// Entropy of a proper scoring rule evaluated on simplex points.
    RuleEntropy(Box<ScoringRule<f64>>),
}

impl ConcaveFn {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            ConcaveFn::Quadratic => -z.iter().map(|v| v * v).sum::<f64>(),
            ConcaveFn::Hinge { v, alpha, n } => {
                let q = -z.iter().map(|x| x * x).sum::<f64>();
                let h = (dot(v, z) - alpha).max(0.0);
                q - n * h * h
            }
            ConcaveFn::SoftNorm => -(1.0 + z.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            ConcaveFn::Affine { coeffs, constant } => dot(coeffs, z) + constant,
            ConcaveFn::RuleEntropy(rule) => {
                let d = simplex_point(rule.action_set(), z);
                rule.entropy(&d)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            ConcaveFn::Quadratic => "quadratic".into(),
            ConcaveFn::Hinge { n, .. } => format!("hinge:n={n}"),
            ConcaveFn::SoftNorm => "softnorm".into(),
            ConcaveFn::Affine { .. } => "affine".into(),
            ConcaveFn::RuleEntropy(r) => format!("entropy({})", r.id()),
        }
    }

    /// Midpoint concavity on seeded segments within the hull of the matrix
    /// entries.
    pub fn concavity_tested(&self, wm: &WeightedMatrix, segments: usize, seed: u64) -> bool {
        let mut rng = sampling::seeded_rng(seed);
        let hull_sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut z = vec![0.0; wm.dim()];
            let mut total = 0.0;
            for i in 0..wm.rows() {
                for j in 0..wm.cols() {
                    let w: f64 = rng.random_range(0.0..1.0);
                    total += w;
                    for (zk, xk) in z.iter_mut().zip(wm.point(i, j)) {
                        *zk += w * xk;
                    }
                }
            }
            for zk in z.iter_mut() {
                *zk /= total;
            }
            z
        };
        for _ in 0..segments {
            let x = hull_sample(&mut rng);
            let y = hull_sample(&mut rng);
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a + b) / 2.0).collect();
            if self.eval(&mid) < (self.eval(&x) + self.eval(&y)) / 2.0 - 1e-10 {
                return false;
            }
        }
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Clamp a coordinate vector onto the simplex of `actions` (used when the
/// averaging introduces float drift of order 1e-16).
fn simplex_point(actions: &ActionSet, z: &[f64]) -> Dist<f64> {
    let mut w: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    Dist::new(actions, w).expect("renormalized point is on the simplex")
}

/// The three averaging functionals `(E, R, C)` of `F` under the weights.
/// Zero-weight rows and columns are skipped (their averages never matter).
pub fn functionals(wm: &WeightedMatrix, f: &ConcaveFn) -> (f64, f64, f64) {
    let mut e = 0.0;
    for i in 0..wm.rows() {
        for j in 0..wm.cols() {
            let w = wm.weight(i, j);
            if w > 0.0 {
                e += w * f.eval(wm.point(i, j));
            }
        }
    }
    let mut r = 0.0;
    for i in 0..wm.rows() {
        if let Some(ri) = wm.row_average(i) {
            r += wm.row_weight(i) * f.eval(&ri);
        }
    }
    let mut c = 0.0;
    for j in 0..wm.cols() {
        if let Some(cj) = wm.col_average(j) {
            c += wm.col_weight(j) * f.eval(&cj);
        }
    }
    (e, r, c)
}

/// Constancy predicates of the matrix, on the weight support and overall.
#[derive(Clone, Debug, PartialEq)]
pub struct Constancy {
    pub w_column_constant: bool,
    pub w_row_constant: bool,
    pub column_constant: bool,
    pub row_constant: bool,
    /// More than two distinct entries.
    pub nondegenerate: bool,
    pub distinct_entries: usize,
}

fn points_equal(a: &[f64], b: &[f64], tol: f64) -> bool {
    if tol == 0.0 {
        a == b
    } else {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }
}

/// Compute the constancy predicates at the given entry-equality tolerance
/// (0.0 compares exactly).
pub fn constancy(wm: &WeightedMatrix, tol: f64) -> Constancy {
    let (rows, cols) = (wm.rows(), wm.cols());
    let mut w_col = true;
    let mut col = true;
    for j in 0..cols {
        for i in 0..rows {
            for i2 in (i + 1)..rows {
                let eq = points_equal(wm.point(i, j), wm.point(i2, j), tol);
                if !eq {
                    col = false;
                    if wm.weight(i, j) > 0.0 && wm.weight(i2, j) > 0.0 {
                        w_col = false;
                    }
                }
            }
        }
    }
    let mut w_row = true;
    let mut row = true;
    for i in 0..rows {
        for j in 0..cols {
            for j2 in (j + 1)..cols {
                let eq = points_equal(wm.point(i, j), wm.point(i, j2), tol);
                if !eq {
                    row = false;
                    if wm.weight(i, j) > 0.0 && wm.weight(i, j2) > 0.0 {
                        w_row = false;
                    }
                }
            }
        }
    }
    let mut distinct: Vec<&[f64]> = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let p = wm.point(i, j);
            if !distinct.iter().any(|q| points_equal(q, p, tol)) {
                distinct.push(p);
            }
        }
    }
    Constancy {
        w_column_constant: w_col,
        w_row_constant: w_row,
        column_constant: col,
        row_constant: row,
        nondegenerate: distinct.len() > 2,
        distinct_entries: distinct.len(),
    }
}

/// Squared distance from `r` to the convex hull of `pts`, by exhaustive
/// Carathéodory subsets (exact up to the small linear solves).
pub fn dist_to_hull_sq(r: &[f64], pts: &[Vec<f64>]) -> f64 {
    let m = r.len();
    let k_max = (m + 1).min(pts.len());
    let mut best = f64::INFINITY;
    let n = pts.len();
    // iterate subsets of size 1..=k_max
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > k_max {
            continue;
        }
        let subset: Vec<&Vec<f64>> =
            (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| &pts[i]).collect();
        if let Some(d2) = project_onto_affine_nonneg(r, &subset) {
            best = best.min(d2);
        }
    }
    best
}

/// Projection of `r` onto the affine hull of `pts` if the barycentric
/// coordinates are (numerically) nonnegative; returns the squared distance.
fn project_onto_affine_nonneg(r: &[f64], pts: &[&Vec<f64>]) -> Option<f64> {
    let k = pts.len();
    if k == 1 {
        return Some(sq_dist(r, pts[0]));
    }
    // Solve for μ in the (k−1)-dim system: minimize ‖p0 + Σ μ_l (p_l − p0) − r‖².
    let p0 = pts[0];
    let dims = r.len();
    let basis: Vec<Vec<f64>> = pts[1..]
        .iter()
        .map(|p| (0..dims).map(|d| p[d] - p0[d]).collect())
        .collect();
    let rhs_vec: Vec<f64> = (0..dims).map(|d| r[d] - p0[d]).collect();
    let kk = k - 1;
    let mut gram = vec![vec![0.0; kk]; kk];
    let mut rhs = vec![0.0; kk];
    for a in 0..kk {
        for b in 0..kk {
            gram[a][b] = dot(&basis[a], &basis[b]);
        }
        rhs[a] = dot(&basis[a], &rhs_vec);
    }
    let mu = gauss_solve(gram, rhs)?;
    let lam0 = 1.0 - mu.iter().sum::<f64>();
    if lam0 < -1e-12 || mu.iter().any(|&l| l < -1e-12) {
        return None;
    }
    let mut proj = p0.clone();
    for (l, b) in mu.iter().zip(&basis) {
        for (pd, bd) in proj.iter_mut().zip(b) {
            *pd += l * bd;
        }
    }
    Some(sq_dist(r, &proj))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for c2 in col..n {
                a[row][c2] -= f * a[col][c2];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c2 in (row + 1)..n {
            s -= a[row][c2] * x[c2];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Report of the averaging inequalities and their equality cases.
#[derive(Clone, Debug)]
pub struct AveragingReport {
    pub e: f64,
    pub r: f64,
    pub c: f64,
    /// `C ≥ E` and `R ≥ E`.
    pub inequalities_hold: bool,
    /// `W`-column-constant ⇒ `C = E`, `W`-row-constant ⇒ `R = E`.
    pub equality_under_constancy: bool,
    /// With the strictly concave quadratic: `C = E` ⇔ `W`-column-constant
    /// and `R = E` ⇔ `W`-row-constant (both directions on this instance).
    pub strict_biconditional: bool,
}

/// Check `C(F) ≥ E(F)`, `R(F) ≥ E(F)` and the equality characterizations,
/// using the quadratic as the strict witness.
pub fn averaging_inequality_check(wm: &WeightedMatrix, f: &ConcaveFn) -> AveragingReport {
    let (e, r, c) = functionals(wm, f);
    let inequalities_hold = c >= e - EQ_TOL && r >= e - EQ_TOL;
    let cons = constancy(wm, 0.0);
    let mut equality_under_constancy = true;
    if cons.w_column_constant && (c - e).abs() > EQ_TOL {
        equality_under_constancy = false;
    }
    if cons.w_row_constant && (r - e).abs() > EQ_TOL {
        equality_under_constancy = false;
    }
    let (eq, rq, cq) = functionals(wm, &ConcaveFn::Quadratic);
    let strict_biconditional = ((cq - eq).abs() <= EQ_TOL) == cons.w_column_constant
        && ((rq - eq).abs() <= EQ_TOL) == cons.w_row_constant;
    AveragingReport { e, r, c, inequalities_hold, equality_under_constancy, strict_biconditional }
}

/// Which construction produced the counterexample weights.
#[derive(Clone, Debug, PartialEq)]
pub enum CounterexampleCase {
    /// Third entry off the open segment `(a, b)`: nearly-uniform weights on
    /// the top row plus a sliver `ε` on the stray entry.
    OffSegment { epsilon: f64 },
    /// Third entry strictly inside `(a, b)` at parameter `δ`:
    /// `R(Q) − C(Q) = ‖a−b‖² δ(1−δ)(1+2δ)/(6(2+δ))`.
    OnSegment { delta: f64, predicted_r_minus_c: f64 },
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub weights: WeightedMatrix,
    pub case: CounterexampleCase,
    /// Index of the positive-weight row whose average falls outside the
    /// hull of the column averages.
    pub outside_row: usize,
    /// A hinge function witnessing the violation `C(F) > R(F)`.
    pub violating_hinge: ConcaveFn,
}

/// For a 2×2 matrix with three distinct entries `a, b` (top row) and `d`
/// (bottom-left; the fourth entry gets weight zero), construct weights `W`
/// with `C_W(Q) ≤ R_W(Q)` and a positive-weight row average outside the
/// hull of the column averages, plus a concave hinge showing that
/// `C_W(F) ≤ R_W(F)` fails.
pub fn counterexample_weights(x: &WeightedMatrix) -> Result<Counterexample> {
    if x.rows() != 2 || x.cols() != 2 {
        return Err(Error::LengthMismatch(x.rows(), 2));
    }
    let a = x.point(0, 0).to_vec();
    let b = x.point(0, 1).to_vec();
    let d = x.point(1, 0).to_vec();
    if points_equal(&a, &b, 0.0) || points_equal(&a, &d, 0.0) || points_equal(&b, &d, 0.0) {
        return Err(Error::DegenerateMatrix(2));
    }
    // Classify d against the open segment (a, b).
    let ab_sq = sq_dist(&a, &b);
    let t = (0..a.len()).map(|k| (d[k] - b[k]) * (a[k] - b[k])).sum::<f64>() / ab_sq;
    let on_line_dist_sq = {
        let proj: Vec<f64> = (0..a.len()).map(|k| b[k] + t * (a[k] - b[k])).collect();
        sq_dist(&d, &proj)
    };
    let collinear = on_line_dist_sq < 1e-18;
    let near_line = on_line_dist_sq < 1e-12;
    if near_line && !collinear {
        return Err(Error::CollinearityMisclassified(format!("{d:?}")));
    }
    let interior = collinear && t > 1e-9 && t < 1.0 - 1e-9;
    if collinear && !interior && (t.abs() < 1e-9 || (t - 1.0).abs() < 1e-9) {
        return Err(Error::CollinearityMisclassified(format!("{d:?}")));
    }

    let build = |w: Vec<Vec<f64>>| x.with_weights(w);
    let (wm, case, outside_row) = if interior {
        let delta = t;
        let z = 1.0 / (3.0 * (1.0 + delta));
        let wm = build(vec![
            vec![z * (1.0 + 2.0 * delta), z * (1.0 - delta)],
            vec![z * (1.0 + 2.0 * delta), 0.0],
        ])?;
        let predicted = ab_sq * delta * (1.0 - delta) * (1.0 + 2.0 * delta)
            / (6.0 * (2.0 + delta));
        (wm, CounterexampleCase::OnSegment { delta, predicted_r_minus_c: predicted }, 0)
    } else {
        // Shrink ε until the quadratic hypothesis holds and the stray row
        // average clears the hull by a margin.
        let mut chosen = None;
        let mut eps = 0.25;
        for _ in 0..40 {
            let wm = build(vec![
                vec![(1.0 - eps) / 2.0, (1.0 - eps) / 2.0],
                vec![eps, 0.0],
            ])?;
            let (_, rq, cq) = functionals(&wm, &ConcaveFn::Quadratic);
            let cols = wm.support_col_averages();
            let clear = dist_to_hull_sq(&d, &cols);
            if cq < rq - 1e-12 && clear > 1e-10 {
                chosen = Some((wm, eps));
                break;
            }
            eps /= 2.0;
        }
        let (wm, eps) = chosen.ok_or_else(|| {
            Error::CollinearityMisclassified("no ε separates the stray entry".into())
        })?;
        (wm, CounterexampleCase::OffSegment { epsilon: eps }, 1)
    };

    // Hinge separating the outside row average from the column hull.
    let r_out = wm.row_average(outside_row).expect("positive row weight");
    let cols = wm.support_col_averages();
    let hinge = separating_hinge(&wm, &r_out, &cols, outside_row)
        .ok_or_else(|| Error::CollinearityMisclassified("row average not separated".into()))?;

    // Sanity: the hypothesis holds and the hinge violates the conclusion.
    let (_, rq, cq) = functionals(&wm, &ConcaveFn::Quadratic);
    debug_assert!(cq <= rq + HYP_TOL);
    let (_, rf, cf) = functionals(&wm, &hinge);
    debug_assert!(cf > rf, "hinge must flip the inequality");

    Ok(Counterexample { weights: wm, case, outside_row, violating_hinge: hinge })
}

/// Build a hinge `Q(z) − n(max(v·z − α, 0))²` that leaves every column
/// average untouched but penalizes the given row average enough to flip
/// `C ≤ R`, with `n` chosen from the current functional gap.
fn separating_hinge(
    wm: &WeightedMatrix,
    r_out: &[f64],
    cols: &[Vec<f64>],
    outside_row: usize,
) -> Option<ConcaveFn> {
    // v points from the hull toward r_out; the exhaustive projection gives
    // the closest hull point.
    let mut best: Option<Vec<f64>> = None;
    let mut best_d = f64::INFINITY;
    let m = r_out.len();
    let k_max = (m + 1).min(cols.len());
    for mask in 1u32..(1u32 << cols.len()) {
        if (mask.count_ones() as usize) > k_max {
            continue;
        }
        let subset: Vec<&Vec<f64>> = (0..cols.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| &cols[i])
            .collect();
        if let Some(d2) = project_onto_affine_nonneg(r_out, &subset) {
            if d2 < best_d {
                best_d = d2;
                // recompute the projection point
                best = Some(projection_point(r_out, &subset));
            }
        }
    }
    let p = best?;
    if best_d <= 1e-12 {
        return None;
    }
    let v: Vec<f64> = r_out.iter().zip(&p).map(|(r, q)| r - q).collect();
    let alpha = dot(&v, &p) + dot(&v, &v) / 2.0;
    let gap = dot(&v, r_out) - alpha; // = ‖v‖²/2 > 0
    let (_, rq, cq) = functionals(wm, &ConcaveFn::Quadratic);
    let w_row = wm.row_weight(outside_row);
    // need R(F) < C(F): R drops by n·w_row·gap² relative to R(Q)
    let n = ((rq - cq) / (w_row * gap * gap)).max(0.0) * 2.0 + 1.0;
    Some(ConcaveFn::Hinge { v, alpha, n })
}

fn projection_point(r: &[f64], pts: &[&Vec<f64>]) -> Vec<f64> {
    if pts.len() == 1 {
        return pts[0].clone();
    }
    let p0 = pts[0];
    let dims = r.len();
    let basis: Vec<Vec<f64>> = pts[1..]
        .iter()
        .map(|p| (0..dims).map(|d| p[d] - p0[d]).collect())
        .collect();
    let rhs_vec: Vec<f64> = (0..dims).map(|d| r[d] - p0[d]).collect();
    let kk = pts.len() - 1;
    let mut gram = vec![vec![0.0; kk]; kk];
    let mut rhs = vec![0.0; kk];
    for a in 0..kk {
        for b in 0..kk {
            gram[a][b] = dot(&basis[a], &basis[b]);
        }
        rhs[a] = dot(&basis[a], &rhs_vec);
    }
    let mu = gauss_solve(gram, rhs).unwrap_or_else(|| vec![0.0; kk]);
    let mut proj = p0.clone();
    for (l, b) in mu.iter().zip(&basis) {
        for (pd, bd) in proj.iter_mut().zip(b) {
            *pd += l * bd;
        }
    }
    proj
}

/// Sample a fully-supported Dirichlet-style weight matrix.
pub fn sample_weights(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; cols]; rows];
    let mut total = 0.0;
    for row in w.iter_mut() {
        for x in row.iter_mut() {
            let u: f64 = rng.random_range(1e-9..1.0);
            *x = -u.ln();
            total += *x;
        }
    }
    for row in w.iter_mut() {
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    w
}

/// Sample weights with a random support pattern (each cell dropped with
/// probability one half); degenerate supports are where the equality cases
/// of the averaging inequalities live.
pub fn sample_sparse_weights(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut w = sample_weights(rows, cols, rng);
    let mut kept = 0.0;
    for row in w.iter_mut() {
        for x in row.iter_mut() {
            if rng.random_range(0.0..1.0) < 0.5 {
                *x = 0.0;
            } else {
                kept += *x;
            }
        }
    }
    if kept <= 0.0 {
        let i = rng.random_range(0..rows);
        let j = rng.random_range(0..cols);
        w[i][j] = 1.0;
        return w;
    }
    for row in w.iter_mut() {
        for x in row.iter_mut() {
            *x /= kept;
        }
    }
    w
}

/// Verdict of the randomized universality harness over sampled weight
/// matrices.
#[derive(Clone, Debug)]
pub struct UniversalityVerdict {
    pub constancy: Constancy,
    pub trials: usize,
    /// Sampled weights where the hypothesis `C(Q) ≤ R(Q)` held.
    pub hypothesis_hits: usize,
    /// Hypothesis hits where `C(Q) = E(Q)` failed.
    pub u2_violations: usize,
    /// Hypothesis hits where some battery function broke `C = E ≤ R`.
    pub u3_violations: usize,
    /// A targeted violating weight matrix, when the theory predicts one.
    pub targeted: Option<Counterexample>,
    /// Whether the observations match the predicted equivalence.
    pub consistent: bool,
}

/// Randomized falsification of the universality equivalences: sample
/// weights, and whenever `C(Q) ≤ R(Q)` check `C(Q) = E(Q)` and the concave
/// battery; for non-column-constant matrices additionally search 2×2
/// submatrices with three distinct entries for a targeted counterexample.
pub fn universality_check(
    x: &WeightedMatrix,
    trials: usize,
    seed: u64,
    allow_degenerate: bool,
) -> Result<UniversalityVerdict> {
    let cons = constancy(x, 0.0);
    if !cons.nondegenerate && !allow_degenerate {
        return Err(Error::DegenerateMatrix(cons.distinct_entries));
    }
    let mut rng = sampling::seeded_rng(seed);
    let battery = [ConcaveFn::Quadratic, ConcaveFn::SoftNorm];
    let mut hits = 0usize;
    let mut u2 = 0usize;
    let mut u3 = 0usize;
    for trial in 0..trials {
        let w = if trial % 2 == 0 {
            sample_weights(x.rows(), x.cols(), &mut rng)
        } else {
            sample_sparse_weights(x.rows(), x.cols(), &mut rng)
        };
        let wm = x.with_weights(w)?;
        let (eq, rq, cq) = functionals(&wm, &ConcaveFn::Quadratic);
        if cq > rq + HYP_TOL {
            continue;
        }
        hits += 1;
        let violated2 = (cq - eq).abs() > EQ_TOL;
        let mut violated3 = violated2;
        for f in &battery {
            let (ef, rf, cf) = functionals(&wm, f);
            if (cf - ef).abs() > EQ_TOL || cf > rf + EQ_TOL {
                violated3 = true;
            }
        }
        // Hinges aimed at each positive-weight row average outside the hull.
        if !violated3 {
            let cols = wm.support_col_averages();
            for i in 0..wm.rows() {
                if wm.row_weight(i) <= 0.0 {
                    continue;
                }
                let ri = wm.row_average(i).unwrap();
                if dist_to_hull_sq(&ri, &cols) > 1e-10 {
                    if let Some(h) = separating_hinge(&wm, &ri, &cols, i) {
                        let (ef, rf, cf) = functionals(&wm, &h);
                        if (cf - ef).abs() > EQ_TOL || cf > rf + EQ_TOL {
                            violated3 = true;
                            break;
                        }
                    }
                }
            }
        }
        if violated2 {
            u2 += 1;
            violated3 = true;
        }
        if violated3 {
            u3 += 1;
        }
    }

    // Targeted construction on 2×2 submatrices with three distinct entries.
    let mut targeted = None;
    if !cons.column_constant {
        'outer: for i in 0..x.rows() {
            for i2 in (i + 1)..x.rows() {
                for j in 0..x.cols() {
                    for j2 in 0..x.cols() {
                        if j == j2 {
                            continue;
                        }
                        let a = x.point(i, j).to_vec();
                        let b = x.point(i, j2).to_vec();
                        let d = x.point(i2, j).to_vec();
                        if points_equal(&a, &b, 0.0)
                            || points_equal(&a, &d, 0.0)
                            || points_equal(&b, &d, 0.0)
                        {
                            continue;
                        }
                        let sub = WeightedMatrix::new(
                            vec![
                                vec![a.clone(), b.clone()],
                                vec![d.clone(), x.point(i2, j2).to_vec()],
                            ],
                            vec![vec![0.5, 0.5], vec![0.0, 0.0]],
                        )?;
                        if let Ok(ce) = counterexample_weights(&sub) {
                            targeted = Some(ce);
                            break 'outer;
                        }
                    }
                }
            }
        }
    }

    // Predicted behavior: column-constant ⇒ no violations ever;
    // row-constant ⇒ sampled hypothesis hits all satisfy the chain;
    // otherwise (nondegenerate) violations must exist (targeted search).
    let consistent = if cons.column_constant {
        u2 == 0 && u3 == 0
    } else if cons.row_constant {
        u2 == 0 && u3 == 0
    } else if cons.nondegenerate {
        targeted.is_some() || u2 > 0 || u3 > 0
    } else {
        true
    };

    Ok(UniversalityVerdict {
        constancy: cons,
        trials,
        hypothesis_hits: hits,
        u2_violations: u2,
        u3_violations: u3,
        targeted,
        consistent,
    })
}

/// Per-rule flags of a calibeating snapshot.
#[derive(Clone, Debug)]
pub struct SnapshotReport {
    pub e_q: f64,
    pub r_q: f64,
    pub c_q: f64,
    /// `C(Q) ≤ R(Q)`: the calibrated forecast built from the column
    /// averages calibeats the row forecaster under the quadratic rule.
    pub calibeats: bool,
    /// `C(Q) = E(Q)`: it also calibeats the joint binning.
    pub calibeats_joint: bool,
    /// `C(H) ≤ R(H)` for every entropy in the battery.
    pub proper_calibeats: bool,
    pub per_rule: Vec<(String, bool)>,
}

/// Snapshot of a calibeating history: rows are reference bins, columns are
/// forecast bins, entries are per-joint-bin action averages, weights are
/// bin frequencies.  The implied forecast is perfectly calibrated
/// (`c_j` = column average), so the quadratic comparison `C(Q) ≤ R(Q)` is
/// exactly "calibeats", `C(Q) = E(Q)` is "calibeats the joint", and the
/// entropies decide "proper-calibeats".
pub fn calibeating_snapshot(
    action_averages: &[Vec<Dist<f64>>],
    frequencies: &[Vec<f64>],
    rules: &[ScoringRule<f64>],
) -> Result<SnapshotReport> {
    let points: Vec<Vec<Vec<f64>>> = action_averages
        .iter()
        .map(|row| row.iter().map(|d| d.weights().to_vec()).collect())
        .collect();
    let wm = WeightedMatrix::new(points, frequencies.to_vec())?;
    let (eq, rq, cq) = functionals(&wm, &ConcaveFn::Quadratic);
    let calibeats = cq <= rq + HYP_TOL;
    let calibeats_joint = (cq - eq).abs() <= EQ_TOL;
    let mut per_rule = Vec::new();
    let mut proper = true;
    for rule in rules {
        let f = ConcaveFn::RuleEntropy(Box::new(rule.clone()));
        let (_, rf, cf) = functionals(&wm, &f);
        let ok = cf <= rf + HYP_TOL;
        per_rule.push((rule.id().to_string(), ok));
        proper &= ok;
    }
    // The hinge battery catches failures outside the named rules.
    if proper {
        let cols = wm.support_col_averages();
        for i in 0..wm.rows() {
            if wm.row_weight(i) <= 0.0 {
                continue;
            }
            let ri = wm.row_average(i).unwrap();
            if dist_to_hull_sq(&ri, &cols) > 1e-10 {
                if let Some(h) = separating_hinge(&wm, &ri, &cols, i) {
                    let (_, rf, cf) = functionals(&wm, &h);
                    if cf > rf + EQ_TOL {
                        proper = false;
                        per_rule.push((h.name(), false));
                        break;
                    }
                }
            }
        }
    }
    Ok(SnapshotReport {
        e_q: eq,
        r_q: rq,
        c_q: cq,
        calibeats,
        calibeats_joint,
        proper_calibeats: proper,
        per_rule,
    })
}

/// Sweep seeded frequency matrices over a fixed matrix of action averages
/// and report whether "calibeat without joint" and "calibeat without
/// proper" co-occur across the sweep (they are predicted to appear together
/// or not at all for nondegenerate matrices).
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub trials: usize,
    pub calibeat_count: usize,
    pub calibeat_not_joint: usize,
    pub calibeat_not_proper: usize,
    pub equivalence_ok: bool,
    /// One λ exhibiting calibeat-without-joint, flattened row-major.
    pub witness_not_joint: Option<Vec<f64>>,
    /// One λ exhibiting calibeat-without-proper.
    pub witness_not_proper: Option<Vec<f64>>,
}

pub fn snapshot_sweep(
    action_averages: &[Vec<Dist<f64>>],
    rules: &[ScoringRule<f64>],
    trials: usize,
    seed: u64,
) -> Result<SweepOutcome> {
    let rows = action_averages.len();
    let cols = action_averages.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = sampling::seeded_rng(seed);
    let mut calibeat_count = 0;
    let mut not_joint = 0;
    let mut not_proper = 0;
    let mut witness_not_joint = None;
    let mut witness_not_proper = None;
    for _ in 0..trials {
        let w = sample_weights(rows, cols, &mut rng);
        let rep = calibeating_snapshot(action_averages, &w, rules)?;
        if !rep.calibeats {
            continue;
        }
        calibeat_count += 1;
        let flat: Vec<f64> = w.iter().flatten().copied().collect();
        if !rep.calibeats_joint {
            not_joint += 1;
            if witness_not_joint.is_none() {
                witness_not_joint = Some(flat.clone());
            }
        }
        if !rep.proper_calibeats {
            not_proper += 1;
            if witness_not_proper.is_none() {
                witness_not_proper = Some(flat);
            }
        }
    }
    Ok(SweepOutcome {
        trials,
        calibeat_count,
        calibeat_not_joint: not_joint,
        calibeat_not_proper: not_proper,
        equivalence_ok: (not_joint > 0) == (not_proper > 0),
        witness_not_joint,
        witness_not_proper,
    })
}
