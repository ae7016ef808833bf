//! Dense symmetric/general matrix kernels for the log-det cost, whitening,
//! and eigenfunction alignment.
//!
//! Matrices here are small (K x K and 2K x 2K for projection dimension K,
//! plus oracle grids up to a few hundred), so the kernels favor accuracy and
//! determinism over asymptotic speed: Cholesky for log-determinants, cyclic
//! Jacobi for symmetric eigendecomposition, and one-sided Jacobi (Hestenes)
//! for the SVD. All arithmetic is in f64; every function is pure.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Pivot/eigenvalue tolerance below which a matrix counts as not positive
/// definite. The default regularization epsilon (1e-4) sits eight orders of
/// magnitude above this.
pub const PD_TOLERANCE: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Symmetric matrix with packed lower-triangle storage, so that
/// `get(i, j) == get(j, i)` holds exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    // Row-major packed lower triangle: (i, j) with i >= j at i*(i+1)/2 + j.
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be >= 1");
        SymMatrix {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from `f(i, j)`, evaluated only for `i >= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Packs a dense matrix, averaging the two triangles. Entries that differ
    /// by more than rounding noise indicate a caller bug, but the average is
    /// always well defined.
    pub fn from_dense(a: &ArrayView2<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "from_dense needs a square input");
        SymMatrix::from_fn(a.nrows(), |i, j| 0.5 * (a[[i, j]] + a[[j, i]]))
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    /// Sets entry (i, j) and, through the packed storage, (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `eps` to every diagonal entry.
    pub fn add_diag(&mut self, eps: f64) {
        for i in 0..self.dim {
            let v = self.get(i, i) + eps;
            self.set(i, i, v);
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

/// Spectral decomposition result shared by [`svd`] and [`sym_eig`]:
/// `values` sorted non-increasing, with orthonormal `left`/`right` columns.
/// For a symmetric eigendecomposition the two sides coincide.
#[derive(Debug, Clone)]
pub struct SpectrumDecomp {
    pub values: Array1<f64>,
    pub left: Array2<f64>,
    pub right: Array2<f64>,
}

/// Lower-triangular Cholesky factor of a positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    // Packed lower triangle of L where A = L * L^T.
    l: Vec<f64>,
}

impl CholeskyFactor {
    /// Factors a symmetric positive definite matrix. Fails with
    /// [`Error::NotPositiveDefinite`] when any pivot falls to `PD_TOLERANCE`
    /// or below — the caller should regularize with a larger epsilon.
    pub fn new(m: &SymMatrix) -> Result<Self> {
        let n = m.dim();
        let mut l = vec![0.0; n * (n + 1) / 2];
        let at = |i: usize, j: usize| i * (i + 1) / 2 + j; // i >= j
        for i in 0..n {
            for j in 0..=i {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if s <= PD_TOLERANCE {
                        return Err(Error::NotPositiveDefinite {
                            context: "cholesky",
                            value: s,
                        });
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(CholeskyFactor { dim: n, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// log det A = 2 * sum(log diag(L)).
    pub fn logdet(&self) -> f64 {
        let at = |i: usize| i * (i + 1) / 2 + i;
        2.0 * (0..self.dim).map(|i| self.l[at(i)].ln()).sum::<f64>()
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim, "rhs length must match factor dimension");
        let at = |i: usize, j: usize| i * (i + 1) / 2 + j;
        // Forward: L y = b.
        for i in 0..self.dim {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[at(i, k)] * b[k];
            }
            b[i] = s / self.l[at(i, i)];
        }
        // Backward: L^T x = y.
        for i in (0..self.dim).rev() {
            let mut s = b[i];
            for k in (i + 1)..self.dim {
                s -= self.l[at(k, i)] * b[k];
            }
            b[i] = s / self.l[at(i, i)];
        }
    }

    /// Solves A X = B column by column; `b` is dim x n.
    pub fn solve_columns(&self, b: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(b.nrows(), self.dim, "rhs rows must match factor dimension");
        let mut out = b.to_owned();
        let mut col = vec![0.0; self.dim];
        for j in 0..b.ncols() {
            for i in 0..self.dim {
                col[i] = out[[i, j]];
            }
            self.solve_in_place(&mut col);
            for i in 0..self.dim {
                out[[i, j]] = col[i];
            }
        }
        out
    }
}

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
pub fn cholesky_logdet(m: &SymMatrix) -> Result<f64> {
    Ok(CholeskyFactor::new(m)?.logdet())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted non-increasing with matching orthonormal
/// eigenvectors in both `left` and `right`.
pub fn sym_eig(m: &SymMatrix) -> Result<SpectrumDecomp> {
    let n = m.dim();
    let mut a = m.to_dense();
    let mut v = Array2::<f64>::eye(n);

    if n == 1 {
        return Ok(SpectrumDecomp {
            values: Array1::from(vec![a[[0, 0]]]),
            left: v.clone(),
            right: v,
        });
    }

    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-300);
    let tol = 1e-14 * scale;
    let mut rotations = 0usize;
    let mut converged = false;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                off_max = off_max.max(apq.abs());
                if apq.abs() <= tol {
                    continue;
                }
                rotations += 1;
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                // Stable rotation angle (Golub & Van Loan).
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        if off_max <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        // One final scan; quadratic convergence makes this unreachable for
        // symmetric input, but the contract requires a bounded failure.
        let off = (0..n - 1)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .fold(0.0f64, |acc, (p, q)| acc.max(a[[p, q]].abs()));
        if off > tol {
            return Err(Error::ConvergenceFailure {
                op: "sym_eig",
                iterations: rotations,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, dst]] = v[[r, src]];
        }
    }
    Ok(SpectrumDecomp {
        values,
        left: vecs.clone(),
        right: vecs,
    })
}

/// Inverse symmetric square root: returns S with `S * m * S = I`.
///
/// Computed by symmetric eigendecomposition with the eigenvalue floor
/// [`PD_TOLERANCE`]; an eigenvalue below the floor means no such S exists at
/// the contract tolerance and signals that the regularization epsilon was
/// too small for the realized outputs.
pub fn inv_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    let min = eig.values[eig.values.len() - 1];
    if min < PD_TOLERANCE {
        return Err(Error::NotPositiveDefinite {
            context: "inv_sqrt",
            value: min,
        });
    }
    let inv_roots: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| 1.0 / l.max(PD_TOLERANCE).sqrt())
        .collect();
    let v = &eig.left;
    let n = m.dim();
    Ok(SymMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| v[[i, k]] * v[[j, k]] * inv_roots[k]).sum()
    }))
}

/// Thin singular value decomposition `m = left * diag(values) * right^T`
/// by one-sided Jacobi orthogonalization.
///
/// `values` are non-negative and sorted non-increasing; `left` (rows x k)
/// and `right` (cols x k) have orthonormal columns, k = min(rows, cols).
pub fn svd(m: &ArrayView2<f64>) -> Result<SpectrumDecomp> {
    let transposed = m.nrows() < m.ncols();
    let work = if transposed { m.t().to_owned() } else { m.to_owned() };
    let decomp = svd_tall(work)?;
    if transposed {
        Ok(SpectrumDecomp {
            values: decomp.values,
            left: decomp.right,
            right: decomp.left,
        })
    } else {
        Ok(decomp)
    }
}

/// Disjoint mutable views of rows `p < q` of a standard-layout matrix.
fn row_pair_mut(m: &mut Array2<f64>, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let ncols = m.ncols();
    let flat = m.as_slice_mut().expect("standard layout");
    let (head, tail) = flat.split_at_mut(q * ncols);
    (&mut head[p * ncols..p * ncols + ncols], &mut tail[..ncols])
}

/// Hestenes one-sided Jacobi on a tall (rows >= cols) matrix: rotate column
/// pairs until mutually orthogonal, then read off norms as singular values.
///
/// Works on the transposed storage so each logical column is a contiguous
/// slice; rotations on oracle-sized grids (hundreds of columns) would
/// otherwise stride across the whole matrix per element.
fn svd_tall(b: Array2<f64>) -> Result<SpectrumDecomp> {
    let rows = b.nrows();
    let cols = b.ncols();
    // bt.row(j) holds logical column j of b; vt.row(j) holds column j of V.
    // Entries 250 orders of magnitude below the largest are flushed to zero:
    // they are far below every contract tolerance, and feeding subnormals
    // into the rotation arithmetic costs orders of magnitude in speed.
    let flush = b.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) * 1e-250;
    let mut bt = Array2::zeros((cols, rows));
    for r in 0..rows {
        for c in 0..cols {
            let x = b[[r, c]];
            bt[[c, r]] = if x.abs() < flush { 0.0 } else { x };
        }
    }
    let mut vt = Array2::<f64>::eye(cols);
    let tol = 1e-15;
    // Columns this far below the largest column norm carry only rounding
    // noise; rotating them against each other never settles, so they are
    // frozen and later reported as zero singular values.
    let scale = bt.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let neglect = (1e-14 * scale * (rows as f64).sqrt()).powi(2);
    let mut rotations = 0usize;
    let mut converged = cols < 2;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        // Exact squared column norms at sweep start, kept current through
        // each rotation; pairs below the neglect floor cost nothing.
        let mut norms2: Vec<f64> = (0..cols)
            .map(|j| bt.row(j).iter().map(|x| x * x).sum())
            .collect();
        // de Rijk pivoting: visiting pairs in descending-norm order keeps
        // convergence fast on strongly graded matrices.
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&i, &j| norms2[j].partial_cmp(&norms2[i]).unwrap());
        'outer: for a in 0..cols.saturating_sub(1) {
            if norms2[order[a]] <= neglect {
                break 'outer;
            }
            for b in (a + 1)..cols {
                let p = order[a];
                let q = order[b];
                let app = norms2[p];
                let aqq = norms2[q];
                if aqq <= neglect {
                    continue;
                }
                let (lo, hi) = if p < q { (p, q) } else { (q, p) };
                let (b_lo, b_hi) = row_pair_mut(&mut bt, lo, hi);
                let (bp, bq) = if p == lo { (b_lo, b_hi) } else { (b_hi, b_lo) };
                let mut apq = 0.0;
                for r in 0..rows {
                    apq += bp[r] * bq[r];
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                rotations += 1;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let x = bp[r];
                    let y = bq[r];
                    bp[r] = c * x - s * y;
                    bq[r] = s * x + c * y;
                }
                norms2[p] = c * c * app - 2.0 * c * s * apq + s * s * aqq;
                norms2[q] = s * s * app + 2.0 * c * s * apq + c * c * aqq;
                let (v_lo, v_hi) = row_pair_mut(&mut vt, lo, hi);
                let (vp, vq) = if p == lo { (v_lo, v_hi) } else { (v_hi, v_lo) };
                for r in 0..cols {
                    let x = vp[r];
                    let y = vq[r];
                    vp[r] = c * x - s * y;
                    vq[r] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure {
            op: "svd",
            iterations: rotations,
        });
    }

    let norms: Vec<f64> = (0..cols)
        .map(|j| bt.row(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let sigma_max = norms[order[0]];
    let rank_tol = sigma_max * 1e-13;
    let mut values = Array1::<f64>::zeros(cols);
    let mut left = Array2::<f64>::zeros((rows, cols));
    let mut right = Array2::<f64>::zeros((cols, cols));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = norms[src];
        for r in 0..cols {
            right[[r, dst]] = vt[[src, r]];
        }
        if norms[src] > rank_tol && norms[src] > 0.0 {
            for r in 0..rows {
                left[[r, dst]] = bt[[src, r]] / norms[src];
            }
        }
    }
    // Numerically zero columns get orthonormal fill-in so that left^T * left
    // stays the identity. Filled columns only accumulate, so a basis vector
    // that projects away once can never work later; the candidate cursor
    // therefore never revisits.
    let mut filled: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|(_, &src)| norms[src] > rank_tol && norms[src] > 0.0)
        .map(|(dst, _)| dst)
        .collect();
    let mut cursor = 0usize;
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > rank_tol && norms[src] > 0.0 {
            continue;
        }
        values[dst] = 0.0;
        while cursor < rows {
            let cand = cursor;
            cursor += 1;
            let mut col = vec![0.0; rows];
            col[cand] = 1.0;
            for &k in &filled {
                let dot: f64 = (0..rows).map(|r| col[r] * left[[r, k]]).sum();
                for r in 0..rows {
                    col[r] -= dot * left[[r, k]];
                }
            }
            let norm: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for r in 0..rows {
                    left[[r, dst]] = col[r] / norm;
                }
                filled.push(dst);
                break;
            }
        }
    }

    Ok(SpectrumDecomp {
        values,
        left,
        right,
    })
}
