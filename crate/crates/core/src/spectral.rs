//! Graph Laplacians, a dense symmetric eigensolver, and eigenvalue
//! fingerprints.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianKind {
    /// `L = D − A`
    #[default]
    Combinatorial,
    /// `L = I − D^{-1/2} A D^{-1/2}`, with `D^{-1/2}` taken as 0 on isolated
    /// nodes.
    SymmetricNormalized,
}

/// Dense symmetric `n × n` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Wraps row-major data; symmetry is checked by the eigensolver, not here.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n * n,
            });
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::LengthMismatch { left: r.len(), right: n });
            }
            data.extend_from_slice(r);
        }
        Ok(SymMatrix { n, data })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in values.iter().enumerate() {
            data[i * n + i] = v;
        }
        SymMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn check_symmetric(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let diff = libm::fabs(self.get(i, j) - self.get(j, i));
                if !(diff <= tol) {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(())
    }
}

/// A graph Laplacian together with its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    pub kind: LaplacianKind,
    pub matrix: SymMatrix,
}

pub fn laplacian(g: &LabeledGraph, kind: LaplacianKind) -> LaplacianMatrix {
    let n = g.node_count();
    let deg = g.degrees();
    let mut data = vec![0.0; n * n];
    match kind {
        LaplacianKind::Combinatorial => {
            for (v, &d) in deg.iter().enumerate() {
                data[v * n + v] = d as f64;
            }
            for &(u, v) in g.edges() {
                data[u * n + v] = -1.0;
                data[v * n + u] = -1.0;
            }
        }
        LaplacianKind::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> = deg
                .iter()
                .map(|&d| if d == 0 { 0.0 } else { 1.0 / libm::sqrt(d as f64) })
                .collect();
            for v in 0..n {
                data[v * n + v] = 1.0;
            }
            for &(u, v) in g.edges() {
                let w = -inv_sqrt[u] * inv_sqrt[v];
                data[u * n + v] = w;
                data[v * n + u] = w;
            }
        }
    }
    LaplacianMatrix {
        kind,
        matrix: SymMatrix { n, data },
    }
}

/// Convergence controls for [`symmetric_eigenvalues`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions {
    /// Stop once the off-diagonal Frobenius norm falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Allowed asymmetry `|m_ij − m_ji|` of the input.
    pub symmetry_tol: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions {
            tol: 1e-10,
            max_sweeps: 100,
            symmetry_tol: 1e-10,
        }
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    libm::sqrt(s)
}

/// All eigenvalues of a symmetric matrix in ascending order, by cyclic
/// Jacobi rotations.
pub fn symmetric_eigenvalues(m: &SymMatrix, opts: JacobiOptions) -> Result<Vec<f64>> {
    m.check_symmetric(opts.symmetry_tol)?;
    let n = m.n;
    let mut a = m.data.clone();
    // Symmetrize away any residual asymmetry within tolerance.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }

    let mut sweeps = 0;
    let mut residual = off_diagonal_norm(&a, n);
    while residual >= opts.tol {
        if sweeps == opts.max_sweeps {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Rotation angle zeroing a[p][q] (Golub & Van Loan, symmetric Schur).
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
        sweeps += 1;
        residual = off_diagonal_norm(&a, n);
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Top-`k` Laplacian eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFingerprint {
    eigenvalues: Vec<f64>,
}

impl SpectralFingerprint {
    /// Sorts descending, clamps entries within 1e-10 of zero (or below) to
    /// 0, and zero-pads or truncates to `k`.
    pub fn from_eigenvalues(mut values: Vec<f64>, k: usize) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        values.truncate(k);
        for v in &mut values {
            if *v < 1e-10 {
                *v = 0.0;
            }
        }
        values.resize(k, 0.0);
        SpectralFingerprint { eigenvalues: values }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }
}

pub fn spectral_fingerprint(g: &LabeledGraph, k: usize, kind: LaplacianKind) -> Result<SpectralFingerprint> {
    if k == 0 {
        return Err(Error::InvalidConfig("spectral fingerprint needs k >= 1".into()));
    }
    let l = laplacian(g, kind);
    let eig = symmetric_eigenvalues(&l.matrix, JacobiOptions::default())?;
    Ok(SpectralFingerprint::from_eigenvalues(eig, k))
}

/// Largest eigenvalue of the combinatorial Laplacian (0 for an edgeless
/// graph).
pub fn max_laplacian_eigenvalue(g: &LabeledGraph) -> Result<f64> {
    Ok(spectral_fingerprint(g, 1, LaplacianKind::Combinatorial)?.eigenvalues[0])
}
