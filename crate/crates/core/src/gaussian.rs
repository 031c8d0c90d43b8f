//! Multimode Gaussian-state representation and exact symplectic evolution.
//!
//! States are real symmetric covariance matrices in shot-noise units (vacuum
//! variance = 1 per quadrature), ordered X-block then P-block. Physical
//! transforms are symplectic matrices acting by congruence, C -> S C S^T.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{Beam, ModeGrid, ModeIndex, Quadrature};

/// Real symmetric quadrature covariance in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    data: DMatrix<f64>,
    grid: ModeGrid,
}

/// Real matrix preserving the symplectic form, with a provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOp {
    pub matrix: DMatrix<f64>,
    pub label: String,
}

/// Outcome of a physicality check.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalityReport {
    pub pass: bool,
    /// Smallest eigenvalue of the Hermitian matrix C + i*Omega.
    pub min_eigenvalue: f64,
    /// Largest absolute entry of C - C^T.
    pub asymmetry: f64,
}

/// Selects one quadrature of one beam over a range of physical bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSelector {
    pub beam: Beam,
    pub quad: Quadrature,
    /// Physical bin range (0-based, guard bins excluded).
    pub bins: std::ops::Range<usize>,
}

impl BlockSelector {
    /// All physical bins of one beam/quadrature.
    pub fn full(beam: Beam, quad: Quadrature, grid: &ModeGrid) -> Self {
        Self {
            beam,
            quad,
            bins: 0..grid.n_bins(),
        }
    }

    fn quad_indices(&self, grid: &ModeGrid) -> Result<Vec<usize>> {
        if self.bins.end > grid.n_bins() || self.bins.start >= self.bins.end {
            return Err(Error::SelectorOutOfRange {
                lo: self.bins.start,
                hi: self.bins.end,
                n_bins: grid.n_bins(),
            });
        }
        Ok(self
            .bins
            .clone()
            .map(|k| grid.quad_index(self.quad, grid.mode(self.beam, grid.physical_bin(k))))
            .collect())
    }
}

/// Standard symplectic form for the X-block/P-block ordering:
/// Omega = [[0, I], [-I, 0]].
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let n = 2 * n_modes;
    let mut omega = DMatrix::zeros(n, n);
    for k in 0..n_modes {
        omega[(k, n_modes + k)] = 1.0;
        omega[(n_modes + k, k)] = -1.0;
    }
    omega
}

impl SymplecticOp {
    pub fn identity(grid: &ModeGrid, label: impl Into<String>) -> Self {
        Self {
            matrix: DMatrix::identity(grid.n_quads(), grid.n_quads()),
            label: label.into(),
        }
    }

    /// Wraps an arbitrary matrix; the caller asserts it is symplectic.
    pub fn from_matrix(matrix: DMatrix<f64>, label: impl Into<String>) -> Self {
        Self {
            matrix,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest absolute entry of S Omega S^T - Omega.
    pub fn symplectic_defect(&self) -> f64 {
        let n_modes = self.dim() / 2;
        let omega = symplectic_form(n_modes);
        let lhs = &self.matrix * &omega * self.matrix.transpose();
        (lhs - omega).amax()
    }

    /// Composition: self applied after `first`.
    pub fn compose(&self, first: &SymplecticOp) -> SymplecticOp {
        SymplecticOp {
            matrix: &self.matrix * &first.matrix,
            label: format!("{} . {}", self.label, first.label),
        }
    }
}

/// Vacuum state: identity covariance.
pub fn vacuum_cov(grid: &ModeGrid) -> CovMatrix {
    CovMatrix {
        data: DMatrix::identity(grid.n_quads(), grid.n_quads()),
        grid: *grid,
    }
}

/// Two-mode squeezer with amplitude gain G acting on one probe/conjugate
/// mode pair; identity elsewhere.
///
/// Sign convention: X_p - X_c and P_p + P_c are squeezed, i.e.
/// X_p -> G X_p + g X_c and P_p -> G P_p - g P_c with g = sqrt(G^2 - 1).
pub fn tmsv_symplectic(
    gain: f64,
    probe_mode: ModeIndex,
    conjugate_mode: ModeIndex,
    grid: &ModeGrid,
) -> Result<SymplecticOp> {
    if !(gain >= 1.0) {
        return Err(Error::InvalidGain(gain));
    }
    if probe_mode == conjugate_mode {
        return Err(Error::InvalidGrid("two-mode squeezer needs distinct modes".into()));
    }
    let g = (gain * gain - 1.0).sqrt();
    let mut s = DMatrix::identity(grid.n_quads(), grid.n_quads());
    let xp = grid.quad_index(Quadrature::X, probe_mode);
    let xc = grid.quad_index(Quadrature::X, conjugate_mode);
    let pp = grid.quad_index(Quadrature::P, probe_mode);
    let pc = grid.quad_index(Quadrature::P, conjugate_mode);
    s[(xp, xp)] = gain;
    s[(xp, xc)] = g;
    s[(xc, xc)] = gain;
    s[(xc, xp)] = g;
    s[(pp, pp)] = gain;
    s[(pp, pc)] = -g;
    s[(pc, pc)] = gain;
    s[(pc, pp)] = -g;
    Ok(SymplecticOp {
        matrix: s,
        label: format!("tmsv(G={gain:.6})"),
    })
}

/// Broadband source: the same two-mode squeezer applied to every
/// probe/conjugate bin pair, guard bins included.
pub fn source_symplectic(gain: f64, grid: &ModeGrid) -> Result<SymplecticOp> {
    if !(gain >= 1.0) {
        return Err(Error::InvalidGain(gain));
    }
    let g = (gain * gain - 1.0).sqrt();
    let mut s = DMatrix::identity(grid.n_quads(), grid.n_quads());
    for bin in 0..grid.bins_per_beam() {
        let pm = grid.mode(Beam::Probe, bin);
        let cm = grid.mode(Beam::Conjugate, bin);
        let xp = grid.quad_index(Quadrature::X, pm);
        let xc = grid.quad_index(Quadrature::X, cm);
        let pp = grid.quad_index(Quadrature::P, pm);
        let pc = grid.quad_index(Quadrature::P, cm);
        s[(xp, xp)] = gain;
        s[(xp, xc)] = g;
        s[(xc, xc)] = gain;
        s[(xc, xp)] = g;
        s[(pp, pp)] = gain;
        s[(pp, pc)] = -g;
        s[(pc, pc)] = gain;
        s[(pc, pp)] = -g;
    }
    Ok(SymplecticOp {
        matrix: s,
        label: format!("source_tmsv(G={gain:.6})"),
    })
}

/// Gaussian evolution C -> S C S^T, symmetrized against rounding.
pub fn apply_symplectic(cov: &CovMatrix, op: &SymplecticOp) -> Result<CovMatrix> {
    if op.dim() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            got: op.dim(),
        });
    }
    let raw = &op.matrix * &cov.data * op.matrix.transpose();
    Ok(CovMatrix {
        data: symmetrize(raw),
        grid: cov.grid,
    })
}

/// Beamsplitter loss with vacuum on the selected modes: rows/columns scaled
/// by sqrt(1 - eta) and eta added on the affected diagonal entries.
pub fn apply_loss(cov: &CovMatrix, modes: &[ModeIndex], eta: f64) -> Result<CovMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidLoss(eta));
    }
    let t = (1.0 - eta).sqrt();
    let mut data = cov.data.clone();
    let mut affected = Vec::with_capacity(2 * modes.len());
    for &m in modes {
        affected.push(cov.grid.quad_index(Quadrature::X, m));
        affected.push(cov.grid.quad_index(Quadrature::P, m));
    }
    for &i in &affected {
        for j in 0..data.ncols() {
            data[(i, j)] *= t;
        }
    }
    for &i in &affected {
        for j in 0..data.nrows() {
            data[(j, i)] *= t;
        }
    }
    for &i in &affected {
        data[(i, i)] += eta;
    }
    Ok(CovMatrix {
        data: symmetrize(data),
        grid: cov.grid,
    })
}

/// Phase-space rotation of a single mode by theta; identity elsewhere.
///
/// Convention: X -> X cos(theta) + P sin(theta), P -> -X sin(theta) + P cos(theta),
/// so measuring X after rotating by theta is the generalized quadrature at
/// local-oscillator phase theta.
pub fn quadrature_rotation(theta: f64, mode: ModeIndex, grid: &ModeGrid) -> SymplecticOp {
    let mut s = DMatrix::identity(grid.n_quads(), grid.n_quads());
    let x = grid.quad_index(Quadrature::X, mode);
    let p = grid.quad_index(Quadrature::P, mode);
    let (sin, cos) = theta.sin_cos();
    s[(x, x)] = cos;
    s[(x, p)] = sin;
    s[(p, x)] = -sin;
    s[(p, p)] = cos;
    SymplecticOp {
        matrix: s,
        label: format!("rotation(theta={theta:.6}, {:?}/{})", mode.beam, mode.bin),
    }
}

/// The same rotation applied to every bin of one beam.
pub fn beam_rotation(theta: f64, beam: Beam, grid: &ModeGrid) -> SymplecticOp {
    let mut s = DMatrix::identity(grid.n_quads(), grid.n_quads());
    let (sin, cos) = theta.sin_cos();
    for bin in 0..grid.bins_per_beam() {
        let mode = grid.mode(beam, bin);
        let x = grid.quad_index(Quadrature::X, mode);
        let p = grid.quad_index(Quadrature::P, mode);
        s[(x, x)] = cos;
        s[(x, p)] = sin;
        s[(p, x)] = -sin;
        s[(p, p)] = cos;
    }
    SymplecticOp {
        matrix: s,
        label: format!("beam_rotation(theta={theta:.6}, {beam:?})"),
    }
}

/// Normalized joint quadrature variance c^T C c / c^T c, so any vacuum
/// combination reads 1 (joint shot noise).
pub fn joint_variance(cov: &CovMatrix, coeffs: &[f64]) -> Result<f64> {
    let n = cov.dim();
    let norm: f64 = coeffs.iter().map(|c| c * c).sum();
    if coeffs.len() != n || norm == 0.0 {
        return Err(Error::BadCoefficients {
            expected: n,
            got: coeffs.len(),
        });
    }
    let v = nalgebra::DVector::from_column_slice(coeffs);
    Ok((v.transpose() * &cov.data * &v)[(0, 0)] / norm)
}

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Wraps raw data (symmetrized) on a grid.
    pub fn from_data(data: DMatrix<f64>, grid: ModeGrid) -> Result<Self> {
        if data.nrows() != grid.n_quads() || data.ncols() != grid.n_quads() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_quads(),
                got: data.nrows(),
            });
        }
        Ok(Self {
            data: symmetrize(data),
            grid,
        })
    }

    /// Pass/fail physicality: C + i*Omega must be positive semidefinite
    /// (checked as min eigenvalue >= -1e-9) and C symmetric.
    pub fn check_physical(&self) -> PhysicalityReport {
        let asymmetry = (&self.data - self.data.transpose()).amax();
        let n_modes = self.dim() / 2;
        let omega = symplectic_form(n_modes);
        // C + i*Omega is Hermitian; embed as the real symmetric matrix
        // [[C, -Omega], [Omega, C]] whose spectrum doubles the Hermitian one.
        let n = self.dim();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.data);
        m.view_mut((n, n), (n, n)).copy_from(&self.data);
        m.view_mut((0, n), (n, n)).copy_from(&(-&omega));
        m.view_mut((n, 0), (n, n)).copy_from(&omega);
        let eig = m.symmetric_eigenvalues();
        let min_eigenvalue = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        PhysicalityReport {
            pass: min_eigenvalue >= -1e-9 && asymmetry <= 1e-9,
            min_eigenvalue,
            asymmetry,
        }
    }

    /// Submatrix over physical bins selected by row/column quadrature
    /// selectors; guard bins are excluded.
    pub fn extract_block(&self, rows: &BlockSelector, cols: &BlockSelector) -> Result<DMatrix<f64>> {
        let ri = rows.quad_indices(&self.grid)?;
        let ci = cols.quad_indices(&self.grid)?;
        let mut out = DMatrix::zeros(ri.len(), ci.len());
        for (a, &i) in ri.iter().enumerate() {
            for (b, &j) in ci.iter().enumerate() {
                out[(a, b)] = self.data[(i, j)];
            }
        }
        Ok(out)
    }

    /// CSV serialization: header row of quadrature labels, then the matrix
    /// row-major.
    pub fn to_csv(&self) -> String {
        let labels = self.grid.quad_labels();
        let mut s = labels.join(",");
        s.push('\n');
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:.12e}", self.data[(i, j)]))
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mt = m.transpose();
    (m + mt) * 0.5
}
