//! Manifold kernels for St(r,d), R^d and the product M(r,d) = (St(r,d) x R^d)^n.
//!
//! Points on the product manifold are stored as one dense r x n(d+1) matrix
//! with the block layout [Y_1 T_1 ... Y_n T_n]: each pose contributes a
//! rotation block of d orthonormal columns followed by one translation
//! column. Manifold projection of ambient rotation blocks uses the polar
//! factor (thin SVD), which is also the retraction used for line-search
//! steps: it is the Frobenius-nearest Stiefel point and second order.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{Error, Result};

/// Orthonormality tolerance enforced on Stiefel blocks after projection.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Tolerance for tangent-space membership checks.
pub const TANGENT_TOL: f64 = 1e-10;

/// Column layout of a lifted state: `num_poses` blocks of `dim + 1` columns
/// (d rotation columns, one translation column), `rank` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub num_poses: usize,
    pub dim: usize,
    pub rank: usize,
}

impl BlockLayout {
    pub fn new(num_poses: usize, dim: usize, rank: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::shape(format!("dimension must be 2 or 3, got {dim}")));
        }
        if rank < dim {
            return Err(Error::shape(format!("rank {rank} < dimension {dim}")));
        }
        if num_poses == 0 {
            return Err(Error::shape("layout needs at least one pose"));
        }
        Ok(Self { num_poses, dim, rank })
    }

    /// Total column count n(d+1).
    pub fn num_cols(&self) -> usize {
        self.num_poses * (self.dim + 1)
    }

    /// Column range of pose `i`'s rotation block.
    pub fn rotation_cols(&self, i: usize) -> std::ops::Range<usize> {
        let start = i * (self.dim + 1);
        start..start + self.dim
    }

    /// Column index of pose `i`'s translation.
    pub fn translation_col(&self, i: usize) -> usize {
        i * (self.dim + 1) + self.dim
    }

    /// Pose owning column `c`.
    pub fn pose_of_col(&self, c: usize) -> usize {
        c / (self.dim + 1)
    }

    /// All d+1 columns of pose `i`.
    pub fn pose_cols(&self, i: usize) -> std::ops::Range<usize> {
        let start = i * (self.dim + 1);
        start..start + self.dim + 1
    }
}

/// A point on St(r,d): an r x d matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    mat: DMatrix<f64>,
}

impl StiefelPoint {
    /// Wraps a matrix, checking the orthonormality invariant.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() < mat.ncols() {
            return Err(Error::shape(format!(
                "Stiefel point needs r >= d, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let err = orthonormality_error(&mat.as_view());
        if err > ORTHONORMALITY_TOL {
            return Err(Error::shape(format!(
                "columns not orthonormal: |X'X - I| = {err:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    pub fn identity_lift(rank: usize, dim: usize) -> Self {
        let mut mat = DMatrix::zeros(rank, dim);
        for k in 0..dim {
            mat[(k, k)] = 1.0;
        }
        Self { mat }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }
}

/// A tangent vector at some base point of M(r,d), stored with the same
/// layout as the state itself.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub mat: DMatrix<f64>,
    pub layout: BlockLayout,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }
}

/// A point on the product manifold M(r,d), one dense r x n(d+1) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    mat: DMatrix<f64>,
    layout: BlockLayout,
}

impl LiftedState {
    /// Wraps a matrix after checking every rotation block.
    pub fn new(mat: DMatrix<f64>, layout: BlockLayout) -> Result<Self> {
        check_state_shape(&mat, layout)?;
        let state = Self { mat, layout };
        let err = state.max_orthonormality_error();
        if err > ORTHONORMALITY_TOL {
            return Err(Error::shape(format!(
                "state off manifold: worst block |X'X - I| = {err:.3e}"
            )));
        }
        Ok(state)
    }

    /// Identity-augmented start: each rotation block is [I_d; 0], all
    /// translations zero.
    pub fn identity_lift(layout: BlockLayout) -> Self {
        let mut mat = DMatrix::zeros(layout.rank, layout.num_cols());
        for i in 0..layout.num_poses {
            let cols = layout.rotation_cols(i);
            for (k, c) in cols.enumerate() {
                mat[(k, c)] = 1.0;
            }
        }
        Self { mat, layout }
    }

    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn rotation_block(&self, i: usize) -> DMatrixView<'_, f64> {
        let cols = self.layout.rotation_cols(i);
        self.mat.view((0, cols.start), (self.layout.rank, self.layout.dim))
    }

    pub fn translation(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.mat.column(self.layout.translation_col(i))
    }

    /// Largest |X'X - I| over all rotation blocks.
    pub fn max_orthonormality_error(&self) -> f64 {
        (0..self.layout.num_poses)
            .map(|i| orthonormality_error(&self.rotation_block(i)))
            .fold(0.0, f64::max)
    }
}

fn check_state_shape(mat: &DMatrix<f64>, layout: BlockLayout) -> Result<()> {
    if mat.nrows() != layout.rank || mat.ncols() != layout.num_cols() {
        return Err(Error::shape(format!(
            "state must be {}x{}, got {}x{}",
            layout.rank,
            layout.num_cols(),
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

/// |X'X - I_d| in Frobenius norm.
pub fn orthonormality_error(x: &DMatrixView<'_, f64>) -> f64 {
    let d = x.ncols();
    let mut gram = x.transpose() * x;
    for k in 0..d {
        gram[(k, k)] -= 1.0;
    }
    gram.norm()
}

/// Orthogonal projection of an ambient r x d matrix onto the tangent space
/// of St(r,d) at `base`: U - X (X'U + U'X) / 2.
pub fn project_tangent(base: &StiefelPoint, ambient: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = base.matrix();
    if ambient.shape() != x.shape() {
        return Err(Error::shape(format!(
            "ambient is {}x{}, base is {}x{}",
            ambient.nrows(),
            ambient.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(project_tangent_raw(&x.as_view(), &ambient.as_view()))
}

pub(crate) fn project_tangent_raw(
    x: &DMatrixView<'_, f64>,
    u: &DMatrixView<'_, f64>,
) -> DMatrix<f64> {
    let xtu = x.transpose() * u;
    let sym = (&xtu + xtu.transpose()) * 0.5;
    u - x * sym
}

/// Frobenius-nearest Stiefel point of a full-column-rank ambient matrix:
/// the polar factor U V' of the thin SVD U S V'.
pub fn project_manifold(ambient: &DMatrix<f64>) -> Result<StiefelPoint> {
    let mat = polar_factor(&ambient.as_view())?;
    Ok(StiefelPoint { mat })
}

pub(crate) fn polar_factor(ambient: &DMatrixView<'_, f64>) -> Result<DMatrix<f64>> {
    if ambient.nrows() < ambient.ncols() {
        return Err(Error::shape(format!(
            "polar factor needs r >= d, got {}x{}",
            ambient.nrows(),
            ambient.ncols()
        )));
    }
    // closed form through the d x d Gram matrix for the well-conditioned
    // blocks the solver produces (a near-orthonormal block plus a tangent
    // step); falls back to the SVD when conditioning is poor
    if let Some(q) = polar_via_gram(ambient) {
        return Ok(q);
    }
    polar_via_svd(ambient)
}

/// A (A'A)^{-1/2} with a Newton-Schulz polish. Returns None when the Gram
/// route would lose accuracy (condition number above ~1e3).
fn polar_via_gram(ambient: &DMatrixView<'_, f64>) -> Option<DMatrix<f64>> {
    let d = ambient.ncols();
    let gram = ambient.transpose() * ambient;
    let eig = gram.symmetric_eigen();
    let emax = eig.eigenvalues.max();
    let emin = eig.eigenvalues.min();
    if !(emin > 1e-6 * emax.max(1.0)) {
        return None;
    }
    // V diag(1/sqrt(e)) V'
    let mut inv_sqrt = DMatrix::zeros(d, d);
    for k in 0..d {
        let column = eig.eigenvectors.column(k);
        let scale = 1.0 / eig.eigenvalues[k].sqrt();
        for a in 0..d {
            for b in 0..d {
                inv_sqrt[(a, b)] += scale * column[a] * column[b];
            }
        }
    }
    let q = ambient * inv_sqrt;
    // one Newton-Schulz step squares the residual orthonormality error
    let qtq = q.transpose() * &q;
    let correction = DMatrix::identity(d, d) * 1.5 - qtq * 0.5;
    Some(q * correction)
}

fn polar_via_svd(ambient: &DMatrixView<'_, f64>) -> Result<DMatrix<f64>> {
    let svd = ambient.clone_owned().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax.max(1.0) {
        return Err(Error::Singular(format!(
            "rank-deficient block: singular values span [{smin:.3e}, {smax:.3e}]"
        )));
    }
    let u = svd.u.as_ref().expect("svd requested u");
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    Ok(u * vt)
}

/// Polar retraction on a single Stiefel block: nearest point to X + V.
pub fn retract(base: &StiefelPoint, tangent: &DMatrix<f64>) -> Result<StiefelPoint> {
    let mat = retract_block(&base.matrix().as_view(), &tangent.as_view())?;
    Ok(StiefelPoint { mat })
}

pub(crate) fn retract_block(
    x: &DMatrixView<'_, f64>,
    v: &DMatrixView<'_, f64>,
) -> Result<DMatrix<f64>> {
    let moved = x + v;
    polar_factor(&moved.as_view())
}

/// Blockwise projection of an ambient r x n(d+1) matrix onto M(r,d):
/// rotation blocks map through the polar factor, translations pass through.
pub fn project_state(ambient: DMatrix<f64>, layout: BlockLayout) -> Result<LiftedState> {
    check_state_shape(&ambient, layout)?;
    let mut mat = ambient;
    project_state_in_place(&mut mat, layout)?;
    Ok(LiftedState { mat, layout })
}

/// In-place variant of [`project_state`] for hot loops.
pub(crate) fn project_state_in_place(mat: &mut DMatrix<f64>, layout: BlockLayout) -> Result<()> {
    for i in 0..layout.num_poses {
        project_pose_block_in_place(mat, layout, i)
            .map_err(|e| Error::Singular(format!("pose block {i}: {e}")))?;
    }
    Ok(())
}

pub(crate) fn project_pose_block_in_place(
    mat: &mut DMatrix<f64>,
    layout: BlockLayout,
    pose: usize,
) -> Result<()> {
    let cols = layout.rotation_cols(pose);
    let (r, d) = (layout.rank, layout.dim);
    if d <= 3 && polar_in_place_small(mat, cols.start, r, d) {
        return Ok(());
    }
    let block = mat.view((0, cols.start), (r, d)).clone_owned();
    let polar = polar_factor(&block.as_view())?;
    mat.view_mut((0, cols.start), (r, d)).copy_from(&polar);
    Ok(())
}

/// Allocation-free polar projection of one rotation block for d <= 3:
/// A (A'A)^{-1/2} through a stack-allocated Gram eigendecomposition plus a
/// Newton-Schulz polish. Returns false when conditioning requires the SVD
/// path.
fn polar_in_place_small(mat: &mut DMatrix<f64>, c0: usize, r: usize, d: usize) -> bool {
    let mut gram = [[0.0f64; 3]; 3];
    for a in 0..d {
        for b in a..d {
            let mut acc = 0.0;
            for i in 0..r {
                acc += mat[(i, c0 + a)] * mat[(i, c0 + b)];
            }
            gram[a][b] = acc;
            gram[b][a] = acc;
        }
    }
    let gm = nalgebra::Matrix3::from_fn(|a, b| if a < d && b < d {
        gram[a][b]
    } else if a == b {
        1.0
    } else {
        0.0
    });
    let eig = gm.symmetric_eigen();
    let emax = eig.eigenvalues.max();
    let emin = eig.eigenvalues.min();
    if !(emin > 1e-6 * emax.max(1.0)) {
        return false;
    }
    let mut inv_sqrt = [[0.0f64; 3]; 3];
    for k in 0..3 {
        let scale = 1.0 / eig.eigenvalues[k].sqrt();
        for a in 0..d {
            for b in 0..d {
                inv_sqrt[a][b] += scale * eig.eigenvectors[(a, k)] * eig.eigenvectors[(b, k)];
            }
        }
    }
    // Q = A * inv_sqrt, rowwise in place
    let mut row = [0.0f64; 3];
    for i in 0..r {
        for c in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += mat[(i, c0 + k)] * inv_sqrt[k][c];
            }
            row[c] = acc;
        }
        for c in 0..d {
            mat[(i, c0 + c)] = row[c];
        }
    }
    // Newton-Schulz step: Q <- Q (3I - Q'Q) / 2
    let mut qtq = [[0.0f64; 3]; 3];
    for a in 0..d {
        for b in a..d {
            let mut acc = 0.0;
            for i in 0..r {
                acc += mat[(i, c0 + a)] * mat[(i, c0 + b)];
            }
            qtq[a][b] = acc;
            qtq[b][a] = acc;
        }
    }
    let mut corr = [[0.0f64; 3]; 3];
    for a in 0..d {
        for b in 0..d {
            corr[a][b] = -0.5 * qtq[a][b] + if a == b { 1.5 } else { 0.0 };
        }
    }
    for i in 0..r {
        for c in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += mat[(i, c0 + k)] * corr[k][c];
            }
            row[c] = acc;
        }
        for c in 0..d {
            mat[(i, c0 + c)] = row[c];
        }
    }
    true
}

/// Riemannian gradient of a function on M(r,d) from its Euclidean gradient:
/// tangent projection on every rotation block, identity on translations.
pub fn riemannian_gradient(base: &LiftedState, euclidean: &DMatrix<f64>) -> Result<TangentVector> {
    let layout = base.layout();
    check_state_shape(euclidean, layout)?;
    let mut mat = euclidean.clone();
    project_gradient_in_place(&base.mat.as_view(), &mut mat.as_view_mut(), layout, None);
    Ok(TangentVector { mat, layout })
}

/// Projects Euclidean-gradient columns to the tangent space in place.
///
/// When `poses` is given, only those pose blocks are touched (their columns
/// must be at the same indices in `base` and `grad`).
pub(crate) fn project_gradient_in_place(
    base: &DMatrixView<'_, f64>,
    grad: &mut DMatrixViewMut<'_, f64>,
    layout: BlockLayout,
    poses: Option<&[usize]>,
) {
    let all: Vec<usize>;
    let idx: &[usize] = match poses {
        Some(p) => p,
        None => {
            all = (0..layout.num_poses).collect();
            &all
        }
    };
    for &i in idx {
        let cols = layout.rotation_cols(i);
        let x = base.view((0, cols.start), (layout.rank, layout.dim));
        let u = grad
            .view((0, cols.start), (layout.rank, layout.dim))
            .clone_owned();
        let projected = project_tangent_raw(&x, &u.as_view());
        grad.view_mut((0, cols.start), (layout.rank, layout.dim))
            .copy_from(&projected);
    }
}

/// |X'U + U'X| of a rotation block pair, the tangent-membership residual.
pub fn tangent_error(x: &DMatrixView<'_, f64>, u: &DMatrixView<'_, f64>) -> f64 {
    let xtu = x.transpose() * u;
    (&xtu + xtu.transpose()).norm()
}
