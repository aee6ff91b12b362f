//! Per-active-set constraint machinery.
//!
//! Fixing the active set `A` (size `q`) splits the subgradient into
//! `s_A = sign(b_A)`, free coordinates `s_F`, and dependent coordinates
//! `s_D`. The null-space constraint `V_N' W S = 0` reads `G s_I = u(s_A)`
//! with `G = V_IN' W_II` and `u = -V_AN' W_AA s_A`; choosing an invertible
//! block `G_D` makes `s_D = G_D^{-1} (u - G_F s_F)` a function of the free
//! coordinates. Everything the density and the sampler need per active set
//! is precomputed here once and shared immutably.

use crate::design::DesignContext;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, max_abs, orthonormalize_columns, pivoted_qr_columns};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

/// Options controlling the free/dependent split.
#[derive(Debug, Clone, Copy)]
pub struct GeometryOptions {
    /// Condition-number cap defining "invertible" for `G_D`.
    pub condition_cap: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            condition_cap: 1e10,
        }
    }
}

/// Constraint geometry for one active set.
#[derive(Debug, Clone)]
pub struct ActiveSetGeometry {
    active: Vec<usize>,
    inactive: Vec<usize>,
    free_pos: Vec<usize>,
    dep_pos: Vec<usize>,
    g: DMatrix<f64>,
    b_null: DMatrix<f64>,
    gd_condition: f64,
    // Solved constraint products.
    c_dep: DMatrix<f64>,       // G_D^{-1} G_F           ((p-m) x (m-q))
    u_mat: DMatrix<f64>,       // -V_AN' W_AA            ((p-m) x q)
    gdinv_u_mat: DMatrix<f64>, // G_D^{-1} u_mat         ((p-m) x q)
    // Range-space projections used by the density.
    p_act: DMatrix<f64>,       // V_R' Psi_A                  (m x q)
    q_act: DMatrix<f64>,       // V_R' W columns in A         (m x q)
    q_free: DMatrix<f64>,      // V_R' W columns in F         (m x (m-q))
    q_dep: DMatrix<f64>,       // V_R' W columns in D         (m x (p-m))
    z_free: DMatrix<f64>,      // q_free - q_dep c_dep        (m x (m-q))
    e_act: DMatrix<f64>,       // q_dep gdinv_u_mat           (m x q)
    t_free_part: DMatrix<f64>, // V_IR' W_II B(I)        (m x (m-q))
    // Active-column data for reconstruction and the ellipsoid.
    xa: DMatrix<f64>,
    xa_gram: DMatrix<f64>,
    xa_gram_chol: Cholesky<f64, Dyn>,
    rank: usize,
    p: usize,
    n: usize,
}

impl ActiveSetGeometry {
    /// Builds the geometry for active set `active` (0-based column indices,
    /// any order, no duplicates).
    pub fn new(ctx: &DesignContext, active: &[usize]) -> Result<Self> {
        Self::with_options(ctx, active, GeometryOptions::default())
    }

    pub fn with_options(
        ctx: &DesignContext,
        active: &[usize],
        opts: GeometryOptions,
    ) -> Result<Self> {
        let p = ctx.p();
        let n = ctx.n();
        let m = ctx.rank();
        let mut active: Vec<usize> = active.to_vec();
        active.sort_unstable();
        let q = active.len();
        if q == 0 || q > m {
            return Err(Error::InvalidActiveSet { size: q, max: m });
        }
        for pair in active.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::BadActiveIndex { index: pair[0], p });
            }
        }
        if *active.last().unwrap() >= p {
            return Err(Error::BadActiveIndex {
                index: *active.last().unwrap(),
                p,
            });
        }
        let mut is_active = vec![false; p];
        for &j in &active {
            is_active[j] = true;
        }
        let inactive: Vec<usize> = (0..p).filter(|&j| !is_active[j]).collect();
        let n_null = p - m;
        let n_free = m - q;
        let w = ctx.weights();
        let v_null = ctx.v_null();
        let v_range = ctx.v_range();

        // G = V_IN' W_II and u_mat = -V_AN' W_AA.
        let mut g = DMatrix::zeros(n_null, inactive.len());
        for (col, &j) in inactive.iter().enumerate() {
            for row in 0..n_null {
                g[(row, col)] = v_null[(j, row)] * w[j];
            }
        }
        let mut u_mat = DMatrix::zeros(n_null, q);
        for (col, &j) in active.iter().enumerate() {
            for row in 0..n_null {
                u_mat[(row, col)] = -v_null[(j, row)] * w[j];
            }
        }

        // Free/dependent split: the best-conditioned (p-m)-column block of G
        // becomes D, found by column-pivoted QR.
        let (free_pos, dep_pos, c_dep, gdinv_u_mat, gd_condition) = if n_null == 0 {
            let free_pos: Vec<usize> = (0..inactive.len()).collect();
            (
                free_pos,
                Vec::new(),
                DMatrix::zeros(0, n_free),
                DMatrix::zeros(0, q),
                1.0,
            )
        } else {
            let (perm, rdiag) = pivoted_qr_columns(&g);
            if rdiag.iter().take(n_null).any(|&r| r == 0.0) {
                return Err(Error::DegenerateGeometry {
                    cond: f64::INFINITY,
                    cap: opts.condition_cap,
                });
            }
            let mut dep_pos: Vec<usize> = perm[..n_null].to_vec();
            dep_pos.sort_unstable();
            let in_dep = {
                let mut flags = vec![false; inactive.len()];
                for &c in &dep_pos {
                    flags[c] = true;
                }
                flags
            };
            let free_pos: Vec<usize> = (0..inactive.len()).filter(|&c| !in_dep[c]).collect();
            let gd = g.select_columns(dep_pos.iter());
            let cond = condition_number(&gd);
            if !(cond < opts.condition_cap) {
                return Err(Error::DegenerateGeometry {
                    cond,
                    cap: opts.condition_cap,
                });
            }
            let lu = LU::new(gd);
            let gf = g.select_columns(free_pos.iter());
            let c_dep = lu.solve(&gf).ok_or(Error::DegenerateGeometry {
                cond,
                cap: opts.condition_cap,
            })?;
            let gdinv_u_mat = lu.solve(&u_mat).ok_or(Error::DegenerateGeometry {
                cond,
                cap: opts.condition_cap,
            })?;
            (free_pos, dep_pos, c_dep, gdinv_u_mat, cond)
        };

        // Orthonormal basis of null(G): columns [e_j ; -C e_j] over free j.
        let b_null = {
            let mut raw = DMatrix::zeros(inactive.len(), n_free);
            for (j, &fp) in free_pos.iter().enumerate() {
                raw[(fp, j)] = 1.0;
                for (i, &dp) in dep_pos.iter().enumerate() {
                    raw[(dp, j)] = -c_dep[(i, j)];
                }
            }
            orthonormalize_columns(&raw)
        };

        // Range-space projections.
        let psi = ctx.psi();
        let mut p_act = DMatrix::zeros(m, q);
        for (col, &j) in active.iter().enumerate() {
            let psi_j = psi.column(j);
            for r in 0..m {
                let mut acc = 0.0;
                for i in 0..p {
                    acc += v_range[(i, r)] * psi_j[i];
                }
                p_act[(r, col)] = acc;
            }
        }
        let q_col = |j: usize| -> DVector<f64> {
            let mut col = DVector::zeros(m);
            for r in 0..m {
                col[r] = v_range[(j, r)] * w[j];
            }
            col
        };
        let mut q_act = DMatrix::zeros(m, q);
        for (col, &j) in active.iter().enumerate() {
            q_act.set_column(col, &q_col(j));
        }
        let mut q_free = DMatrix::zeros(m, n_free);
        for (col, &fp) in free_pos.iter().enumerate() {
            q_free.set_column(col, &q_col(inactive[fp]));
        }
        let mut q_dep = DMatrix::zeros(m, n_null);
        for (col, &dp) in dep_pos.iter().enumerate() {
            q_dep.set_column(col, &q_col(inactive[dp]));
        }
        let z_free = &q_free - &q_dep * &c_dep;
        let e_act = &q_dep * &gdinv_u_mat;

        // V_IR' W_II B(I), the lambda-scaled block of T(A; lambda).
        let mut wb = DMatrix::zeros(inactive.len(), n_free);
        for (row, &j) in inactive.iter().enumerate() {
            for col in 0..n_free {
                wb[(row, col)] = w[j] * b_null[(row, col)];
            }
        }
        let mut v_ir = DMatrix::zeros(inactive.len(), m);
        for (row, &j) in inactive.iter().enumerate() {
            for col in 0..m {
                v_ir[(row, col)] = v_range[(j, col)];
            }
        }
        let t_free_part = v_ir.tr_mul(&wb);

        let xa = ctx.x().select_columns(active.iter());
        let xa_gram = xa.tr_mul(&xa);
        let xa_gram_chol =
            Cholesky::<f64, Dyn>::new(xa_gram.clone()).ok_or(Error::DegenerateGeometry {
                cond: f64::INFINITY,
                cap: opts.condition_cap,
            })?;

        Ok(Self {
            active,
            inactive,
            free_pos,
            dep_pos,
            g,
            b_null,
            gd_condition,
            c_dep,
            u_mat,
            gdinv_u_mat,
            p_act,
            q_act,
            q_free,
            q_dep,
            z_free,
            e_act,
            t_free_part,
            xa,
            xa_gram,
            xa_gram_chol,
            rank: m,
            p,
            n,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn inactive(&self) -> &[usize] {
        &self.inactive
    }

    /// Positions (into the inactive list) of the free subgradient coordinates.
    pub fn free_positions(&self) -> &[usize] {
        &self.free_pos
    }

    /// Positions (into the inactive list) of the dependent coordinates.
    pub fn dependent_positions(&self) -> &[usize] {
        &self.dep_pos
    }

    /// Global column indices of the free coordinates.
    pub fn free_indices(&self) -> Vec<usize> {
        self.free_pos.iter().map(|&c| self.inactive[c]).collect()
    }

    /// Global column indices of the dependent coordinates.
    pub fn dependent_indices(&self) -> Vec<usize> {
        self.dep_pos.iter().map(|&c| self.inactive[c]).collect()
    }

    pub fn active_size(&self) -> usize {
        self.active.len()
    }

    pub fn free_size(&self) -> usize {
        self.free_pos.len()
    }

    pub fn dependent_size(&self) -> usize {
        self.dep_pos.len()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Orthonormal basis of `null(G)`.
    pub fn b_null(&self) -> &DMatrix<f64> {
        &self.b_null
    }

    pub fn gd_condition(&self) -> f64 {
        self.gd_condition
    }

    pub(crate) fn c_dep(&self) -> &DMatrix<f64> {
        &self.c_dep
    }

    pub(crate) fn u_mat(&self) -> &DMatrix<f64> {
        &self.u_mat
    }

    pub(crate) fn gdinv_u_mat(&self) -> &DMatrix<f64> {
        &self.gdinv_u_mat
    }

    pub(crate) fn p_act(&self) -> &DMatrix<f64> {
        &self.p_act
    }

    pub(crate) fn q_act(&self) -> &DMatrix<f64> {
        &self.q_act
    }

    pub(crate) fn q_free(&self) -> &DMatrix<f64> {
        &self.q_free
    }

    pub(crate) fn q_dep(&self) -> &DMatrix<f64> {
        &self.q_dep
    }

    pub(crate) fn z_free(&self) -> &DMatrix<f64> {
        &self.z_free
    }

    pub(crate) fn e_act(&self) -> &DMatrix<f64> {
        &self.e_act
    }

    /// `u(s_A) = -V_AN' W_AA s_A`.
    pub fn u_of_signs(&self, s_a: &DVector<f64>) -> DVector<f64> {
        &self.u_mat * s_a
    }

    /// Columns of `X` in the active set.
    pub fn xa(&self) -> &DMatrix<f64> {
        &self.xa
    }

    /// `X_A' X_A`.
    pub fn xa_gram(&self) -> &DMatrix<f64> {
        &self.xa_gram
    }

    /// Solves `(X_A' X_A) z = rhs`.
    pub fn xa_gram_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.xa_gram_chol.solve(rhs)
    }

    /// Lower Cholesky factor of `X_A' X_A`.
    pub fn xa_gram_chol_l(&self) -> DMatrix<f64> {
        self.xa_gram_chol.l()
    }

    /// Diagonal of `(X_A' X_A)^{-1}`.
    pub fn xa_gram_inverse_diag(&self) -> DVector<f64> {
        let q = self.active.len();
        let mut out = DVector::zeros(q);
        for j in 0..q {
            let mut e = DVector::zeros(q);
            e[j] = 1.0;
            out[j] = self.xa_gram_chol.solve(&e)[j];
        }
        out
    }

    /// Least-squares coefficients on the active columns, `X_A^+ v`.
    pub fn project_onto_active(&self, v: &DVector<f64>) -> DVector<f64> {
        self.xa_gram_chol.solve(&self.xa.tr_mul(v))
    }

    /// `T(A; lambda) = [V_R' Psi_A | lambda V_IR' W_II B(I)]`, the `m x m`
    /// Jacobian block whose determinant enters the joint density. Constant in
    /// the state, so it cancels from MH ratios; exposed for diagnostics.
    pub fn t_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let m = self.rank;
        let q = self.active.len();
        let mut t = DMatrix::zeros(m, m);
        t.columns_mut(0, q).copy_from(&self.p_act);
        let mut scaled = self.t_free_part.clone();
        scaled *= lambda;
        t.columns_mut(q, m - q).copy_from(&scaled);
        t
    }

    /// `log |det T(A; lambda)|`; `-inf` when singular.
    pub fn log_abs_det_t(&self, lambda: f64) -> f64 {
        let t = self.t_matrix(lambda);
        let lu = LU::new(t);
        let det = lu.determinant();
        if det == 0.0 {
            f64::NEG_INFINITY
        } else {
            det.abs().ln()
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Residual `max |G B(I)|`, which should vanish.
    pub fn null_basis_residual(&self) -> f64 {
        if self.b_null.ncols() == 0 {
            return 0.0;
        }
        max_abs(&(&self.g * &self.b_null))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::gaussian_matrix;
    use nalgebra::DMatrix;

    fn wide_ctx(seed: u64) -> DesignContext {
        DesignContext::new(gaussian_matrix(5, 10, seed)).unwrap()
    }

    #[test]
    fn five_by_ten_with_two_active_splits_three_free_five_dependent() {
        let ctx = wide_ctx(42);
        let geom = ActiveSetGeometry::new(&ctx, &[1, 7]).unwrap();
        assert_eq!(geom.free_size(), 3);
        assert_eq!(geom.dependent_size(), 5);
        assert!(geom.null_basis_residual() < 1e-8);
        let gram = geom.b_null().tr_mul(geom.b_null());
        assert!(max_abs(&(gram - DMatrix::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn full_rank_active_set_leaves_no_free_coordinates() {
        let ctx = wide_ctx(7);
        let geom = ActiveSetGeometry::new(&ctx, &[0, 2, 4, 6, 8]).unwrap();
        assert_eq!(geom.free_size(), 0);
        assert_eq!(geom.dependent_size(), 5);
        assert_eq!(geom.b_null().ncols(), 0);
    }

    #[test]
    fn active_set_larger_than_rank_is_rejected() {
        let ctx = wide_ctx(3);
        let err = ActiveSetGeometry::new(&ctx, &[0, 1, 2, 3, 4, 5]).unwrap_err();
        match err {
            Error::InvalidActiveSet { size, max } => {
                assert_eq!(size, 6);
                assert_eq!(max, 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn null_space_rank_accounting_holds_on_random_instances() {
        // rank(G) + (m - q) = |I| on full-rank designs.
        for seed in [1u64, 5, 9, 13] {
            let ctx = wide_ctx(seed);
            for q in [1usize, 2, 4] {
                let active: Vec<usize> = (0..q).map(|i| 2 * i + 1).collect();
                let geom = ActiveSetGeometry::new(&ctx, &active).unwrap();
                let rank_g = geom
                    .g()
                    .clone()
                    .singular_values()
                    .iter()
                    .filter(|&&s| s > 1e-10)
                    .count();
                assert_eq!(rank_g + (ctx.rank() - q), geom.inactive().len());
                assert!(geom.gd_condition() < 1e10);
            }
        }
    }

    #[test]
    fn determinant_of_t_is_nonzero_for_gaussian_designs() {
        for seed in [2u64, 4, 8] {
            let ctx = wide_ctx(seed);
            let geom = ActiveSetGeometry::new(&ctx, &[0, 3]).unwrap();
            let log_det = geom.log_abs_det_t(0.3);
            assert!(log_det.is_finite());
        }
    }

    #[test]
    fn square_design_has_no_constraints() {
        // p = n: the null space is empty and every inactive coordinate is free.
        let x = gaussian_matrix(4, 4, 21);
        let ctx = DesignContext::new(x).unwrap();
        let geom = ActiveSetGeometry::new(&ctx, &[2]).unwrap();
        assert_eq!(geom.dependent_size(), 0);
        assert_eq!(geom.free_size(), 3);
        assert_eq!(geom.b_null().ncols(), 3);
    }
}
