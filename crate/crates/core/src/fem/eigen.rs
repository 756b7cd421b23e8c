//! Generalized symmetric eigenproblem K x = λ M x restricted to a band of λ.
//!
//! Small systems use a dense solve. Large systems use spectrum slicing: the
//! band is cut into slices whose eigenvalue counts come from the inertia of
//! LDLᵀ factorizations of K − σM (Sylvester's law), and each slice is solved
//! with block shift-and-invert Lanczos in the M inner product with full
//! reorthogonalization. Knowing the exact count per slice means every
//! eigenvalue in the band is found, including repeated ones.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::matmul::matmul;
use faer::prelude::{Reborrow, ReborrowMut};
use faer::sparse::linalg::cholesky::supernodal::SupernodalLdltRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymbolicCholeskyRaw,
    SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Accum, Conj, Mat, MatMut, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::assembly::{spmv_sym_par, AssembledSystem};
use crate::error::{Error, Result};

/// An eigenvalue and its vector over the free dofs.
type EigenPair = (f64, Vec<f64>);

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Lanczos block size; multiplicities up to this size converge together.
    pub block_size: usize,
    /// Ritz residual tolerance relative to the shifted-inverse eigenvalue.
    pub tol: f64,
    /// Target number of eigenvalues per spectrum slice.
    pub slice_modes: usize,
    /// Systems with at most this many free dofs are solved densely.
    pub dense_threshold: usize,
    pub max_restarts: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            block_size: 8,
            tol: 1e-10,
            slice_modes: 40,
            dense_threshold: 1500,
            max_restarts: 60,
            seed: 0x5eed,
            threads: 1,
        }
    }
}

impl EigenOptions {
    fn par(&self) -> Par {
        if self.threads > 1 {
            Par::rayon(self.threads)
        } else {
            Par::Seq
        }
    }
}

/// Eigenpairs sorted by eigenvalue; vectors are over free dofs and
/// M-normalized (xᵀ M x = 1).
#[derive(Debug, Clone, Default)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// ‖K x − λ M x‖ / (max(|λ|, λ_ref) ‖M x‖), λ_ref the band top.
    pub residuals: Vec<f64>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// All eigenpairs with `lo <= λ <= hi`, at most `max_count` of them (the lowest).
/// When `lo <= 0`, rigid-body modes (λ ≈ 0, possibly slightly negative) are included.
pub fn solve_band(
    sys: &AssembledSystem,
    lo: f64,
    hi: f64,
    max_count: usize,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    if !(hi > lo) || !hi.is_finite() || hi <= 0.0 {
        return Err(Error::invalid(format!("empty eigenvalue band [{lo:e}, {hi:e}]")));
    }
    let mut out = if sys.n_free() <= opts.dense_threshold {
        dense_band(sys, lo, hi, max_count)?
    } else {
        sliced_band(sys, lo, hi, max_count, opts)?
    };
    out.residuals = residuals(sys, &out.values, &out.vectors, hi);
    Ok(out)
}

fn residuals(sys: &AssembledSystem, values: &[f64], vectors: &[Vec<f64>], lambda_ref: f64) -> Vec<f64> {
    let n = sys.n_free();
    let mut kx = vec![0.0; n];
    let mut mx = vec![0.0; n];
    values
        .iter()
        .zip(vectors)
        .map(|(&l, x)| {
            spmv_sym_par(&sys.stiffness, x, &mut kx);
            spmv_sym_par(&sys.mass, x, &mut mx);
            let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>().sqrt();
            let m: f64 = mx.iter().map(|v| v * v).sum::<f64>().sqrt();
            r / (l.abs().max(lambda_ref) * m)
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn to_dense(a: &SparseColMat<usize, f64>) -> Mat<f64> {
    let n = a.nrows();
    let mut d = Mat::<f64>::zeros(n, n);
    let cp = a.symbolic().col_ptr();
    let ri = a.symbolic().row_idx();
    for j in 0..n {
        for p in cp[j]..cp[j + 1] {
            d[(ri[p], j)] += a.val()[p];
        }
    }
    d
}

/// Dense generalized solve through the Cholesky factor of M.
pub fn dense_band(sys: &AssembledSystem, lo: f64, hi: f64, max_count: usize) -> Result<EigenPairs> {
    // Work with unit-scale matrices; SI magnitudes span ~50 decades.
    let k_scale = max_abs(sys.stiffness.val());
    let m_scale = max_abs(sys.mass.val());
    let k = to_dense(&sys.stiffness) * faer::Scale(1.0 / k_scale);
    let m = to_dense(&sys.mass) * faer::Scale(1.0 / m_scale);
    let ratio = k_scale / m_scale;
    let llt =
        m.llt(Side::Lower).map_err(|e| Error::Numerical(format!("mass matrix is not positive definite: {e:?}")))?;
    let l = llt.L();
    // C = L⁻¹ K L⁻ᵀ
    let mut c = k;
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut c = c.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let evd =
        c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let mut y = evd.U().to_owned();
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), y.as_mut(), Par::Seq);
    // Rigid modes of a free body come out as ±roundoff; keep them when the band starts at zero.
    let floor = if lo <= 0.0 { f64::NEG_INFINITY } else { lo };
    let mut out = EigenPairs::default();
    let inv_sqrt_m = 1.0 / m_scale.sqrt();
    for j in 0..s.nrows() {
        let l = s[j] * ratio;
        if l >= floor && l <= hi && out.len() < max_count {
            out.values.push(l);
            out.vectors.push(y.col_as_slice(j).iter().map(|v| v * inv_sqrt_m).collect());
        }
    }
    Ok(out)
}

/// LDLᵀ machinery for K − σM with one symbolic analysis.
pub struct ShiftedFactorizer<'a> {
    sys: &'a AssembledSystem,
    symbolic: SymbolicCholesky<usize>,
    lower: SymbolicSparseColMat<usize>,
    k_low: Vec<f64>,
    m_low: Vec<f64>,
    par: Par,
}

pub struct ShiftedFactor<'f> {
    owner: &'f ShiftedFactorizer<'f>,
    pub sigma: f64,
    values: Vec<f64>,
    /// Number of eigenvalues strictly below σ.
    pub negatives: usize,
}

impl<'a> ShiftedFactorizer<'a> {
    pub fn new(sys: &'a AssembledSystem, par: Par) -> Result<Self> {
        let n = sys.n_free();
        let cp = sys.stiffness.symbolic().col_ptr();
        let ri = sys.stiffness.symbolic().row_idx();
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut rows = Vec::new();
        let mut k_low = Vec::new();
        let mut m_low = Vec::new();
        for j in 0..n {
            for p in cp[j]..cp[j + 1] {
                if ri[p] >= j {
                    rows.push(ri[p]);
                    k_low.push(sys.stiffness.val()[p]);
                    m_low.push(sys.mass.val()[p]);
                }
            }
            col_ptr.push(rows.len());
        }
        let lower = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, rows);
        let symbolic = factorize_symbolic_cholesky(
            lower.as_ref(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams {
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            },
        )
        .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?;
        log::debug!("symbolic LDLt: n = {n}, factor entries = {}", symbolic.len_val());
        Ok(ShiftedFactorizer { sys, symbolic, lower, k_low, m_low, par })
    }

    pub fn factor_len(&self) -> usize {
        self.symbolic.len_val()
    }

    /// Factor K − σM. A shift landing exactly on an eigenvalue is nudged.
    pub fn factor(&self, sigma: f64) -> Result<ShiftedFactor<'_>> {
        let mut shift = sigma;
        for attempt in 0..6 {
            let vals: Vec<f64> = self.k_low.iter().zip(&self.m_low).map(|(k, m)| k - shift * m).collect();
            let a = SparseColMat::new(self.lower.clone(), vals);
            let mut values = vec![0.0; self.symbolic.len_val()];
            let scratch = self.symbolic.factorize_numeric_ldlt_scratch::<f64>(self.par, Default::default());
            let res = self.symbolic.factorize_numeric_ldlt(
                &mut values,
                a.as_ref(),
                Side::Lower,
                Default::default(),
                self.par,
                MemStack::new(&mut MemBuffer::new(scratch)),
                Default::default(),
            );
            match res {
                Ok(_) => {
                    let negatives = self.count_negative(&values)?;
                    return Ok(ShiftedFactor { owner: self, sigma: shift, values, negatives });
                }
                Err(e) => {
                    log::warn!("LDLt at shift {shift:e} failed ({e:?}), attempt {attempt}");
                    shift += (1e-9 * shift.abs()).max(1e-300) * (attempt as f64 + 1.0) * 7.0;
                }
            }
        }
        Err(Error::Numerical(format!("cannot factor K - sigma M near sigma = {sigma:e}")))
    }

    fn count_negative(&self, values: &[f64]) -> Result<usize> {
        match self.symbolic.raw() {
            SymbolicCholeskyRaw::Supernodal(sn) => {
                let f = SupernodalLdltRef::new(sn, values);
                let mut neg = 0;
                for s in 0..sn.n_supernodes() {
                    let block = f.supernode(s).val();
                    for i in 0..block.ncols() {
                        let d = block[(i, i)];
                        if !d.is_finite() {
                            return Err(Error::Numerical("non-finite pivot in LDLt".into()));
                        }
                        if d < 0.0 {
                            neg += 1;
                        }
                    }
                }
                Ok(neg)
            }
            SymbolicCholeskyRaw::Simplicial(_) => Err(Error::Numerical("expected a supernodal factorization".into())),
        }
    }

    fn mass_mul(&self, x: &[f64], y: &mut [f64]) {
        spmv_sym_par(&self.sys.mass, x, y);
    }
}

impl ShiftedFactor<'_> {
    /// Overwrite `rhs` with (K − σM)⁻¹ rhs.
    ///
    /// The sparse LDLᵀ does not pivot, so inside the spectrum it can lose
    /// digits to element growth. A step of iterative refinement restores
    /// them; without this the shift-invert operator drifts away from being
    /// self-adjoint and Lanczos residual estimates become optimistic.
    pub fn solve_in_place(&self, mut rhs: MatMut<'_, f64>) {
        let b = rhs.to_owned();
        self.raw_solve(rhs.rb_mut());
        let n = rhs.nrows();
        let mut kx = vec![0.0; n];
        let mut mx = vec![0.0; n];
        let mut corr = Mat::<f64>::zeros(n, rhs.ncols());
        for _ in 0..1 {
            for c in 0..rhs.ncols() {
                let x = rhs.rb().col(c).try_as_col_major().expect("contiguous column").as_slice();
                spmv_sym_par(&self.owner.sys.stiffness, x, &mut kx);
                spmv_sym_par(&self.owner.sys.mass, x, &mut mx);
                let bc = b.col_as_slice(c);
                for (i, r) in corr.col_as_slice_mut(c).iter_mut().enumerate() {
                    *r = bc[i] - (kx[i] - self.sigma * mx[i]);
                }
            }
            self.raw_solve(corr.as_mut());
            rhs += &corr;
        }
    }

    fn raw_solve(&self, rhs: MatMut<'_, f64>) {
        let sym = &self.owner.symbolic;
        let ldlt = LdltRef::new(sym, &self.values);
        let k = rhs.ncols();
        let par = self.owner.par;
        let mut buf = MemBuffer::new(sym.solve_in_place_scratch::<f64>(k, par));
        ldlt.solve_in_place_with_conj(Conj::No, rhs, par, MemStack::new(&mut buf));
    }
}

/// Count of eigenvalues in [lo, hi] via inertia, exposed for diagnostics.
pub fn count_in_band(sys: &AssembledSystem, lo: f64, hi: f64) -> Result<usize> {
    let f = ShiftedFactorizer::new(sys, Par::Seq)?;
    let a = f.factor(lo)?.negatives;
    let b = f.factor(hi)?.negatives;
    Ok(b.saturating_sub(a))
}

fn sliced_band(sys: &AssembledSystem, lo: f64, hi: f64, max_count: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let fac = ShiftedFactorizer::new(sys, opts.par())?;
    // Below zero K − σM is definite for any free body, so rigid modes land inside.
    let lo_shift = if lo <= 0.0 { -1e-4 * hi } else { lo };
    let n_lo = fac.factor(lo_shift)?.negatives;
    let n_hi = fac.factor(hi)?.negatives;
    let total = n_hi.saturating_sub(n_lo);
    log::info!("{total} eigenvalues in band, n = {}", sys.n_free());
    let mut out = EigenPairs::default();
    if total == 0 || max_count == 0 {
        return Ok(out);
    }
    let target = opts.slice_modes.max(1);

    // Slices are cut lowest first. Boundaries come from a Weyl-type count
    // model N(λ) ∝ λ^(3/2) between known inertia points and are checked by
    // inertia; each slice is then solved around its center. Only one
    // factorization is alive at any time.
    let g = |x: f64| x.max(0.0).powf(1.5);
    let g_inv = |y: f64| y.max(0.0).powf(2.0 / 3.0);
    let (mut a, mut na) = (lo_shift, n_lo);
    let mut slice_id = 0u64;
    while na < n_hi && out.len() < max_count {
        let remaining = n_hi - na;
        let (b, nb) = if remaining <= target + target / 2 {
            (hi, n_hi)
        } else {
            let mut b = g_inv(g(a) + (target as f64 / remaining as f64) * (g(hi) - g(a)));
            loop {
                let f = fac.factor(b)?;
                let count = f.negatives.saturating_sub(na);
                if count > 2 * target && (f.sigma - a) > 1e-9 * f.sigma.abs() {
                    b = g_inv(g(a) + (target as f64 / count as f64) * (g(f.sigma) - g(a)))
                        .max(a + 1e-3 * (f.sigma - a));
                    continue;
                }
                break (f.sigma, f.negatives);
            }
        };
        let count = nb.saturating_sub(na);
        if count > 0 {
            let mut sigma = 0.5 * (a + b);
            let found = loop {
                let f = fac.factor(sigma)?;
                match solve_slice(&fac, &f, a, b, count, opts, opts.seed ^ slice_id)? {
                    Some(found) => break found,
                    None => {
                        // The shift sits on an eigenvalue; move it.
                        sigma = f.sigma + 1e-3 * (b - a);
                        log::debug!("shift too close to an eigenvalue, retrying at {sigma:e}");
                    }
                }
            };
            for (l, x) in found {
                if out.len() < max_count {
                    out.values.push(l);
                    out.vectors.push(x);
                }
            }
        }
        slice_id += 1;
        a = b;
        na = nb;
    }
    Ok(out)
}

struct Basis {
    v: Mat<f64>,
    mv: Mat<f64>,
    cols: usize,
}

impl Basis {
    fn new(n: usize, cap: usize) -> Self {
        Basis { v: Mat::zeros(n, cap), mv: Mat::zeros(n, cap), cols: 0 }
    }

    /// w ← w − V (MVᵀ w), twice; returns the accumulated coefficients.
    fn orthogonalize(&self, mut w: MatMut<'_, f64>, par: Par) -> Mat<f64> {
        let k = self.cols;
        let mut total = Mat::<f64>::zeros(k, w.ncols());
        if k == 0 {
            return total;
        }
        let v = self.v.as_ref().subcols(0, k);
        let mv = self.mv.as_ref().subcols(0, k);
        for _ in 0..2 {
            let mut h = Mat::<f64>::zeros(k, w.ncols());
            matmul(h.as_mut(), Accum::Replace, mv.transpose(), w.rb(), 1.0, par);
            matmul(w.rb_mut(), Accum::Add, v, h.as_ref(), -1.0, par);
            total += &h;
        }
        total
    }

    fn set_block(&mut self, at: usize, w: &Mat<f64>, mw: &Mat<f64>) {
        let p = w.ncols();
        self.v.as_mut().subcols_mut(at, p).copy_from(w);
        self.mv.as_mut().subcols_mut(at, p).copy_from(mw);
        self.cols = at + p;
    }
}

fn random_block(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))
}

/// M-orthonormalize the columns of `w` against `basis` and each other.
/// Returns the triangular coefficient block and M·w. Columns that collapse are
/// replaced by random vectors with zero coefficients.
fn normalize_block(
    fac: &ShiftedFactorizer<'_>,
    w: &mut Mat<f64>,
    basis: &Basis,
    rng: &mut ChaCha8Rng,
    par: Par,
) -> (Mat<f64>, Mat<f64>) {
    let n = w.nrows();
    let p = w.ncols();
    let mut r = Mat::<f64>::zeros(p, p);
    let mut mw = Mat::<f64>::zeros(n, p);
    let mut tmp = vec![0.0; n];
    for c in 0..p {
        let mut replaced = false;
        for attempt in 0..4 {
            let before = if attempt == 0 { col_m_norm(fac, w.col_as_slice(c), &mut tmp) } else { 1.0 };
            for _ in 0..2 {
                for prev in 0..c {
                    let coef: f64 = dot(mw.col_as_slice(prev), w.col_as_slice(c));
                    if !replaced {
                        r[(prev, c)] += coef;
                    }
                    let q = w.col_as_slice(prev).to_vec();
                    axpy(-coef, &q, w.col_as_slice_mut(c));
                }
            }
            fac.mass_mul(w.col_as_slice(c), &mut tmp);
            let norm = dot(&tmp, w.col_as_slice(c)).max(0.0).sqrt();
            if norm > 1e-14 * before && norm > 0.0 {
                if !replaced {
                    r[(c, c)] = norm;
                }
                for v in w.col_as_slice_mut(c) {
                    *v /= norm;
                }
                for v in tmp.iter_mut() {
                    *v /= norm;
                }
                mw.col_as_slice_mut(c).copy_from_slice(&tmp);
                break;
            }
            // Breakdown: the Krylov space is invariant in this direction.
            replaced = true;
            r[(c, c)] = 0.0;
            let mut fresh = random_block(n, 1, rng);
            basis.orthogonalize(fresh.as_mut(), par);
            w.col_as_slice_mut(c).copy_from_slice(fresh.col_as_slice(0));
        }
    }
    (r, mw)
}

fn col_m_norm(fac: &ShiftedFactorizer<'_>, x: &[f64], tmp: &mut [f64]) -> f64 {
    fac.mass_mul(x, tmp);
    dot(tmp, x).max(0.0).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Find the `want` eigenpairs with λ in [a, b] using the factor's shift σ.
/// `None` means σ is too close to an eigenvalue and must be moved.
///
/// Block Lanczos on (K − σM)⁻¹M with full reorthogonalization and thick
/// restarts: when the basis is full it is compressed to the Ritz vectors
/// nearest the window (Krylov–Schur style), so converged and nearly converged
/// directions are never thrown away.
fn solve_slice(
    fac: &ShiftedFactorizer<'_>,
    factor: &ShiftedFactor<'_>,
    a: f64,
    b: f64,
    want: usize,
    opts: &EigenOptions,
    seed: u64,
) -> Result<Option<Vec<EigenPair>>> {
    let par = opts.par();
    let n = fac.sys.n_free();
    let sigma = factor.sigma;
    let p = opts.block_size.clamp(1, n);
    let cap = (2 * want + 6 * p).max(10 * p).min(n - n % p).max(2 * p);
    let keep_max = (want + 2 * p).min(cap - 2 * p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = Basis::new(n, cap + p);
    let mut h = Mat::<f64>::zeros(cap + p, cap + p);

    let mut w = random_block(n, p, &mut rng);
    let (_, mw) = normalize_block(fac, &mut w, &basis, &mut rng, par);
    basis.set_block(0, &w, &mw);
    let window_mid = 0.5 * (a + b);

    for restart in 0..=opts.max_restarts {
        loop {
            let k = basis.cols;
            let j0 = k - p;
            let mut w = basis.mv.as_ref().subcols(j0, p).to_owned();
            factor.solve_in_place(w.as_mut());
            let coef = basis.orthogonalize(w.as_mut(), par);
            h.as_mut().submatrix_mut(0, j0, k, p).copy_from(&coef);
            let (r, mw) = normalize_block(fac, &mut w, &basis, &mut rng, par);

            // Rayleigh–Ritz on the symmetric part of the projected operator.
            let hk = h.as_ref().submatrix(0, 0, k, k);
            // θ is tiny in SI units and the dense eigensolver has absolute
            // thresholds, so work on a normalized copy.
            let t_scale =
                (0..k).flat_map(|j| (0..k).map(move |i| (i, j))).map(|(i, j)| hk[(i, j)].abs()).fold(0.0, f64::max);
            let t_scale = if t_scale > 0.0 { t_scale } else { 1.0 };
            let t = Mat::from_fn(k, k, |i, j| 0.5 * (hk[(i, j)] + hk[(j, i)]) / t_scale);
            let evd = t
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("projected eigensolve failed: {e:?}")))?;
            let theta: Vec<f64> = (0..k).map(|i| evd.S().column_vector()[i] * t_scale).collect();
            let s = evd.U();
            // Roundoff in the residual estimates scales with the largest |θ|; an
            // eigenvalue practically at σ makes the wanted ones unreachable.
            let theta_max = (0..k).map(|i| theta[i].abs()).fold(0.0, f64::max);
            if theta_max * (sigma - a).abs().max((b - sigma).abs()) > 1e9 {
                return Ok(None);
            }
            // (index, λ, relative residual)
            let mut ritz = Vec::with_capacity(k);
            let mut rs = Mat::<f64>::zeros(p, 1);
            for i in 0..k {
                let th = theta[i];
                if th == 0.0 {
                    continue;
                }
                matmul(rs.as_mut(), Accum::Replace, r.as_ref(), s.submatrix(j0, i, p, 1), 1.0, Par::Seq);
                let res = (0..p).map(|q| rs[(q, 0)].powi(2)).sum::<f64>().sqrt();
                ritz.push((i, sigma + 1.0 / th, res / th.abs()));
            }
            let in_window = |l: f64| l >= a && l <= b;
            let mut done: Vec<_> = ritz.iter().filter(|c| in_window(c.1) && c.2 <= opts.tol).copied().collect();
            if done.len() >= want {
                done.sort_by(|x, y| x.2.total_cmp(&y.2));
                done.truncate(want);
                let mut pairs = Vec::with_capacity(want);
                for &(i, lambda, _) in &done {
                    let mut x = Mat::<f64>::zeros(n, 1);
                    matmul(
                        x.as_mut(),
                        Accum::Replace,
                        basis.v.as_ref().subcols(0, k),
                        s.submatrix(0, i, k, 1),
                        1.0,
                        par,
                    );
                    pairs.push((lambda, x.col_as_slice(0).to_vec()));
                }
                pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
                return Ok(Some(pairs));
            }
            if k + p <= cap {
                basis.set_block(k, &w, &mw);
                h.as_mut().submatrix_mut(k, j0, p, p).copy_from(&r);
                continue;
            }

            // Thick restart: keep the Ritz vectors closest to the window.
            let dist = |l: f64| if in_window(l) { 0.0 } else { (l - window_mid).abs() };
            ritz.sort_by(|x, y| dist(x.1).total_cmp(&dist(y.1)).then(x.2.total_cmp(&y.2)));
            let keep: Vec<usize> = ritz.iter().take(keep_max).map(|c| c.0).collect();
            let m = keep.len();
            let s_keep = Mat::from_fn(k, m, |i, j| s[(i, keep[j])]);
            let mut v_new = Mat::<f64>::zeros(n, m);
            let mut mv_new = Mat::<f64>::zeros(n, m);
            matmul(v_new.as_mut(), Accum::Replace, basis.v.as_ref().subcols(0, k), s_keep.as_ref(), 1.0, par);
            matmul(mv_new.as_mut(), Accum::Replace, basis.mv.as_ref().subcols(0, k), s_keep.as_ref(), 1.0, par);
            basis.set_block(0, &v_new, &mv_new);
            basis.set_block(m, &w, &mw);
            h.fill(0.0);
            for (j, &i) in keep.iter().enumerate() {
                h[(j, j)] = theta[i];
            }
            let mut coupling = Mat::<f64>::zeros(p, m);
            matmul(coupling.as_mut(), Accum::Replace, r.as_ref(), s_keep.as_ref().subrows(j0, p), 1.0, Par::Seq);
            h.as_mut().submatrix_mut(m, 0, p, m).copy_from(&coupling);
            log::debug!("slice [{a:e}, {b:e}] restart {restart}: {} of {want} converged", done.len());
            break;
        }
    }
    Err(Error::NoConvergence(format!(
        "eigenvalues in [{a:e}, {b:e}] not converged after {} restarts",
        opts.max_restarts
    )))
}
