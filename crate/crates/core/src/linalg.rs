//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Thin SVD `m = U diag(s) V^H` with singular values sorted non-increasing.
///
/// Returns `(U, s, V)` where `V` holds the right singular vectors as columns
/// (not the conjugate transpose).
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl SortedSvd {
    pub fn new(m: &CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidParameter("SVD of an empty matrix".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalDegeneracy("non-finite matrix entry".into()));
        }
        let svd = m.clone().svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::NumericalDegeneracy("SVD did not converge".into())),
        };
        let k = svd.singular_values.len();
        let mut order: Vec<usize> = (0..k).collect();
        // stable sort keeps the routine's order on ties
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let mut su = CMatrix::zeros(m.nrows(), k);
        let mut sv = CMatrix::zeros(m.ncols(), k);
        let mut s = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            su.set_column(dst, &u.column(src));
            for row in 0..m.ncols() {
                sv[(row, dst)] = v_t[(src, row)].conj();
            }
            s.push(svd.singular_values[src]);
        }
        Ok(Self { u: su, s, v: sv })
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * self.v.adjoint()
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(j arg z)`, with `arg 0 = 0`.
pub fn phase_of(z: C64) -> C64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        C64::new(1.0, 0.0)
    }
}

/// The first `k` columns of `m` as an owned matrix.
pub fn leading_columns(m: &CMatrix, k: usize) -> CMatrix {
    m.columns(0, k).into_owned()
}

/// Lower Cholesky factor of a Hermitian positive semi-definite matrix.
///
/// Falls back to the Hermitian eigendecomposition (`Q sqrt(Λ)`) when the
/// matrix is singular to working precision; either factor `L` satisfies
/// `L L^H = a`.
pub fn psd_factor(a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "factor of non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = a.clone().symmetric_eigen();
    let mut q = eig.eigenvectors;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-9 * eig.eigenvalues.amax().max(1.0) {
            return Err(Error::NumericalDegeneracy(format!(
                "covariance has negative eigenvalue {lam}"
            )));
        }
        q.column_mut(j).scale_mut(lam.max(0.0).sqrt());
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |i, j| {
            C64::new(((i * 7 + j * 3) as f64).sin(), ((i * 5 + j * 11) as f64).cos())
        })
    }

    #[test]
    fn sorted_svd_reconstructs() {
        for (r, c) in [(3, 5), (5, 3), (4, 4)] {
            let m = sample(r, c);
            let svd = SortedSvd::new(&m).unwrap();
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            assert!(frobenius(&(svd.reconstruct() - &m)) < 1e-10);
        }
    }

    #[test]
    fn phase_of_zero_is_one() {
        assert_eq!(phase_of(C64::new(0.0, 0.0)), C64::new(1.0, 0.0));
        assert!((phase_of(C64::new(0.0, -3.0)) - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn psd_factor_handles_singular() {
        let v = sample(3, 1);
        let a = &v * v.adjoint();
        let l = psd_factor(&a).unwrap();
        assert!(frobenius(&(&l * l.adjoint() - &a)) < 1e-10);
    }
}
