//! Factor analysis with the latent factors integrated out.
//!
//! Each object `y_j ∈ R^m` is marginally `N(μ, Σ)` with
//! `Σ = W Wᵀ + diag(σ²)`. Variances are parameterized by `log σ²`.

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Scalar;

/// Observation matrix (objects × attributes) with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub values: Matrix<T>,
    pub attribute_names: Vec<String>,
    pub object_ids: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(values: Matrix<T>, attribute_names: Vec<String>, object_ids: Vec<String>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Config(
                "dataset needs at least one object and one attribute".into(),
            ));
        }
        if attribute_names.len() != values.cols() {
            return Err(Error::Dimension {
                context: "dataset attribute names",
                expected: values.cols(),
                actual: attribute_names.len(),
            });
        }
        if object_ids.len() != values.rows() {
            return Err(Error::Dimension {
                context: "dataset object ids",
                expected: values.rows(),
                actual: object_ids.len(),
            });
        }
        if !values.is_finite() {
            return Err(Error::Config("dataset contains non-finite values".into()));
        }
        Ok(Self {
            values,
            attribute_names,
            object_ids,
        })
    }

    /// Dataset with generated names `a0..` and ids `0..`.
    pub fn from_matrix(values: Matrix<T>) -> Result<Self> {
        let names = (0..values.cols()).map(|i| format!("a{i}")).collect();
        let ids = (0..values.rows()).map(|j| j.to_string()).collect();
        Self::new(values, names, ids)
    }

    pub fn n_objects(&self) -> usize {
        self.values.rows()
    }

    pub fn n_attributes(&self) -> usize {
        self.values.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(idx),
            attribute_names: self.attribute_names.clone(),
            object_ids: idx.iter().map(|&i| self.object_ids[i].clone()).collect(),
        }
    }

    pub fn column_means(&self) -> Vec<T> {
        let n = T::from_usize(self.n_objects()).unwrap();
        let mut mean = vec![T::zero(); self.n_attributes()];
        for j in 0..self.n_objects() {
            for (m, &y) in mean.iter_mut().zip(self.values.row(j)) {
                *m += y;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Population (divide by n) variance of each column.
    pub fn column_variances(&self) -> Vec<T> {
        let mean = self.column_means();
        let n = T::from_usize(self.n_objects()).unwrap();
        let mut var = vec![T::zero(); self.n_attributes()];
        for j in 0..self.n_objects() {
            for ((v, &y), &m) in var.iter_mut().zip(self.values.row(j)).zip(&mean) {
                *v += (y - m) * (y - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        var
    }
}

/// Mean, log noise variance and loading matrix of the factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct FaParams<T> {
    pub mu: Vec<T>,
    pub log_var: Vec<T>,
    /// `m × d_x`, row `i` is `w_iᵀ`.
    pub loadings: Matrix<T>,
}

impl<T: Scalar> FaParams<T> {
    pub fn n_attributes(&self) -> usize {
        self.mu.len()
    }

    fn check(&self, m: usize) -> Result<()> {
        for (context, len) in [
            ("fa mu", self.mu.len()),
            ("fa log_var", self.log_var.len()),
            ("fa loadings rows", self.loadings.rows()),
        ] {
            if len != m {
                return Err(Error::Dimension {
                    context,
                    expected: m,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaGradient<T> {
    pub mu: Vec<T>,
    pub loadings: Matrix<T>,
    pub log_var: Vec<T>,
}

/// `W Wᵀ + diag(exp(log_var))`.
pub fn build_covariance<T: Scalar>(loadings: &Matrix<T>, log_var: &[T]) -> Matrix<T> {
    assert_eq!(loadings.rows(), log_var.len(), "loadings rows vs log_var length");
    let mut sigma = loadings.gram();
    for (i, lv) in log_var.iter().enumerate() {
        sigma[(i, i)] += lv.exp();
    }
    sigma
}

fn factor<T: Scalar>(params: &FaParams<T>) -> Result<Cholesky<T>> {
    if !params.loadings.is_finite() || params.mu.iter().chain(&params.log_var).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite factor-analysis parameters".into()));
    }
    build_covariance(&params.loadings, &params.log_var).cholesky()
}

/// Average negative log marginal likelihood `-(1/n) Σ_j log N(y_j | μ, Σ)`.
pub fn fa_marginal_nll<T: Scalar>(data: &Dataset<T>, params: &FaParams<T>) -> Result<T> {
    let m = data.n_attributes();
    params.check(m)?;
    let chol = factor(params)?;

    let mut quad = T::zero();
    let mut z = vec![T::zero(); m];
    for j in 0..data.n_objects() {
        for ((zi, &y), &mu) in z.iter_mut().zip(data.values.row(j)).zip(&params.mu) {
            *zi = y - mu;
        }
        chol.solve_lower_in_place(&mut z);
        quad += dot(&z, &z);
    }
    let n = T::from_usize(data.n_objects()).unwrap();
    let m_t = T::from_usize(m).unwrap();
    let half = T::lit(0.5);
    let nll = half * (m_t * (T::TAU()).ln() + chol.log_det() + quad / n);
    if !nll.is_finite() {
        return Err(Error::Numerical("non-finite factor-analysis NLL".into()));
    }
    Ok(nll)
}

/// Averaged NLL together with its gradient in `μ`, `W` and `log σ²`.
///
/// With `G = ½(Σ⁻¹ − Σ⁻¹ S Σ⁻¹)` and `S` the second moment of `y − μ`:
/// `∂/∂μ = −Σ⁻¹(ȳ − μ)`, `∂/∂W = 2 G W`, `∂/∂log σ²_i = G_ii σ²_i`.
pub fn fa_marginal_nll_grad<T: Scalar>(data: &Dataset<T>, params: &FaParams<T>) -> Result<(T, FaGradient<T>)> {
    let nll = fa_marginal_nll(data, params)?;
    let m = data.n_attributes();
    let n = T::from_usize(data.n_objects()).unwrap();
    let chol = factor(params)?;
    let prec = chol.inverse();

    let mut centered_mean = vec![T::zero(); m];
    let mut second = Matrix::zeros(m, m);
    let mut r = vec![T::zero(); m];
    for j in 0..data.n_objects() {
        for ((ri, &y), &mu) in r.iter_mut().zip(data.values.row(j)).zip(&params.mu) {
            *ri = y - mu;
        }
        for a in 0..m {
            centered_mean[a] += r[a];
            let ra = r[a];
            let row = second.row_mut(a);
            for b in 0..=a {
                row[b] += ra * r[b];
            }
        }
    }
    for a in 0..m {
        centered_mean[a] /= n;
        for b in 0..=a {
            let v = second[(a, b)] / n;
            second[(a, b)] = v;
            second[(b, a)] = v;
        }
    }

    let grad_mu: Vec<T> = prec.matvec(&centered_mean).into_iter().map(|v| -v).collect();

    let half = T::lit(0.5);
    let ps = prec.matmul(&second);
    let psp = ps.matmul(&prec);
    let mut g = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            g[(a, b)] = half * (prec[(a, b)] - psp[(a, b)]);
        }
    }
    for a in 0..m {
        for b in 0..a {
            let v = half * (g[(a, b)] + g[(b, a)]);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }

    let mut grad_w = g.matmul(&params.loadings);
    grad_w.scale(T::lit(2.0));
    let grad_lv = (0..m).map(|i| g[(i, i)] * params.log_var[i].exp()).collect();

    Ok((
        nll,
        FaGradient {
            mu: grad_mu,
            loadings: grad_w,
            log_var: grad_lv,
        },
    ))
}
