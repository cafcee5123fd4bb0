//! Ties loading rows to entity embeddings through an affine map and
//! assembles the joint objective
//!
//! `f = (1/n) Σ log N(y_j | μ, Σ) + (1/ℓ) Σ log σ(ψ⁺) + (1/ℓ') Σ log(1 − σ(ψ⁻))`
//!
//! subject to `w_i = A e_i + b` for every attribute that has an entity.

use crate::error::{Error, Result};
use crate::fa::{fa_marginal_nll_grad, Dataset, FaParams};
use crate::kg::{kg_objective, KnowledgeGraph, Triple};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// `c(e) = A e + b` with `A: d_x × d_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> AffineMap<T> {
    pub fn zeros(d_x: usize, d_e: usize) -> Self {
        Self {
            a: Matrix::zeros(d_x, d_e),
            b: vec![T::zero(); d_x],
        }
    }

    pub fn apply(&self, e: &[T]) -> Result<Vec<T>> {
        affine_map(self, e)
    }
}

pub fn affine_map<T: Scalar>(affine: &AffineMap<T>, e: &[T]) -> Result<Vec<T>> {
    if e.len() != affine.a.cols() {
        return Err(Error::Dimension {
            context: "affine map input",
            expected: affine.a.cols(),
            actual: e.len(),
        });
    }
    if affine.b.len() != affine.a.rows() {
        return Err(Error::Dimension {
            context: "affine map offset",
            expected: affine.a.rows(),
            actual: affine.b.len(),
        });
    }
    let mut out = affine.a.matvec(e);
    for (o, &b) in out.iter_mut().zip(&affine.b) {
        *o += b;
    }
    Ok(out)
}

/// Block sizes of a [`JointParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointDims {
    pub n_entities: usize,
    pub n_relations: usize,
    pub d_e: usize,
    pub d_x: usize,
    pub m: usize,
    pub m_tied: usize,
}

impl JointDims {
    pub fn for_graph(kg: &KnowledgeGraph, m: usize, d_x: usize, d_e: usize) -> Self {
        Self {
            n_entities: kg.n_entities(),
            n_relations: kg.n_relations(),
            d_e,
            d_x,
            m,
            m_tied: kg.n_tied(),
        }
    }

    pub fn n_free(&self) -> usize {
        self.m - self.m_tied
    }

    /// `E·d_e + R·d_e + d_x·d_e + d_x + 2m + (m − m′)·d_x`
    pub fn packed_len(&self) -> usize {
        self.n_entities * self.d_e
            + self.n_relations * self.d_e
            + self.d_x * self.d_e
            + self.d_x
            + 2 * self.m
            + self.n_free() * self.d_x
    }
}

/// Every free variable of the joint objective.
///
/// Free loading rows belong to the untied attributes in ascending column
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointParams<T> {
    pub embeddings: Matrix<T>,
    pub relations: Matrix<T>,
    pub affine: AffineMap<T>,
    pub mu: Vec<T>,
    pub log_var: Vec<T>,
    pub free_loadings: Matrix<T>,
}

impl<T: Scalar> JointParams<T> {
    pub fn zeros(dims: &JointDims) -> Self {
        Self {
            embeddings: Matrix::zeros(dims.n_entities, dims.d_e),
            relations: Matrix::zeros(dims.n_relations, dims.d_e),
            affine: AffineMap::zeros(dims.d_x, dims.d_e),
            mu: vec![T::zero(); dims.m],
            log_var: vec![T::zero(); dims.m],
            free_loadings: Matrix::zeros(dims.n_free(), dims.d_x),
        }
    }

    pub fn dims(&self) -> JointDims {
        JointDims {
            n_entities: self.embeddings.rows(),
            n_relations: self.relations.rows(),
            d_e: self.embeddings.cols(),
            d_x: self.affine.a.rows(),
            m: self.mu.len(),
            m_tied: self.mu.len().saturating_sub(self.free_loadings.rows()),
        }
    }

    /// Tied-row assembly plus the mean and variance blocks.
    pub fn fa_params(&self, kg: &KnowledgeGraph) -> Result<FaParams<T>> {
        Ok(FaParams {
            mu: self.mu.clone(),
            log_var: self.log_var.clone(),
            loadings: assemble_loadings(self, kg)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        pack(self).iter().all(|x| x.is_finite())
    }
}

fn check_consistent<T: Scalar>(joint: &JointParams<T>, kg: &KnowledgeGraph) -> Result<()> {
    let dims = joint.dims();
    let checks = [
        ("embedding rows vs entities", kg.n_entities(), dims.n_entities),
        ("relation rows vs relations", kg.n_relations(), dims.n_relations),
        ("relation width vs embedding width", dims.d_e, joint.relations.cols()),
        ("affine input width", dims.d_e, joint.affine.a.cols()),
        ("affine offset", dims.d_x, joint.affine.b.len()),
        ("log_var length", dims.m, joint.log_var.len()),
        ("free loading width", dims.d_x, joint.free_loadings.cols()),
        (
            "free loading rows",
            dims.m.saturating_sub(kg.n_tied()),
            joint.free_loadings.rows(),
        ),
    ];
    for (context, expected, actual) in checks {
        if expected != actual {
            return Err(Error::Dimension {
                context,
                expected,
                actual,
            });
        }
    }
    if let Some((&attr, _)) = kg.attribute_entity().range(dims.m..).next() {
        return Err(Error::Config(format!(
            "attribute {attr} is tied to an entity but the model has only {} attributes",
            dims.m
        )));
    }
    Ok(())
}

/// Row `i` is `A e_{entity(i)} + b` for tied attributes and the next free
/// row otherwise.
pub fn assemble_loadings<T: Scalar>(joint: &JointParams<T>, kg: &KnowledgeGraph) -> Result<Matrix<T>> {
    check_consistent(joint, kg)?;
    let m = joint.mu.len();
    let d_x = joint.affine.a.rows();
    let mut w = Matrix::zeros(m, d_x);
    let mut free = 0;
    for i in 0..m {
        match kg.entity_for_attribute(i) {
            Some(ent) => {
                let row = affine_map(&joint.affine, joint.embeddings.row(ent))?;
                w.row_mut(i).copy_from_slice(&row);
            }
            None => {
                w.row_mut(i).copy_from_slice(joint.free_loadings.row(free));
                free += 1;
            }
        }
    }
    Ok(w)
}

/// Value of the maximization objective and its gradient, laid out as a
/// [`JointParams`].
pub fn joint_objective<T: Scalar>(
    joint: &JointParams<T>,
    train: &Dataset<T>,
    positives: &[Triple],
    negatives: &[Triple],
    kg: &KnowledgeGraph,
) -> Result<(T, JointParams<T>)> {
    let fa = joint.fa_params(kg)?;
    let (nll, fa_grad) = fa_marginal_nll_grad(train, &fa)?;
    let (kg_value, kg_grad) = kg_objective(&joint.embeddings, &joint.relations, positives, negatives);

    let dims = joint.dims();
    let mut grad = JointParams::zeros(&dims);
    grad.embeddings = kg_grad.entities;
    grad.relations = kg_grad.relations;
    // ascent direction: f = -nll + kg
    for (g, d) in grad.mu.iter_mut().zip(&fa_grad.mu) {
        *g = -*d;
    }
    for (g, d) in grad.log_var.iter_mut().zip(&fa_grad.log_var) {
        *g = -*d;
    }

    let mut free = 0;
    for i in 0..dims.m {
        let dw: Vec<T> = fa_grad.loadings.row(i).iter().map(|&v| -v).collect();
        match kg.entity_for_attribute(i) {
            Some(ent) => {
                let e = joint.embeddings.row(ent);
                for (r, &g) in dw.iter().enumerate() {
                    grad.affine.b[r] += g;
                    for (c, &ec) in e.iter().enumerate() {
                        grad.affine.a[(r, c)] += g * ec;
                    }
                }
                let back = joint.affine.a.tr_matvec(&dw);
                for (g, b) in grad.embeddings.row_mut(ent).iter_mut().zip(back) {
                    *g += b;
                }
            }
            None => {
                grad.free_loadings.row_mut(free).copy_from_slice(&dw);
                free += 1;
            }
        }
    }
    Ok((kg_value - nll, grad))
}

/// Flattens in block order: embeddings, relations, A, b, mu, log_var,
/// free_loadings (matrices row-major).
pub fn pack<T: Scalar>(joint: &JointParams<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(joint.dims().packed_len());
    out.extend_from_slice(joint.embeddings.as_slice());
    out.extend_from_slice(joint.relations.as_slice());
    out.extend_from_slice(joint.affine.a.as_slice());
    out.extend_from_slice(&joint.affine.b);
    out.extend_from_slice(&joint.mu);
    out.extend_from_slice(&joint.log_var);
    out.extend_from_slice(joint.free_loadings.as_slice());
    out
}

pub fn unpack<T: Scalar>(flat: &[T], dims: &JointDims) -> Result<JointParams<T>> {
    if flat.len() != dims.packed_len() {
        return Err(Error::Dimension {
            context: "unpack",
            expected: dims.packed_len(),
            actual: flat.len(),
        });
    }
    let mut rest = flat;
    let mut take = |n: usize| {
        let (head, tail) = rest.split_at(n);
        rest = tail;
        head.to_vec()
    };
    let embeddings = Matrix::from_vec(dims.n_entities, dims.d_e, take(dims.n_entities * dims.d_e))?;
    let relations = Matrix::from_vec(dims.n_relations, dims.d_e, take(dims.n_relations * dims.d_e))?;
    let a = Matrix::from_vec(dims.d_x, dims.d_e, take(dims.d_x * dims.d_e))?;
    let b = take(dims.d_x);
    let mu = take(dims.m);
    let log_var = take(dims.m);
    let free_loadings = Matrix::from_vec(dims.n_free(), dims.d_x, take(dims.n_free() * dims.d_x))?;
    Ok(JointParams {
        embeddings,
        relations,
        affine: AffineMap { a, b },
        mu,
        log_var,
        free_loadings,
    })
}

/// Block names in packed order, with their lengths.
pub fn block_layout(dims: &JointDims) -> [(&'static str, usize); 7] {
    [
        ("embeddings", dims.n_entities * dims.d_e),
        ("relations", dims.n_relations * dims.d_e),
        ("affine_a", dims.d_x * dims.d_e),
        ("affine_b", dims.d_x),
        ("mu", dims.m),
        ("log_var", dims.m),
        ("free_loadings", dims.n_free() * dims.d_x),
    ]
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::fa::fa_marginal_nll;

    fn tiny_graph(tied: &[(usize, usize)]) -> KnowledgeGraph {
        let e = (0..4).map(|i| format!("e{i}")).collect();
        KnowledgeGraph::new(
            e,
            vec!["r".into()],
            vec![Triple::new(0, 0, 2), Triple::new(1, 0, 3)],
            tied.iter().copied().collect::<BTreeMap<_, _>>(),
        )
        .unwrap()
    }

    fn counting_params(dims: &JointDims) -> JointParams<f64> {
        let flat: Vec<f64> = (0..dims.packed_len()).map(|i| i as f64 * 0.1 - 1.0).collect();
        unpack(&flat, dims).unwrap()
    }

    #[test]
    fn affine_examples() {
        let mut aff = AffineMap::<f64>::zeros(2, 3);
        aff.b = vec![1.0, 2.0];
        assert_eq!(affine_map(&aff, &[5.0, -1.0, 3.0]).unwrap(), vec![1.0, 2.0]);
        let id = AffineMap {
            a: Matrix::identity(2),
            b: vec![0.0, 0.0],
        };
        assert_eq!(affine_map(&id, &[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
        assert!(matches!(affine_map(&id, &[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn untied_assembly_is_free_loadings() {
        let kg = tiny_graph(&[]);
        let dims = JointDims::for_graph(&kg, 3, 2, 2);
        let p = counting_params(&dims);
        assert_eq!(assemble_loadings(&p, &kg).unwrap(), p.free_loadings);
    }

    #[test]
    fn fully_tied_with_zero_map_repeats_offset() {
        let kg = tiny_graph(&[(0, 0), (1, 1)]);
        let dims = JointDims::for_graph(&kg, 2, 3, 2);
        let mut p = counting_params(&dims);
        p.affine.a = Matrix::zeros(3, 2);
        p.affine.b = vec![0.5, -0.5, 2.0];
        let w = assemble_loadings(&p, &kg).unwrap();
        for i in 0..2 {
            assert_eq!(w.row(i), &[0.5, -0.5, 2.0]);
        }
        assert_eq!(w, assemble_loadings(&p, &kg).unwrap());
    }

    #[test]
    fn tied_attribute_beyond_model_is_config_error() {
        let kg = tiny_graph(&[(0, 0), (5, 1)]);
        let dims = JointDims {
            m: 3,
            ..JointDims::for_graph(&kg, 3, 2, 2)
        };
        let p = JointParams::<f64>::zeros(&JointDims { m_tied: 2, ..dims });
        assert!(matches!(assemble_loadings(&p, &kg), Err(Error::Config(_))));
    }

    #[test]
    fn no_tuples_means_negative_fa_nll() {
        let kg = tiny_graph(&[(0, 0)]);
        let dims = JointDims::for_graph(&kg, 2, 2, 2);
        let mut p = counting_params(&dims);
        p.log_var = vec![0.2, -0.1];
        let data = Dataset::from_matrix(Matrix::from_rows(&[vec![0.1, 0.4], vec![-1.0, 2.0]]).unwrap()).unwrap();
        let (v, _) = joint_objective(&p, &data, &[], &[], &kg).unwrap();
        let nll = fa_marginal_nll(&data, &p.fa_params(&kg).unwrap()).unwrap();
        assert_eq!(v, -nll);
    }

    #[test]
    fn untied_model_leaves_affine_gradient_zero() {
        let kg = tiny_graph(&[]);
        let dims = JointDims::for_graph(&kg, 2, 2, 2);
        let p = counting_params(&dims);
        let data = Dataset::from_matrix(Matrix::from_rows(&[vec![0.1, 0.4], vec![-1.0, 2.0]]).unwrap()).unwrap();
        let (_, g) = joint_objective(&p, &data, kg.positives(), &[Triple::new(1, 0, 2)], &kg).unwrap();
        assert!(g.affine.a.as_slice().iter().chain(&g.affine.b).all(|&x| x == 0.0));
    }

    #[test]
    fn pack_roundtrip_and_length() {
        let kg = tiny_graph(&[(2, 1)]);
        let dims = JointDims::for_graph(&kg, 4, 3, 2);
        assert_eq!(dims.packed_len(), 4 * 2 + 2 + 3 * 2 + 3 + 8 + 3 * 3);
        let p = counting_params(&dims);
        let flat = pack(&p);
        assert_eq!(flat.len(), dims.packed_len());
        let back = unpack(&flat, &dims).unwrap();
        assert_eq!(pack(&back), flat);
        assert!(matches!(unpack(&flat[1..], &dims), Err(Error::Dimension { .. })));
    }
}
