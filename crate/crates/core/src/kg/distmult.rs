use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::{Label, Triple};

/// DistMult score `Σ_k e_h[k] · m_r[k] · e_t[k]`.
///
/// Panics when the three vectors differ in length.
pub fn distmult_score<T: Scalar>(head: &[T], tail: &[T], relation: &[T]) -> T {
    assert!(
        head.len() == tail.len() && head.len() == relation.len(),
        "distmult_score: dimension mismatch ({}, {}, {})",
        head.len(),
        tail.len(),
        relation.len()
    );
    head.iter()
        .zip(tail)
        .zip(relation)
        .fold(T::zero(), |acc, ((&h, &t), &r)| acc + h * r * t)
}

/// Partial derivatives of the score with respect to `(e_h, e_t, m_r)`.
pub fn distmult_score_grad<T: Scalar>(head: &[T], tail: &[T], relation: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    assert!(
        head.len() == tail.len() && head.len() == relation.len(),
        "distmult_score_grad: dimension mismatch"
    );
    let d_head = relation.iter().zip(tail).map(|(&r, &t)| r * t).collect();
    let d_tail = relation.iter().zip(head).map(|(&r, &h)| r * h).collect();
    let d_rel = head.iter().zip(tail).map(|(&h, &t)| h * t).collect();
    (d_head, d_tail, d_rel)
}

/// `log σ(x)` without overflow for large `|x|`.
pub fn log_sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log σ(s)` for positives, `log(1 − σ(s))` for negatives.
pub fn tuple_log_likelihood<T: Scalar>(score: T, label: Label) -> T {
    match label {
        Label::Positive => log_sigmoid(score),
        Label::Negative => log_sigmoid(-score),
    }
}

/// Derivative of [`tuple_log_likelihood`] in the score.
fn tuple_log_likelihood_slope<T: Scalar>(score: T, label: Label) -> T {
    match label {
        Label::Positive => sigmoid(-score),
        Label::Negative => -sigmoid(score),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgGradient<T> {
    pub entities: Matrix<T>,
    pub relations: Matrix<T>,
}

/// Mean positive log-likelihood plus mean negative log-likelihood, with
/// gradients for both tables. An empty list contributes nothing.
pub fn kg_objective<T: Scalar>(
    entities: &Matrix<T>,
    relations: &Matrix<T>,
    positives: &[Triple],
    negatives: &[Triple],
) -> (T, KgGradient<T>) {
    assert_eq!(entities.cols(), relations.cols(), "embedding widths differ");
    let mut grad = KgGradient {
        entities: Matrix::zeros(entities.rows(), entities.cols()),
        relations: Matrix::zeros(relations.rows(), relations.cols()),
    };
    let mut value = T::zero();
    for (tuples, label) in [(positives, Label::Positive), (negatives, Label::Negative)] {
        if tuples.is_empty() {
            continue;
        }
        let weight = T::one() / T::from_usize(tuples.len()).unwrap();
        let mut sum = T::zero();
        for t in tuples {
            let (h, r, tl) = (entities.row(t.head), relations.row(t.relation), entities.row(t.tail));
            let s = distmult_score(h, tl, r);
            sum += tuple_log_likelihood(s, label);
            let c = weight * tuple_log_likelihood_slope(s, label);
            let (dh, dt, dr) = distmult_score_grad(h, tl, r);
            for (g, d) in grad.entities.row_mut(t.head).iter_mut().zip(dh) {
                *g += c * d;
            }
            for (g, d) in grad.entities.row_mut(t.tail).iter_mut().zip(dt) {
                *g += c * d;
            }
            for (g, d) in grad.relations.row_mut(t.relation).iter_mut().zip(dr) {
                *g += c * d;
            }
        }
        value += sum * weight;
    }
    (value, grad)
}
