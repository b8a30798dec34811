//! Batch-hard triplet mining and its cross-/intra-modality variants.
//!
//! All losses are sums over anchors of `[ρ + max_p d(a, p) − min_n d(a, n)]₊`.
//! Ties in the hardest positive or negative go to the lowest row index, and a
//! subgradient flows only through the selected pair of each active anchor.

use std::collections::BTreeSet;

use super::batch::LabeledBatch;
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numerics::{euclidean, Tensor2};
use crate::scalar::Real;

/// Loss value, gradient with respect to the features, and mining diagnostics.
#[derive(Debug, Clone)]
pub struct TripletOutput<T> {
    pub loss: T,
    pub grad: Tensor2<T>,
    /// Anchors whose hinge was strictly positive.
    pub active_anchors: usize,
    /// Distance to the nearest point where the loss is not differentiable:
    /// the smallest |hinge argument|, gap between the selected and the
    /// runner-up candidate, or distance of a selected pair of distinct rows
    /// (the norm has a kink where two rows coincide).
    pub kink_margin: T,
}

impl<T: Real> TripletOutput<T> {
    fn empty(rows: usize, cols: usize) -> Self {
        Self {
            loss: T::zero(),
            grad: Tensor2::zeros(rows, cols),
            active_anchors: 0,
            kink_margin: T::infinity(),
        }
    }

    fn absorb(&mut self, other: TripletOutput<T>) {
        self.loss += other.loss;
        self.grad.add_assign(&other.grad);
        self.active_anchors += other.active_anchors;
        self.kink_margin = self.kink_margin.min(other.kink_margin);
    }
}

fn add_pair_grad<T: Real>(grad: &mut Tensor2<T>, x: &Tensor2<T>, a: usize, b: usize, dist: T, scale: T) {
    if a == b {
        return;
    }
    let factor = scale / dist;
    for k in 0..x.cols() {
        let g = factor * (x.get(a, k) - x.get(b, k));
        grad.row_mut(a)[k] += g;
        grad.row_mut(b)[k] -= g;
    }
}

/// Mines the hardest positive and negative for each anchor among `candidates`.
fn mine<T: Real>(
    x: &Tensor2<T>,
    labels: &[usize],
    anchors: &[usize],
    candidates: &[usize],
    rho: T,
) -> Result<TripletOutput<T>> {
    let mut out: TripletOutput<T> = TripletOutput::empty(x.rows(), x.cols());
    for &a in anchors {
        // (distance, row) of best and runner-up
        let mut pos: Option<(T, usize)> = None;
        let mut pos_second = T::neg_infinity();
        let mut neg: Option<(T, usize)> = None;
        let mut neg_second = T::infinity();
        for &c in candidates {
            let d = euclidean(x.row(a), x.row(c));
            if labels[c] == labels[a] {
                match pos {
                    Some((best, _)) if d <= best => pos_second = pos_second.max(d),
                    Some((best, _)) => {
                        pos_second = pos_second.max(best);
                        pos = Some((d, c));
                    }
                    None => pos = Some((d, c)),
                }
            } else {
                match neg {
                    Some((best, _)) if d >= best => neg_second = neg_second.min(d),
                    Some((best, _)) => {
                        neg_second = neg_second.min(best);
                        neg = Some((d, c));
                    }
                    None => neg = Some((d, c)),
                }
            }
        }
        let (d_pos, p) = pos.ok_or(Error::NoPositive(a))?;
        let (d_neg, n) = neg.ok_or(Error::SingleIdentity("anchor has no negative candidate"))?;
        let hinge = rho + d_pos - d_neg;
        out.kink_margin = out.kink_margin.min(hinge.abs());
        if hinge > T::zero() {
            out.loss += hinge;
            out.active_anchors += 1;
            out.kink_margin = out
                .kink_margin
                .min(d_pos - pos_second)
                .min(neg_second - d_neg)
                .min(d_neg);
            if p != a {
                out.kink_margin = out.kink_margin.min(d_pos);
            }
            add_pair_grad(&mut out.grad, x, a, p, d_pos, T::one());
            add_pair_grad(&mut out.grad, x, a, n, d_neg, -T::one());
        }
    }
    Ok(out)
}

/// Plain batch-hard triplet loss: every row is an anchor and every row
/// (itself included) is a candidate.
pub fn batch_hard_triplet<T: Real>(features: &Tensor2<T>, labels: &[usize], rho: T) -> Result<TripletOutput<T>> {
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            context: "triplet labels",
            expected: features.rows(),
            found: labels.len(),
        });
    }
    if labels.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(Error::SingleIdentity("batch"));
    }
    features.ensure_finite("triplet features")?;
    let all: Vec<usize> = (0..features.rows()).collect();
    mine(features, labels, &all, &all, rho)
}

fn rows_of<T: Real>(batch: &LabeledBatch<T>, m: Modality) -> Result<Vec<usize>> {
    let rows = batch.rows_of(m);
    if rows.is_empty() {
        return Err(Error::MissingModality(m.name()));
    }
    Ok(rows)
}

/// Both directions of a two-modality loss plus their sum.
#[derive(Debug, Clone)]
pub struct DirectionalOutput<T> {
    /// Visible anchors (cross: against thermal; intra: against visible).
    pub visible: T,
    /// Thermal anchors (cross: against visible; intra: against thermal).
    pub thermal: T,
    pub total: TripletOutput<T>,
}

/// Bi-directional cross-modality loss: visible anchors mine thermal rows
/// only, thermal anchors mine visible rows only.
pub fn cross_modality_triplet<T: Real>(batch: &LabeledBatch<T>, rho: T) -> Result<DirectionalOutput<T>> {
    let v = rows_of(batch, Modality::Visible)?;
    let t = rows_of(batch, Modality::Thermal)?;
    let x = batch.features();
    let labels = batch.identity();
    let vt = mine(x, labels, &v, &t, rho)?;
    let tv = mine(x, labels, &t, &v, rho)?;
    let (visible, thermal) = (vt.loss, tv.loss);
    let mut total = vt;
    total.absorb(tv);
    Ok(DirectionalOutput {
        visible,
        thermal,
        total,
    })
}

/// Batch-hard loss within the visible rows plus within the thermal rows.
pub fn intra_modality_triplet<T: Real>(batch: &LabeledBatch<T>, rho: T) -> Result<DirectionalOutput<T>> {
    let x = batch.features();
    let labels = batch.identity();
    let mut parts = Vec::with_capacity(2);
    for m in Modality::BOTH {
        let rows = rows_of(batch, m)?;
        if rows.iter().map(|&r| labels[r]).collect::<BTreeSet<_>>().len() < 2 {
            return Err(Error::SingleIdentity(match m {
                Modality::Visible => "visible rows",
                Modality::Thermal => "thermal rows",
            }));
        }
        parts.push(mine(x, labels, &rows, &rows, rho)?);
    }
    let tv = parts.pop().unwrap();
    let vv = parts.pop().unwrap();
    let (visible, thermal) = (vv.loss, tv.loss);
    let mut total = vv;
    total.absorb(tv);
    Ok(DirectionalOutput {
        visible,
        thermal,
        total,
    })
}

/// `L_c + λ1·L_i` with its components.
#[derive(Debug, Clone)]
pub struct DualOutput<T> {
    pub cross: DirectionalOutput<T>,
    pub intra: DirectionalOutput<T>,
    pub loss: T,
    pub grad: Tensor2<T>,
    pub kink_margin: T,
}

pub fn dual_modality_triplet<T: Real>(batch: &LabeledBatch<T>, rho: T, lambda1: T) -> Result<DualOutput<T>> {
    let cross = cross_modality_triplet(batch, rho)?;
    let intra = intra_modality_triplet(batch, rho)?;
    let loss = cross.total.loss + lambda1 * intra.total.loss;
    let mut grad = cross.total.grad.clone();
    grad.add_assign(&intra.total.grad.scale(lambda1));
    let kink_margin = if lambda1 == T::zero() {
        cross.total.kink_margin
    } else {
        cross.total.kink_margin.min(intra.total.kink_margin)
    };
    Ok(DualOutput {
        cross,
        intra,
        loss,
        grad,
        kink_margin,
    })
}
