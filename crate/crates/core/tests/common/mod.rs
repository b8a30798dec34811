//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's loss or metric code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmodal::losses::LabeledBatch;
use xmodal::numerics::Tensor2;
use xmodal::Modality;

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let mut sq = 0.0;
    for i in 0..a.len() {
        sq += (a[i] - b[i]) * (a[i] - b[i]);
    }
    (sq + 1e-12).sqrt()
}

/// Enumerates every (anchor, positive, negative) triple and keeps, per anchor,
/// the largest hinge. Anchors and candidates are given as row lists.
pub fn enumerate_triplets(x: &[Vec<f64>], labels: &[usize], anchors: &[usize], candidates: &[usize], rho: f64) -> f64 {
    let mut total = 0.0;
    for &a in anchors {
        let mut worst = 0.0f64;
        for &p in candidates {
            if labels[p] != labels[a] {
                continue;
            }
            for &n in candidates {
                if labels[n] == labels[a] {
                    continue;
                }
                let hinge = rho + distance(&x[a], &x[p]) - distance(&x[a], &x[n]);
                worst = worst.max(hinge);
            }
        }
        total += worst;
    }
    total
}

pub fn rows(x: &Tensor2<f64>) -> Vec<Vec<f64>> {
    (0..x.rows()).map(|r| x.row(r).to_vec()).collect()
}

pub fn rows_with(modality: &[Modality], m: Modality) -> Vec<usize> {
    (0..modality.len()).filter(|&i| modality[i] == m).collect()
}

pub fn oracle_batch_hard(x: &Tensor2<f64>, labels: &[usize], rho: f64) -> f64 {
    let all: Vec<usize> = (0..x.rows()).collect();
    enumerate_triplets(&rows(x), labels, &all, &all, rho)
}

/// (visible anchors vs thermal rows, thermal anchors vs visible rows).
pub fn oracle_cross(batch: &LabeledBatch<f64>, rho: f64) -> (f64, f64) {
    let x = rows(batch.features());
    let v = rows_with(batch.modality(), Modality::Visible);
    let t = rows_with(batch.modality(), Modality::Thermal);
    (
        enumerate_triplets(&x, batch.identity(), &v, &t, rho),
        enumerate_triplets(&x, batch.identity(), &t, &v, rho),
    )
}

/// (within visible rows, within thermal rows).
pub fn oracle_intra(batch: &LabeledBatch<f64>, rho: f64) -> (f64, f64) {
    let x = rows(batch.features());
    let v = rows_with(batch.modality(), Modality::Visible);
    let t = rows_with(batch.modality(), Modality::Thermal);
    (
        enumerate_triplets(&x, batch.identity(), &v, &v, rho),
        enumerate_triplets(&x, batch.identity(), &t, &t, rho),
    )
}

/// A PK batch with shuffled row order, scattered identity labels and
/// uniform features in [-1, 1).
pub fn random_batch(p: usize, k: usize, dim: usize, rng: &mut ChaCha8Rng) -> LabeledBatch<f64> {
    let mut labels: Vec<usize> = Vec::new();
    while labels.len() < p {
        let id = rng.random_range(0..1000);
        if !labels.contains(&id) {
            labels.push(id);
        }
    }
    let mut layout = Vec::new();
    for m in Modality::BOTH {
        for &id in &labels {
            for _ in 0..k {
                layout.push((id, m));
            }
        }
    }
    for i in (1..layout.len()).rev() {
        let j = rng.random_range(0..=i);
        layout.swap(i, j);
    }
    let values = (0..layout.len() * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    LabeledBatch::new(
        Tensor2::new(layout.len(), dim, values).unwrap(),
        layout.iter().map(|l| l.0).collect(),
        layout.iter().map(|l| l.1).collect(),
        p,
        k,
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ranked order obtained by counting, for each gallery item, how many items
/// precede it (strictly closer, or equally close with a lower index).
pub fn oracle_ranking(query: &[f64], gallery: &[Vec<f64>]) -> Vec<usize> {
    let sq: Vec<f64> = gallery
        .iter()
        .map(|g| {
            let mut s = 0.0;
            for i in 0..g.len() {
                s += (g[i] - query[i]) * (g[i] - query[i]);
            }
            s
        })
        .collect();
    let mut order = vec![usize::MAX; gallery.len()];
    for j in 0..gallery.len() {
        let before = (0..gallery.len())
            .filter(|&i| sq[i] < sq[j] || (sq[i] == sq[j] && i < j))
            .count();
        order[before] = j;
    }
    order
}

/// Mean over positions k of precision@k at the relevant positions, with
/// precision recounted from scratch at every k.
pub fn oracle_average_precision(relevance: &[bool]) -> Option<f64> {
    let total = relevance.iter().filter(|&&r| r).count();
    if total == 0 {
        return None;
    }
    let mut sum = 0.0;
    for k in 1..=relevance.len() {
        if relevance[k - 1] {
            let hits = relevance[..k].iter().filter(|&&r| r).count();
            sum += hits as f64 / k as f64;
        }
    }
    Some(sum / total as f64)
}

/// Fraction of queries with at least one relevant item in the top r.
pub fn oracle_cmc(relevance: &[Vec<bool>], r: usize) -> f64 {
    let hits = relevance.iter().filter(|rel| rel.iter().take(r).any(|&x| x)).count();
    hits as f64 / relevance.len() as f64
}
