use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::Tensor2;
use crate::scalar::Real;

/// Gallery indices by ascending distance to `query`, ties by ascending index.
///
/// Squared distances are compared: the order is the Euclidean order, without
/// the rounding a square root can introduce.
pub fn rank_gallery<T: Real>(query: &[T], gallery: &Tensor2<T>) -> Result<Vec<usize>> {
    if query.len() != gallery.cols() {
        return Err(Error::DimensionMismatch {
            context: "query feature",
            expected: gallery.cols(),
            found: query.len(),
        });
    }
    let dist: Vec<T> = (0..gallery.rows())
        .map(|i| gallery.row(i).iter().zip(query).map(|(&g, &q)| (g - q) * (g - q)).sum())
        .collect();
    let mut order: Vec<usize> = (0..gallery.rows()).collect();
    order.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b)));
    Ok(order)
}

/// `(1/R) · Σ_k precision@k · rel(k)` over a ranked relevance list.
pub fn average_precision(relevance: &[bool]) -> Result<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::NoRelevant);
    }
    Ok(sum / hits as f64)
}

/// Fraction of queries whose first relevant item sits at position ≤ r, for
/// each requested r.
pub fn cmc_curve(ranked_relevance: &[Vec<bool>], ranks: &[usize]) -> Result<BTreeMap<usize, f64>> {
    if ranked_relevance.is_empty() {
        return Err(Error::InvalidConfig("CMC needs at least one query".into()));
    }
    let mut first_hits = Vec::with_capacity(ranked_relevance.len());
    for rel in ranked_relevance {
        first_hits.push(rel.iter().position(|&r| r).ok_or(Error::NoRelevant)? + 1);
    }
    let n = first_hits.len() as f64;
    Ok(ranks
        .iter()
        .map(|&r| (r, first_hits.iter().filter(|&&h| h <= r).count() as f64 / n))
        .collect())
}

/// Rankings of a query set against a gallery and the metrics derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    /// Per query, gallery indices in ranked order.
    pub ranked: Vec<Vec<usize>>,
    /// Per query, relevance of each ranked gallery item.
    pub relevance: Vec<Vec<bool>>,
    pub cmc: BTreeMap<usize, f64>,
    pub map_score: f64,
    /// Queries without any relevant gallery item; left out of CMC and mAP.
    pub excluded_queries: usize,
}

/// Ranks every query row against the gallery. Queries run in parallel; results
/// are assembled in query order so the outcome matches a sequential run.
pub fn rank_queries<T: Real>(
    queries: &Tensor2<T>,
    query_ids: &[usize],
    gallery: &Tensor2<T>,
    gallery_ids: &[usize],
    ranks: &[usize],
) -> Result<RankingResult> {
    if query_ids.len() != queries.rows() || gallery_ids.len() != gallery.rows() {
        return Err(Error::DimensionMismatch {
            context: "ranking labels",
            expected: queries.rows() + gallery.rows(),
            found: query_ids.len() + gallery_ids.len(),
        });
    }
    let ranked: Vec<Vec<usize>> = (0..queries.rows())
        .into_par_iter()
        .map(|q| rank_gallery(queries.row(q), gallery))
        .collect::<Result<_>>()?;
    let relevance: Vec<Vec<bool>> = ranked
        .iter()
        .zip(query_ids)
        .map(|(order, &id)| order.iter().map(|&g| gallery_ids[g] == id).collect())
        .collect();
    let scored: Vec<Vec<bool>> = relevance.iter().filter(|r| r.contains(&true)).cloned().collect();
    let excluded_queries = relevance.len() - scored.len();
    if excluded_queries > 0 {
        log::warn!("{excluded_queries} queries have no relevant gallery item and are excluded");
    }
    if scored.is_empty() {
        return Err(Error::NoRelevant);
    }
    let map_score = scored.iter().map(|r| average_precision(r)).sum::<Result<f64>>()? / scored.len() as f64;
    let cmc = cmc_curve(&scored, ranks)?;
    Ok(RankingResult {
        ranked,
        relevance,
        cmc,
        map_score,
        excluded_queries,
    })
}
