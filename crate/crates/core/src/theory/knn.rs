//! Brute-force nearest-neighbor helpers over row matrices.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub(crate) fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// For each query row, the `k` nearest reference rows as `(distance, index)`,
/// nearest first. With `exclude_self` the reference row of the same index is
/// skipped (query and reference are the same set).
pub fn nearest(query: &Array2<f64>, reference: &Array2<f64>, k: usize, exclude_self: bool) -> Result<Vec<Vec<(f64, usize)>>> {
    let available = reference.nrows() - usize::from(exclude_self && reference.nrows() > 0);
    if k == 0 || k > available {
        return Err(Error::InvalidSpec(format!("k = {k} with {available} reference points")));
    }
    let mut out = Vec::with_capacity(query.nrows());
    let mut buf: Vec<(f64, usize)> = Vec::with_capacity(reference.nrows());
    for (i, q) in query.rows().into_iter().enumerate() {
        buf.clear();
        for (j, r) in reference.rows().into_iter().enumerate() {
            if exclude_self && i == j {
                continue;
            }
            buf.push((dist(q, r), j));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < buf.len() {
            buf.select_nth_unstable_by(k - 1, cmp);
        }
        let mut top = buf[..k].to_vec();
        top.sort_by(cmp);
        out.push(top);
    }
    Ok(out)
}

/// k-NN estimate of `p_T(z) / p_S(z)` at every target point:
/// `(n_S / (n_T - 1)) (r_S / r_T)^d`, where `r_U` is the distance to the
/// `k`-th nearest point of domain `U` (the point itself excluded).
pub fn knn_density_ratio(target: &Array2<f64>, source: &Array2<f64>, k: usize) -> Result<Vec<f64>> {
    let d = target.ncols() as i32;
    let (ns, nt) = (source.nrows() as f64, target.nrows() as f64);
    let rt = nearest(target, target, k, true)?;
    let rs = nearest(target, source, k, false)?;
    Ok(rt
        .iter()
        .zip(&rs)
        .map(|(t, s)| {
            let (rt, rs) = (t[k - 1].0, s[k - 1].0);
            if rt == 0.0 {
                if rs == 0.0 {
                    ns / (nt - 1.0)
                } else {
                    f64::INFINITY
                }
            } else {
                ns / (nt - 1.0) * (rs / rt).powi(d)
            }
        })
        .collect())
}

/// Fraction of positive labels among the `k` nearest reference points.
pub fn knn_label_vote(query: &Array2<f64>, reference: &Array2<f64>, labels: &[u8], k: usize, exclude_self: bool) -> Result<Vec<f64>> {
    let nn = nearest(query, reference, k, exclude_self)?;
    Ok(nn.iter().map(|row| row.iter().map(|&(_, j)| f64::from(labels[j])).sum::<f64>() / k as f64).collect())
}
