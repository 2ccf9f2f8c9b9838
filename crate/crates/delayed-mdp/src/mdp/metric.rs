//! Probability metrics: Wasserstein-1 and the exponential 2-Renyi divergence.

use crate::error::{Error, Result};

/// Largest support handled by the exact transport solver in two or more dimensions.
pub const MAX_TRANSPORT_SUPPORT: usize = 64;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact W1 distance between two distributions over embedded points.
///
/// One-dimensional embeddings use the CDF formula; higher dimensions solve
/// the transportation problem exactly on the joint support.
pub fn wasserstein1(p: &[f64], q: &[f64], coords: &[Vec<f64>]) -> Result<f64> {
    if p.len() != q.len() || p.len() != coords.len() {
        return Err(Error::DimensionMismatch(format!(
            "p has {}, q has {}, coords has {} entries",
            p.len(),
            q.len(),
            coords.len()
        )));
    }
    let dim = coords.first().map_or(0, Vec::len);
    if dim == 0 || coords.iter().any(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch("ragged or empty embedding".into()));
    }
    if dim == 1 {
        let line: Vec<f64> = coords.iter().map(|c| c[0]).collect();
        return Ok(wasserstein1_line(p, q, &line));
    }
    let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0 || q[i] > 0.0).collect();
    if support.len() > MAX_TRANSPORT_SUPPORT {
        return Err(Error::SupportTooLarge {
            points: support.len(),
            limit: MAX_TRANSPORT_SUPPORT,
        });
    }
    let src: Vec<usize> = support.iter().copied().filter(|&i| p[i] > 0.0).collect();
    let dst: Vec<usize> = support.iter().copied().filter(|&i| q[i] > 0.0).collect();
    let cost: Vec<Vec<f64>> = src
        .iter()
        .map(|&i| {
            dst.iter()
                .map(|&j| euclid(&coords[i], &coords[j]))
                .collect()
        })
        .collect();
    let supply: Vec<f64> = src.iter().map(|&i| p[i]).collect();
    let demand: Vec<f64> = dst.iter().map(|&j| q[j]).collect();
    Ok(transport_cost(&supply, &demand, &cost))
}

/// W1 on the real line: integral of |F_p - F_q|.
pub fn wasserstein1_line(p: &[f64], q: &[f64], points: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for w in order.windows(2) {
        cdf_gap += p[w[0]] - q[w[0]];
        total += cdf_gap.abs() * (points[w[1]] - points[w[0]]);
    }
    total
}

/// Minimum-cost transportation by successive shortest paths with potentials.
///
/// Exact for real-valued masses: every augmentation saturates a supply, a
/// demand or a residual reverse arc, and reduced costs stay nonnegative.
fn transport_cost(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = supply.len();
    let n = demand.len();
    let eps = 1e-15;
    let mut flow = vec![vec![0.0f64; n]; m];
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    // Node ids: sources 0..m, sinks m..m+n.
    let nodes = m + n;
    let mut pot = vec![0.0f64; nodes];
    // Initial potentials: sinks at min incoming cost keep reduced costs >= 0.
    for j in 0..n {
        pot[m + j] = (0..m).map(|i| cost[i][j]).fold(f64::INFINITY, f64::min);
    }
    loop {
        let remaining: f64 = sup.iter().sum();
        if remaining <= eps {
            break;
        }
        // Dijkstra from all sources with remaining supply.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        for i in 0..m {
            if sup[i] > eps {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < m {
                for j in 0..n {
                    let v = m + j;
                    let rc = cost[u][j] + pot[u] - pot[v];
                    let nd = dist[u] + rc.max(0.0);
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if flow[i][j] > eps {
                        let rc = -cost[i][j] + pot[u] - pot[i];
                        let nd = dist[u] + rc.max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        // Closest sink with remaining demand.
        let mut sink = usize::MAX;
        let mut best = f64::INFINITY;
        for j in 0..n {
            if dem[j] > eps && dist[m + j] < best {
                best = dist[m + j];
                sink = m + j;
            }
        }
        if sink == usize::MAX {
            break;
        }
        // Bottleneck along the path.
        let mut amount = dem[sink - m];
        let mut v = sink;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= m {
                // reverse arc sink u -> source v carries flow[v][u-m]
                amount = amount.min(flow[v][u - m]);
            }
            v = u;
        }
        amount = amount.min(sup[v]);
        let source = v;
        let mut v = sink;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < m {
                flow[u][v - m] += amount;
            } else {
                flow[v][u - m] -= amount;
            }
            v = u;
        }
        sup[source] -= amount;
        dem[sink - m] -= amount;
        for x in 0..nodes {
            if dist[x].is_finite() {
                pot[x] += dist[x];
            }
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            total += flow[i][j] * cost[i][j];
        }
    }
    total
}

/// Exponential 2-Renyi divergence `d_2(p||q) = sum p^2/q` of discrete distributions.
pub fn renyi2_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch("p and q lengths differ".into()));
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::AbsoluteContinuity { index: i });
            }
            total += pi * pi / qi;
        }
    }
    Ok(total)
}

/// Diagonal Gaussian given by per-component means and standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Closed-form exponential 2-Renyi divergence between diagonal Gaussians.
///
/// Per component: `sq^2 / (sp * sqrt(2 sq^2 - sp^2)) * exp((mp - mq)^2 / (2 sq^2 - sp^2))`,
/// finite only when `2 sq^2 - sp^2 > 0`.
pub fn renyi2_gaussian(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    Ok(log_renyi2_gaussian(p, q)?.exp())
}

/// Natural logarithm of [`renyi2_gaussian`]; avoids overflow for distant means.
pub fn log_renyi2_gaussian(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    if p.mean.len() != q.mean.len() || p.std.len() != p.mean.len() || q.std.len() != q.mean.len() {
        return Err(Error::DimensionMismatch(
            "Gaussian dimensions differ".into(),
        ));
    }
    let mut log_total = 0.0;
    for i in 0..p.mean.len() {
        let (sp2, sq2) = (p.std[i] * p.std[i], q.std[i] * q.std[i]);
        let denom = 2.0 * sq2 - sp2;
        if !(denom > 0.0) || !(p.std[i] > 0.0) {
            return Err(Error::DivergenceInfinite(format!(
                "component {i}: 2*sigma_q^2 - sigma_p^2 = {denom}"
            )));
        }
        let gap = p.mean[i] - q.mean[i];
        log_total += sq2.ln() - p.std[i].ln() - 0.5 * denom.ln() + gap * gap / denom;
    }
    Ok(log_total)
}
