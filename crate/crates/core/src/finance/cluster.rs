use nalgebra::DMatrix;

struct Cluster {
    min_index: usize,
    size: usize,
    leaves: Vec<usize>,
}

/// Leaf order of the average-linkage dendrogram on `1 − c`.
///
/// At each step the closest pair merges. Ties go to the pair whose
/// smaller-index cluster comes first, and within a merge the cluster holding
/// the smaller original index is placed first.
pub fn cluster_order(c: &DMatrix<f64>) -> Vec<usize> {
    let n = c.nrows();
    let mut clusters: Vec<Option<Cluster>> = (0..n)
        .map(|i| {
            Some(Cluster {
                min_index: i,
                size: 1,
                leaves: vec![i],
            })
        })
        .collect();
    let mut d = DMatrix::from_fn(n, n, |i, j| 1.0 - 0.5 * (c[(i, j)] + c[(j, i)]));
    // Slots stay sorted by min_index because the merged cluster keeps the
    // lower slot.
    for _ in 1..n {
        let active: Vec<usize> = (0..n).filter(|&i| clusters[i].is_some()).collect();
        let mut best = (f64::INFINITY, 0, 0);
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                if d[(a, b)] < best.0 {
                    best = (d[(a, b)], a, b);
                }
            }
        }
        let (_, a, b) = best;
        let cb = clusters[b].take().unwrap();
        let ca = clusters[a].as_mut().unwrap();
        let (sa, sb) = (ca.size as f64, cb.size as f64);
        for &k in &active {
            if k != a && k != b {
                let v = (sa * d[(a, k)] + sb * d[(b, k)]) / (sa + sb);
                d[(a, k)] = v;
                d[(k, a)] = v;
            }
        }
        debug_assert!(ca.min_index < cb.min_index);
        ca.size += cb.size;
        ca.leaves.extend(cb.leaves);
    }
    clusters
        .into_iter()
        .flatten()
        .next()
        .map(|c| c.leaves)
        .unwrap_or_default()
}
