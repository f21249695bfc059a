//! Weighted pool-adjacent-violators for the 1-D L2 problem.

/// Weighted L2 isotonic regression on a chain. Weights must be positive.
pub fn pava_l2(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (pooled value, pooled weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        blocks.push((y, w, 1));
        while blocks.len() >= 2 {
            let (v2, w2, c2) = blocks[blocks.len() - 1];
            let (v1, w1, c1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((v1 * w1 + v2 * w2) / w, w, c1 + c2));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (v, _, c) in blocks {
        out.extend(std::iter::repeat(v).take(c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_violators() {
        assert_eq!(pava_l2(&[2.0, 1.0], &[1.0, 1.0]), vec![1.5, 1.5]);
        assert_eq!(pava_l2(&[3.0, 1.0], &[1.0, 3.0]), vec![1.5, 1.5]);
        assert_eq!(pava_l2(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn cascading_pool() {
        let out = pava_l2(&[3.0, 2.0, 1.0], &[1.0, 1.0, 1.0]);
        assert_eq!(out, vec![2.0, 2.0, 2.0]);
    }
}
