use super::{ResponseCurve, LEVELS};

/// L2 isotonic (non-decreasing) regression by pool-adjacent-violators.
pub fn isotonic_regression(values: &[f64]) -> Vec<f64> {
    // each block: (mean, length)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m1, n1) = blocks[blocks.len() - 1];
            let (m0, n0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let n = n0 + n1;
            *blocks.last_mut().unwrap() = ((m0 * n0 as f64 + m1 * n1 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Project each channel onto the non-decreasing curves, then re-anchor.
pub fn project_monotone(crf: &ResponseCurve) -> ResponseCurve {
    let mut out = crf.clone();
    for t in out.tables.iter_mut() {
        let fitted = isotonic_regression(t);
        debug_assert_eq!(fitted.len(), LEVELS);
        t.copy_from_slice(&fitted);
    }
    out.reanchor();
    out
}
