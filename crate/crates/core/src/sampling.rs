//! Edge selection for random walks: uniform (`usample`) and exponential
//! weighting (`wsample`), where edge `i` is chosen with probability
//! `exp(w_i) / sum_j exp(w_j)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Edge;

/// Softmax of `weights`, computed with the maximum subtracted first.
pub fn softmax(weights: &[f64]) -> Vec<f64> {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Writes the cumulative softmax of `weights` into `out`. The last entry is
/// exactly 1.
pub(crate) fn softmax_cdf_into(weights: &[f64], out: &mut [f64]) {
    debug_assert_eq!(weights.len(), out.len());
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    for (o, w) in out.iter_mut().zip(weights) {
        acc += (w - max).exp();
        *o = acc;
    }
    for o in out.iter_mut() {
        *o /= acc;
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
}

/// Index drawn from a cumulative table ending at 1.
#[inline]
pub(crate) fn draw_from_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Uniformly random index into a sequence of length `n`.
pub fn usample_index<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<usize> {
    if n == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    Ok(rng.random_range(0..n))
}

/// Index drawn with probability proportional to `exp(weights[i])`.
pub fn wsample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    let mut cdf = vec![0.0; weights.len()];
    softmax_cdf_into(weights, &mut cdf);
    Ok(draw_from_cdf(&cdf, rng))
}

/// Picks one edge uniformly at random.
pub fn usample<'a, R: Rng + ?Sized>(edges: &'a [Edge], rng: &mut R) -> Result<&'a Edge> {
    Ok(&edges[usample_index(edges.len(), rng)?])
}

/// Picks one edge with probability proportional to `exp(weight)`.
pub fn wsample<'a, R: Rng + ?Sized>(edges: &'a [Edge], rng: &mut R) -> Result<&'a Edge> {
    let weights = edges
        .iter()
        .map(|e| {
            e.weight.ok_or_else(|| Error::MissingWeight {
                edge_type: e.edge_type.clone(),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(&edges[wsample_index(&weights, rng)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRef;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge(dst: &str, w: Option<f64>) -> Edge {
        Edge {
            edge_type: "um".into(),
            src: NodeRef::new("user", "u").unwrap(),
            dst: NodeRef::new("movie", dst).unwrap(),
            weight: w,
        }
    }

    fn freqs(n: usize, draws: usize, mut f: impl FnMut() -> usize) -> Vec<f64> {
        let mut c = vec![0usize; n];
        for _ in 0..draws {
            c[f()] += 1;
        }
        c.into_iter().map(|x| x as f64 / draws as f64).collect()
    }

    #[test]
    fn empty_sets_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(usample(&[], &mut rng), Err(Error::EmptyEdgeSet)));
        assert!(matches!(wsample(&[], &mut rng), Err(Error::EmptyEdgeSet)));
    }

    #[test]
    fn missing_weight_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let edges = [edge("a", Some(1.0)), edge("b", None)];
        assert!(matches!(wsample(&edges, &mut rng), Err(Error::MissingWeight { .. })));
    }

    #[test]
    fn single_edge_always_chosen() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let edges = [edge("only", Some(2.0))];
        for _ in 0..100 {
            assert_eq!(usample(&edges, &mut rng).unwrap().dst.id, "only");
            assert_eq!(wsample(&edges, &mut rng).unwrap().dst.id, "only");
        }
    }

    #[test]
    fn uniform_over_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = freqs(3, 100_000, || usample_index(3, &mut rng).unwrap());
        for p in f {
            assert!((p - 1.0 / 3.0).abs() < 0.01, "{p}");
        }
    }

    #[test]
    fn seeded_replay_is_identical() {
        let edges: Vec<Edge> = ["a", "b", "c", "d"].iter().map(|d| edge(d, Some(1.0))).collect();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| usample(&edges, &mut rng).unwrap().dst.id.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn softmax_reference_values() {
        // exp(5), exp(1), exp(3) normalised
        let p = softmax(&[5.0, 1.0, 3.0]);
        let z = 5f64.exp() + 1f64.exp() + 3f64.exp();
        assert!((p[0] - 5f64.exp() / z).abs() < 1e-15);
        assert!((p[0] - 0.867).abs() < 5e-4);
        assert!((p[1] - 0.016).abs() < 5e-4);
        assert!((p[2] - 0.117).abs() < 5e-4);

        let p = softmax(&[10.0, 0.0]);
        assert!((p[0] - 0.999_954_6).abs() < 1e-7);
        assert!((p[1] - 0.000_045_4).abs() < 1e-7);
    }

    #[test]
    fn equal_weights_are_uniform() {
        let p = softmax(&[2.5; 4]);
        for x in p {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn large_weights_do_not_overflow() {
        let p = softmax(&[1000.0, 999.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn cdf_ends_at_one() {
        let mut out = [0.0; 3];
        softmax_cdf_into(&[0.1, 0.2, 0.3], &mut out);
        assert_eq!(out[2], 1.0);
        assert!(out[0] < out[1] && out[1] < out[2]);
    }
}
