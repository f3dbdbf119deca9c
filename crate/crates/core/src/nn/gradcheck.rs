//! Central finite-difference verification of analytic gradients.

use rand::seq::SliceRandom;

use super::MlpParams;
use crate::rng;

/// Compares `analytic` against central differences of `loss_fn` on a random
/// subsample of at least `min_coords` coordinates (all of them when the
/// parameter vector is smaller). Returns the maximum relative error
/// `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
///
/// `loss_fn` must be deterministic; freeze dropout before calling.
pub fn finite_difference_check<F>(
    loss_fn: F,
    params: &MlpParams,
    analytic: &MlpParams,
    epsilon: f64,
    min_coords: usize,
    seed: u64,
) -> f64
where
    F: Fn(&MlpParams) -> f64,
{
    let total = params.coord_count();
    let mut coords: Vec<usize> = (0..total).collect();
    let sample = min_coords.min(total);
    let picked: Vec<usize> = if sample < total {
        let mut stream = rng::stream(seed);
        let (chosen, _) = coords.partial_shuffle(&mut stream, sample);
        chosen.to_vec()
    } else {
        coords
    };

    let mut worst = 0.0f64;
    let mut scratch = params.clone();
    for idx in picked {
        scratch.coord_add(idx, epsilon);
        let up = loss_fn(&scratch);
        scratch.coord_add(idx, -2.0 * epsilon);
        let down = loss_fn(&scratch);
        scratch.coord_add(idx, epsilon);

        let numeric = (up - down) / (2.0 * epsilon);
        let exact = analytic.coord(idx);
        let denom = exact.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((exact - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(p: &MlpParams) -> f64 {
        p.blocks()
            .iter()
            .flat_map(|(_, b)| b.iter())
            .map(|x| x * x)
            .sum()
    }

    fn quadratic_grad(p: &MlpParams) -> MlpParams {
        let mut g = p.zeros_like();
        let n = p.coord_count();
        for i in 0..n {
            g.coord_add(i, 2.0 * p.coord(i));
        }
        g
    }

    fn random_params(seed: u64) -> MlpParams {
        MlpParams::glorot(5, 7, 3, &mut crate::rng::stream(seed))
    }

    #[test]
    fn exact_quadratic_passes_tightly() {
        let p = random_params(2);
        let g = quadratic_grad(&p);
        let err = finite_difference_check(quadratic, &p, &g, 1e-5, 200, 0);
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn corrupted_gradient_entry_is_detected() {
        let p = random_params(4);
        let mut g = quadratic_grad(&p);
        // Double one entry: relative error approaches 0.5 at that coordinate.
        g.w1[(0, 0)] *= 2.0;
        let err = finite_difference_check(quadratic, &p, &g, 1e-5, p.coord_count(), 0);
        assert!((err - 0.5).abs() < 1e-4, "relative error {err}");
    }

    #[test]
    fn small_parameter_vectors_are_fully_sampled() {
        let p = MlpParams::zeros(1, 1, 1);
        let g = p.zeros_like();
        let err = finite_difference_check(|_| 0.0, &p, &g, 1e-5, 200, 0);
        assert_eq!(err, 0.0);
    }
}
