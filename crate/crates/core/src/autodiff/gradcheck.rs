use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AutodiffError, Graph, ParamId, ParamStore, Var};

/// Coordinate sampling for [`grad_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates checked per parameter; all of them when the tensor is smaller.
    pub max_coords_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords_per_param: 12,
            seed: 0,
        }
    }
}

/// Compares backward-pass gradients of the scalar built by `f` with central
/// differences; returns the max of `|a - n| / max(1, |a|, |n|)`.
///
/// `f` must be deterministic (no dropout).
pub fn grad_check<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    options: GradCheckOptions,
    f: F,
) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Graph) -> Result<Var, AutodiffError>,
{
    if options.eps <= 0.0 {
        return Err(AutodiffError::InvalidArgument(format!("eps = {}", options.eps)));
    }
    let analytic = {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        g.backward(loss)?
    };
    let eval = |store: &ParamStore| -> Result<f64, AutodiffError> {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        Ok(g.scalar(loss))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut worst: f64 = 0.0;
    for &id in params {
        let n = store.value(id).len();
        let grad = analytic.get_or_zeros(id, store);
        let coords: Vec<usize> = if n <= options.max_coords_per_param {
            (0..n).collect()
        } else {
            sample(&mut rng, n, options.max_coords_per_param).into_vec()
        };
        for i in coords {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + options.eps;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig - options.eps;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * options.eps);
            let a = grad[i];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
