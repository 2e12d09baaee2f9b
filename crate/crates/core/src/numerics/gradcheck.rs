use rand::seq::index::sample;

use super::graph::{forward_backward, forward_with_branches, Graph, Var};
use super::params::ParamStore;
use super::random::rng_from_seed;
use crate::error::{Error, Result};

/// How the numeric derivative of each coordinate is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Difference {
    /// One central difference with step `epsilon`.
    Central,
    /// Ridders' polynomial extrapolation over central differences with steps
    /// shrinking from `epsilon`. Resolves gradients far below the roundoff
    /// floor of a single difference.
    Ridders,
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    pub method: Difference,
    /// Coordinates sampled per parameter; `None` checks every coordinate.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
    /// Coordinates where both gradients are below this magnitude are counted
    /// in `coords_skipped` instead of checked. Zero checks everything.
    pub min_magnitude: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-6,
            method: Difference::Central,
            max_coords_per_param: None,
            seed: 0,
            min_magnitude: 0.0,
        }
    }
}

impl GradCheckOptions {
    /// Ridders extrapolation from a step of 1e-2, skipping gradients below
    /// 1e-9 (under f64 difference resolution for O(1) losses); the setting
    /// used for whole models.
    pub fn extrapolated() -> Self {
        GradCheckOptions {
            epsilon: 1e-2,
            method: Difference::Ridders,
            min_magnitude: 1e-9,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_coord: usize,
    pub coords_checked: usize,
    pub coords_skipped: usize,
}

/// Compares analytic gradients with finite differences over trainable
/// parameters. Steps are halved for a coordinate while a probe changes any
/// `max_rows` choice. Relative error is `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn grad_check<F>(store: &mut ParamStore, f: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    if !(opts.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {}", opts.epsilon)));
    }
    forward_backward(store, &f)?;
    let (_, base_branches) = forward_with_branches(store, &f)?;
    let analytic: Vec<_> = store.ids().map(|id| store.grad(id).clone()).collect();
    let mut rng = rng_from_seed(opts.seed);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_coord: 0,
        coords_checked: 0,
        coords_skipped: 0,
    };

    let ids: Vec<_> = store.ids().filter(|&id| store.is_trainable(id)).collect();
    for id in ids {
        let len = store.value(id).len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < len => {
                let mut c = sample(&mut rng, len, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..len).collect(),
        };
        for c in coords {
            let orig = store.value(id).data()[c];
            let mut central = |h: f64| -> Result<(f64, bool)> {
                store.value_mut(id).data_mut()[c] = orig + h;
                let plus = forward_with_branches(store, &f);
                store.value_mut(id).data_mut()[c] = orig - h;
                let minus = forward_with_branches(store, &f);
                store.value_mut(id).data_mut()[c] = orig;
                let ((plus, bp), (minus, bm)) = (plus?, minus?);
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(Error::NonFinite {
                        param: store.name(id).to_string(),
                        coord: c,
                    });
                }
                let smooth = bp == base_branches && bm == base_branches;
                Ok(((plus - minus) / (2.0 * h), smooth))
            };
            // shrink the step until both probes stay on the same side of every max-pool kink
            let mut h = opts.epsilon;
            for _ in 0..40 {
                if central(h)?.1 {
                    break;
                }
                h *= 0.5;
            }
            let mut central = |h: f64| central(h).map(|(d, _)| d);
            let numeric = match opts.method {
                Difference::Central => central(h)?,
                Difference::Ridders => ridders(&mut central, h)?,
            };
            let a = analytic[id.index()].data()[c];
            if a.abs().max(numeric.abs()) < opts.min_magnitude {
                report.coords_skipped += 1;
                continue;
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            report.coords_checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst_param = store.name(id).to_string();
                report.worst_coord = c;
            }
        }
    }
    store.clear_gradients();
    Ok(report)
}

fn ridders(central: &mut impl FnMut(f64) -> Result<f64>, h0: f64) -> Result<f64> {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 10;
    const SAFE: f64 = 2.0;
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = central(h)?;
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = central(h)?;
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    Ok(best)
}
