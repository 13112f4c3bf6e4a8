//! Central finite-difference verification of tape gradients (64-bit).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Result, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)`.
    pub max_rel_error: f64,
    pub checked: usize,
}

const REL_FLOOR: f64 = 1e-3;

/// Builds the function on a fresh tape and reduces a non-scalar output to a
/// scalar by a fixed random projection.
fn eval<F>(f: &F, inputs: &[Tensor<f64>], proj_seed: u64) -> Result<(Tape<f64>, Vec<Var>, Var)>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let [r, c] = tape.shape(out);
    let loss = if r * c == 1 {
        out
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(proj_seed);
        let w = Tensor::uniform(r, c, -1.0, 1.0, &mut rng);
        let w = tape.leaf(w);
        let prod = tape.mul(out, w)?;
        tape.sum(prod)
    };
    Ok((tape, vars, loss))
}

/// Checks every input coordinate.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let coords: Vec<(usize, usize)> =
        inputs.iter().enumerate().flat_map(|(i, t)| (0..t.len()).map(move |j| (i, j))).collect();
    check_coords(&f, inputs, eps, &coords)
}

/// Checks `samples` randomly chosen coordinates.
pub fn grad_check_sampled<F>(
    f: F,
    inputs: &[Tensor<f64>],
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<usize> = inputs.iter().map(Tensor::len).collect();
    let total: usize = sizes.iter().sum();
    let mut coords = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut k = rng.gen_range(0..total);
        let mut i = 0;
        while k >= sizes[i] {
            k -= sizes[i];
            i += 1;
        }
        coords.push((i, k));
    }
    check_coords(&f, inputs, eps, &coords)
}

fn check_coords<F>(f: &F, inputs: &[Tensor<f64>], eps: f64, coords: &[(usize, usize)]) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    const PROJ: u64 = 0x5eed;
    let (tape, vars, loss) = eval(f, inputs, PROJ)?;
    let grads = tape.backward(loss)?;
    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for &(i, j) in coords {
        let analytic = grads.get(vars[i]).map_or(0.0, |g| g.data[j]);
        let orig = work[i].data[j];
        work[i].data[j] = orig + eps;
        let (tp, _, lp) = eval(f, &work, PROJ)?;
        let plus = tp.value(lp).item();
        work[i].data[j] = orig - eps;
        let (tm, _, lm) = eval(f, &work, PROJ)?;
        let minus = tm.value(lm).item();
        work[i].data[j] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(GradCheckReport { max_rel_error: worst, checked: coords.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_scale() {
        let x = Tensor::from_vec(1, 1, vec![0.7]).unwrap();
        let r = grad_check(|t, v| Ok(t.scale(v[0], 3.0)), &[x], 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn random_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Tensor::randn(4, 4, 1.0, &mut rng);
        let b = Tensor::randn(4, 4, 1.0, &mut rng);
        let r = grad_check(|t, v| t.matmul(v[0], v[1]), &[a, b], 1e-5).unwrap();
        assert_eq!(r.checked, 32);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }
}
