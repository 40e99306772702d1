//! One-dimensional bracketed maximisation.

/// Inverse golden ratio, the fraction of the bracket kept per iteration.
pub const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMax {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `tol`. The objective may fail;
/// the first error aborts the search. `shrink` is the fraction of the bracket
/// retained per iteration and must lie in (0.5, 1); [`INV_PHI`] reuses one
/// interior point per step.
pub fn golden_max<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
    shrink: f64,
) -> Result<LineMax, E> {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let reuse = (shrink - INV_PHI).abs() < 1e-12;
    let mut evaluations = 0usize;
    let mut eval = |x: f64, n: &mut usize| {
        *n += 1;
        f(x)
    };

    let mut x1 = hi - shrink * (hi - lo);
    let mut x2 = lo + shrink * (hi - lo);
    let mut f1 = eval(x1, &mut evaluations)?;
    let mut f2 = eval(x2, &mut evaluations)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            if reuse {
                x2 = x1;
                f2 = f1;
                x1 = hi - shrink * (hi - lo);
                f1 = eval(x1, &mut evaluations)?;
            } else {
                x1 = hi - shrink * (hi - lo);
                x2 = lo + shrink * (hi - lo);
                f1 = eval(x1, &mut evaluations)?;
                f2 = eval(x2, &mut evaluations)?;
            }
        } else {
            lo = x1;
            if reuse {
                x1 = x2;
                f1 = f2;
                x2 = lo + shrink * (hi - lo);
                f2 = eval(x2, &mut evaluations)?;
            } else {
                x1 = hi - shrink * (hi - lo);
                x2 = lo + shrink * (hi - lo);
                f1 = eval(x1, &mut evaluations)?;
                f2 = eval(x2, &mut evaluations)?;
            }
        }
        if x2 <= x1 {
            break;
        }
    }
    let (x, value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok(LineMax {
        x,
        value,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn finds_parabola_peak() {
        let r = golden_max(
            |x| Ok::<_, Infallible>(-(x - 1.3).powi(2)),
            -2.0,
            4.0,
            1e-9,
            INV_PHI,
        )
        .unwrap();
        assert!((r.x - 1.3).abs() < 1e-8);
        assert!(r.evaluations < 60);
    }

    #[test]
    fn peak_at_bracket_edge() {
        let r = golden_max(Ok::<_, Infallible>, 0.0, 1.0, 1e-6, INV_PHI).unwrap();
        assert!((r.x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn other_shrink_factors_converge() {
        let r = golden_max(
            |x| Ok::<_, Infallible>(-(x + 0.25).abs()),
            -1.0,
            1.0,
            1e-7,
            0.7,
        )
        .unwrap();
        assert!((r.x + 0.25).abs() < 1e-6);
    }

    #[test]
    fn objective_errors_propagate() {
        let r = golden_max(|_| Err::<f64, _>("boom"), 0.0, 1.0, 1e-3, INV_PHI);
        assert_eq!(r, Err("boom"));
    }
}
