//! Small derivative-free minimizers used by the outer decay-rate searches.

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
/// Stops once the bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // the iteration cap only matters for tol below float resolution
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Initial simplex edge per coordinate.
    pub step: Vec<f64>,
    /// Converged when every vertex lies within this distance of the best one.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional box; trial points are projected onto it.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex minimization with standard coefficients
/// (reflect 1, expand 2, contract 1/2, shrink 1/2).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let project = |x: &mut Vec<f64>| {
        if let Some(lo) = &opts.lower {
            for (xi, l) in x.iter_mut().zip(lo) {
                *xi = xi.max(*l);
            }
        }
        if let Some(hi) = &opts.upper {
            for (xi, h) in x.iter_mut().zip(hi) {
                *xi = xi.min(*h);
            }
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    let f0 = f(&start);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut v = start.clone();
        v[i] += opts.step[i];
        project(&mut v);
        if (v[i] - start[i]).abs() < 1e-15 {
            // pinned against the box: step inward instead
            v[i] = start[i] - opts.step[i];
            project(&mut v);
        }
        let fv = f(&v);
        simplex.push((v, fv));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0.clone();
        let spread = simplex
            .iter()
            .skip(1)
            .map(|(v, _)| v.iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
            project(&mut p);
            p
        };

        let reflected = along(1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let p = along(0.5);
            let fp = f(&p);
            (p, fp)
        } else {
            let p = along(-0.5);
            let fp = f(&p);
            (p, fp)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, v)| a + 0.5 * (v - a)).collect();
            project(&mut p);
            let fp = f(&p);
            *vertex = (p, fp);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    NelderMeadResult { x, fx, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2) + 2.0, 0.0, 1.0, 1e-10);
        // a quadratic minimum is only resolvable to about sqrt(eps)
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn golden_accepts_reversed_bracket() {
        let (x, _) = golden_section(|x| (x + 1.0).abs(), 0.0, -3.0, 1e-8);
        assert!((x + 1.0).abs() < 1e-7);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let opts = NelderMeadOptions { step: vec![0.5, 0.5], tol: 1e-10, max_iter: 5000, lower: None, upper: None };
        let r = nelder_mead(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0], &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn nelder_mead_respects_box() {
        let opts = NelderMeadOptions {
            step: vec![0.1, 0.1],
            tol: 1e-9,
            max_iter: 2000,
            lower: Some(vec![0.0, 0.0]),
            upper: Some(vec![1.0, 1.0]),
        };
        let r = nelder_mead(|x| (x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2), &[0.5, 0.5], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && r.x[1].abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn nelder_mead_stops_at_iteration_cap() {
        let opts = NelderMeadOptions { step: vec![1.0], tol: 0.0, max_iter: 7, lower: None, upper: None };
        let r = nelder_mead(|x| x[0] * x[0], &[10.0], &opts);
        assert_eq!(r.iterations, 7);
        assert!(!r.converged);
    }
}
