//! Central finite differences for gradient verification. The probe runs the
//! caller's forward function at perturbed inputs, so it stays independent of
//! the backward implementation it is used to check.

/// d/dx_i f(x) by central differences, all coordinates.
pub fn central_diff<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Richardson-extrapolated central difference: combines step sizes h and
/// h/2 to cancel the quadratic truncation term, leaving O(h^4) error. Use
/// when gradient coordinates span several orders of magnitude.
pub fn central_diff_richardson<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let coords: Vec<usize> = (0..x.len()).collect();
    central_diff_richardson_at(&mut f, x, h, &coords)
}

/// Richardson-extrapolated central difference at selected coordinates.
pub fn central_diff_richardson_at<F>(mut f: F, x: &[f64], h: f64, coords: &[usize]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; coords.len()];
    let mut probe = x.to_vec();
    for (k, &i) in coords.iter().enumerate() {
        let mut d = [0.0; 2];
        for (j, step) in [h, h / 2.0].into_iter().enumerate() {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            d[j] = (up - down) / (2.0 * step);
        }
        grad[k] = (4.0 * d[1] - d[0]) / 3.0;
    }
    grad
}

/// Like `central_diff` but only for the listed coordinates.
pub fn central_diff_at<F>(mut f: F, x: &[f64], h: f64, coords: &[usize]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; coords.len()];
    let mut probe = x.to_vec();
    for (k, &i) in coords.iter().enumerate() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad[k] = (up - down) / (2.0 * h);
    }
    grad
}

/// Symmetric relative error with an absolute floor for near-zero pairs.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-10 {
        return (a - b).abs();
    }
    (a - b).abs() / scale
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| rel_err(*x, *y)).fold(0.0, f64::max)
}
