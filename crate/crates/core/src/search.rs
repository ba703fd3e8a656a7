//! One-dimensional minimisation helpers.

/// Golden-section search for a minimum of `f` on `[a, b]`; returns the best
/// point seen and its value.
pub(crate) fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2), -1.0, 2.0, 80);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx < 1e-15);
    }
}
