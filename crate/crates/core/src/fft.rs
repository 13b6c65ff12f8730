//! Real-input FFT convolution kernels shared by the pmf and laws modules.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

fn forward_plan(len: usize) -> Arc<dyn RealToComplex<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

fn inverse_plan(len: usize) -> Arc<dyn ComplexToReal<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Smallest even 2^a·3^b·5^c that is at least `min`.
pub(crate) fn smooth_size(min: usize) -> usize {
    let target = min.max(2);
    let mut best = usize::MAX;
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut n = p35;
            while n < target {
                n *= 2;
            }
            if n % 2 == 1 {
                n *= 2;
            }
            best = best.min(n);
            p35 = match p35.checked_mul(3) {
                Some(v) => v,
                None => break,
            };
        }
        p5 = match p5.checked_mul(5) {
            Some(v) => v,
            None => break,
        };
    }
    best
}

/// Forward real transform of `data` zero-padded to `size`.
pub(crate) fn spectrum(data: &[f64], size: usize) -> Vec<Complex64> {
    debug_assert!(data.len() <= size);
    let plan = forward_plan(size);
    let mut input = vec![0.0; size];
    input[..data.len()].copy_from_slice(data);
    let mut out = plan.make_output_vec();
    plan.process(&mut input, &mut out)
        .expect("buffer sizes come from the plan");
    out
}

/// Inverse real transform, normalized so that `inverse(spectrum(x)) == x`.
pub(crate) fn inverse(mut spec: Vec<Complex64>, size: usize) -> Vec<f64> {
    let plan = inverse_plan(size);
    // Imaginary parts of the DC and Nyquist bins must vanish for a real signal;
    // rounding leaves tiny residues that realfft rejects.
    if let Some(first) = spec.first_mut() {
        first.im = 0.0;
    }
    if size % 2 == 0 {
        if let Some(last) = spec.last_mut() {
            last.im = 0.0;
        }
    }
    let mut out = plan.make_output_vec();
    plan.process(&mut spec, &mut out)
        .expect("buffer sizes come from the plan");
    let scale = 1.0 / size as f64;
    for v in &mut out {
        *v *= scale;
    }
    out
}

/// First `out_len` entries of the linear convolution `a * b`.
pub(crate) fn linear_convolution(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let a = &a[..a.len().min(out_len)];
    let b = &b[..b.len().min(out_len)];
    let full = a.len() + b.len() - 1;
    let size = smooth_size(full);
    let sa = spectrum(a, size);
    let sb = spectrum(b, size);
    let prod: Vec<Complex64> = sa.iter().zip(&sb).map(|(x, y)| x * y).collect();
    let mut out = inverse(prod, size);
    out.truncate(out_len.min(full));
    out.resize(out_len.min(full), 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(1), 2);
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(11), 12);
        assert_eq!(smooth_size(5_242_880), 5_242_880);
        assert_eq!(smooth_size(1025), 1080);
    }

    #[test]
    fn matches_direct_convolution() {
        let a: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64) / 10.0).collect();
        let b: Vec<f64> = (0..53).map(|i| ((i * 3 % 13) as f64) / 20.0).collect();
        let mut direct = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                direct[i + j] += x * y;
            }
        }
        let fast = linear_convolution(&a, &b, direct.len());
        for (x, y) in direct.iter().zip(&fast) {
            assert!((x - y).abs() < 1e-12);
        }
        let head = linear_convolution(&a, &b, 10);
        assert_eq!(head.len(), 10);
        for (x, y) in direct.iter().zip(&head) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
