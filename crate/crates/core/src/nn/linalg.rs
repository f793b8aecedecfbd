//! Thin row-major wrapper over `matrixmultiply::dgemm` plus the scalar
//! nonlinearities. Single-threaded, so every reduction has a fixed order.

/// `c[m×n] = alpha · op(a) · op(b) + beta · c` with all matrices row-major.
/// `a` holds `m×k` values, or `k×m` when `a_t`; `b` holds `k×n`, or `n×k`
/// when `b_t`. `beta = 0` overwrites `c` without reading it.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in &mut c[..m * n] {
            *v = if beta == 0.0 { 0.0 } else { beta * *v };
        }
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the kernel touches:
    // a spans m·k values, b spans k·n, c spans m·n, with the strides chosen
    // to match each row-major layout.
    unsafe {
        matrixmultiply::dgemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
