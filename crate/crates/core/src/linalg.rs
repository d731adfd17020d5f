//! Dense solvers for the continuous-time Riccati and Lyapunov equations.
//!
//! Riccati: `A^T P + P A - P B R^-1 B^T P + Q = 0`, stabilizing solution.
//! Lyapunov: `A^T X + X A + C = 0`.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};

/// Largest real part among the eigenvalues of `a`, or `NaN` when the Schur
/// iteration does not converge.
///
/// The plain Schur iteration stalls on some structured matrices (exact
/// zeros, permutation-like blocks), so a failed attempt is retried on fixed
/// orthogonal similarity transforms of `a`, which have the same spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    let max_iter = 200 * n.max(4);
    for attempt in 0..3 {
        let m = if attempt == 0 { a.clone() } else { reflect(a, attempt) };
        if let Some(schur) = Schur::try_new(m, f64::EPSILON, max_iter) {
            return schur.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    f64::NAN
}

/// `H A H` for the Householder reflection `H` along a fixed vector.
fn reflect(a: &DMatrix<f64>, seed: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let v = DVector::from_fn(n, |i, _| 1.0 + ((i + 1) * (seed + 2)) as f64 % 7.0 / 3.0);
    let h = DMatrix::identity(n, n) - &v * v.transpose() * (2.0 / v.norm_squared());
    &h * a * &h
}

/// Every eigenvalue of `a` has negative real part. Falls back to the
/// Lyapunov test (`A^T X + X A = -I` has a positive definite solution) when
/// the eigenvalues cannot be computed.
pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    let alpha = spectral_abscissa(a);
    if !alpha.is_nan() {
        return alpha < 0.0;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return false;
    }
    match solve_lyapunov(a, &DMatrix::identity(n, n)) {
        Ok(x) => x.cholesky().is_some(),
        Err(_) => false,
    }
}

/// Solves `A^T X + X A + C = 0` through the vectorised Kronecker system.
/// Adequate for the state dimensions handled here (n up to a few dozen).
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || c.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "Lyapunov: A is {}x{}, C is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(A^T X) = (I kron A^T) vec X,  vec(X A) = (A^T kron I) vec X  (column-major vec)
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Lyapunov("singular operator (eigenvalues pair to zero)".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Lyapunov("non-finite solution".into()));
    }
    Ok((&x + x.transpose()) * 0.5)
}

/// Frobenius norm of `A^T X + X A + C`.
pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    (a.transpose() * x + x * a + c).norm()
}

/// Frobenius norm of the Riccati residual.
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let r_inv = match r.clone().try_inverse() {
        Some(v) => v,
        None => return f64::INFINITY,
    };
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

/// Matrix sign function by the scaled Newton iteration.
fn matrix_sign(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let dim = h.nrows();
    let mut z = h.clone();
    for _ in 0..100 {
        let lu = z.clone().lu();
        let log_det: f64 = (0..dim).map(|i| lu.u()[(i, i)].abs().ln()).sum();
        if !log_det.is_finite() {
            return None;
        }
        let inv = lu.try_inverse()?;
        let scale = (-log_det / dim as f64).exp();
        let next = (&z * scale + inv / scale) * 0.5;
        let change = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if !size.is_finite() {
            return None;
        }
        if change <= 1e-13 * size {
            return Some(z);
        }
    }
    // Unconverged iterates usually mean eigenvalues on the imaginary axis.
    None
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
///
/// The stable invariant subspace of the Hamiltonian matrix is extracted with
/// the matrix sign function, then polished by Newton-Kleinman steps. Returns
/// [`Error::Unstabilizable`] when no stabilizing solution exists.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "Riccati: A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Dimension("R is singular".into()))?;
    let s = b * &r_inv * b.transpose();

    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut p = match matrix_sign(&h) {
        Some(w) => {
            let eye = DMatrix::<f64>::identity(n, n);
            let w11 = w.view((0, 0), (n, n));
            let w12 = w.view((0, n), (n, n));
            let w21 = w.view((n, 0), (n, n));
            let w22 = w.view((n, n), (n, n));
            let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
            lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
            lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
            let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
            rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
            rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
            let svd = nalgebra::SVD::try_new(lhs, true, true, f64::EPSILON, 1000 * n)
                .ok_or_else(|| Error::Unstabilizable("SVD of the stable subspace did not converge".into()))?;
            let tol = 1e-12 * svd.singular_values.max().max(1.0);
            if svd.rank(tol) < n {
                return Err(Error::Unstabilizable("Hamiltonian stable subspace is degenerate".into()));
            }
            let p = svd.solve(&rhs, tol).map_err(|e| Error::Unstabilizable(e.to_string()))?;
            (&p + p.transpose()) * 0.5
        }
        None => {
            // Fall back to Newton-Kleinman from K = 0 when A itself is stable.
            if !is_hurwitz(a) {
                return Err(Error::Unstabilizable("Hamiltonian has eigenvalues on the imaginary axis".into()));
            }
            solve_lyapunov(a, q)?
        }
    };

    // Newton-Kleinman polishing: each step solves a Lyapunov equation for the
    // closed loop of the current gain.
    let tol = |p: &DMatrix<f64>| 1e-10 * (1.0 + p.norm());
    for _ in 0..50 {
        let k = &r_inv * b.transpose() * &p;
        let a_cl = a - b * &k;
        if !is_hurwitz(&a_cl) {
            return Err(Error::Unstabilizable("no stabilizing Riccati solution".into()));
        }
        let residual = riccati_residual(a, b, q, r, &p);
        if residual <= tol(&p) {
            return Ok(p);
        }
        let c = q + k.transpose() * r * &k;
        let next = solve_lyapunov(&a_cl, &c).map_err(|e| Error::Unstabilizable(e.to_string()))?;
        let step = (&next - &p).norm();
        p = next;
        if step <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    let k = &r_inv * b.transpose() * &p;
    if !is_hurwitz(&(a - b * &k)) || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstabilizable("no stabilizing Riccati solution".into()));
    }
    Ok(p)
}
