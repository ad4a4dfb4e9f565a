use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::tridiag::EigenSystem;

/// Complex coefficients `c_n` of a state against an eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector(Vec<Complex64>);

impl CoefficientVector {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return invalid("coefficients must be finite");
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    /// The single eigenmode `φ_n`.
    pub fn unit(len: usize, n: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[n] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// `‖f‖² = Σ|c_n|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self(self.0.iter().map(|c| c * alpha).collect())
    }

    /// Grid samples of `Σ_n c_n φ_n`.
    pub fn synthesize(&self, eig: &EigenSystem) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); eig.grid().len()];
        for (c, phi) in self.0.iter().zip(eig.vectors()) {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            out.iter_mut().zip(phi).for_each(|(o, p)| *o += c * p);
        }
        out
    }

    pub(crate) fn check_len(&self, eig: &EigenSystem) -> Result<()> {
        if self.len() != eig.count() {
            return invalid(format!(
                "coefficient vector has {} entries, eigensystem has {} modes",
                self.len(),
                eig.count()
            ));
        }
        Ok(())
    }
}

impl From<CoefficientVector> for Vec<Complex64> {
    fn from(v: CoefficientVector) -> Self {
        v.0
    }
}
