//! Compensated accumulation helpers.
//!
//! Every reduction in the crate goes through these so that results depend
//! only on the order in which terms are added, never on how work was split
//! across threads.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Neumaier-compensated running sum of `f64` values.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of reals.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<NeumaierSum>().value()
}

/// Compensated complex sum (real and imaginary parts tracked separately).
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn complex_sum(values: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let mut acc = ComplexSum::new();
    for z in values {
        acc.add(z);
    }
    acc.value()
}

/// Entrywise compensated accumulator for complex matrices.
#[derive(Debug, Clone)]
pub struct MatrixAccumulator {
    rows: usize,
    cols: usize,
    cells: Vec<ComplexSum>,
}

impl MatrixAccumulator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![ComplexSum::new(); rows * cols],
        }
    }

    /// Adds `scale * m`.
    pub fn add_scaled(&mut self, m: &DMatrix<Complex64>, scale: Complex64) {
        debug_assert_eq!(m.shape(), (self.rows, self.cols));
        // nalgebra storage is column-major, so is ours
        for (cell, v) in self.cells.iter_mut().zip(m.iter()) {
            cell.add(*v * scale);
        }
    }

    pub fn add(&mut self, m: &DMatrix<Complex64>) {
        for (cell, v) in self.cells.iter_mut().zip(m.iter()) {
            cell.add(*v);
        }
    }

    pub fn value(&self) -> DMatrix<Complex64> {
        DMatrix::from_iterator(self.rows, self.cols, self.cells.iter().map(|c| c.value()))
    }
}

/// Sums matrices in the given order, compensated entrywise.
pub fn matrix_sum<'a>(
    rows: usize,
    cols: usize,
    items: impl IntoIterator<Item = &'a DMatrix<Complex64>>,
) -> DMatrix<Complex64> {
    let mut acc = MatrixAccumulator::zeros(rows, cols);
    for m in items {
        acc.add(m);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_small_terms() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(v), 2.0);
    }

    #[test]
    fn complex_sum_is_componentwise() {
        let z = complex_sum([Complex64::new(1.0, 2.0), Complex64::new(-0.5, 1e-20)]);
        assert_eq!(z, Complex64::new(0.5, 2.0 + 1e-20));
    }
}
