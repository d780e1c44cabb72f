//! Two-dimensional FFTs over `ndarray` storage.
//!
//! Rows are transformed in place; columns are gathered in small blocks so no full
//! transpose is ever materialized. Each 1-D transform is independent, so the
//! result does not depend on how rayon schedules the work.

use ndarray::{Array2, Axis};
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use crate::scalar::Real;

const COLUMN_BLOCK: usize = 16;

/// Unnormalized 2-D DFT in the given direction.
pub fn fft2_inplace<T: Real>(data: &mut Array2<Complex<T>>, direction: FftDirection) {
    let (rows, cols) = data.dim();
    let mut planner = FftPlanner::<T>::new();
    let row_fft = planner.plan_fft(cols, direction);
    let col_fft = planner.plan_fft(rows, direction);

    if let Some(slice) = data.as_slice_mut() {
        let scratch_len = row_fft.get_inplace_scratch_len();
        slice.par_chunks_mut(cols).for_each_init(
            || vec![Complex::new(T::zero(), T::zero()); scratch_len],
            |scratch, row| row_fft.process_with_scratch(row, scratch),
        );
    } else {
        for mut row in data.rows_mut() {
            let mut buf: Vec<_> = row.iter().copied().collect();
            row_fft.process(&mut buf);
            row.iter_mut().zip(buf).for_each(|(d, s)| *d = s);
        }
    }

    let scratch_len = col_fft.get_inplace_scratch_len();
    data.axis_chunks_iter_mut(Axis(1), COLUMN_BLOCK).into_par_iter().for_each(|mut block| {
        let mut column = vec![Complex::new(T::zero(), T::zero()); rows];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); scratch_len];
        for mut col in block.columns_mut() {
            column.iter_mut().zip(col.iter()).for_each(|(d, s)| *d = *s);
            col_fft.process_with_scratch(&mut column, &mut scratch);
            col.iter_mut().zip(column.iter()).for_each(|(d, s)| *d = *s);
        }
    });
}

pub fn fft2<T: Real>(data: &mut Array2<Complex<T>>) {
    fft2_inplace(data, FftDirection::Forward);
}

/// Inverse 2-D DFT including the 1/N normalization.
pub fn ifft2<T: Real>(data: &mut Array2<Complex<T>>) {
    fft2_inplace(data, FftDirection::Inverse);
    let scale = T::one() / T::from_len(data.len());
    data.par_mapv_inplace(|v| v * scale);
}

/// Moves DC from index 0 to the grid center (`n/2`) on both axes.
pub fn fftshift<U: Clone>(data: &Array2<U>) -> Array2<U> {
    let (rows, cols) = data.dim();
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        data[((i + rows - rows / 2) % rows, (j + cols - cols / 2) % cols)].clone()
    })
}

/// Inverse of [`fftshift`].
pub fn ifftshift<U: Clone>(data: &Array2<U>) -> Array2<U> {
    let (rows, cols) = data.dim();
    Array2::from_shape_fn((rows, cols), |(i, j)| data[((i + rows / 2) % rows, (j + cols / 2) % cols)].clone())
}

/// Signed DFT frequency index for position `i` of an `n`-point transform.
#[inline]
pub fn signed_index(i: usize, n: usize) -> isize {
    if i < n.div_ceil(2) {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Smallest length ≥ `n` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}
