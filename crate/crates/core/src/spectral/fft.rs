use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Plans>>> = RefCell::new(HashMap::new());
    static SCRATCH: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

fn plans(points: usize) -> Rc<Plans> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(points)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Rc::new(Plans {
                    forward: planner.plan_fft_forward(points),
                    inverse: planner.plan_fft_inverse(points),
                })
            })
            .clone()
    })
}

fn transform(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    assert_eq!(data.len(), grid.len(), "buffer does not match grid");
    let n = grid.points;
    let p = plans(n);
    let fft = if inverse { &p.inverse } else { &p.forward };
    SCRATCH.with(|cell| {
        let mut cell = cell.borrow_mut();
        let (lines, work) = &mut *cell;
        let scratch_len = fft.get_inplace_scratch_len();
        if work.len() < scratch_len {
            work.resize(scratch_len, Complex64::default());
        }
        // last axis is contiguous
        fft.process_with_scratch(data, &mut work[..scratch_len]);
        if grid.dim == 1 {
            return;
        }
        if lines.len() < data.len() {
            lines.resize(data.len(), Complex64::default());
        }
        let lines = &mut lines[..data.len()];
        let mut stride = n;
        for _axis in 1..grid.dim {
            let block = stride * n;
            // gather lines of this axis into contiguous rows
            let mut row = 0;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let dst = &mut lines[row * n..(row + 1) * n];
                    for (j, d) in dst.iter_mut().enumerate() {
                        *d = data[base + offset + j * stride];
                    }
                    row += 1;
                }
            }
            fft.process_with_scratch(lines, &mut work[..scratch_len]);
            let mut row = 0;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let src = &lines[row * n..(row + 1) * n];
                    for (j, s) in src.iter().enumerate() {
                        data[base + offset + j * stride] = *s;
                    }
                    row += 1;
                }
            }
            stride = block;
        }
    });
}

/// Unnormalized forward DFT over all axes.
pub fn forward(grid: &GridSpec, data: &mut [Complex64]) {
    transform(grid, data, false);
}

/// Inverse DFT over all axes, normalized so that `inverse(forward(f)) == f`.
pub fn inverse(grid: &GridSpec, data: &mut [Complex64]) {
    transform(grid, data, true);
    let scale = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|z| *z *= scale);
}
