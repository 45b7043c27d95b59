//! Deterministic parallel scatter.
//!
//! Sources are cut into fixed bands of `TILE_ROWS` rows. Each band
//! accumulates into a private buffer covering only the target rows it can
//! reach, and buffers are folded into the output strictly in band order.
//! The band layout never depends on the worker count, so every target pixel
//! sees the same sequence of floating-point additions however many threads
//! run: results are bitwise reproducible without atomics.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::FlowField;
use crate::kernel::footprint;
use crate::real::Real;

pub(crate) const TILE_ROWS: usize = 16;

/// Worker configuration for the parallel kernels.
///
/// The worker count only changes speed, never results.
#[derive(Clone, Default)]
pub struct Exec {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Exec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Exec")
            .field("workers", &self.workers())
            .finish()
    }
}

impl Exec {
    /// Runs on a dedicated pool of `workers` threads.
    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("worker count must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("softsplat-{i}"))
            .build()
            .map_err(|e| invalid(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self {
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn workers(&self) -> usize {
        match &self.pool {
            Some(p) => p.current_num_threads(),
            None => rayon::current_num_threads(),
        }
    }

    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }
}

/// One in-grid contribution target of a source pixel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Target<T> {
    /// Flat pixel index of the target.
    pub pixel: usize,
    pub ux: T,
    pub uy: T,
}

/// In-grid footprint targets of source pixel `(y, x)` displaced by `flow`.
#[inline]
pub(crate) fn targets<T: Real>(
    flow: &FlowField<T>,
    y: usize,
    x: usize,
) -> impl Iterator<Item = Target<T>> {
    let (h, w) = (flow.height() as i64, flow.width() as i64);
    let (dx, dy) = flow.get(y, x);
    let px = T::from_f64(x as f64) + dx;
    let py = T::from_f64(y as f64) + dy;
    footprint(px, py).filter_map(move |(tx, ty, ux, uy)| {
        if tx < 0 || ty < 0 || tx >= w || ty >= h {
            None
        } else {
            Some(Target {
                pixel: (ty * w + tx) as usize,
                ux,
                uy,
            })
        }
    })
}

struct TileBuffer<T> {
    row_lo: usize,
    rows: usize,
    data: Vec<T>,
}

/// Scatters every source pixel into a `H x W x k` accumulator.
///
/// `emit(source_index, target, slot)` adds the contribution of one source
/// pixel to one target; `slot` is the `k`-long accumulator of the target.
pub(crate) fn scatter<T, F>(exec: &Exec, flow: &FlowField<T>, k: usize, emit: F) -> Vec<T>
where
    T: Real,
    F: Fn(usize, Target<T>, &mut [T]) + Sync,
{
    let (h, w) = (flow.height(), flow.width());
    let tiles: Vec<(usize, usize)> = (0..h)
        .step_by(TILE_ROWS)
        .map(|r0| (r0, (r0 + TILE_ROWS).min(h)))
        .collect();

    exec.install(|| {
        let mut out = vec![T::zero(); h * w * k];
        let wave = (2 * rayon::current_num_threads()).max(1);
        for chunk in tiles.chunks(wave) {
            let buffers: Vec<Option<TileBuffer<T>>> = chunk
                .par_iter()
                .map(|&(r0, r1)| accumulate_tile(flow, k, r0, r1, &emit))
                .collect();
            merge_in_order(&mut out, w * k, &buffers);
        }
        out
    })
}

fn accumulate_tile<T, F>(
    flow: &FlowField<T>,
    k: usize,
    r0: usize,
    r1: usize,
    emit: &F,
) -> Option<TileBuffer<T>>
where
    T: Real,
    F: Fn(usize, Target<T>, &mut [T]),
{
    let w = flow.width();
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    for y in r0..r1 {
        for x in 0..w {
            for t in targets(flow, y, x) {
                let row = t.pixel / w;
                lo = lo.min(row);
                hi = hi.max(row);
            }
        }
    }
    if lo == usize::MAX {
        return None;
    }
    let rows = hi - lo + 1;
    let mut data = vec![T::zero(); rows * w * k];
    let offset = lo * w;
    for y in r0..r1 {
        for x in 0..w {
            let q = y * w + x;
            for t in targets(flow, y, x) {
                let local = (t.pixel - offset) * k;
                emit(q, t, &mut data[local..local + k]);
            }
        }
    }
    Some(TileBuffer {
        row_lo: lo,
        rows,
        data,
    })
}

fn merge_in_order<T: Real>(out: &mut [T], row_len: usize, buffers: &[Option<TileBuffer<T>>]) {
    out.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(row, out_row)| {
            for buf in buffers.iter().flatten() {
                if row < buf.row_lo || row >= buf.row_lo + buf.rows {
                    continue;
                }
                let start = (row - buf.row_lo) * row_len;
                for (o, v) in out_row.iter_mut().zip(&buf.data[start..start + row_len]) {
                    *o += *v;
                }
            }
        });
}

/// Runs `f(y, row)` over output rows of length `row_len` in parallel.
pub(crate) fn for_each_row<T, F>(exec: &Exec, out: &mut [T], row_len: usize, f: F)
where
    T: Real,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    exec.install(|| {
        out.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(y, row)| f(y, row))
    });
}
