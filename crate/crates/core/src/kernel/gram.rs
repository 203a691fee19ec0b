//! Batched Gram computation over rectangular tiles of input pairs.
//!
//! Each tile advances the recursions of all its pairs one `(step, layer)` at
//! a time, so a tile holds a fixed number of pair-sized buffers regardless of
//! the sequence length. Tiles are independent and run on the rayon pool.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compose::{compose_bidirectional, flip_rows};
use super::params::{HyperParams, InputOrder, Variant};
use super::recursion::{moments, next_psi, next_sigma, step_output, Moments};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_TILE_SIZE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GramOptions {
    /// Side length of the square pair tiles.
    pub tile_size: usize,
}

impl Default for GramOptions {
    fn default() -> Self {
        Self {
            tile_size: DEFAULT_TILE_SIZE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    Ck,
    Ntk,
}

impl KernelKind {
    pub const BOTH: [KernelKind; 2] = [KernelKind::Ck, KernelKind::Ntk];

    pub fn code(self) -> u8 {
        match self {
            KernelKind::Ck => 0,
            KernelKind::Ntk => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(KernelKind::Ck),
            1 => Ok(KernelKind::Ntk),
            other => Err(Error::Format(format!("unknown kernel kind {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Ck => "ck",
            KernelKind::Ntk => "ntk",
        }
    }
}

/// CK and NTK Gram matrices of one dataset under one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct GramPair {
    pub ck: Matrix,
    pub ntk: Matrix,
    pub params: HyperParams,
    pub variant: Variant,
}

impl GramPair {
    pub fn n_points(&self) -> usize {
        self.ck.rows()
    }

    pub fn kernel(&self, kind: KernelKind) -> &Matrix {
        match kind {
            KernelKind::Ck => &self.ck,
            KernelKind::Ntk => &self.ntk,
        }
    }
}

/// Rectangular kernels between a test set (rows) and a training set (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct CrossGram {
    pub ck: Matrix,
    pub ntk: Matrix,
}

impl CrossGram {
    pub fn kernel(&self, kind: KernelKind) -> &Matrix {
        match kind {
            KernelKind::Ck => &self.ck,
            KernelKind::Ntk => &self.ntk,
        }
    }
}

/// Last-step and pooled kernels from one pass over one input ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseGrams {
    pub ck_last: Matrix,
    pub ntk_last: Matrix,
    pub ck_avg: Matrix,
    pub ntk_avg: Matrix,
}

impl BaseGrams {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            ck_last: Matrix::zeros(rows, cols),
            ntk_last: Matrix::zeros(rows, cols),
            ck_avg: Matrix::zeros(rows, cols),
            ntk_avg: Matrix::zeros(rows, cols),
        }
    }

    /// `(ck, ntk)` for the pooled or last-step head.
    pub fn select(&self, pooled: bool) -> (&Matrix, &Matrix) {
        if pooled {
            (&self.ck_avg, &self.ntk_avg)
        } else {
            (&self.ck_last, &self.ntk_last)
        }
    }
}

static RECURSION_PASSES: AtomicUsize = AtomicUsize::new(0);

/// Number of full recursion passes run by this process (one per input
/// ordering per call). Used to check that callers reuse Gram matrices.
pub fn recursion_passes() -> usize {
    RECURSION_PASSES.load(Ordering::Relaxed)
}

/// Working buffers of one tile.
///
/// Pair buffers hold the current `(Vphi, Vphi', psi)` of every layer plus the
/// four outputs, so their count is `3 L + 4` whatever the sequence length.
pub struct RecursionState {
    value: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    ck_last: Vec<f64>,
    ntk_last: Vec<f64>,
    ck_accum: Vec<f64>,
    ntk_accum: Vec<f64>,
    row_sigma: Vec<Vec<f64>>,
    col_sigma: Vec<Vec<f64>>,
}

impl RecursionState {
    fn new(depth: usize, pairs: usize, rows: usize, cols: usize) -> Self {
        let layers = |len| vec![vec![0.0; len]; depth];
        Self {
            value: layers(pairs),
            slope: layers(pairs),
            psi: layers(pairs),
            ck_last: vec![0.0; pairs],
            ntk_last: vec![0.0; pairs],
            ck_accum: vec![0.0; pairs],
            ntk_accum: vec![0.0; pairs],
            row_sigma: layers(rows),
            col_sigma: layers(cols),
        }
    }

    /// Number of buffers sized by the pair count.
    pub fn pair_buffer_count(&self) -> usize {
        self.value.len() + self.slope.len() + self.psi.len() + 4
    }
}

/// A block of pairs `(rows[i], cols[j])`, optionally restricted to `i <= j`
/// in global indexing.
#[derive(Clone, Debug)]
struct Tile {
    row_start: usize,
    row_end: usize,
    col_start: usize,
    col_end: usize,
    upper_only: bool,
}

impl Tile {
    fn pairs(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in self.row_start..self.row_end {
            for j in self.col_start..self.col_end {
                if !self.upper_only || j >= i {
                    out.push(((i - self.row_start) as u32, (j - self.col_start) as u32));
                }
            }
        }
        out
    }
}

struct TileResult {
    tile: Tile,
    pairs: Vec<(u32, u32)>,
    state: RecursionState,
}

/// Self covariances `Sigma(layer, t)(x, x)` advanced one layer.
fn advance_diagonal(
    params: &HyperParams,
    data: &Matrix,
    range: (usize, usize),
    t: usize,
    layer: usize,
    sigma: &mut [Vec<f64>],
) {
    for (k, i) in (range.0..range.1).enumerate() {
        let lower = if layer == 0 {
            let v = data.row(i)[t];
            v * v
        } else {
            let d = sigma[layer - 1][k];
            moments(d, d, d).value
        };
        let recurrent = (t > 0).then(|| {
            let d = sigma[layer][k];
            moments(d, d, d).value
        });
        sigma[layer][k] = next_sigma(params, lower, recurrent);
    }
}

fn run_tile(rows: &Matrix, cols: &Matrix, params: &HyperParams, tile: Tile) -> TileResult {
    let pairs = tile.pairs();
    let depth = params.depth;
    let steps = rows.cols();
    let mut st = RecursionState::new(
        depth,
        pairs.len(),
        tile.row_end - tile.row_start,
        tile.col_end - tile.col_start,
    );

    for t in 0..steps {
        for l in 0..depth {
            advance_diagonal(params, rows, (tile.row_start, tile.row_end), t, l, &mut st.row_sigma);
            advance_diagonal(params, cols, (tile.col_start, tile.col_end), t, l, &mut st.col_sigma);

            for (p, &(i, j)) in pairs.iter().enumerate() {
                let (i, j) = (i as usize, j as usize);
                let (lower, lower_psi) = if l == 0 {
                    let a = rows.row(tile.row_start + i)[t] * cols.row(tile.col_start + j)[t];
                    (a, None)
                } else {
                    (
                        st.value[l - 1][p],
                        Some((st.psi[l - 1][p], st.slope[l - 1][p])),
                    )
                };
                // stored moments of (l, t-1) already carry the old diagonal
                let recurrent = (t > 0).then(|| Moments {
                    value: st.value[l][p],
                    slope: st.slope[l][p],
                });
                let sigma = next_sigma(params, lower, recurrent.map(|m| m.value));
                let psi = next_psi(
                    params,
                    sigma,
                    recurrent.map(|m| (st.psi[l][p], m.slope)),
                    lower_psi,
                );
                let m = moments(st.row_sigma[l][i], st.col_sigma[l][j], sigma);
                st.value[l][p] = m.value;
                st.slope[l][p] = m.slope;
                st.psi[l][p] = psi;
            }
        }

        let top = depth - 1;
        for p in 0..pairs.len() {
            let m = Moments {
                value: st.value[top][p],
                slope: st.slope[top][p],
            };
            let (ck, ntk) = step_output(params, m, st.psi[top][p]);
            st.ck_accum[p] += ck;
            st.ntk_accum[p] += ntk;
            if t + 1 == steps {
                st.ck_last[p] = ck;
                st.ntk_last[p] = ntk;
            }
        }
    }

    TileResult { tile, pairs, state: st }
}

fn check_data(data: &Matrix, what: &str) -> Result<()> {
    if data.rows() == 0 {
        return Err(Error::Shape(format!("{what} has no rows")));
    }
    if data.cols() == 0 {
        return Err(Error::Shape(format!("{what} rows have zero length")));
    }
    if data.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} contains non-finite values")));
    }
    Ok(())
}

fn oriented(data: &Matrix, order: InputOrder) -> std::borrow::Cow<'_, Matrix> {
    match order {
        InputOrder::Default => std::borrow::Cow::Borrowed(data),
        InputOrder::Flipped => std::borrow::Cow::Owned(flip_rows(data)),
    }
}

fn tile_ranges(n: usize, size: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(size).map(|s| (s, (s + size).min(n))).collect()
}

/// One recursion pass over all pairs of `data` with itself.
pub fn base_grams(
    data: &Matrix,
    params: &HyperParams,
    order: InputOrder,
    opts: &GramOptions,
) -> Result<BaseGrams> {
    check_data(data, "dataset")?;
    params.validate()?;
    if opts.tile_size == 0 {
        return Err(Error::InvalidConfig("tile size must be positive".into()));
    }
    let data = oriented(data, order);
    let n = data.rows();
    let ranges = tile_ranges(n, opts.tile_size);
    let mut tiles = Vec::new();
    for (bi, &(r0, r1)) in ranges.iter().enumerate() {
        for &(c0, c1) in &ranges[bi..] {
            tiles.push(Tile {
                row_start: r0,
                row_end: r1,
                col_start: c0,
                col_end: c1,
                upper_only: r0 == c0,
            });
        }
    }
    let results: Vec<TileResult> = tiles
        .into_par_iter()
        .map(|tile| run_tile(&data, &data, params, tile))
        .collect();
    RECURSION_PASSES.fetch_add(1, Ordering::Relaxed);

    let mut out = BaseGrams::zeros(n, n);
    for res in &results {
        scatter(&mut out, res, true);
    }
    Ok(out)
}

/// One recursion pass over `test x train` pairs.
pub fn base_cross(
    train: &Matrix,
    test: &Matrix,
    params: &HyperParams,
    order: InputOrder,
    opts: &GramOptions,
) -> Result<BaseGrams> {
    check_data(train, "training set")?;
    check_data(test, "test set")?;
    params.validate()?;
    if train.cols() != test.cols() {
        return Err(Error::Shape(format!(
            "training rows have length {}, test rows {}",
            train.cols(),
            test.cols()
        )));
    }
    if opts.tile_size == 0 {
        return Err(Error::InvalidConfig("tile size must be positive".into()));
    }
    let train = oriented(train, order);
    let test = oriented(test, order);
    let mut tiles = Vec::new();
    for &(r0, r1) in &tile_ranges(test.rows(), opts.tile_size) {
        for &(c0, c1) in &tile_ranges(train.rows(), opts.tile_size) {
            tiles.push(Tile {
                row_start: r0,
                row_end: r1,
                col_start: c0,
                col_end: c1,
                upper_only: false,
            });
        }
    }
    let results: Vec<TileResult> = tiles
        .into_par_iter()
        .map(|tile| run_tile(&test, &train, params, tile))
        .collect();
    RECURSION_PASSES.fetch_add(1, Ordering::Relaxed);

    let mut out = BaseGrams::zeros(test.rows(), train.rows());
    for res in &results {
        scatter(&mut out, res, false);
    }
    Ok(out)
}

fn scatter(out: &mut BaseGrams, res: &TileResult, mirror: bool) {
    let st = &res.state;
    for (p, &(i, j)) in res.pairs.iter().enumerate() {
        let gi = res.tile.row_start + i as usize;
        let gj = res.tile.col_start + j as usize;
        let values = [
            (&mut out.ck_last, st.ck_last[p]),
            (&mut out.ntk_last, st.ntk_last[p]),
            (&mut out.ck_avg, st.ck_accum[p]),
            (&mut out.ntk_avg, st.ntk_accum[p]),
        ];
        for (m, v) in values {
            m[(gi, gj)] = v;
            if mirror {
                m[(gj, gi)] = v;
            }
        }
    }
}

/// Pair buffer count a Gram pass allocates per tile at this depth.
pub fn pair_buffers_per_tile(depth: usize) -> usize {
    RecursionState::new(depth, 0, 0, 0).pair_buffer_count()
}

/// CK and NTK Gram matrices of `data` under `variant`.
pub fn gram(data: &Matrix, params: &HyperParams, variant: Variant) -> Result<GramPair> {
    gram_with(data, params, variant, &GramOptions::default())
}

pub fn gram_with(
    data: &Matrix,
    params: &HyperParams,
    variant: Variant,
    opts: &GramOptions,
) -> Result<GramPair> {
    let pooled = variant.arch.is_pooled();
    let directional = |order: InputOrder| -> Result<GramPair> {
        let base = base_grams(data, params, order, opts)?;
        let (ck, ntk) = base.select(pooled);
        Ok(GramPair {
            ck: ck.clone(),
            ntk: ntk.clone(),
            params: *params,
            variant: Variant::new(variant.arch.base()).with_order(order),
        })
    };
    if variant.arch.is_bidirectional() {
        let fwd = directional(InputOrder::Default)?;
        let bwd = directional(InputOrder::Flipped)?;
        compose_bidirectional(&fwd, &bwd)
    } else {
        directional(variant.order)
    }
}

/// Kernels between `test` rows and `train` rows under `variant`.
pub fn gram_cross(
    train: &Matrix,
    test: &Matrix,
    params: &HyperParams,
    variant: Variant,
) -> Result<CrossGram> {
    gram_cross_with(train, test, params, variant, &GramOptions::default())
}

pub fn gram_cross_with(
    train: &Matrix,
    test: &Matrix,
    params: &HyperParams,
    variant: Variant,
    opts: &GramOptions,
) -> Result<CrossGram> {
    let pooled = variant.arch.is_pooled();
    let directional = |order| -> Result<CrossGram> {
        let base = base_cross(train, test, params, order, opts)?;
        let (ck, ntk) = base.select(pooled);
        Ok(CrossGram {
            ck: ck.clone(),
            ntk: ntk.clone(),
        })
    };
    if variant.arch.is_bidirectional() {
        let fwd = directional(InputOrder::Default)?;
        let bwd = directional(InputOrder::Flipped)?;
        Ok(CrossGram {
            ck: fwd.ck.add(&bwd.ck)?,
            ntk: fwd.ntk.add(&bwd.ntk)?,
        })
    } else {
        directional(variant.order)
    }
}
