//! Dense 3D volumes, binary masks, block decomposition, norm clipping and
//! the Dice overlap metric.
//!
//! Voxel data is stored flat in row-major order with the x axis slowest and
//! the z axis fastest: index `(ix, iy, iz)` lives at `(ix * ny + iy) * nz + iz`.
//! Every operation in this module is a pure function over immutable inputs.

use crate::error::{Error, Result};

/// Voxel grid dimensions `(nx, ny, nz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidParameter(format!(
                "dims must be positive, got ({nx}, {ny}, {nz})"
            )));
        }
        Ok(Self { nx, ny, nz })
    }

    /// Total voxel count `nx * ny * nz`.
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.ny + iy) * self.nz + iz
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Dense 3D volume of f64 voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    data: Vec<f64>,
}

impl Volume {
    /// Wrap a flat row-major voxel array. Fails when the length does not
    /// match the dims or any value is non-finite.
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite voxel value {} at flat index {bad}",
                data[bad]
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            data: vec![0.0; dims.len()],
            dims,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.data[self.dims.flat_index(ix, iy, iz)]
    }

    /// Multiply every voxel by a constant.
    pub fn scaled(&self, factor: f64) -> Volume {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Binarize with a strict `value > threshold` test.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            dims: self.dims,
            data: self
                .data
                .iter()
                .map(|&v| u8::from(v > threshold))
                .collect(),
        }
    }
}

/// Binary segmentation mask; every voxel is exactly 0 or 1, stored as bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    dims: Dims,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(dims: Dims, data: Vec<u8>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidParameter(format!(
                "mask voxel at flat index {bad} is {} (must be 0 or 1)",
                data[bad]
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            data: vec![0; dims.len()],
            dims,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> u8 {
        self.data[self.dims.flat_index(ix, iy, iz)]
    }

    /// Number of foreground voxels.
    pub fn foreground(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Cast to an f64 volume with values in {0.0, 1.0}.
    pub fn to_volume(&self) -> Volume {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Decomposition of a volume into disjoint cubic blocks of edge `block_edge`,
/// zero-padded per axis to the next multiple of the edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    block_edge: usize,
    volume_dims: Dims,
}

impl BlockGrid {
    pub fn new(block_edge: usize, volume_dims: Dims) -> Result<Self> {
        if block_edge == 0 {
            return Err(Error::InvalidParameter(
                "block_edge must be positive".into(),
            ));
        }
        Ok(Self {
            block_edge,
            volume_dims,
        })
    }

    pub fn block_edge(&self) -> usize {
        self.block_edge
    }

    pub fn volume_dims(&self) -> Dims {
        self.volume_dims
    }

    /// Voxels per block (`block_edge³`).
    pub fn block_len(&self) -> usize {
        self.block_edge * self.block_edge * self.block_edge
    }

    /// Smallest per-axis multiples of `block_edge` covering the volume.
    pub fn padded_dims(&self) -> Dims {
        let up = |n: usize| n.div_ceil(self.block_edge) * self.block_edge;
        Dims {
            nx: up(self.volume_dims.nx),
            ny: up(self.volume_dims.ny),
            nz: up(self.volume_dims.nz),
        }
    }

    /// Blocks per axis, in `(x, y, z)` order.
    pub fn block_counts(&self) -> (usize, usize, usize) {
        let p = self.padded_dims();
        (
            p.nx / self.block_edge,
            p.ny / self.block_edge,
            p.nz / self.block_edge,
        )
    }

    pub fn num_blocks(&self) -> usize {
        let (bx, by, bz) = self.block_counts();
        bx * by * bz
    }

    /// Block clipping radius `sqrt(block_len / padded voxel count)`.
    ///
    /// The padded count is used so that the sum of squared clipped block
    /// norms is at most 1 for every volume, including non-divisible dims.
    pub fn clip_radius(&self) -> f64 {
        (self.block_len() as f64 / self.padded_dims().len() as f64).sqrt()
    }
}

/// Split a volume into flat block vectors tiling the zero-padded volume.
///
/// Blocks are emitted in lexicographic `(bx, by, bz)` order with x slowest;
/// voxels within a block follow the same convention.
pub fn block_split(v: &Volume, g: &BlockGrid) -> Result<Vec<Vec<f64>>> {
    if v.dims != g.volume_dims {
        return Err(Error::DimensionMismatch {
            expected: g.volume_dims.to_string(),
            got: v.dims.to_string(),
        });
    }
    let e = g.block_edge;
    let (bx, by, bz) = g.block_counts();
    let d = v.dims;
    let mut blocks = Vec::with_capacity(g.num_blocks());
    for cx in 0..bx {
        for cy in 0..by {
            for cz in 0..bz {
                let mut block = vec![0.0; g.block_len()];
                for lx in 0..e {
                    let gx = cx * e + lx;
                    if gx >= d.nx {
                        continue;
                    }
                    for ly in 0..e {
                        let gy = cy * e + ly;
                        if gy >= d.ny {
                            continue;
                        }
                        for lz in 0..e {
                            let gz = cz * e + lz;
                            if gz >= d.nz {
                                continue;
                            }
                            block[(lx * e + ly) * e + lz] = v.data[d.flat_index(gx, gy, gz)];
                        }
                    }
                }
                blocks.push(block);
            }
        }
    }
    Ok(blocks)
}

/// Reassemble a volume from block vectors; exact inverse of [`block_split`].
/// Padding voxels are discarded.
pub fn block_merge(blocks: &[Vec<f64>], g: &BlockGrid) -> Result<Volume> {
    if blocks.len() != g.num_blocks() {
        return Err(Error::LengthMismatch {
            expected: g.num_blocks(),
            got: blocks.len(),
        });
    }
    if let Some(bad) = blocks.iter().position(|b| b.len() != g.block_len()) {
        return Err(Error::LengthMismatch {
            expected: g.block_len(),
            got: blocks[bad].len(),
        });
    }
    let e = g.block_edge;
    let (_, by, bz) = g.block_counts();
    let d = g.volume_dims;
    let mut out = Volume::zeros(d);
    for (bi, block) in blocks.iter().enumerate() {
        let cx = bi / (by * bz);
        let cy = (bi / bz) % by;
        let cz = bi % bz;
        for lx in 0..e {
            let gx = cx * e + lx;
            if gx >= d.nx {
                continue;
            }
            for ly in 0..e {
                let gy = cy * e + ly;
                if gy >= d.ny {
                    continue;
                }
                for lz in 0..e {
                    let gz = cz * e + lz;
                    if gz >= d.nz {
                        continue;
                    }
                    out.data[d.flat_index(gx, gy, gz)] = block[(lx * e + ly) * e + lz];
                }
            }
        }
    }
    Ok(out)
}

/// Project a vector onto the closed ℓ2 ball of the given radius.
///
/// Vectors already inside the ball pass through unchanged (zero vectors
/// included); longer vectors are rescaled onto the boundary.
pub fn clip_to_ball(x: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius > 0.0, "clip radius must be positive");
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= radius {
        x.to_vec()
    } else {
        let scale = radius / norm;
        x.iter().map(|v| v * scale).collect()
    }
}

/// Dice overlap `2|A∩B| / (|A| + |B|)`.
///
/// Two empty masks count as perfect agreement (1.0); one empty mask against
/// a nonempty one gives 0.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch {
            expected: a.dims.to_string(),
            got: b.dims.to_string(),
        });
    }
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&va, &vb) in a.data.iter().zip(&b.data) {
        inter += usize::from(va == 1 && vb == 1);
        total += usize::from(va) + usize::from(vb);
    }
    if total == 0 {
        Ok(1.0)
    } else {
        Ok(2.0 * inter as f64 / total as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vol(dims: (usize, usize, usize), data: Vec<f64>) -> Volume {
        Volume::new(Dims::new(dims.0, dims.1, dims.2).unwrap(), data).unwrap()
    }

    fn mask(dims: (usize, usize, usize), data: Vec<u8>) -> BinaryMask {
        BinaryMask::new(Dims::new(dims.0, dims.1, dims.2).unwrap(), data).unwrap()
    }

    #[test]
    fn volume_rejects_bad_length_and_nan() {
        let d = Dims::new(2, 2, 2).unwrap();
        assert!(Volume::new(d, vec![0.0; 7]).is_err());
        assert!(Volume::new(d, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn mask_rejects_values_above_one() {
        let d = Dims::new(1, 1, 2).unwrap();
        assert!(BinaryMask::new(d, vec![0, 2]).is_err());
    }

    #[test]
    fn single_block_identity() {
        let v = vol((2, 2, 2), (0..8).map(f64::from).collect());
        let g = BlockGrid::new(2, v.dims()).unwrap();
        let blocks = block_split(&v, &g).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0], v.data());
    }

    #[test]
    fn padding_corner_block_has_one_nonzero() {
        // 3x3x3 ones with block_edge 2 pads to 4x4x4: 8 blocks, and the
        // (1,1,1) corner block covers only voxel (2,2,2) of the original.
        let v = vol((3, 3, 3), vec![1.0; 27]);
        let g = BlockGrid::new(2, v.dims()).unwrap();
        let blocks = block_split(&v, &g).unwrap();
        assert_eq!(blocks.len(), 8);
        let corner = &blocks[7];
        assert_eq!(corner.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(corner[0], 1.0);
    }

    #[test]
    fn merge_of_zero_blocks_is_zero_volume() {
        let g = BlockGrid::new(2, Dims::new(3, 3, 3).unwrap()).unwrap();
        let blocks = vec![vec![0.0; 8]; 8];
        let v = block_merge(&blocks, &g).unwrap();
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn merge_rejects_inconsistent_blocks() {
        let g = BlockGrid::new(2, Dims::new(2, 2, 2).unwrap()).unwrap();
        assert!(block_merge(&[], &g).is_err());
        assert!(block_merge(&[vec![0.0; 7]], &g).is_err());
    }

    #[test]
    fn split_rejects_dim_mismatch() {
        let v = vol((2, 2, 2), vec![0.0; 8]);
        let g = BlockGrid::new(2, Dims::new(3, 3, 3).unwrap()).unwrap();
        assert!(block_split(&v, &g).is_err());
    }

    #[test]
    fn clip_scales_to_radius() {
        let clipped = clip_to_ball(&[3.0, 4.0], 1.0);
        assert!((clipped[0] - 0.6).abs() < 1e-15);
        assert!((clipped[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clip_passes_through_inside_ball() {
        assert_eq!(clip_to_ball(&[0.1, 0.0], 1.0), vec![0.1, 0.0]);
        assert_eq!(clip_to_ball(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn clip_block_radius_hand_value() {
        // d_block³ = 8, padded d = 16 → radius sqrt(8/16).
        let r = (8.0f64 / 16.0).sqrt();
        let clipped = clip_to_ball(&[1.0, 1.0, 1.0, 1.0], r);
        for c in clipped {
            assert!((c - 0.35355339059327373).abs() < 1e-12);
        }
    }

    #[test]
    fn dice_hand_values() {
        let a = mask((1, 1, 4), vec![1, 1, 0, 0]);
        let b = mask((1, 1, 4), vec![0, 0, 1, 1]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);

        // |A| = 10, |B| = 20 with A ⊂ B → 2·10/30.
        let d = Dims::new(1, 1, 30).unwrap();
        let mut da = vec![0u8; 30];
        let mut db = vec![0u8; 30];
        for i in 0..10 {
            da[i] = 1;
        }
        for i in 0..20 {
            db[i] = 1;
        }
        let got = dice(
            &BinaryMask::new(d, da).unwrap(),
            &BinaryMask::new(d, db).unwrap(),
        )
        .unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dice_empty_conventions() {
        let empty = mask((1, 1, 2), vec![0, 0]);
        let full = mask((1, 1, 2), vec![1, 1]);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice(&empty, &full).unwrap(), 0.0);
    }

    #[test]
    fn dice_rejects_dim_mismatch() {
        let a = mask((1, 1, 2), vec![0, 0]);
        let b = mask((1, 2, 1), vec![0, 0]);
        assert!(dice(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn block_round_trip(
            nx in 1usize..6, ny in 1usize..6, nz in 1usize..6,
            edge in prop::sample::select(vec![1usize, 2, 3, 8, 24]),
            seed in any::<u64>(),
        ) {
            let dims = Dims::new(nx, ny, nz).unwrap();
            let mut state = seed | 1;
            let data: Vec<f64> = (0..dims.len()).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).collect();
            let v = Volume::new(dims, data).unwrap();
            let g = BlockGrid::new(edge, dims).unwrap();
            let back = block_merge(&block_split(&v, &g).unwrap(), &g).unwrap();
            prop_assert_eq!(back.data(), v.data());
        }

        #[test]
        fn clip_is_idempotent_and_bounded(
            x in prop::collection::vec(-100.0f64..100.0, 1..40),
            radius in 0.01f64..10.0,
        ) {
            let once = clip_to_ball(&x, radius);
            let twice = clip_to_ball(&once, radius);
            prop_assert_eq!(&once, &twice);
            let norm = once.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm <= radius * (1.0 + 1e-12));
        }

        #[test]
        fn clipped_blocks_norm_at_most_one(
            nx in 1usize..7, ny in 1usize..7, nz in 1usize..7,
            edge in 1usize..5,
            seed in any::<u64>(),
        ) {
            let dims = Dims::new(nx, ny, nz).unwrap();
            let mut state = seed | 1;
            let data: Vec<f64> = (0..dims.len()).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 20.0
            }).collect();
            let v = Volume::new(dims, data).unwrap();
            let g = BlockGrid::new(edge, dims).unwrap();
            let r = g.clip_radius();
            let total: f64 = block_split(&v, &g).unwrap().iter()
                .map(|b| clip_to_ball(b, r).iter().map(|v| v * v).sum::<f64>())
                .sum();
            prop_assert!(total <= 1.0 + 1e-9);
        }

        #[test]
        fn dice_is_symmetric(
            data_a in prop::collection::vec(0u8..2, 8),
            data_b in prop::collection::vec(0u8..2, 8),
        ) {
            let d = Dims::new(2, 2, 2).unwrap();
            let a = BinaryMask::new(d, data_a).unwrap();
            let b = BinaryMask::new(d, data_b).unwrap();
            prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
            prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
        }
    }
}
