//! Uniform lattice discretization of the open ball B_R ⊂ ℝⁿ and scalar
//! fields on it.
//!
//! Nodes are cell centers of an N×…×N lattice covering [−R, R]ⁿ with
//! spacing h = 2R/N. The coordinates of node i ∈ {0,…,N−1}ⁿ are
//! x_d = (2 i_d − (N−1))·h/2, so the lattice is symmetric under
//! x ↦ −x and contains the origin exactly when N is odd. A node is
//! active when it lies strictly inside the ball shrunk by half a cell,
//! |x| < R·(N−1)/N, which in integer arithmetic is
//! Σ_d (2 i_d − (N−1))² < (N−1)², making activity independent of R and
//! bit-exact across platforms.

use std::sync::Arc;

use crate::{Error, Result, Scalar};

/// Uniform lattice over [−R, R]ⁿ with the active-node index of B_R.
#[derive(Debug)]
pub struct Grid<S: Scalar> {
    n: usize,
    r_ball: S,
    n_side: usize,
    h: S,
    /// Flat lattice indices (row-major, axis 0 slowest) of nodes inside B_R.
    active: Vec<u32>,
    /// Inverse map: flat lattice index → active index, or −1 if inactive.
    active_of_flat: Vec<i32>,
}

impl<S: Scalar> Grid<S> {
    /// Builds the lattice and enumerates the active nodes.
    ///
    /// Requires n ∈ {2,3}, R > 0, N_side ≥ 2, and at least one active
    /// node; N_side = 2 has none in 2D and 3D and is rejected by the
    /// emptiness check.
    pub fn build(n: usize, r_ball: S, n_side: usize) -> Result<Arc<Self>> {
        if !(n == 2 || n == 3) {
            return Err(Error::Config(format!("dimension n must be 2 or 3, got {n}")));
        }
        if !(r_ball > S::zero() && r_ball.is_finite()) {
            return Err(Error::Config(format!(
                "ball radius R must be positive and finite, got {r_ball}"
            )));
        }
        if n_side < 2 {
            return Err(Error::Config(format!(
                "lattice side N_side must be at least 2, got {n_side}"
            )));
        }
        let flat_len = n_side.pow(n as u32);
        if flat_len > i32::MAX as usize {
            return Err(Error::Config(format!(
                "lattice with {flat_len} nodes exceeds the 32-bit index space"
            )));
        }
        let h = S::c(2.0) * r_ball / S::from_count(n_side);
        let nm1 = n_side as i64 - 1;
        let limit = nm1 * nm1;
        let mut active = Vec::new();
        let mut active_of_flat = vec![-1i32; flat_len];
        let mut idx = [0usize; 3];
        for (flat, slot) in active_of_flat.iter_mut().enumerate() {
            let mut rem = flat;
            for d in (0..n).rev() {
                idx[d] = rem % n_side;
                rem /= n_side;
            }
            let mut q = 0i64;
            for &i in &idx[..n] {
                let t = 2 * i as i64 - nm1;
                q += t * t;
            }
            if q < limit {
                *slot = active.len() as i32;
                active.push(flat as u32);
            }
        }
        if active.is_empty() {
            return Err(Error::Config(
                "lattice has no active nodes inside the ball".into(),
            ));
        }
        Ok(Arc::new(Self {
            n,
            r_ball,
            n_side,
            h,
            active,
            active_of_flat,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_ball(&self) -> S {
        self.r_ball
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    /// Lattice spacing h = 2R/N_side.
    pub fn h(&self) -> S {
        self.h
    }

    /// Number of active nodes.
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Flat lattice indices of the active nodes, in row-major order.
    pub fn active(&self) -> &[u32] {
        &self.active
    }

    /// Active index of a flat lattice index, if the node is active.
    pub fn active_index_of_flat(&self, flat: usize) -> Option<usize> {
        let v = self.active_of_flat[flat];
        (v >= 0).then_some(v as usize)
    }

    /// Integer lattice coordinates i ∈ {0,…,N−1}ⁿ of a flat index.
    pub fn lattice_coords(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for d in (0..self.n).rev() {
            idx[d] = rem % self.n_side;
            rem /= self.n_side;
        }
        idx
    }

    /// Flat index from integer lattice coordinates.
    pub fn flat_index(&self, idx: &[usize; 3]) -> usize {
        let mut flat = 0;
        for &i in &idx[..self.n] {
            flat = flat * self.n_side + i;
        }
        flat
    }

    /// Physical coordinates of a flat lattice index; the third component
    /// is zero in 2D.
    pub fn coords(&self, flat: usize) -> [S; 3] {
        let idx = self.lattice_coords(flat);
        let nm1 = S::from_count(self.n_side) - S::one();
        let mut x = [S::zero(); 3];
        for d in 0..self.n {
            x[d] = (S::c(2.0) * S::from_count(idx[d]) - nm1) * self.h * S::c(0.5);
        }
        x
    }

    /// Physical coordinates of the a-th active node.
    pub fn active_coords(&self, a: usize) -> [S; 3] {
        self.coords(self.active[a] as usize)
    }

    /// Euclidean norm of the a-th active node.
    pub fn active_radius(&self, a: usize) -> S {
        let x = self.active_coords(a);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Active index of the node whose integer offset from node a is k
    /// (per axis, in lattice steps), if it exists and is active.
    pub fn neighbor(&self, a: usize, k: &[i64; 3]) -> Option<usize> {
        let idx = self.lattice_coords(self.active[a] as usize);
        let mut j = [0usize; 3];
        for d in 0..self.n {
            let t = idx[d] as i64 + k[d];
            if t < 0 || t >= self.n_side as i64 {
                return None;
            }
            j[d] = t as usize;
        }
        self.active_index_of_flat(self.flat_index(&j))
    }
}

/// Scalar field on the active nodes of a grid, extended by zero outside.
#[derive(Debug, Clone)]
pub struct DiscreteField<S: Scalar> {
    grid: Arc<Grid<S>>,
    values: Vec<S>,
}

impl<S: Scalar> DiscreteField<S> {
    /// Zero field.
    pub fn zeros(grid: Arc<Grid<S>>) -> Self {
        let len = grid.n_active();
        Self {
            grid,
            values: vec![S::zero(); len],
        }
    }

    /// Field sampled pointwise from a function of the node coordinates.
    pub fn from_fn(grid: Arc<Grid<S>>, mut f: impl FnMut(&[S; 3]) -> S) -> Self {
        let values = (0..grid.n_active())
            .map(|a| f(&grid.active_coords(a)))
            .collect();
        Self { grid, values }
    }

    /// Field from explicit active-node values; length must match.
    pub fn from_values(grid: Arc<Grid<S>>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.n_active() {
            return Err(Error::Domain(format!(
                "field length {} does not match {} active nodes",
                values.len(),
                grid.n_active()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid<S>> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    /// Value at an active node.
    pub fn at(&self, a: usize) -> S {
        self.values[a]
    }

    /// Value at a flat lattice index; zero on inactive nodes (the field
    /// is extended by zero outside the ball).
    pub fn at_flat(&self, flat: usize) -> S {
        match self.grid.active_index_of_flat(flat) {
            Some(a) => self.values[a],
            None => S::zero(),
        }
    }

    /// ℓ² dot against another field on the same grid (no hⁿ factor).
    pub fn dot(&self, other: &Self) -> S {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// Discrete L² norm sqrt(hⁿ Σ u²).
    pub fn l2_norm(&self) -> S {
        let hn = self.grid.h().powi(self.grid.n() as i32);
        (hn * self.dot(self)).sqrt()
    }

    /// Discrete L¹ mass hⁿ Σ u (signed).
    pub fn mass(&self) -> S {
        let hn = self.grid.h().powi(self.grid.n() as i32);
        hn * self.values.iter().copied().sum::<S>()
    }

    /// Minimum value over active nodes.
    pub fn min_value(&self) -> S {
        self.values.iter().copied().fold(S::infinity(), S::min)
    }

    /// Maximum value over active nodes.
    pub fn max_value(&self) -> S {
        self.values.iter().copied().fold(S::neg_infinity(), S::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn three_by_three_activates_only_origin() {
        let g = Grid::<f64>::build(2, 1.0, 3).unwrap();
        assert_eq!(g.n_active(), 1);
        let x = g.active_coords(0);
        assert_eq!(x, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn node_coordinates_are_symmetric_cell_centers() {
        let g = Grid::<f64>::build(2, 1.0, 4).unwrap();
        assert_relative_eq!(g.h(), 0.5);
        // Corner cell center of the 4×4 lattice on [−1,1]².
        let x = g.coords(0);
        assert_relative_eq!(x[0], -0.75);
        assert_relative_eq!(x[1], -0.75);
        // Lattice is symmetric: reflecting indices negates coordinates.
        let y = g.coords(g.flat_index(&[3, 3, 0]));
        assert_relative_eq!(x[0], -y[0]);
        assert_relative_eq!(x[1], -y[1]);
    }

    #[test]
    fn all_active_nodes_lie_strictly_inside_the_ball() {
        for (n, n_side) in [(2usize, 33usize), (3, 9), (2, 8)] {
            let g = Grid::<f64>::build(n, 2.5, n_side).unwrap();
            for a in 0..g.n_active() {
                let r = g.active_radius(a);
                assert!(
                    r < 2.5,
                    "active node {a} at radius {r} is not inside the ball"
                );
            }
        }
    }

    /// Active count for N = 65 in 2D equals the lattice-point count of the
    /// strict disk Σ(2i−64)² < 64², computed independently: 3205.
    #[test]
    fn active_count_matches_disk_lattice_count() {
        let g = Grid::<f64>::build(2, 1.0, 65).unwrap();
        assert_eq!(g.n_active(), 3205);
        // And the count is independent of R.
        let g2 = Grid::<f64>::build(2, 17.3, 65).unwrap();
        assert_eq!(g2.n_active(), 3205);
    }

    #[test]
    fn tiny_lattices_for_dense_cross_checks() {
        assert_eq!(Grid::<f64>::build(2, 1.0, 5).unwrap().n_active(), 9);
        assert_eq!(Grid::<f64>::build(2, 1.0, 6).unwrap().n_active(), 16);
        assert_eq!(Grid::<f64>::build(3, 1.0, 4).unwrap().n_active(), 8);
    }

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(Grid::<f64>::build(1, 1.0, 8).is_err());
        assert!(Grid::<f64>::build(2, 0.0, 8).is_err());
        assert!(Grid::<f64>::build(2, -1.0, 8).is_err());
        assert!(Grid::<f64>::build(2, 1.0, 1).is_err());
        // N_side = 2 leaves no node inside the shrunken ball.
        assert!(Grid::<f64>::build(2, 1.0, 2).is_err());
    }

    #[test]
    fn neighbor_lookup_roundtrip() {
        let g = Grid::<f64>::build(2, 1.0, 9).unwrap();
        let center = g.active_index_of_flat(g.flat_index(&[4, 4, 0])).unwrap();
        let right = g.neighbor(center, &[0, 1, 0]).unwrap();
        let back = g.neighbor(right, &[0, -1, 0]).unwrap();
        assert_eq!(back, center);
        // Stepping far outside the lattice yields None.
        assert_eq!(g.neighbor(center, &[100, 0, 0]), None);
    }

    #[test]
    fn field_zero_extension_and_norms() {
        let g = Grid::<f64>::build(2, 1.0, 5).unwrap();
        let u = DiscreteField::from_fn(g.clone(), |_| 1.0);
        // 9 active nodes, h = 0.4: mass = 9·0.16 = 1.44.
        assert_relative_eq!(u.mass(), 1.44, max_relative = 1e-14);
        assert_relative_eq!(u.l2_norm(), 1.2, max_relative = 1e-14);
        // Corner node of the lattice is inactive: value reads as zero.
        assert_eq!(u.at_flat(0), 0.0);
        assert!(DiscreteField::from_values(g, vec![1.0; 3]).is_err());
    }

    proptest! {
        /// Activity is decided in integer arithmetic, so it cannot depend
        /// on the ball radius; a disagreement would mean floating-point
        /// rounding leaked into the membership test.
        #[test]
        fn activity_is_radius_independent(
            n_side in 3usize..40,
            r_num in 1u32..1000,
        ) {
            let r = r_num as f64 / 100.0;
            let a = Grid::<f64>::build(2, 1.0, n_side).unwrap();
            let b = Grid::<f64>::build(2, r, n_side).unwrap();
            prop_assert_eq!(a.active(), b.active());
        }

        /// The active set is invariant under the lattice point reflection
        /// i ↦ N−1−i, mirroring the symmetry of the ball.
        #[test]
        fn active_set_is_reflection_symmetric(n_side in 3usize..32) {
            let g = Grid::<f64>::build(2, 1.0, n_side).unwrap();
            for &flat in g.active() {
                let idx = g.lattice_coords(flat as usize);
                let refl = [n_side - 1 - idx[0], n_side - 1 - idx[1], 0];
                prop_assert!(
                    g.active_index_of_flat(g.flat_index(&refl)).is_some(),
                    "reflection of active node {:?} is inactive", idx
                );
            }
        }
    }
}
