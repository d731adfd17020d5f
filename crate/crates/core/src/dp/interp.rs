use super::Axis;

/// A rectangular lattice stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

/// Corner indices and weights of one multilinear interpolation.
#[derive(Debug, Clone, Default)]
pub struct Stencil {
    pub index: Vec<usize>,
    pub weight: Vec<f64>,
}

impl Lattice {
    pub fn new(axes: Vec<Axis>) -> Self {
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].count;
        }
        let len = axes.iter().map(|a| a.count).product();
        Lattice { axes, strides, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    /// Coordinates of cell `idx`.
    pub fn point(&self, mut idx: usize, out: &mut [f64]) {
        for d in 0..self.axes.len() {
            let i = idx / self.strides[d];
            idx %= self.strides[d];
            out[d] = self.axes[d].point(i);
        }
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Multilinear stencil at `p`, clamped to the lattice.
    pub fn stencil(&self, p: &[f64], out: &mut Stencil) {
        out.index.clear();
        out.weight.clear();
        out.index.push(0);
        out.weight.push(1.0);
        for (d, axis) in self.axes.iter().enumerate() {
            let t = ((p[d] - axis.lower) / axis.spacing()).clamp(0.0, (axis.count - 1) as f64);
            let base = (t.floor() as usize).min(axis.count - 2);
            let frac = t - base as f64;
            let stride = self.strides[d];
            let k = out.index.len();
            for c in 0..k {
                let (i, w) = (out.index[c], out.weight[c]);
                out.index[c] = i + base * stride;
                out.weight[c] = w * (1.0 - frac);
                out.index.push(i + (base + 1) * stride);
                out.weight.push(w * frac);
            }
        }
    }

    pub fn apply(stencil: &Stencil, table: &[f64]) -> f64 {
        stencil.index.iter().zip(&stencil.weight).map(|(&i, &w)| w * table[i]).sum()
    }

    /// Interpolates a table holding `stride` values per cell at offset `k`.
    pub fn apply_strided(stencil: &Stencil, table: &[f64], stride: usize, k: usize) -> f64 {
        stencil
            .index
            .iter()
            .zip(&stencil.weight)
            .map(|(&i, &w)| w * table[i * stride + k])
            .sum()
    }

    pub fn interpolate(&self, table: &[f64], p: &[f64]) -> f64 {
        let mut s = Stencil::default();
        self.stencil(p, &mut s);
        Self::apply(&s, table)
    }
}
