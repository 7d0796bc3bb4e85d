//! Binary max-tournament over the per-site signals.
//!
//! Every internal node keeps the maximum of its subtree, the lowest leaf
//! index attaining it, and how many leaves attain it. A point update costs
//! `O(log n)`; the root answers the global maximum in `O(1)`.

#[derive(Debug, Clone)]
pub(crate) struct MaxTree {
    leaves: usize,
    width: usize,
    value: Vec<f64>,
    arg: Vec<u32>,
    ties: Vec<u32>,
}

impl MaxTree {
    pub(crate) fn new(values: &[f64]) -> Self {
        let leaves = values.len();
        let width = leaves.next_power_of_two();
        let mut tree = MaxTree {
            leaves,
            width,
            value: vec![f64::NEG_INFINITY; 2 * width],
            arg: vec![u32::MAX; 2 * width],
            ties: vec![0; 2 * width],
        };
        for (j, &v) in values.iter().enumerate() {
            let i = width + j;
            tree.value[i] = v;
            tree.arg[i] = j as u32;
            tree.ties[i] = 1;
        }
        for i in (1..width).rev() {
            tree.pull(i);
        }
        tree
    }

    #[inline]
    fn pull(&mut self, i: usize) {
        let (l, r) = (2 * i, 2 * i + 1);
        let (lv, rv) = (self.value[l], self.value[r]);
        if lv > rv {
            self.value[i] = lv;
            self.arg[i] = self.arg[l];
            self.ties[i] = self.ties[l];
        } else if rv > lv {
            self.value[i] = rv;
            self.arg[i] = self.arg[r];
            self.ties[i] = self.ties[r];
        } else {
            self.value[i] = lv;
            self.arg[i] = self.arg[l];
            self.ties[i] = self.ties[l] + self.ties[r];
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, j: usize, v: f64) {
        debug_assert!(j < self.leaves);
        let mut i = self.width + j;
        self.value[i] = v;
        i >>= 1;
        while i >= 1 {
            self.pull(i);
            i >>= 1;
        }
    }

    /// Maximum value and the lowest index attaining it.
    #[inline]
    pub(crate) fn max(&self) -> (f64, usize) {
        (self.value[1], self.arg[1] as usize)
    }

    /// Number of leaves equal to the maximum.
    #[inline]
    pub(crate) fn tie_count(&self) -> usize {
        self.ties[1] as usize
    }

    /// Index of the `k`-th (0-based, in index order) leaf attaining the maximum.
    pub(crate) fn kth_max(&self, mut k: usize) -> usize {
        assert!(k < self.tie_count(), "tie rank out of range");
        let top = self.value[1];
        let mut i = 1;
        while i < self.width {
            let l = 2 * i;
            if self.value[l] == top {
                let lt = self.ties[l] as usize;
                if k < lt {
                    i = l;
                    continue;
                }
                k -= lt;
            }
            i = l + 1;
        }
        i - self.width
    }
}
