//! Order-0 adaptive frequency model.
//!
//! Counts start at 1 and grow by 1 per coded symbol. Cumulative frequencies
//! come from a Fenwick tree so both lookup directions are `O(log A)`.

/// Totals are halved (keeping every count ≥ 1) once they reach this value,
/// so `range / total` stays well above 1 with a 24-bit renormalisation floor.
pub const MAX_TOTAL: u32 = 1 << 20;

#[derive(Clone, Debug)]
pub struct AdaptiveModel {
    counts: Vec<u32>,
    tree: Vec<u32>,
    total: u32,
}

impl AdaptiveModel {
    pub fn new(alphabet: usize) -> Self {
        assert!(alphabet >= 1, "alphabet must be non-empty");
        let mut m = AdaptiveModel {
            counts: vec![1; alphabet],
            tree: vec![0; alphabet + 1],
            total: 0,
        };
        m.rebuild();
        m
    }

    pub fn alphabet(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn count(&self, symbol: usize) -> u32 {
        self.counts[symbol]
    }

    fn rebuild(&mut self) {
        self.tree.iter_mut().for_each(|t| *t = 0);
        for i in 0..self.counts.len() {
            self.tree_add(i, self.counts[i]);
        }
        self.total = self.counts.iter().sum();
    }

    fn tree_add(&mut self, symbol: usize, delta: u32) {
        let mut i = symbol + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of counts of all symbols below `symbol`.
    pub fn cumulative(&self, symbol: usize) -> u32 {
        let mut i = symbol;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i &= i - 1;
        }
        sum
    }

    /// Symbol whose cumulative interval contains `target`, with its
    /// `(cumulative, count)` pair.
    pub fn find(&self, target: u32) -> (usize, u32, u32) {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut rem = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        let symbol = pos.min(n - 1);
        (symbol, target - rem, self.counts[symbol])
    }

    pub fn update(&mut self, symbol: usize) {
        self.counts[symbol] += 1;
        self.tree_add(symbol, 1);
        self.total += 1;
        if self.total >= MAX_TOTAL {
            for c in &mut self.counts {
                *c = (*c).div_ceil(2);
            }
            self.rebuild();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_model_is_uniform() {
        let m = AdaptiveModel::new(5);
        assert_eq!(m.total(), 5);
        for s in 0..5 {
            assert_eq!(m.cumulative(s), s as u32);
            assert_eq!(m.find(s as u32), (s, s as u32, 1));
        }
    }

    #[test]
    fn find_matches_linear_scan() {
        let mut m = AdaptiveModel::new(11);
        for s in [3, 3, 7, 0, 10, 3, 5, 5, 5, 5] {
            m.update(s);
        }
        assert_eq!(m.total(), 21);
        for target in 0..m.total() {
            let mut cum = 0;
            let mut sym = 0;
            for s in 0..11 {
                if target < cum + m.count(s) {
                    sym = s;
                    break;
                }
                cum += m.count(s);
            }
            assert_eq!(m.find(target), (sym, cum, m.count(sym)));
        }
    }

    #[test]
    fn rescale_keeps_counts_positive() {
        let mut m = AdaptiveModel::new(3);
        for _ in 0..MAX_TOTAL {
            m.update(0);
        }
        assert!(m.total() < MAX_TOTAL);
        assert!((0..3).all(|s| m.count(s) >= 1));
        assert_eq!(m.cumulative(3), m.total());
    }
}
