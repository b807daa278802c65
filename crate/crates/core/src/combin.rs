//! Small enumeration helpers shared by the search code.

use std::ops::ControlFlow;

/// Calls `f` on every increasing `m`-subset of `0..n`, in lexicographic order.
pub fn for_each_combination<F>(n: usize, m: usize, mut f: F) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    if m > n {
        return ControlFlow::Continue(());
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        f(&idx)?;
        let mut i = m;
        while i > 0 && idx[i - 1] == i - 1 + n - m {
            i -= 1;
        }
        if i == 0 {
            return ControlFlow::Continue(());
        }
        idx[i - 1] += 1;
        for j in i..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let _ = for_each_combination(n, m, |c| {
        out.push(c.to_vec());
        ControlFlow::Continue(())
    });
    out
}

/// All permutations of `0..m` in lexicographic order (Heap-free, next-permutation).
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..m).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..m).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..m).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(5, 3).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(combinations(4, 2)[1], vec![0, 2]);
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
    }
}
