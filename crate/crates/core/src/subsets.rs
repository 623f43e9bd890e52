//! Ordered index subsets stored as bitmasks, in lexicographic order of their
//! sorted member lists.

/// Binomial coefficient C(n, k); zero when k > n.
pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// All k-subsets of {0..n-1}, lexicographically ordered.
pub fn subsets(n: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(binom(n, k));
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.iter().fold(0u32, |m, &i| m | (1 << i)));
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return out;
            }
        }
    }
}

/// Position of `mask` within `subsets(n, popcount(mask))`.
pub fn rank(n: usize, mask: u32) -> usize {
    let k = mask.count_ones() as usize;
    let mut r = 0;
    let mut prev: isize = -1;
    for (i, c) in members(mask).into_iter().enumerate() {
        for j in (prev + 1) as usize..c {
            r += binom(n - 1 - j, k - 1 - i);
        }
        prev = c as isize;
    }
    r
}

/// Sorted members of a subset.
pub fn members(mask: u32) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out.push(i);
        m &= m - 1;
    }
    out
}

pub fn from_members(idx: &[usize]) -> u32 {
    idx.iter().fold(0u32, |m, &i| m | (1 << i))
}

pub fn complement(n: usize, mask: u32) -> u32 {
    !mask & ((1u32 << n) - 1)
}

/// Sign of the permutation sorting the concatenation (I, K) of two disjoint
/// subsets: (-1)^{#{(i, k) : i in I, k in K, i > k}}.
pub fn merge_sign(i: u32, k: u32) -> f64 {
    debug_assert_eq!(i & k, 0);
    let mut inversions = 0u32;
    let mut m = k;
    while m != 0 {
        let b = m.trailing_zeros();
        // members of I strictly above b
        inversions += (i >> (b + 1)).count_ones();
        m &= m - 1;
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Position of element `e` inside the sorted member list of `mask`.
pub fn position(mask: u32, e: usize) -> usize {
    (mask & ((1u32 << e) - 1)).count_ones() as usize
}
