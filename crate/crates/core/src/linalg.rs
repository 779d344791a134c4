//! Linear systems over `F_p`, solved by deterministic Gaussian elimination.

use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct LinearSystem {
    p: u32,
    ncols: usize,
    rows: Vec<(Vec<(usize, u32)>, u32)>,
}

impl LinearSystem {
    pub fn new(p: u32, ncols: usize) -> Self {
        Self { p, ncols, rows: Vec::new() }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Adds the equation `sum a_c x_c = rhs`. Entries may repeat columns.
    pub fn add_row(&mut self, entries: impl IntoIterator<Item = (usize, u32)>, rhs: u32) {
        let mut e: Vec<(usize, u32)> = entries.into_iter().filter(|(_, a)| a % self.p != 0).collect();
        e.sort_by_key(|(c, _)| *c);
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(e.len());
        for (c, a) in e {
            assert!(c < self.ncols, "column {c} out of range");
            match merged.last_mut() {
                Some((lc, la)) if *lc == c => *la = (*la + a) % self.p,
                _ => merged.push((c, a % self.p)),
            }
        }
        merged.retain(|(_, a)| *a != 0);
        let rhs = rhs % self.p;
        if merged.is_empty() && rhs == 0 {
            return;
        }
        self.rows.push((merged, rhs));
    }

    pub fn echelon(&self) -> Echelon {
        let p = self.p as u64;
        let n = self.ncols;
        // dense rows, rhs stored in the last slot
        let mut rows: Vec<Vec<u32>> = self
            .rows
            .iter()
            .map(|(e, r)| {
                let mut v = vec![0u32; n + 1];
                for &(c, a) in e {
                    v[c] = a;
                }
                v[n] = *r;
                v
            })
            .collect();
        let mut pivots: Vec<(usize, Vec<u32>)> = Vec::new();
        let mut col = 0;
        while col < n && !rows.is_empty() {
            let Some(pr) = rows.iter().position(|r| r[col] != 0) else {
                col += 1;
                continue;
            };
            let mut prow = rows.swap_remove(pr);
            let inv = inverse(prow[col], self.p) as u64;
            for x in prow[col..].iter_mut() {
                *x = ((*x as u64 * inv) % p) as u32;
            }
            let prow_ref = &prow;
            rows.par_iter_mut().for_each(|r| {
                let f = r[col] as u64;
                if f == 0 {
                    return;
                }
                let f = p - f;
                for (x, &y) in r[col..].iter_mut().zip(&prow_ref[col..]) {
                    if y != 0 {
                        *x = ((*x as u64 + f * y as u64) % p) as u32;
                    }
                }
            });
            rows.retain(|r| r.iter().any(|&x| x != 0));
            pivots.push((col, prow));
            col += 1;
        }
        // any surviving row has only its rhs nonzero
        let consistent = rows.iter().all(|r| r[n] == 0);
        Echelon { p: self.p, ncols: n, pivots, consistent }
    }

    pub fn solve(&self) -> Option<Vec<u32>> {
        self.echelon().particular()
    }
}

/// Row echelon form with unit pivots.
#[derive(Clone, Debug)]
pub struct Echelon {
    p: u32,
    ncols: usize,
    pivots: Vec<(usize, Vec<u32>)>,
    consistent: bool,
}

impl Echelon {
    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.ncols];
        for (c, _) in &self.pivots {
            is_pivot[*c] = true;
        }
        (0..self.ncols).filter(|&c| !is_pivot[c]).collect()
    }

    fn back_substitute(&self, mut x: Vec<u32>, with_rhs: bool) -> Vec<u32> {
        let p = self.p as u64;
        let n = self.ncols;
        for (c, row) in self.pivots.iter().rev() {
            let mut acc: u64 = if with_rhs { row[n] as u64 } else { 0 };
            for k in c + 1..n {
                if row[k] != 0 && x[k] != 0 {
                    acc = (acc + (p - row[k] as u64) * x[k] as u64) % p;
                }
            }
            x[*c] = acc as u32;
        }
        x
    }

    /// The solution with every free variable set to zero.
    pub fn particular(&self) -> Option<Vec<u32>> {
        if !self.consistent {
            return None;
        }
        Some(self.back_substitute(vec![0; self.ncols], true))
    }

    /// A basis of the solutions of the homogeneous system, one vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<u32>> {
        self.free_columns()
            .into_iter()
            .map(|f| {
                let mut x = vec![0; self.ncols];
                x[f] = 1;
                self.back_substitute(x, false)
            })
            .collect()
    }
}

pub fn inverse(a: u32, p: u32) -> u32 {
    let mut acc: u64 = 1;
    let mut base = a as u64 % p as u64;
    let mut k = p - 2;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc * base % p as u64;
        }
        base = base * base % p as u64;
        k >>= 1;
    }
    acc as u32
}
