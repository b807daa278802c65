//! Cut and `L1` distances between step graphons.
//!
//! Both graphons are refined to their common partition into `m` pieces.
//! With `s, t` the fractions of each piece lying in `S` and `T`, the cut
//! objective `sum_i |int_{SxT} (U_i - W_i)|` is convex in `s` for fixed `t`
//! and vice versa, so the supremum is attained with `s, t` in `{0,1}^m`.
//! For each of the `2^m` choices of `s` the best `t` is found exactly via
//! `sum_i |x_i| = max over signs of sum_i sigma_i x_i`.

use rand::Rng as _;
use serde::Serialize;

use super::{average_graphon, StepGraphon};
use crate::combin::permutations;
use crate::error::{invalid, Result};
use crate::par;
use crate::rng;

/// Largest common refinement solved exactly.
pub const EXACT_LIMIT: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Dk,
    L1,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutResult {
    /// Exact value, or the best lower bound found when not `exact`.
    pub value: f64,
    /// Certified upper bound (equal to `value` when exact).
    pub upper: f64,
    pub exact: bool,
    /// Maximising `(S, T)` as piece indicators of the common refinement.
    #[serde(skip)]
    pub witness: Option<(Vec<bool>, Vec<bool>)>,
    pub pieces: usize,
}

/// Common refinement: per piece, its mass and the part it lies in for each
/// graphon.
struct Refinement {
    mass: Vec<f64>,
    /// `k` difference matrices, `m x m`, already scaled by the piece masses.
    scaled: Vec<f64>,
    raw: Vec<f64>,
    k: usize,
}

impl Refinement {
    fn new(u: &StepGraphon, w: &StepGraphon) -> Result<Self> {
        if u.k() != w.k() {
            return invalid("graphons use different colour counts");
        }
        let pieces: Vec<(usize, usize, f64)> = if u.weights() == w.weights() {
            (0..u.parts()).map(|a| (a, a, u.weights()[a])).collect()
        } else {
            let mut cuts: Vec<f64> = u.boundaries().into_iter().chain(w.boundaries()).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
            cuts.windows(2)
                .filter(|c| c[1] - c[0] > 1e-15)
                .map(|c| {
                    let mid = 0.5 * (c[0] + c[1]);
                    (u.part_of(mid), w.part_of(mid), c[1] - c[0])
                })
                .collect()
        };
        let (m, k) = (pieces.len(), u.k() as usize);
        let mut raw = vec![0.0; m * m * k];
        let mut scaled = vec![0.0; m * m * k];
        for (a, &(ua, wa, la)) in pieces.iter().enumerate() {
            for (b, &(ub, wb, lb)) in pieces.iter().enumerate() {
                for i in 0..k {
                    let d = u.cell(ua, ub)[i] - w.cell(wa, wb)[i];
                    raw[(a * m + b) * k + i] = d;
                    scaled[(a * m + b) * k + i] = la * lb * d;
                }
            }
        }
        Ok(Refinement { mass: pieces.iter().map(|p| p.2).collect(), scaled, raw, k })
    }

    fn m(&self) -> usize {
        self.mass.len()
    }

    #[inline]
    fn row(&self, a: usize) -> &[f64] {
        let mk = self.m() * self.k;
        &self.scaled[a * mk..(a + 1) * mk]
    }

    fn l1(&self) -> f64 {
        let (m, k) = (self.m(), self.k);
        let mut total = 0.0;
        for a in 0..m {
            for b in 0..m {
                let f = self.mass[a] * self.mass[b];
                total += f * self.raw[(a * m + b) * k..(a * m + b + 1) * k].iter().map(|x| x.abs()).sum::<f64>();
            }
        }
        total
    }

    /// Objective for fractional `s, t`.
    fn objective(&self, s: &[f64], t: &[f64]) -> f64 {
        let (m, k) = (self.m(), self.k);
        let mut acc = vec![0.0; k];
        for a in 0..m {
            if s[a] == 0.0 {
                continue;
            }
            for b in 0..m {
                if t[b] == 0.0 {
                    continue;
                }
                let f = s[a] * t[b];
                for i in 0..k {
                    acc[i] += f * self.scaled[(a * m + b) * k + i];
                }
            }
        }
        acc.iter().map(|x| x.abs()).sum()
    }
}

/// `max_t sum_i |sum_b t_b r[b][i]|` for `r` laid out `m x k`, with the
/// maximising `t`.
fn best_response(r: &[f64], m: usize, k: usize) -> (f64, u64) {
    if k <= m.min(20) {
        let mut best = (f64::NEG_INFINITY, 0u64);
        for signs in 0..1u64 << k {
            let mut total = 0.0;
            let mut t = 0u64;
            for b in 0..m {
                let x: f64 = (0..k).map(|i| if signs >> i & 1 == 1 { r[b * k + i] } else { -r[b * k + i] }).sum();
                if x > 0.0 {
                    total += x;
                    t |= 1 << b;
                }
            }
            if total > best.0 {
                best = (total, t);
            }
        }
        best
    } else {
        let mut best = (f64::NEG_INFINITY, 0u64);
        let mut acc = vec![0.0; k];
        for t in 0..1u64 << m {
            acc.iter_mut().for_each(|x| *x = 0.0);
            for b in (0..m).filter(|b| t >> b & 1 == 1) {
                for i in 0..k {
                    acc[i] += r[b * k + i];
                }
            }
            let v: f64 = acc.iter().map(|x| x.abs()).sum();
            if v > best.0 {
                best = (v, t);
            }
        }
        best
    }
}

fn bits(mask: u64, m: usize) -> Vec<bool> {
    (0..m).map(|b| mask >> b & 1 == 1).collect()
}

fn exact_dk(r: &Refinement) -> (f64, u64, u64) {
    let (m, k) = (r.m(), r.k);
    let high = m.min(6);
    let low = m - high;
    let results = par::map_indices(1 << high, |prefix| {
        let mut acc = vec![0.0; m * k];
        for j in 0..high {
            if prefix >> j & 1 == 1 {
                for (x, y) in acc.iter_mut().zip(r.row(low + j)) {
                    *x += y;
                }
            }
        }
        let mut s = (prefix as u64) << low;
        let (v, t) = best_response(&acc, m, k);
        let mut best = (v, s, t);
        for step in 1u64..1 << low {
            let a = step.trailing_zeros() as usize;
            let sign = if s >> a & 1 == 1 { -1.0 } else { 1.0 };
            s ^= 1 << a;
            for (x, y) in acc.iter_mut().zip(r.row(a)) {
                *x += sign * y;
            }
            let (v, t) = best_response(&acc, m, k);
            if v > best.0 {
                best = (v, s, t);
            }
        }
        best
    });
    results.into_iter().fold((f64::NEG_INFINITY, 0, 0), |b, x| if x.0 > b.0 { x } else { b })
}

/// Alternating best responses from random starts; a lower bound.
fn local_dk(r: &Refinement, seed: u64) -> (f64, u64, u64) {
    let (m, k) = (r.m(), r.k);
    assert!(m <= 64, "local search supports up to 64 pieces");
    let mut g = rng::rng(seed);
    let mut best = (0.0, 0u64, 0u64);
    let respond = |fixed: u64, transpose: bool| {
        let mut acc = vec![0.0; m * k];
        for a in (0..m).filter(|a| fixed >> a & 1 == 1) {
            for b in 0..m {
                for i in 0..k {
                    let v = if transpose { r.scaled[(b * m + a) * k + i] } else { r.scaled[(a * m + b) * k + i] };
                    acc[b * k + i] += v;
                }
            }
        }
        best_response(&acc, m, k)
    };
    for _ in 0..32 {
        let mut s: u64 = g.gen::<u64>() & if m == 64 { u64::MAX } else { (1 << m) - 1 };
        let mut last = f64::NEG_INFINITY;
        for _ in 0..100 {
            let (_, t) = respond(s, false);
            let (v, s2) = respond(t, true);
            s = s2;
            if v > best.0 {
                best = (v, s, t);
            }
            if v <= last + 1e-15 {
                break;
            }
            last = v;
        }
    }
    best
}

pub fn cut_distance(u: &StepGraphon, w: &StepGraphon, metric: Metric) -> Result<CutResult> {
    let r = Refinement::new(u, w)?;
    let m = r.m();
    let l1 = r.l1();
    if metric == Metric::L1 {
        return Ok(CutResult { value: l1, upper: l1, exact: true, witness: None, pieces: m });
    }
    if m <= EXACT_LIMIT {
        let (v, s, t) = exact_dk(&r);
        let v = v.max(0.0);
        return Ok(CutResult { value: v, upper: v, exact: true, witness: Some((bits(s, m), bits(t, m))), pieces: m });
    }
    let (v, s, t) = local_dk(&r, 0x5eed);
    Ok(CutResult { value: v, upper: l1, exact: false, witness: Some((bits(s, m), bits(t, m))), pieces: m })
}

pub fn l1_distance(u: &StepGraphon, w: &StepGraphon) -> f64 {
    Refinement::new(u, w).map(|r| r.l1()).unwrap_or(f64::NAN)
}

/// The cut objective for fractional piece memberships of the common
/// refinement.
pub fn cut_objective(u: &StepGraphon, w: &StepGraphon, s: &[f64], t: &[f64]) -> Result<f64> {
    let r = Refinement::new(u, w)?;
    if s.len() != r.m() || t.len() != r.m() {
        return invalid(format!("membership vectors need {} entries", r.m()));
    }
    Ok(r.objective(s, t))
}

/// Best objective over disjoint `S, T` whose pieces are each in
/// `{none, S, T, half S, half T, half of each}`. A lower bound on the
/// disjoint supremum; `None` beyond seven pieces.
pub fn disjoint_cut_lower(u: &StepGraphon, w: &StepGraphon) -> Result<Option<f64>> {
    let r = Refinement::new(u, w)?;
    let m = r.m();
    if m > 7 {
        return Ok(None);
    }
    const CHOICES: [(f64, f64); 6] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];
    let total = 6usize.pow(m as u32);
    let vals = par::map_indices(total, |mut code| {
        let mut s = vec![0.0; m];
        let mut t = vec![0.0; m];
        for a in 0..m {
            (s[a], t[a]) = CHOICES[code % 6];
            code /= 6;
        }
        r.objective(&s, &t)
    });
    Ok(Some(vals.into_iter().fold(0.0, f64::max)))
}

/// Classical cut norm `sup_{S,T} |int_{SxT} (U_colour - W_colour)|` by
/// direct enumeration of both sets over the common refinement. Written
/// separately from the `d_k` solver so that one can check the other.
pub fn classical_cut_norm(u: &StepGraphon, w: &StepGraphon, colour: usize) -> Result<f64> {
    if u.k() != w.k() || colour == 0 || colour > u.k() as usize {
        return invalid("bad colour or mismatched graphons");
    }
    let mut cuts = u.boundaries();
    cuts.extend(w.boundaries());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let pieces: Vec<(f64, f64)> = cuts.windows(2).filter(|c| c[1] - c[0] > 1e-15).map(|c| (c[0], c[1])).collect();
    let m = pieces.len();
    if m > 12 {
        return invalid("classical enumeration is limited to 12 pieces");
    }
    let value = |x: f64, y: f64| u.cell(u.part_of(x), u.part_of(y))[colour - 1] - w.cell(w.part_of(x), w.part_of(y))[colour - 1];
    let mut d = vec![vec![0.0; m]; m];
    for (a, pa) in pieces.iter().enumerate() {
        for (b, pb) in pieces.iter().enumerate() {
            let (xa, xb) = ((pa.0 + pa.1) / 2.0, (pb.0 + pb.1) / 2.0);
            d[a][b] = (pa.1 - pa.0) * (pb.1 - pb.0) * value(xa, xb);
        }
    }
    let mut best: f64 = 0.0;
    for s in 0u32..1 << m {
        for t in 0u32..1 << m {
            let mut tot = 0.0;
            for a in (0..m).filter(|a| s >> a & 1 == 1) {
                for b in (0..m).filter(|b| t >> b & 1 == 1) {
                    tot += d[a][b];
                }
            }
            best = best.max(tot.abs());
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaResult {
    /// Always an upper bound on the unlabelled cut distance.
    pub value: f64,
    /// Part `a` of the rearranged `W` is part `perm[a]` of `W`.
    pub perm: Vec<usize>,
    /// All `m!` permutations were tried.
    pub exhaustive: bool,
    /// Both graphons were already step functions on the `m`-grid. If not,
    /// they were averaged onto it first and `value` bounds the distance
    /// between the averages only.
    pub aligned: bool,
}

fn on_grid(w: &StepGraphon, m: usize) -> bool {
    w.boundaries().iter().all(|&b| ((b * m as f64) - (b * m as f64).round()).abs() < 1e-9)
}

/// Upper bound on `delta_k(U, W)`: the smallest `d_k` after rearranging the
/// `m` equal parts of `W`. Exhaustive for `m <= 8`, otherwise a seeded
/// annealing over swaps.
pub fn delta_cut_upper(u: &StepGraphon, w: &StepGraphon, m: usize) -> Result<DeltaResult> {
    if m == 0 || m > EXACT_LIMIT {
        return invalid(format!("grid size must be in 1..={EXACT_LIMIT}"));
    }
    let aligned = on_grid(u, m) && on_grid(w, m);
    let (ug, wg) = (average_graphon(u, m)?, average_graphon(w, m)?);
    let dist = |perm: &[usize]| cut_distance(&ug, &wg.permuted(perm), Metric::Dk).map(|r| r.value);
    if m <= 8 {
        let perms = permutations(m);
        let vals = par::map_slice(&perms, |p| dist(p));
        let mut best = (f64::INFINITY, 0);
        for (i, v) in vals.into_iter().enumerate() {
            let v = v?;
            if v < best.0 - 1e-15 {
                best = (v, i);
            }
        }
        return Ok(DeltaResult { value: best.0, perm: perms[best.1].clone(), exhaustive: true, aligned });
    }
    let mut g = rng::rng(0xde17a);
    let mut perm: Vec<usize> = (0..m).collect();
    let mut cur = dist(&perm)?;
    let mut best = (cur, perm.clone());
    let steps = 2000;
    for step in 0..steps {
        let temp = 0.05 * (1.0 - step as f64 / steps as f64) + 1e-6;
        let (i, j) = (g.gen_range(0..m), g.gen_range(0..m));
        if i == j {
            continue;
        }
        perm.swap(i, j);
        let v = dist(&perm)?;
        if v <= cur || g.gen::<f64>() < ((cur - v) / temp).exp() {
            cur = v;
            if v < best.0 {
                best = (v, perm.clone());
            }
        } else {
            perm.swap(i, j);
        }
    }
    Ok(DeltaResult { value: best.0, perm: best.1, exhaustive: false, aligned })
}
