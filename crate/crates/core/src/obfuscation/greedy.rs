//! Polynomial-time obfuscation construction.
//!
//! Think of a uniform variable on `[0, 1)` shared by every row s. Round c of
//! column i claims an interval of length
//! `p(i | s_{i,c}) - p(i | s_{i,c-1})`. On that interval the rows ranked c or
//! higher in column i emit `x = i`; the c-1 lower-ranked rows emit a
//! companion column drawn from their leftover likelihood. The set U of an
//! interval is the union of what the rows emit there, so it depends on the
//! interval alone (hence is independent of S) and has at most c members.
//!
//! Rounds 1..=sigma cover `lambda_sigma`. The remaining `1 - lambda_sigma` is
//! either assigned to `U = [K]` (when `sigma + 1 = K`) or covered by a
//! truncated round sigma+1, keeping every set within `sigma + 1` members.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::obfuscation::theta::{profile_over, ThetaProfile};
use crate::obfuscation::ObfuscationPolicy;
use crate::prob::ConditionalMatrix;
use crate::scalar::{sum, Scalar};
use crate::subset::Subset;

struct Segment<T> {
    column: usize,
    round: usize,
    length: T,
}

/// Builds an independent, support-respecting policy whose `|U|` law meets the
/// theta guarantee. Requires every row to be supported.
pub fn greedy_construct<T: Scalar>(cond: &ConditionalMatrix<T>) -> Result<ObfuscationPolicy<T>> {
    if let Some(row) = (0..cond.k()).find(|&s| !cond.is_supported(s)) {
        return Err(Error::PartialSupport { row });
    }
    greedy_over_support(cond)
}

/// Same construction over the supported rows only; unsupported rows get no
/// entries. Used when a tracked posterior has lost some private values.
pub fn greedy_over_support<T: Scalar>(cond: &ConditionalMatrix<T>) -> Result<ObfuscationPolicy<T>> {
    let rows = cond.support();
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    let k = cond.k();
    let profile = profile_over(cond, &rows);
    let segments = plan_segments(cond, &profile, rows.len());
    let full_final = profile.sigma + 1 >= k;

    // Whatever a column commits to its own rows is reserved up front, so
    // companions only draw on genuinely spare likelihood.
    let mut supply: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for &s in &rows {
        for x in 0..k {
            supply.insert((s, x), cond.p(s, x).clone());
        }
    }
    for seg in &segments {
        for &s in &profile.order[seg.column][seg.round - 1..] {
            let cell = supply.get_mut(&(s, seg.column)).expect("supported row");
            *cell = cell.clone() - seg.length.clone();
            if cell.is_negative() && !cell.is_negligible() {
                return Err(Error::ConstructionFailed { round: seg.round, column: seg.column + 1 });
            }
        }
    }

    let mut mass: BTreeMap<(usize, usize, Subset), T> = BTreeMap::new();
    for seg in &segments {
        assign_segment(seg, &profile, &mut supply, &mut mass)?;
    }

    for (&(s, x), left) in &supply {
        if left.is_negligible() {
            continue;
        }
        if !full_final || left.is_negative() {
            return Err(Error::ConstructionFailed { round: profile.sigma + 1, column: x + 1 });
        }
        add(&mut mass, (s, x, Subset::full(k)), left.clone());
    }

    let mut policy = ObfuscationPolicy::new(k);
    for &s in &rows {
        for x in 0..k {
            let px = cond.p(s, x);
            if px.is_negligible() {
                policy.set(s, x, Subset::full(k), T::one());
            }
        }
    }
    for ((s, x, u), m) in mass {
        let px = cond.p(s, x).clone();
        policy.add(s, x, u, m / px);
    }
    Ok(policy)
}

fn plan_segments<T: Scalar>(cond: &ConditionalMatrix<T>, profile: &ThetaProfile<T>, m: usize) -> Vec<Segment<T>> {
    let k = cond.k();
    let step = |i: usize, c: usize| -> T {
        let hi = cond.p(profile.order[i][c - 1], i).clone();
        if c == 1 {
            hi
        } else {
            hi - cond.p(profile.order[i][c - 2], i).clone()
        }
    };

    let mut segments = Vec::new();
    for c in 1..=profile.sigma {
        for i in 0..k {
            let length = step(i, c);
            if !length.is_negligible() {
                segments.push(Segment { column: i, round: c, length });
            }
        }
    }

    let sigma = profile.sigma;
    if sigma + 1 < k && sigma < m {
        let mut rest = T::one() - profile.lambda[sigma - 1].clone();
        for i in 0..k {
            if rest.is_negligible() {
                break;
            }
            let cap = step(i, sigma + 1);
            let length = if cap < rest { cap } else { rest.clone() };
            if !length.is_negligible() {
                rest = rest - length.clone();
                segments.push(Segment { column: i, round: sigma + 1, length });
            }
        }
    }
    segments
}

fn assign_segment<T: Scalar>(
    seg: &Segment<T>,
    profile: &ThetaProfile<T>,
    supply: &mut BTreeMap<(usize, usize), T>,
    mass: &mut BTreeMap<(usize, usize, Subset), T>,
) -> Result<()> {
    let i = seg.column;
    let k = profile.k;
    let (unforced, forced) = profile.order[i].split_at(seg.round - 1);

    // Per unforced row: consecutive (companion, amount) pieces covering the segment.
    let mut pieces: Vec<Vec<(usize, T)>> = Vec::with_capacity(unforced.len());
    for &s in unforced {
        let mut need = seg.length.clone();
        let mut row = Vec::new();
        while !need.is_negligible() {
            let best = (0..k).filter(|&l| l != i).map(|l| (l, supply[&(s, l)].clone())).fold(
                None::<(usize, T)>,
                |best, (l, v)| match best {
                    Some((_, ref bv)) if *bv >= v => best,
                    _ => Some((l, v)),
                },
            );
            let (l, avail) = match best {
                Some((l, v)) if !v.is_negligible() && v.is_positive() => (l, v),
                _ => return Err(Error::ConstructionFailed { round: seg.round, column: i + 1 }),
            };
            let take = if avail < need { avail } else { need.clone() };
            let cell = supply.get_mut(&(s, l)).expect("supported row");
            *cell = cell.clone() - take.clone();
            need = need - take.clone();
            row.push((l, take));
        }
        pieces.push(row);
    }

    // Common refinement of all rows' piece boundaries.
    let mut cuts: Vec<T> = Vec::new();
    for row in &pieces {
        let mut acc = T::zero();
        for (_, amount) in row {
            acc = acc + amount.clone();
            cuts.push(acc.clone());
        }
    }
    cuts.push(seg.length.clone());
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("comparable"));
    cuts.dedup_by(|a, b| a.approx_eq(b));

    let mut cursor = vec![(0usize, T::zero()); pieces.len()];
    let mut lo = T::zero();
    for hi in cuts {
        let width = hi.clone() - lo.clone();
        if width.is_negligible() {
            continue;
        }
        let mut u = Subset::singleton(i);
        let mut fillers = Vec::with_capacity(pieces.len());
        for (row, (idx, end)) in pieces.iter().zip(cursor.iter_mut()) {
            // advance past pieces that end at or before `lo`
            while *idx < row.len() {
                let piece_end = end.clone() + row[*idx].1.clone();
                if piece_end.at_least(&hi) {
                    break;
                }
                *end = piece_end;
                *idx += 1;
            }
            let l = row[(*idx).min(row.len() - 1)].0;
            u = u.with(l);
            fillers.push(l);
        }
        for &s in forced {
            add(mass, (s, i, u), width.clone());
        }
        for (&s, l) in unforced.iter().zip(fillers) {
            add(mass, (s, l, u), width.clone());
        }
        lo = hi;
    }
    Ok(())
}

fn add<T: Scalar>(mass: &mut BTreeMap<(usize, usize, Subset), T>, key: (usize, usize, Subset), v: T) {
    let e = mass.entry(key).or_insert_with(T::zero);
    *e = e.clone() + v;
}

/// `P(|U| <= i)` for `i = 1..=K` under row s's law (index i-1). For an
/// independent policy this does not depend on s.
pub fn size_cdf_given_s<T: Scalar>(policy: &ObfuscationPolicy<T>, cond: &ConditionalMatrix<T>, s: usize) -> Vec<T> {
    let by_u = policy.u_given_s(cond, s);
    (1..=cond.k()).map(|i| sum(by_u.iter().filter(|(u, _)| u.len() <= i).map(|(_, p)| p.clone()))).collect()
}
