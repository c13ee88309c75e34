//! Rank and fit statistics.

use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientLength { len: a.len() });
    }
    if let Some(index) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            index: index % a.len(),
        });
    }
    Ok(())
}

fn tied_pairs(sorted: impl Iterator<Item = (f64, f64)>, key_x_only: bool) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<(f64, f64)> = None;
    for cur in sorted {
        let same = match prev {
            Some(p) if key_x_only => p.0 == cur.0,
            Some(p) => p == cur,
            None => false,
        };
        if same {
            run += 1;
        } else {
            total += run * (run.saturating_sub(1)) / 2;
            run = 1;
        }
        prev = Some(cur);
    }
    total + run * (run.saturating_sub(1)) / 2
}

/// Sorts `ys` in place, returning the number of strict inversions.
fn merge_count(ys: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = ys.split_at_mut(mid);
    let mut swaps = merge_count(left, &mut buf[..mid]) + merge_count(right, &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            buf[k] = right[j];
            swaps += (left.len() - i) as u64;
            j += 1;
        } else {
            buf[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + left.len() - i].copy_from_slice(&left[i..]);
    k += left.len() - i;
    buf[k..k + right.len() - j].copy_from_slice(&right[j..]);
    ys.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau-b, `O(n log n)`.
///
/// `(C - D) / sqrt((C + D + T_a)(C + D + T_b))`, where `T_a` (`T_b`) counts
/// pairs tied only in `a` (`b`). Errors when either input is constant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as u64;
    // +0.0 so that -0.0 and 0.0 compare as a tie under total ordering.
    let mut pairs: Vec<(f64, f64)> = a.iter().zip(b).map(|(&x, &y)| (x + 0.0, y + 0.0)).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let n0 = n * (n - 1) / 2;
    let ties_a = tied_pairs(pairs.iter().copied(), true);
    let ties_joint = tied_pairs(pairs.iter().copied(), false);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = merge_count(&mut ys, &mut buf);
    let ties_b = tied_pairs(ys.iter().map(|&y| (y, 0.0)), true);

    let denom = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroVariance("kendall tau of a constant vector"));
    }
    let numer = n0 as i128 - ties_a as i128 - ties_b as i128 + ties_joint as i128
        - 2 * swaps as i128;
    Ok(numer as f64 / denom)
}

/// Coefficient of determination of the least-squares line of `target` on `pred`.
///
/// A constant `pred` yields 0 (the fit collapses to the target mean).
pub fn regression_score(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|t| (t - mt).powi(2)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::ZeroVariance("regression score with constant target"));
    }
    let spp: f64 = pred.iter().map(|p| (p - mp).powi(2)).sum();
    let spt: f64 = pred.iter().zip(target).map(|(p, t)| (p - mp) * (t - mt)).sum();
    let slope = if spp > 0.0 { spt / spp } else { 0.0 };
    let intercept = mt - slope * mp;
    let ss_res: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (t - (intercept + slope * p)).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}
