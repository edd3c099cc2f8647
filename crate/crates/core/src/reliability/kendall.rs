use std::collections::HashMap;

use crate::error::{Error, Result};

/// Kendall's τ between two rankings of the same items:
/// `(concordant - discordant) / (n (n - 1) / 2)`.
///
/// Discordant pairs are counted as inversions with a merge sort.
pub fn kendall_tau<S: AsRef<str>>(first: &[S], second: &[S]) -> Result<f64> {
    let n = first.len();
    if n < 2 {
        return Err(Error::Validation("kendall tau needs at least two items".into()));
    }
    if second.len() != n {
        return Err(Error::Validation(format!(
            "rankings differ in length ({n} vs {})",
            second.len()
        )));
    }
    let position: HashMap<&str, usize> = second.iter().enumerate().map(|(i, s)| (s.as_ref(), i)).collect();
    if position.len() != n {
        return Err(Error::Validation("ranking contains duplicates".into()));
    }
    let mut seq = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::with_capacity(n);
    for s in first {
        let s = s.as_ref();
        let p = *position
            .get(s)
            .ok_or_else(|| Error::Validation(format!("{s} is missing from the second ranking")))?;
        if !seen.insert(p) {
            return Err(Error::Validation("ranking contains duplicates".into()));
        }
        seq.push(p);
    }
    let discordant = count_inversions(&mut seq);
    let pairs = n * (n - 1) / 2;
    let concordant = pairs - discordant;
    Ok((concordant as f64 - discordant as f64) / pairs as f64)
}

fn count_inversions(v: &mut [usize]) -> usize {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            inv += mid - i;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    inv
}

/// Order items by descending score, breaking ties by id. Also returns the
/// number of tied pairs.
pub fn rank_by_score<'a, I>(scores: I) -> (Vec<String>, usize)
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut v: Vec<(&str, f64)> = scores.into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut ties = 0;
    let mut run = 1usize;
    for w in v.windows(2) {
        if w[0].1 == w[1].1 {
            run += 1;
        } else {
            ties += run * (run - 1) / 2;
            run = 1;
        }
    }
    ties += run * (run - 1) / 2;
    (v.into_iter().map(|(s, _)| s.to_string()).collect(), ties)
}
