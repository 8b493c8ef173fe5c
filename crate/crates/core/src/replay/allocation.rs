//! Per-table batch allocation.

/// How a batch is split across tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    /// Deterministic largest-remainder split of the renormalized etas.
    #[default]
    LargestRemainder,
    /// Every item independently picks its table with probability eta.
    Multinomial,
}

/// Renormalizes `etas` over the eligible tables. Ineligible or zero-eta tables
/// get zero mass. Returns `None` when no eligible table carries mass.
pub fn renormalize(etas: &[f64], eligible: &[bool]) -> Option<Vec<f64>> {
    debug_assert_eq!(etas.len(), eligible.len());
    let mass: f64 = etas
        .iter()
        .zip(eligible)
        .filter(|(e, ok)| **ok && **e > 0.0)
        .map(|(e, _)| *e)
        .sum();
    if mass <= 0.0 {
        return None;
    }
    Some(
        etas.iter()
            .zip(eligible)
            .map(|(e, ok)| if *ok && *e > 0.0 { e / mass } else { 0.0 })
            .collect(),
    )
}

/// Largest-remainder split of `batch_size` items according to `weights`
/// (already renormalized). Ties on the fractional part go to the lower index.
///
/// When `batch_size` is at least the number of tables with positive weight,
/// every such table receives at least one item; the item is taken from the
/// table holding the most (lowest index on ties).
pub fn largest_remainder(weights: &[f64], batch_size: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * batch_size as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let leftover = batch_size.saturating_sub(assigned);
    for &i in order.iter().cycle().take(leftover) {
        counts[i] += 1;
    }

    let active: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if batch_size >= active.len() {
        for &i in &active {
            if counts[i] == 0 {
                let donor = active
                    .iter()
                    .copied()
                    .filter(|&j| counts[j] > 1)
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)));
                if let Some(d) = donor {
                    counts[d] -= 1;
                    counts[i] += 1;
                }
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_split_of_32() {
        let w = renormalize(&[0.5, 0.2, 0.3], &[true, true, true]).unwrap();
        assert_eq!(largest_remainder(&w, 32), vec![16, 6, 10]);
    }

    #[test]
    fn ineligible_mass_redistributed() {
        let w = renormalize(&[0.5, 0.2, 0.3], &[true, false, true]).unwrap();
        assert!((w[0] - 0.625).abs() < 1e-12 && w[1] == 0.0 && (w[2] - 0.375).abs() < 1e-12);
        let c = largest_remainder(&w, 32);
        assert_eq!(c, vec![20, 0, 12]);
        assert_eq!(c.iter().sum::<usize>(), 32);
    }

    #[test]
    fn tiny_etas_still_get_one_item() {
        let w = renormalize(&[0.97, 0.01, 0.02], &[true, true, true]).unwrap();
        let c = largest_remainder(&w, 8);
        assert_eq!(c.iter().sum::<usize>(), 8);
        assert!(c.iter().all(|&n| n >= 1));
    }

    #[test]
    fn remainder_ties_prefer_lower_index() {
        let c = largest_remainder(&[0.5, 0.5], 3);
        assert_eq!(c, vec![2, 1]);
    }

    #[test]
    fn nothing_eligible() {
        assert!(renormalize(&[0.5, 0.5], &[false, false]).is_none());
    }
}
