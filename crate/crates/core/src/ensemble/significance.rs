use itertools::Itertools;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest pooled sample size for which the exact null distribution is
/// enumerated.
pub const EXACT_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// `#{x_i > y_j} + 0.5 * #{x_i == y_j}`
    pub u: f64,
    pub p_two_sided: f64,
    pub method: UMethod,
}

fn u_statistic(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for &a in x {
        for &b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided Mann-Whitney U test. Small tie-free samples use the exact
/// null distribution; everything else uses the normal approximation.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("Mann-Whitney U needs two non-empty samples"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Mann-Whitney U sample".into()));
    }
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let has_ties = pooled.windows(2).any(|w| w[0] == w[1]);
    if pooled.len() <= EXACT_LIMIT && !has_ties {
        mann_whitney_exact(x, y)
    } else {
        mann_whitney_normal(x, y)
    }
}

/// Exact p-value by enumerating every assignment of `|x|` of the pooled
/// ranks to the first sample. Requires distinct values.
pub fn mann_whitney_exact(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    let (n, m) = (x.len(), y.len());
    if n + m > EXACT_LIMIT + 8 {
        return Err(Error::invalid(format!("exact enumeration over {} values is too large", n + m)));
    }
    let u = u_statistic(x, y);
    // without ties U_x = rank sum of x - n(n+1)/2, ranks 1..=n+m
    let offset = n * (n + 1) / 2;
    let target = u as usize;
    let (mut below, mut above, mut total) = (0u64, 0u64, 0u64);
    for ranks in (1..=n + m).combinations(n) {
        let uu = ranks.iter().sum::<usize>() - offset;
        total += 1;
        below += u64::from(uu <= target);
        above += u64::from(uu >= target);
    }
    let tail = below.min(above);
    let p = ((2 * tail) as f64 / total as f64).min(1.0);
    Ok(MannWhitney {
        u,
        p_two_sided: p,
        method: UMethod::Exact,
    })
}

/// Normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney_normal(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    let (n, m) = (x.len() as f64, y.len() as f64);
    let total = n + m;
    let u = u_statistic(x, y);
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let tie_term: f64 = pooled
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();
    let var = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)).max(1.0));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - n * m / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z)).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_two_sided: p,
        method: UMethod::Normal,
    })
}

/// Star annotation for a p-value.
pub fn stars(p: f64) -> &'static str {
    if p <= 1e-4 {
        "****"
    } else if p <= 1e-3 {
        "***"
    } else if p <= 1e-2 {
        "**"
    } else if p <= 5e-2 {
        "*"
    } else {
        "ns"
    }
}
