//! Connectionist temporal classification in log space.

use crate::error::{Error, Result};

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Minimum number of frames needed to emit `target`.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Negative log-likelihood of `target` under per-frame log-probabilities,
/// with its gradient with respect to the pre-softmax logits.
///
/// `log_probs` is `T x K`, each row a normalized log distribution.
pub fn ctc_loss(log_probs: &[Vec<f64>], target: &[usize], blank: usize) -> Result<(f64, Vec<Vec<f64>>)> {
    let t_len = log_probs.len();
    if t_len == 0 {
        return Err(Error::Empty("CTC input has no frames".into()));
    }
    let k = log_probs[0].len();
    if blank >= k {
        return Err(Error::Dimension(format!("blank index {blank} outside {k} labels")));
    }
    if let Some(&bad) = target.iter().find(|&&l| l >= k || l == blank) {
        return Err(Error::Dimension(format!("target label {bad} is blank or out of range")));
    }
    let needed = min_frames(target);
    if needed > t_len {
        return Err(Error::TargetTooLong { needed, frames: t_len });
    }

    // extended label sequence: blank, l1, blank, l2, ..., blank
    let s_len = 2 * target.len() + 1;
    let ext = |s: usize| if s % 2 == 0 { blank } else { target[s / 2] };
    let can_skip = |s: usize| s >= 2 && s % 2 == 1 && ext(s) != ext(s - 2);
    let ninf = f64::NEG_INFINITY;

    let mut alpha = vec![vec![ninf; s_len]; t_len];
    alpha[0][0] = log_probs[0][blank];
    if s_len > 1 {
        alpha[0][1] = log_probs[0][ext(1)];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[t - 1][s];
            if s >= 1 {
                a = log_add(a, alpha[t - 1][s - 1]);
            }
            if can_skip(s) {
                a = log_add(a, alpha[t - 1][s - 2]);
            }
            if a != ninf {
                alpha[t][s] = a + log_probs[t][ext(s)];
            }
        }
    }

    let mut beta = vec![vec![ninf; s_len]; t_len];
    beta[t_len - 1][s_len - 1] = log_probs[t_len - 1][blank];
    if s_len > 1 {
        beta[t_len - 1][s_len - 2] = log_probs[t_len - 1][ext(s_len - 2)];
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[t + 1][s];
            if s + 1 < s_len {
                b = log_add(b, beta[t + 1][s + 1]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = log_add(b, beta[t + 1][s + 2]);
            }
            if b != ninf {
                beta[t][s] = b + log_probs[t][ext(s)];
            }
        }
    }

    let mut log_p = alpha[t_len - 1][s_len - 1];
    if s_len > 1 {
        log_p = log_add(log_p, alpha[t_len - 1][s_len - 2]);
    }
    if !log_p.is_finite() {
        return Err(Error::NonFinite("CTC likelihood underflowed".into()));
    }

    // alpha and beta both include the emission at t, so the occupancy of
    // (t, s) is alpha + beta - log y; the logit gradient is y - occupancy / P.
    let grad = (0..t_len)
        .map(|t| {
            let mut occ = vec![ninf; k];
            for s in 0..s_len {
                let v = alpha[t][s] + beta[t][s];
                if v != ninf {
                    occ[ext(s)] = log_add(occ[ext(s)], v);
                }
            }
            (0..k)
                .map(|j| {
                    let y = log_probs[t][j].exp();
                    if occ[j] == ninf {
                        y
                    } else {
                        y - (occ[j] - log_probs[t][j] - log_p).exp()
                    }
                })
                .collect()
        })
        .collect();
    Ok((-log_p, grad))
}

/// Greedy best-path decoding: argmax per frame, merge repeats, drop blanks.
pub fn best_path(probs: &[Vec<f64>], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for row in probs {
        let arg = argmax(row);
        if Some(arg) != prev && arg != blank {
            out.push(arg);
        }
        prev = Some(arg);
    }
    out
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
