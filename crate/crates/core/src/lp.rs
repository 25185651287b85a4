//! Dense tableau simplex for small zero-sum games.
//!
//! The only linear programs this crate needs are of the form
//! `min_{t ∈ Δ} max_x (A t)_x`, which decide whether some weight vector puts
//! every barycenter sum at or below zero.

const PIVOT_EPS: f64 = 1e-12;

/// maximize `1ᵀu` s.t. `A u ≤ 1`, `u ≥ 0`, for `A` with strictly positive
/// entries (so the feasible set is bounded and the origin is a vertex).
/// Dantzig pricing, switching to Bland's rule during runs of degenerate
/// pivots; returns `u`.
fn max_sum_packing(a: &[Vec<f64>], cols: usize) -> Vec<f64> {
    let rows = a.len();
    let width = cols + rows + 1;
    let rhs = width - 1;
    // Tableau rows: constraints, then the objective row (reduced costs).
    let mut tab = vec![vec![0.0; width]; rows + 1];
    for (r, row) in a.iter().enumerate() {
        tab[r][..cols].copy_from_slice(row);
        tab[r][cols + r] = 1.0;
        tab[r][rhs] = 1.0;
    }
    for c in 0..cols {
        tab[rows][c] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let max_pivots = 10_000 + 200 * (rows + cols);
    let mut degenerate_run = 0;

    for _ in 0..max_pivots {
        let bland = degenerate_run > rows + cols;
        let enter = if bland {
            (0..cols + rows).find(|&c| tab[rows][c] < -PIVOT_EPS)
        } else {
            (0..cols + rows)
                .filter(|&c| tab[rows][c] < -PIVOT_EPS)
                .min_by(|&x, &y| tab[rows][x].total_cmp(&tab[rows][y]))
        };
        let Some(enter) = enter else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let coef = tab[r][enter];
            if coef <= PIVOT_EPS {
                continue;
            }
            let ratio = tab[r][rhs] / coef;
            leave = match leave {
                None => Some((r, ratio)),
                Some((lr, lratio)) => {
                    let better = if ratio < lratio - PIVOT_EPS {
                        true
                    } else if ratio <= lratio + PIVOT_EPS {
                        if bland {
                            basis[r] < basis[lr]
                        } else {
                            coef > tab[lr][enter]
                        }
                    } else {
                        false
                    };
                    if better {
                        Some((r, ratio))
                    } else {
                        Some((lr, lratio))
                    }
                }
            };
        }
        let Some((pr, ratio)) = leave else {
            // Unbounded cannot happen for positive A.
            break;
        };
        if ratio <= PIVOT_EPS {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        let piv = tab[pr][enter];
        for v in tab[pr].iter_mut() {
            *v /= piv;
        }
        let pivot_row = tab[pr].clone();
        for (r, row) in tab.iter_mut().enumerate() {
            if r == pr {
                continue;
            }
            let f = row[enter];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[enter] = 0.0;
                if r < rows && row[rhs] < 0.0 {
                    row[rhs] = 0.0;
                }
            }
        }
        basis[pr] = enter;
    }

    let mut u = vec![0.0; cols];
    for (r, &b) in basis.iter().enumerate() {
        if b < cols {
            u[b] = tab[r][rhs].max(0.0);
        }
    }
    u
}

/// Solution of `min_{t ∈ Δ} max_x (A t)_x`.
#[derive(Debug, Clone)]
pub struct GameSolution {
    pub value: f64,
    pub weights: Vec<f64>,
}

/// Solves the column player's side of the matrix game `A` (rows = pure
/// strategies of the maximizer). The returned `value` is recomputed from the
/// returned weights, so it is exact for them up to rounding.
pub fn solve_min_max_game(a: &[Vec<f64>]) -> GameSolution {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    assert!(rows > 0 && cols > 0, "empty game");
    let lo = a.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    // Shift so every entry is at least 1.
    let shift = 1.0 - lo;
    let shifted: Vec<Vec<f64>> =
        a.iter().map(|row| row.iter().map(|v| v + shift).collect()).collect();
    let u = max_sum_packing(&shifted, cols);
    let total: f64 = u.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        u.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / cols as f64; cols]
    };
    let value = a
        .iter()
        .map(|row| row.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    GameSolution { value, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies() {
        let g = solve_min_max_game(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(g.value.abs() < 1e-12);
        assert!((g.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dominant_column() {
        // Column 1 is better for the minimizer against every row.
        let g = solve_min_max_game(&[vec![3.0, 1.0], vec![2.0, 0.0]]);
        assert!((g.value - 1.0).abs() < 1e-12);
        assert!((g.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_game() {
        let g = solve_min_max_game(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((g.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rock_paper_scissors() {
        let a = vec![vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]];
        let g = solve_min_max_game(&a);
        assert!(g.value.abs() < 1e-12);
        for w in g.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
