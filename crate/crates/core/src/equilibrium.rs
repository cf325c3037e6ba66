//! Bimatrix stage-game solving.
//!
//! [`lemke_howson`] runs complementary pivoting on the labeled
//! best-response polytopes with a lexicographic ratio test, after shifting
//! both payoff matrices to be strictly positive (which preserves the
//! equilibrium set). [`support_enumeration`] independently enumerates all
//! equal-size support pairs and solves the indifference systems; it serves
//! as the oracle the pivoting solver is tested against, and as the fallback
//! when pivoting exceeds its budget on pathological degenerate inputs.

use thiserror::Error;

const EPS_PIVOT: f64 = 1e-9;
const EPS_LEX: f64 = 1e-12;
const EPS_FEAS: f64 = 1e-9;
const EPS_DEDUP: f64 = 1e-7;

/// A two-player game in normal form: `a[i][j]` is the row player's payoff
/// and `b[i][j]` the column player's when row `i` meets column `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct StageGame {
    m: usize,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Error, Debug, PartialEq)]
pub enum GameError {
    #[error("payoff matrices must be nonempty and of equal dimensions")]
    BadShape,
    #[error("payoff entries must be finite")]
    NonFinite,
}

#[derive(Error, Debug, PartialEq)]
pub enum SolveError {
    #[error("pivoting exceeded its budget of {budget} pivots")]
    PivotBudget { budget: usize },
    #[error("pivoting failed: {0}")]
    NumericalFailure(String),
    #[error("support enumeration limited to {limit}x{limit} games, got {m}x{n}")]
    DimensionGuard { m: usize, n: usize, limit: usize },
    #[error("dropped label {label} out of range 1..={max}")]
    BadLabel { label: usize, max: usize },
}

impl StageGame {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<StageGame, GameError> {
        let m = a.len();
        if m == 0 || a.len() != b.len() {
            return Err(GameError::BadShape);
        }
        let n = a[0].len();
        if n == 0 || a.iter().any(|r| r.len() != n) || b.iter().any(|r| r.len() != n) {
            return Err(GameError::BadShape);
        }
        let a: Vec<f64> = a.into_iter().flatten().collect();
        let b: Vec<f64> = b.into_iter().flatten().collect();
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(GameError::NonFinite);
        }
        Ok(StageGame { m, n, a, b })
    }

    /// Build from flat row-major payoff slices.
    pub fn from_flat(m: usize, n: usize, a: &[f64], b: &[f64]) -> Result<StageGame, GameError> {
        if m == 0 || n == 0 || a.len() != m * n || b.len() != m * n {
            return Err(GameError::BadShape);
        }
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(GameError::NonFinite);
        }
        Ok(StageGame { m, n, a: a.to_vec(), b: b.to_vec() })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    pub fn a_flat(&self) -> &[f64] {
        &self.a
    }

    pub fn b_flat(&self) -> &[f64] {
        &self.b
    }
}

/// A mixed-strategy pair. Entries are nonnegative and each vector sums to
/// one (within 1e-12 after normalization).
#[derive(Clone, Debug, PartialEq)]
pub struct NashProfile {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl NashProfile {
    pub fn pure(m: usize, i: usize, n: usize, j: usize) -> NashProfile {
        let mut x = vec![0.0; m];
        let mut y = vec![0.0; n];
        x[i] = 1.0;
        y[j] = 1.0;
        NashProfile { x, y }
    }

    pub fn uniform(m: usize, n: usize) -> NashProfile {
        NashProfile { x: vec![1.0 / m as f64; m], y: vec![1.0 / n as f64; n] }
    }

    /// Index of the row player's most likely action, lowest index on ties.
    pub fn argmax_row(&self) -> usize {
        argmax(&self.x)
    }

    /// Index of the column player's most likely action, lowest index on ties.
    pub fn argmax_col(&self) -> usize {
        argmax(&self.y)
    }

    fn close_to(&self, other: &NashProfile, tol: f64) -> bool {
        self.x.len() == other.x.len()
            && self.y.len() == other.y.len()
            && self.x.iter().zip(&other.x).all(|(a, b)| (a - b).abs() <= tol)
            && self.y.iter().zip(&other.y).all(|(a, b)| (a - b).abs() <= tol)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &val) in v.iter().enumerate().skip(1) {
        if val > v[best] {
            best = i;
        }
    }
    best
}

/// Expected payoff `x' M y` of a matrix under a strategy profile.
pub fn nash_value(m_rows: usize, n_cols: usize, mat: &[f64], p: &NashProfile) -> f64 {
    debug_assert_eq!(mat.len(), m_rows * n_cols);
    debug_assert_eq!(p.x.len(), m_rows);
    debug_assert_eq!(p.y.len(), n_cols);
    let mut total = 0.0;
    for i in 0..m_rows {
        if p.x[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n_cols {
            row += mat[i * n_cols + j] * p.y[j];
        }
        total += p.x[i] * row;
    }
    total
}

/// True iff neither player can gain more than `eps` by a unilateral
/// deviation: `x'Ay >= max_i (Ay)_i - eps` and `x'By >= max_j (x'B)_j - eps`.
pub fn is_epsilon_nash(g: &StageGame, p: &NashProfile, eps: f64) -> bool {
    let va = nash_value(g.m, g.n, &g.a, p);
    let vb = nash_value(g.m, g.n, &g.b, p);
    let mut best_row = f64::NEG_INFINITY;
    for i in 0..g.m {
        let mut payoff = 0.0;
        for j in 0..g.n {
            payoff += g.a(i, j) * p.y[j];
        }
        best_row = best_row.max(payoff);
    }
    let mut best_col = f64::NEG_INFINITY;
    for j in 0..g.n {
        let mut payoff = 0.0;
        for i in 0..g.m {
            payoff += g.b(i, j) * p.x[i];
        }
        best_col = best_col.max(payoff);
    }
    va >= best_row - eps && vb >= best_col - eps
}

/// How a stage-game equilibrium relates to the structure the convergence
/// argument needs: a joint maximum of both payoffs, a saddle point, or
/// neither.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PointClass {
    GlobalOptimum,
    SaddlePoint,
    Neither,
}

/// Classify an equilibrium profile. A global optimum attains the maximum
/// entry of both payoff matrices; a saddle point is an equilibrium where an
/// opponent's deviation never lowers the other player's payoff. Deviations
/// are checked over pure strategies only, which suffices because expected
/// payoff is bilinear.
pub fn classify_point(g: &StageGame, p: &NashProfile) -> PointClass {
    let tol = 1e-9;
    let va = nash_value(g.m, g.n, &g.a, p);
    let vb = nash_value(g.m, g.n, &g.b, p);

    let max_a = g.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_b = g.b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if va >= max_a - tol && vb >= max_b - tol {
        return PointClass::GlobalOptimum;
    }

    // Saddle: the profile is an equilibrium, and for each player the
    // opponent's unilateral deviations do not decrease that player's payoff.
    for i in 0..g.m {
        let mut ay = 0.0;
        let mut by = 0.0;
        for j in 0..g.n {
            ay += g.a(i, j) * p.y[j];
            by += g.b(i, j) * p.y[j];
        }
        if ay > va + tol {
            return PointClass::Neither; // row player can gain: not Nash
        }
        if by < vb - tol {
            return PointClass::Neither; // row deviation hurts column player
        }
    }
    for j in 0..g.n {
        let mut xa = 0.0;
        let mut xb = 0.0;
        for i in 0..g.m {
            xa += g.a(i, j) * p.x[i];
            xb += g.b(i, j) * p.x[i];
        }
        if xb > vb + tol {
            return PointClass::Neither; // column player can gain: not Nash
        }
        if xa < va - tol {
            return PointClass::Neither; // column deviation hurts row player
        }
    }
    PointClass::SaddlePoint
}

// ── Lemke-Howson ─────────────────────────────────────────────────────────

// One best-response polytope in tableau form. Rows are the polytope's
// constraints; columns are [rhs | one column per variable]. The slack
// variables form the initial basis, and their columns carry the basis
// inverse for the lexicographic ratio test.
struct PolytopeTableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_own: usize, // strategy variables come first, slacks after
}

impl PolytopeTableau {
    // constraints: M z + s = 1, with M (k rows, n_own cols) strictly positive
    fn new(k: usize, n_own: usize, coeff: impl Fn(usize, usize) -> f64) -> PolytopeTableau {
        let width = 1 + n_own + k;
        let mut rows = Vec::with_capacity(k);
        let mut basis = Vec::with_capacity(k);
        for r in 0..k {
            let mut row = vec![0.0; width];
            row[0] = 1.0;
            for c in 0..n_own {
                row[1 + c] = coeff(r, c);
            }
            row[1 + n_own + r] = 1.0;
            rows.push(row);
            basis.push(n_own + r);
        }
        PolytopeTableau { rows, basis, n_own }
    }

    // Pivot the entering variable in; returns the leaving variable. The row
    // is chosen by a lexicographic minimum ratio over [rhs | slack columns],
    // which keeps degenerate pivoting from cycling. Slack columns are
    // compared in reverse index order so that fully tied ratios resolve to
    // the lowest-indexed row, and ultimately to the lowest-indexed action.
    fn pivot(&mut self, entering: usize) -> Result<usize, SolveError> {
        let col = 1 + entering;
        let slack_cols: Vec<usize> =
            (0..self.rows.len()).map(|r| 1 + self.n_own + r).rev().collect();
        let mut best: Option<usize> = None;
        for r in 0..self.rows.len() {
            let coeff = self.rows[r][col];
            if coeff <= EPS_PIVOT {
                continue;
            }
            best = Some(match best {
                None => r,
                Some(cur) => {
                    let cur_coeff = self.rows[cur][col];
                    let mut choice = cur;
                    // compare (row_r / coeff) against (row_cur / cur_coeff)
                    // over rhs then slack columns
                    for &c in std::iter::once(&0).chain(&slack_cols) {
                        let lhs = self.rows[r][c] / coeff;
                        let rhs = self.rows[cur][c] / cur_coeff;
                        if (lhs - rhs).abs() <= EPS_LEX {
                            continue;
                        }
                        if lhs < rhs {
                            choice = r;
                        }
                        break;
                    }
                    choice
                }
            });
        }
        let r = best.ok_or_else(|| {
            SolveError::NumericalFailure("entering column has no positive coefficient".into())
        })?;
        let pivot = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = self.rows[r].clone();
        for (rr, row) in self.rows.iter_mut().enumerate() {
            if rr == r {
                continue;
            }
            let factor = row[col];
            if factor != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
            }
        }
        let leaving = self.basis[r];
        self.basis[r] = entering;
        Ok(leaving)
    }

    // Current value of a strategy variable (zero when nonbasic).
    fn value(&self, var: usize) -> f64 {
        for (r, &b) in self.basis.iter().enumerate() {
            if b == var {
                return self.rows[r][0];
            }
        }
        0.0
    }
}

fn pivot_budget(m: usize, n: usize) -> usize {
    // 10 * C(m+n, m), capped to keep the guard meaningful on larger games
    let mut binom: f64 = 1.0;
    for i in 0..m.min(n) {
        binom *= (m + n - i) as f64 / (i + 1) as f64;
    }
    (10.0 * binom).min(1e7) as usize
}

/// Compute one Nash equilibrium by Lemke-Howson complementary pivoting,
/// starting by dropping the given label (1-based; labels `1..=m` are row
/// strategies, `m+1..=m+n` column strategies). Both payoff matrices are
/// first shifted by the same constant to be strictly positive, which leaves
/// the equilibrium set unchanged. Fails only if the pivot budget is
/// exhausted on a degenerate pathological input; callers then fall back to
/// [`support_enumeration`].
pub fn lemke_howson(g: &StageGame, dropped_label: usize) -> Result<NashProfile, SolveError> {
    let (m, n) = (g.m, g.n);
    if dropped_label == 0 || dropped_label > m + n {
        return Err(SolveError::BadLabel { label: dropped_label, max: m + n });
    }
    let k0 = dropped_label - 1; // 0-based: 0..m rows, m..m+n columns

    let min_entry = g.a.iter().chain(&g.b).cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min_entry;

    // P: B' x + s = 1 (n constraints over the m row-strategy variables)
    let mut p_tab = PolytopeTableau::new(n, m, |r, c| g.b(c, r) + shift);
    // Q: A y + r = 1 (m constraints over the n column-strategy variables)
    let mut q_tab = PolytopeTableau::new(m, n, |r, c| g.a(r, c) + shift);

    // Labels: row label i is carried by x_i in P and by slack r_i in Q;
    // column label m+j by slack s_j in P and by y_j in Q.
    enum Side {
        P,
        Q,
    }
    let mut entering = if k0 < m { (Side::P, k0) } else { (Side::Q, k0 - m) };

    let budget = pivot_budget(m, n);
    for _ in 0..budget {
        let freed_label = match entering {
            (Side::P, var) => {
                let leaving = p_tab.pivot(var)?;
                // leaving var in P: x_i (label i) or s_j (label m+j)
                if leaving < m {
                    leaving
                } else {
                    m + (leaving - m)
                }
            }
            (Side::Q, var) => {
                let leaving = q_tab.pivot(var)?;
                // leaving var in Q: y_j (label m+j) or r_i (label i)
                if leaving < n {
                    m + leaving
                } else {
                    leaving - n
                }
            }
        };
        if freed_label == k0 {
            return extract_profile(&p_tab, &q_tab, m, n);
        }
        // Enter the variable carrying the duplicate label on the other side.
        entering = if freed_label < m {
            match entering {
                (Side::P, _) => (Side::Q, n + freed_label), // r_i
                (Side::Q, _) => (Side::P, freed_label),     // x_i
            }
        } else {
            match entering {
                (Side::P, _) => (Side::Q, freed_label - m),     // y_j
                (Side::Q, _) => (Side::P, m + (freed_label - m)), // s_j
            }
        };
    }
    Err(SolveError::PivotBudget { budget })
}

fn extract_profile(
    p_tab: &PolytopeTableau,
    q_tab: &PolytopeTableau,
    m: usize,
    n: usize,
) -> Result<NashProfile, SolveError> {
    let mut x: Vec<f64> = (0..m).map(|i| p_tab.value(i).max(0.0)).collect();
    let mut y: Vec<f64> = (0..n).map(|j| q_tab.value(j).max(0.0)).collect();
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    if sx <= EPS_PIVOT || sy <= EPS_PIVOT {
        return Err(SolveError::NumericalFailure(
            "terminated at the artificial equilibrium".into(),
        ));
    }
    for v in &mut x {
        *v /= sx;
    }
    for v in &mut y {
        *v /= sy;
    }
    Ok(NashProfile { x, y })
}

// ── Support enumeration ──────────────────────────────────────────────────

/// Largest dimension accepted by [`support_enumeration`].
pub const SUPPORT_ENUM_LIMIT: usize = 6;

/// Enumerate all equal-size support pairs, solve the indifference systems,
/// and keep the feasible solutions. On nondegenerate games this yields all
/// equilibria (they are finitely many and have equal-size supports).
pub fn support_enumeration(g: &StageGame) -> Result<Vec<NashProfile>, SolveError> {
    let (m, n) = (g.m, g.n);
    if m > SUPPORT_ENUM_LIMIT || n > SUPPORT_ENUM_LIMIT {
        return Err(SolveError::DimensionGuard { m, n, limit: SUPPORT_ENUM_LIMIT });
    }
    let mut found: Vec<NashProfile> = Vec::new();
    for k in 1..=m.min(n) {
        for rows in combinations(m, k) {
            for cols in combinations(n, k) {
                if let Some(p) = solve_support(g, &rows, &cols) {
                    if !found.iter().any(|q| q.close_to(&p, EPS_DEDUP)) {
                        found.push(p);
                    }
                }
            }
        }
    }
    Ok(found)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

// Solve the indifference system for a support pair and verify feasibility.
fn solve_support(g: &StageGame, rows: &[usize], cols: &[usize]) -> Option<NashProfile> {
    let k = rows.len();

    // y on `cols` making the row player indifferent across `rows`:
    //   sum_j A[i][j] y_j - u = 0 for i in rows,  sum_j y_j = 1
    let mut sys = vec![vec![0.0; k + 2]; k + 1];
    for (e, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            sys[e][c] = g.a(i, j);
        }
        sys[e][k] = -1.0; // -u
        sys[e][k + 1] = 0.0;
    }
    for c in 0..k {
        sys[k][c] = 1.0;
    }
    sys[k][k + 1] = 1.0;
    let sol_y = gauss_solve(&mut sys)?;
    let (y_support, u) = (&sol_y[..k], sol_y[k]);

    // x on `rows` making the column player indifferent across `cols`:
    //   sum_i B[i][j] x_i - w = 0 for j in cols,  sum_i x_i = 1
    let mut sys = vec![vec![0.0; k + 2]; k + 1];
    for (e, &j) in cols.iter().enumerate() {
        for (r, &i) in rows.iter().enumerate() {
            sys[e][r] = g.b(i, j);
        }
        sys[e][k] = -1.0; // -w
        sys[e][k + 1] = 0.0;
    }
    for r in 0..k {
        sys[k][r] = 1.0;
    }
    sys[k][k + 1] = 1.0;
    let sol_x = gauss_solve(&mut sys)?;
    let (x_support, w) = (&sol_x[..k], sol_x[k]);

    if y_support.iter().any(|&v| v < -EPS_FEAS) || x_support.iter().any(|&v| v < -EPS_FEAS) {
        return None;
    }

    let mut x = vec![0.0; g.m];
    let mut y = vec![0.0; g.n];
    for (r, &i) in rows.iter().enumerate() {
        x[i] = x_support[r].max(0.0);
    }
    for (c, &j) in cols.iter().enumerate() {
        y[j] = y_support[c].max(0.0);
    }
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    for v in &mut x {
        *v /= sx;
    }
    for v in &mut y {
        *v /= sy;
    }

    // Off-support strategies must not improve on the support payoff.
    for i in 0..g.m {
        if rows.contains(&i) {
            continue;
        }
        let payoff: f64 = (0..g.n).map(|j| g.a(i, j) * y[j]).sum();
        if payoff > u + EPS_FEAS {
            return None;
        }
    }
    for j in 0..g.n {
        if cols.contains(&j) {
            continue;
        }
        let payoff: f64 = (0..g.m).map(|i| g.b(i, j) * x[i]).sum();
        if payoff > w + EPS_FEAS {
            return None;
        }
    }
    Some(NashProfile { x, y })
}

// Gaussian elimination with partial pivoting on an augmented matrix
// (last column is the rhs). Returns None when the system is singular.
fn gauss_solve(aug: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = aug.len();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&a, &b| {
            aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap()
        })?;
        if aug[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        aug.swap(col, pivot_row);
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = aug[r][col] / aug[col][col];
            if factor != 0.0 {
                let (pivot, row) = if r < col {
                    let (lo, hi) = aug.split_at_mut(col);
                    (&hi[0], &mut lo[r])
                } else {
                    let (lo, hi) = aug.split_at_mut(r);
                    (&lo[col], &mut hi[0])
                };
                for c in col..n + 1 {
                    row[c] -= factor * pivot[c];
                }
            }
        }
    }
    Some((0..n).map(|i| aug[i][n] / aug[i][i]).collect())
}

/// Total stage-game solver used by the learner: Lemke-Howson dropping label
/// 1 for determinism, falling back to the lexicographically smallest
/// support-enumeration equilibrium on pivot-budget exhaustion.
pub fn solve(g: &StageGame) -> NashProfile {
    match lemke_howson(g, 1) {
        Ok(p) => p,
        Err(_) => {
            let mut all = support_enumeration(g).unwrap_or_default();
            all.sort_by(|a, b| {
                a.x.iter()
                    .chain(&a.y)
                    .partial_cmp(b.x.iter().chain(&b.y))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            all.into_iter().next().unwrap_or_else(|| NashProfile::uniform(g.m, g.n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn matching_pennies() -> StageGame {
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let b = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        StageGame::new(a, b).unwrap()
    }

    fn battle_of_sexes() -> StageGame {
        StageGame::new(
            vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        )
        .unwrap()
    }

    fn assert_profile(p: &NashProfile, x: &[f64], y: &[f64], tol: f64) {
        assert_eq!(p.x.len(), x.len());
        assert_eq!(p.y.len(), y.len());
        for (got, want) in p.x.iter().zip(x).chain(p.y.iter().zip(y)) {
            assert_abs_diff_eq!(got, want, epsilon = tol);
        }
    }

    #[test]
    fn lemke_howson_matching_pennies() {
        let g = matching_pennies();
        let p = lemke_howson(&g, 1).unwrap();
        assert_profile(&p, &[0.5, 0.5], &[0.5, 0.5], 1e-9);
    }

    #[test]
    fn lemke_howson_prisoners_dilemma() {
        // defect/defect is the unique equilibrium; support enumeration agrees
        let a = vec![vec![3.0, 0.0], vec![5.0, 1.0]];
        let b = vec![vec![3.0, 5.0], vec![0.0, 1.0]];
        let g = StageGame::new(a, b).unwrap();
        let p = lemke_howson(&g, 1).unwrap();
        assert_profile(&p, &[0.0, 1.0], &[0.0, 1.0], 1e-9);
        let all = support_enumeration(&g).unwrap();
        assert_eq!(all.len(), 1);
        assert_profile(&all[0], &[0.0, 1.0], &[0.0, 1.0], 1e-9);
    }

    #[test]
    fn lemke_howson_one_by_one() {
        let g = StageGame::new(vec![vec![7.0]], vec![vec![-3.0]]).unwrap();
        let p = lemke_howson(&g, 1).unwrap();
        assert_profile(&p, &[1.0], &[1.0], 1e-12);
        let p = lemke_howson(&g, 2).unwrap();
        assert_profile(&p, &[1.0], &[1.0], 1e-12);
    }

    #[test]
    fn lemke_howson_rejects_bad_label() {
        let g = matching_pennies();
        assert!(matches!(lemke_howson(&g, 0), Err(SolveError::BadLabel { .. })));
        assert!(matches!(lemke_howson(&g, 5), Err(SolveError::BadLabel { .. })));
    }

    #[test]
    fn support_enumeration_matching_pennies() {
        let all = support_enumeration(&matching_pennies()).unwrap();
        assert_eq!(all.len(), 1);
        assert_profile(&all[0], &[0.5, 0.5], &[0.5, 0.5], 1e-9);
    }

    #[test]
    fn support_enumeration_battle_of_sexes() {
        // two pure equilibria plus the mixed one at x=(2/3,1/3), y=(1/3,2/3)
        let all = support_enumeration(&battle_of_sexes()).unwrap();
        assert_eq!(all.len(), 3);
        let mixed = all
            .iter()
            .find(|p| p.x.iter().all(|&v| v > 0.01))
            .expect("mixed equilibrium present");
        assert_profile(mixed, &[2.0 / 3.0, 1.0 / 3.0], &[1.0 / 3.0, 2.0 / 3.0], 1e-9);
    }

    #[test]
    fn support_enumeration_dominant_strategy() {
        let g = StageGame::new(
            vec![vec![3.0, 2.0], vec![1.0, 0.0]],
            vec![vec![2.0, 0.0], vec![3.0, 1.0]],
        )
        .unwrap();
        let all = support_enumeration(&g).unwrap();
        assert_eq!(all.len(), 1);
        assert_profile(&all[0], &[1.0, 0.0], &[1.0, 0.0], 1e-9);
    }

    #[test]
    fn support_enumeration_guards_dimensions() {
        let a = vec![vec![0.0; 7]; 7];
        let g = StageGame::new(a.clone(), a).unwrap();
        assert!(matches!(
            support_enumeration(&g),
            Err(SolveError::DimensionGuard { m: 7, n: 7, .. })
        ));
    }

    #[test]
    fn epsilon_nash_checks() {
        let g = matching_pennies();
        let eq = NashProfile::uniform(2, 2);
        assert!(is_epsilon_nash(&g, &eq, 1e-9));
        // pure (heads, heads): the column player gains 2 by deviating
        let pure = NashProfile::pure(2, 0, 2, 0);
        assert!(!is_epsilon_nash(&g, &pure, 0.5));
        // oracle self-consistency on an arbitrary game
        let g = battle_of_sexes();
        for p in support_enumeration(&g).unwrap() {
            assert!(is_epsilon_nash(&g, &p, 1e-9));
        }
    }

    #[test]
    fn nash_value_examples() {
        let id = [1.0, 0.0, 0.0, 1.0];
        let p = NashProfile::uniform(2, 2);
        assert_abs_diff_eq!(nash_value(2, 2, &id, &p), 0.5);
        let g = matching_pennies();
        let eq = lemke_howson(&g, 1).unwrap();
        assert_abs_diff_eq!(nash_value(2, 2, g.a_flat(), &eq), 0.0, epsilon = 1e-12);
        let ones = [1.0; 6];
        let p = NashProfile { x: vec![0.2, 0.3, 0.5], y: vec![0.9, 0.1] };
        assert_abs_diff_eq!(nash_value(3, 2, &ones, &p), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn classify_global_optimum() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        let g = StageGame::new(a.clone(), a).unwrap();
        let p = NashProfile::pure(2, 1, 2, 1);
        assert_eq!(classify_point(&g, &p), PointClass::GlobalOptimum);
    }

    #[test]
    fn classify_saddle_point() {
        let g = matching_pennies();
        let p = NashProfile::uniform(2, 2);
        assert_eq!(classify_point(&g, &p), PointClass::SaddlePoint);
    }

    #[test]
    fn classify_neither() {
        // battle-of-sexes pure equilibrium: the opponent's deviation changes
        // both players' payoffs downward
        let g = battle_of_sexes();
        let p = NashProfile::pure(2, 0, 2, 0);
        assert_eq!(classify_point(&g, &p), PointClass::Neither);
    }

    #[test]
    fn global_optima_share_values() {
        // identical-interest game with a tied maximum: both optima have the
        // same per-player value
        let a = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let g = StageGame::new(a.clone(), a).unwrap();
        let globals: Vec<NashProfile> = support_enumeration(&g)
            .unwrap()
            .into_iter()
            .filter(|p| classify_point(&g, p) == PointClass::GlobalOptimum)
            .collect();
        assert!(globals.len() >= 2);
        for p in &globals {
            assert_abs_diff_eq!(nash_value(2, 2, g.a_flat(), p), 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(nash_value(2, 2, g.b_flat(), p), 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn saddle_points_share_values() {
        // degenerate zero-sum game with several equilibria, all of value 0
        let a = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let b = vec![vec![-1.0, 0.0], vec![-1.0, 0.0]];
        let g = StageGame::new(a, b).unwrap();
        let saddles: Vec<NashProfile> = support_enumeration(&g)
            .unwrap()
            .into_iter()
            .filter(|p| classify_point(&g, p) == PointClass::SaddlePoint)
            .collect();
        assert!(saddles.len() >= 2);
        for p in &saddles {
            assert_abs_diff_eq!(nash_value(2, 2, g.a_flat(), p), 0.0);
        }
    }

    #[test]
    fn solve_is_total_on_degenerate_games() {
        // all-equal payoffs are maximally degenerate; the lexicographic
        // ratio test must still terminate at some equilibrium
        for dim in 1..=5 {
            let a = vec![vec![0.0; dim]; dim];
            let g = StageGame::new(a.clone(), a).unwrap();
            let p = solve(&g);
            assert!(is_epsilon_nash(&g, &p, 1e-9));
        }
    }

    fn random_game(rng: &mut ChaCha8Rng, m: usize, n: usize) -> StageGame {
        let a: Vec<Vec<f64>> =
            (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let b: Vec<Vec<f64>> =
            (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        StageGame::new(a, b).unwrap()
    }

    #[test]
    fn lemke_howson_sound_on_random_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let m = rng.random_range(2..=5);
            let n = rng.random_range(2..=5);
            let g = random_game(&mut rng, m, n);
            let p = lemke_howson(&g, 1).unwrap();
            assert!(is_epsilon_nash(&g, &p, 1e-8), "trial {trial} not an equilibrium");
            let all = support_enumeration(&g).unwrap();
            assert!(
                all.iter().any(|q| q.close_to(&p, 1e-6)),
                "trial {trial}: pivoting result missing from enumeration"
            );
        }
    }

    proptest! {
        #[test]
        fn shift_invariance(
            m in 2usize..=4,
            n in 2usize..=4,
            seed in any::<u64>(),
            c in -10.0f64..10.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_game(&mut rng, m, n);
            let shifted = StageGame::from_flat(
                m,
                n,
                &g.a_flat().iter().map(|v| v + c).collect::<Vec<_>>(),
                &g.b_flat().iter().map(|v| v + c).collect::<Vec<_>>(),
            )
            .unwrap();
            let p = lemke_howson(&shifted, 1).unwrap();
            prop_assert!(is_epsilon_nash(&g, &p, 1e-9));
        }

        #[test]
        fn profiles_are_probability_vectors(
            m in 1usize..=5,
            n in 1usize..=5,
            seed in any::<u64>(),
            label in 1usize..=10,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_game(&mut rng, m, n);
            let label = (label - 1) % (m + n) + 1;
            let p = lemke_howson(&g, label).unwrap();
            prop_assert!(p.x.iter().all(|&v| v >= 0.0));
            prop_assert!(p.y.iter().all(|&v| v >= 0.0));
            prop_assert!((p.x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!((p.y.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
