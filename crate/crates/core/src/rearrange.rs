//! Parallel tweezer rearrangement on a row/column trap grid: pre-sorting
//! between columns, downward ejection scans, and up/down sorting scans
//! within columns.
//!
//! Row 0 is the bottom row. Ejected atoms leave below it (row −1).

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Atom and target occupancy of a `rows × cols` grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridOccupancy {
    pub rows: usize,
    pub cols: usize,
    occupied: Vec<bool>,
    target: Vec<bool>,
}

impl GridOccupancy {
    pub fn new(rows: usize, cols: usize, occupied: Vec<bool>, target: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("grid needs at least one row and column".into()));
        }
        for v in [&occupied, &target] {
            if v.len() != rows * cols {
                return Err(Error::DimensionMismatch {
                    expected: rows * cols,
                    got: v.len(),
                });
            }
        }
        Ok(GridOccupancy {
            rows,
            cols,
            occupied,
            target,
        })
    }

    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![false; rows * cols], vec![false; rows * cols])
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.occupied[self.idx(row, col)]
    }

    pub fn is_target(&self, row: usize, col: usize) -> bool {
        self.target[self.idx(row, col)]
    }

    pub fn set_occupied(&mut self, row: usize, col: usize, value: bool) {
        let i = self.idx(row, col);
        self.occupied[i] = value;
    }

    pub fn set_target(&mut self, row: usize, col: usize, value: bool) {
        let i = self.idx(row, col);
        self.target[i] = value;
    }

    /// Replaces the target set with the `t_rows × t_cols` block centered in
    /// the grid (rounded toward row/column 0).
    pub fn with_centered_target(mut self, t_rows: usize, t_cols: usize) -> Result<Self> {
        if t_rows > self.rows || t_cols > self.cols {
            return Err(Error::InvalidArgument(format!(
                "target {t_rows}×{t_cols} does not fit in grid {}×{}",
                self.rows, self.cols
            )));
        }
        let (r0, c0) = ((self.rows - t_rows) / 2, (self.cols - t_cols) / 2);
        self.target.iter_mut().for_each(|t| *t = false);
        for r in r0..r0 + t_rows {
            for c in c0..c0 + t_cols {
                self.set_target(r, c, true);
            }
        }
        Ok(self)
    }

    pub fn atom_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn target_count(&self) -> usize {
        self.target.iter().filter(|&&t| t).count()
    }

    pub fn column_atoms(&self, col: usize) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.is_occupied(r, col)).collect()
    }

    pub fn column_targets(&self, col: usize) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.is_target(r, col)).collect()
    }

    fn column_count(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.is_occupied(r, col)).count()
    }

    fn column_target_count(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.is_target(r, col)).count()
    }

    /// Fraction of target sites holding an atom (1 when there are no targets).
    pub fn filling_fraction(&self) -> f64 {
        let t = self.target_count();
        if t == 0 {
            return 1.0;
        }
        let filled = self.occupied.iter().zip(&self.target).filter(|(o, t)| **o && **t).count();
        filled as f64 / t as f64
    }

    pub fn targets_filled(&self) -> bool {
        self.occupied.iter().zip(&self.target).all(|(o, t)| *o || !*t)
    }
}

/// I.i.d. Bernoulli(`p`) loading with an empty target set.
pub fn random_load(rows: usize, cols: usize, p: f64, seed: u64) -> Result<GridOccupancy> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("loading probability must be in [0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occupied = (0..rows * cols).map(|_| rng.random::<f64>() < p).collect();
    GridOccupancy::new(rows, cols, occupied, vec![false; rows * cols])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    /// Along a row, between columns (pre-sorting only).
    Horizontal,
    /// Along a column; `to = −1` ejects the atom below the array.
    Vertical,
}

/// One atom transfer. For horizontal moves `line` is the row and
/// `from`/`to` are columns; for vertical moves `line` is the column and
/// `from`/`to` are rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    pub line: usize,
    pub from: i64,
    pub to: i64,
    /// Moves sharing a group run in parallel.
    pub group: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanDirection {
    Up,
    Down,
}

/// Parallel moves executed by one sweep of the moving-trap row (or, for
/// pre-sorting, one parallel horizontal transfer into a column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub group: usize,
    pub direction: Option<ScanDirection>,
    pub moves: Vec<Move>,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Tweezer ramp on plus ramp off per transfer.
    pub pickup_ms: f64,
    pub speed_um_per_ms: f64,
    pub site_pitch_um: f64,
    /// Vacuum-limited lifetime; `None` disables loss.
    pub background_lifetime_s: Option<f64>,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            pickup_ms: 2.0 * 0.015,
            speed_um_per_ms: 75.0,
            site_pitch_um: 5.0,
            background_lifetime_s: Some(10.0),
        }
    }
}

impl CostModel {
    pub fn lossless(self) -> Self {
        CostModel {
            background_lifetime_s: None,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.pickup_ms >= 0.0
            && self.speed_um_per_ms > 0.0
            && self.site_pitch_um > 0.0
            && self.background_lifetime_s.is_none_or(|t| t > 0.0);
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid cost model {self:?}")));
        }
        Ok(())
    }

    /// `n_pickups · pickup_ms + path_um / speed`.
    pub fn time_ms(&self, n_pickups: usize, path_um: f64) -> f64 {
        n_pickups as f64 * self.pickup_ms + path_um / self.speed_um_per_ms
    }

    fn scan_ms(&self, n_moves: usize, span_sites: f64) -> f64 {
        self.time_ms(n_moves, span_sites * self.site_pitch_um)
    }
}

/// Result of pre-sorting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presort {
    /// One group per filled deficient column and pass.
    pub groups: Vec<Scan>,
    /// Columns still short of atoms.
    pub unresolved: Vec<usize>,
}

fn surplus(grid: &GridOccupancy, counts: &[usize], c: usize) -> usize {
    counts[c].saturating_sub(grid.column_target_count(c))
}

/// Moves atoms between columns until every column holds at least as many
/// atoms as targets, or no donor can help.
///
/// A deficient column `j` draws from the side with the larger total surplus
/// (left on ties), falling back to the other side if the preferred one offers
/// no usable atom. Donors are atoms in surplus columns, in rows where `j` is
/// empty, nearest column first and lower row first on ties.
pub fn presort(grid: &GridOccupancy, cost: &CostModel) -> (Presort, GridOccupancy) {
    let mut g = grid.clone();
    let mut counts: Vec<usize> = (0..g.cols).map(|c| g.column_count(c)).collect();
    let mut groups = Vec::new();
    loop {
        let mut progress = false;
        for j in 0..g.cols {
            let need = g.column_target_count(j).saturating_sub(counts[j]);
            if need == 0 {
                continue;
            }
            let left: usize = (0..j).map(|c| surplus(&g, &counts, c)).sum();
            let right: usize = (j + 1..g.cols).map(|c| surplus(&g, &counts, c)).sum();
            if left + right == 0 {
                continue;
            }
            let sides: [bool; 2] = if left >= right { [true, false] } else { [false, true] };
            for from_left in sides {
                if (from_left && left == 0) || (!from_left && right == 0) {
                    continue;
                }
                let moves = fill_from_side(&mut g, &mut counts, j, from_left, groups.len());
                if !moves.is_empty() {
                    let span = moves.iter().map(|m| (m.from - m.to).unsigned_abs()).max().unwrap_or(0);
                    groups.push(Scan {
                        group: groups.len(),
                        direction: None,
                        duration_ms: cost.scan_ms(moves.len(), span as f64),
                        moves,
                    });
                    progress = true;
                    break;
                }
            }
        }
        if !progress {
            break;
        }
    }
    let unresolved = (0..g.cols)
        .filter(|&c| counts[c] < g.column_target_count(c))
        .collect();
    (Presort { groups, unresolved }, g)
}

fn fill_from_side(g: &mut GridOccupancy, counts: &mut [usize], j: usize, from_left: bool, group: usize) -> Vec<Move> {
    let mut need = g.column_target_count(j).saturating_sub(counts[j]);
    let donors: Vec<usize> = if from_left { (0..j).rev().collect() } else { (j + 1..g.cols).collect() };
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new(); // (distance, row, col)
    for &c in &donors {
        if surplus(g, counts, c) == 0 {
            continue;
        }
        for r in 0..g.rows {
            if g.is_occupied(r, c) && !g.is_occupied(r, j) {
                candidates.push((c.abs_diff(j), r, c));
            }
        }
    }
    candidates.sort();
    let mut moves = Vec::new();
    for (_, r, c) in candidates {
        if need == 0 {
            break;
        }
        if g.is_occupied(r, j) || surplus(g, counts, c) == 0 {
            continue;
        }
        g.set_occupied(r, c, false);
        g.set_occupied(r, j, true);
        counts[c] -= 1;
        counts[j] += 1;
        need -= 1;
        moves.push(Move {
            kind: MoveKind::Horizontal,
            line: r,
            from: c as i64,
            to: j as i64,
            group,
        });
    }
    moves
}

/// Downward ejection scans removing the lowest atom of every column that
/// still holds more atoms than targets, one per column per scan.
pub fn eject(grid: &GridOccupancy, cost: &CostModel, first_group: usize) -> (Vec<Scan>, GridOccupancy) {
    let mut g = grid.clone();
    let mut scans = Vec::new();
    loop {
        let mut moves = Vec::new();
        for c in 0..g.cols {
            if g.column_count(c) > g.column_target_count(c) {
                let r = g.column_atoms(c)[0];
                g.set_occupied(r, c, false);
                moves.push(Move {
                    kind: MoveKind::Vertical,
                    line: c,
                    from: r as i64,
                    to: -1,
                    group: first_group + scans.len(),
                });
            }
        }
        if moves.is_empty() {
            break;
        }
        let start = moves.iter().map(|m| m.from).max().unwrap();
        scans.push(Scan {
            group: first_group + scans.len(),
            direction: Some(ScanDirection::Down),
            duration_ms: cost.scan_ms(moves.len(), (start + 1) as f64),
            moves,
        });
    }
    (scans, g)
}

/// Chooses the single move a column makes during one scan.
pub trait ColumnScanner {
    /// `atoms` and `goals` are ascending rows of equal length; atom `i` is
    /// bound for `goals[i]`. Returns `(from, to)` or `None` to idle.
    fn plan(&self, atoms: &[usize], goals: &[usize], direction: ScanDirection) -> Option<(usize, usize)>;
}

/// Moves the frontier atom: the highest atom still below its goal on an
/// upward scan, the lowest atom still above its goal on a downward scan.
/// The neighbor it moves toward is already settled, so it always arrives.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrontierScanner;

impl ColumnScanner for FrontierScanner {
    fn plan(&self, atoms: &[usize], goals: &[usize], direction: ScanDirection) -> Option<(usize, usize)> {
        let pick = match direction {
            ScanDirection::Up => (0..atoms.len()).rev().find(|&i| atoms[i] < goals[i]),
            ScanDirection::Down => (0..atoms.len()).find(|&i| atoms[i] > goals[i]),
        }?;
        // stop short of a blocking neighbor
        let to = match direction {
            ScanDirection::Up => atoms.get(pick + 1).map_or(goals[pick], |&next| goals[pick].min(next - 1)),
            ScanDirection::Down => match pick.checked_sub(1) {
                Some(p) => goals[pick].max(atoms[p] + 1),
                None => goals[pick],
            },
        };
        (to != atoms[pick]).then_some((atoms[pick], to))
    }
}

/// Final rows for a column's atoms: its targets plus, when it holds extra
/// atoms, the lowest occupied non-target rows to park them on.
fn column_goals(g: &GridOccupancy, c: usize) -> Vec<usize> {
    let atoms = g.column_atoms(c);
    let targets = g.column_targets(c);
    let extra = atoms.len().saturating_sub(targets.len());
    let mut goals = targets;
    goals.extend(atoms.iter().filter(|&&r| !g.is_target(r, c)).take(extra));
    goals.sort_unstable();
    goals
}

/// Alternating upward and downward scans (empty ones skipped) until every
/// atom sits on its goal: the `i`-th highest atom on the `i`-th highest goal.
///
/// Columns may hold extra atoms (deferred ejection); those park on their
/// lowest occupied non-target rows.
pub fn column_sort<S: ColumnScanner>(
    grid: &GridOccupancy,
    cost: &CostModel,
    scanner: &S,
    first_group: usize,
) -> Result<(Vec<Scan>, GridOccupancy)> {
    let mut g = grid.clone();
    let goals: Vec<Vec<usize>> = (0..g.cols).map(|c| column_goals(&g, c)).collect();
    for (c, gl) in goals.iter().enumerate() {
        let n = g.column_count(c);
        if n < g.column_target_count(c) {
            return Err(Error::InvalidArgument(format!(
                "column {c} holds {n} atoms for {} targets",
                g.column_target_count(c)
            )));
        }
        debug_assert_eq!(gl.len(), n);
    }
    let mut scans = Vec::new();
    let mut direction = ScanDirection::Up;
    let mut idle = 0;
    // each productive scan settles at least one atom for good
    let limit = 2 * (g.atom_count() + 2);
    while idle < 2 && scans.len() < limit {
        let mut moves = Vec::new();
        for (c, gl) in goals.iter().enumerate() {
            let atoms = g.column_atoms(c);
            if let Some((from, to)) = scanner.plan(&atoms, gl, direction) {
                moves.push(Move {
                    kind: MoveKind::Vertical,
                    line: c,
                    from: from as i64,
                    to: to as i64,
                    group: first_group + scans.len(),
                });
            }
        }
        if moves.is_empty() {
            idle += 1;
        } else {
            idle = 0;
            for m in &moves {
                g.set_occupied(m.from as usize, m.line, false);
                g.set_occupied(m.to as usize, m.line, true);
            }
            let lo = moves.iter().map(|m| m.from.min(m.to)).min().unwrap();
            let hi = moves.iter().map(|m| m.from.max(m.to)).max().unwrap();
            scans.push(Scan {
                group: first_group + scans.len(),
                direction: Some(direction),
                duration_ms: cost.scan_ms(moves.len(), (hi - lo) as f64),
                moves,
            });
        }
        direction = match direction {
            ScanDirection::Up => ScanDirection::Down,
            ScanDirection::Down => ScanDirection::Up,
        };
    }
    let settled = goals
        .iter()
        .enumerate()
        .all(|(c, gl)| g.column_atoms(c) == *gl);
    if !settled {
        return Err(Error::NoConvergence {
            iterations: scans.len(),
            residual: 1.0 - g.filling_fraction(),
        });
    }
    Ok((scans, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostSummary {
    pub n_pickups: usize,
    pub n_scans: usize,
    pub est_time_ms: f64,
}

impl CostSummary {
    fn add(&mut self, scans: &[Scan]) {
        self.n_pickups += scans.iter().map(|s| s.moves.len()).sum::<usize>();
        self.n_scans += scans.len();
        self.est_time_ms += scans.iter().map(|s| s.duration_ms).sum::<f64>();
    }
}

/// Phase-ordered moves of one rearrangement round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub presort: Vec<Scan>,
    pub eject_scans: Vec<Scan>,
    pub column_scans: Vec<Scan>,
    pub unresolved_columns: Vec<usize>,
    pub cost: CostSummary,
    /// Atoms lost to background collisions at the end of the round.
    pub losses: usize,
}

impl RoundPlan {
    pub fn scans(&self) -> impl Iterator<Item = &Scan> {
        self.presort.iter().chain(&self.eject_scans).chain(&self.column_scans)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovePlan {
    pub rounds: Vec<RoundPlan>,
    pub cost: CostSummary,
}

impl MovePlan {
    /// Every scan in execution order with its start time in ms.
    pub fn timeline(&self) -> Vec<(f64, &Scan)> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for round in &self.rounds {
            for s in round.scans() {
                out.push((t, s));
                t += s.duration_ms;
            }
        }
        out
    }

    /// CSV event log `t_ms,kind,col,from_row,to_row,from_col`. Vertical
    /// moves leave `from_col` equal to `col`; horizontal moves keep their row
    /// in both row fields.
    pub fn write_event_log<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_ms,kind,col,from_row,to_row,from_col")?;
        for (t, scan) in self.timeline() {
            for m in &scan.moves {
                match m.kind {
                    MoveKind::Vertical => {
                        writeln!(w, "{t:.6},vertical,{},{},{},{}", m.line, m.from, m.to, m.line)?
                    }
                    MoveKind::Horizontal => {
                        writeln!(w, "{t:.6},horizontal,{},{},{},{}", m.to, m.line, m.line, m.from)?
                    }
                }
            }
        }
        Ok(())
    }

    /// Re-applies every move to `initial` (without losses), checking that
    /// sources are occupied, destinations and vertical paths are free, and
    /// that each scan uses every column (or row) at most once.
    pub fn replay(&self, initial: &GridOccupancy) -> Result<GridOccupancy> {
        let mut g = initial.clone();
        for round in &self.rounds {
            for scan in round.scans() {
                let mut lines: Vec<(MoveKind, usize)> = scan.moves.iter().map(|m| (m.kind, m.line)).collect();
                lines.sort_by_key(|&(k, l)| (k == MoveKind::Horizontal, l));
                lines.dedup();
                if scan.direction.is_some() && lines.len() != scan.moves.len() {
                    return Err(Error::InvalidArgument(format!("scan {} reuses a column", scan.group)));
                }
                for m in &scan.moves {
                    apply_checked(&mut g, m)?;
                }
            }
        }
        Ok(g)
    }
}

fn apply_checked(g: &mut GridOccupancy, m: &Move) -> Result<()> {
    let bad = |why: &str| Err(Error::InvalidArgument(format!("illegal move {m:?}: {why}")));
    match m.kind {
        MoveKind::Horizontal => {
            let (r, from, to) = (m.line, m.from as usize, m.to as usize);
            if !g.is_occupied(r, from) {
                return bad("source empty");
            }
            if g.is_occupied(r, to) {
                return bad("destination occupied");
            }
            g.set_occupied(r, from, false);
            g.set_occupied(r, to, true);
        }
        MoveKind::Vertical => {
            let c = m.line;
            let from = m.from as usize;
            if !g.is_occupied(from, c) {
                return bad("source empty");
            }
            // every trap passed or landed on must be free: no crossing
            let (lo, hi) = if m.to < m.from { (m.to.max(0), m.from - 1) } else { (m.from + 1, m.to) };
            if (lo..=hi).any(|r| g.is_occupied(r as usize, c)) {
                return bad("path blocked");
            }
            g.set_occupied(from, c, false);
            if m.to >= 0 {
                g.set_occupied(m.to as usize, c, true);
            }
        }
    }
    Ok(())
}

fn plan_round(grid: &GridOccupancy, cost: &CostModel, with_ejection: bool) -> Result<(RoundPlan, GridOccupancy)> {
    let (pre, g) = presort(grid, cost);
    let mut next = pre.groups.len();
    let (eject_scans, g) = if with_ejection {
        eject(&g, cost, next)
    } else {
        (Vec::new(), g)
    };
    next += eject_scans.len();
    // on global shortage, sort what is there and leave the rest empty
    let (column_scans, g) = if pre.unresolved.is_empty() {
        column_sort(&g, cost, &FrontierScanner, next)?
    } else {
        (Vec::new(), g)
    };
    let mut cost_summary = CostSummary::default();
    cost_summary.add(&pre.groups);
    cost_summary.add(&eject_scans);
    cost_summary.add(&column_scans);
    Ok((
        RoundPlan {
            presort: pre.groups,
            eject_scans,
            column_scans,
            unresolved_columns: pre.unresolved,
            cost: cost_summary,
            losses: 0,
        },
        g,
    ))
}

fn apply_loss(g: &mut GridOccupancy, elapsed_ms: f64, lifetime_s: f64, rng: &mut ChaCha8Rng) -> usize {
    let survive = (-elapsed_ms / (1000.0 * lifetime_s)).exp();
    let mut lost = 0;
    for o in g.occupied.iter_mut() {
        if *o && rng.random::<f64>() >= survive {
            *o = false;
            lost += 1;
        }
    }
    lost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangeOutcome {
    pub plan: MovePlan,
    pub final_occupancy: GridOccupancy,
    pub filling_fraction: f64,
    pub est_time_ms: f64,
    pub losses: usize,
}

/// Plans and executes one or two rearrangement rounds.
///
/// With `two_rounds`, ejection is skipped in the first round and the second
/// round re-plans the residual defects from the post-loss occupancy. Loss,
/// when enabled, removes each atom at the end of a round with probability
/// `1 − e^{−t/τ}` for that round's duration `t`.
pub fn plan_and_simulate(grid: &GridOccupancy, cost: &CostModel, two_rounds: bool, seed: u64) -> Result<RearrangeOutcome> {
    cost.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rounds = Vec::new();
    let mut g = grid.clone();
    let n_rounds = if two_rounds { 2 } else { 1 };
    for k in 0..n_rounds {
        let with_ejection = !two_rounds || k == 1;
        let (mut round, next) = plan_round(&g, cost, with_ejection)?;
        g = next;
        if let Some(tau) = cost.background_lifetime_s {
            round.losses = apply_loss(&mut g, round.cost.est_time_ms, tau, &mut rng);
        }
        rounds.push(round);
    }
    let mut total = CostSummary::default();
    for r in &rounds {
        total.n_pickups += r.cost.n_pickups;
        total.n_scans += r.cost.n_scans;
        total.est_time_ms += r.cost.est_time_ms;
    }
    let losses = rounds.iter().map(|r| r.losses).sum();
    Ok(RearrangeOutcome {
        filling_fraction: g.filling_fraction(),
        est_time_ms: total.est_time_ms,
        plan: MovePlan { rounds, cost: total },
        final_occupancy: g,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(rows: &[&str], targets: &[&str]) -> GridOccupancy {
        // strings list the top row first
        let nr = rows.len();
        let nc = rows[0].len();
        let mut g = GridOccupancy::empty(nr, nc).unwrap();
        for (i, (row, trow)) in rows.iter().zip(targets).enumerate() {
            let r = nr - 1 - i;
            for (c, (a, t)) in row.chars().zip(trow.chars()).enumerate() {
                g.set_occupied(r, c, a == '#');
                g.set_target(r, c, t == 'T');
            }
        }
        g
    }

    #[test]
    fn loading_extremes() {
        assert_eq!(random_load(5, 6, 0.0, 1).unwrap().atom_count(), 0);
        assert_eq!(random_load(5, 6, 1.0, 1).unwrap().atom_count(), 30);
        assert!(random_load(5, 6, 1.5, 1).is_err());
        assert_eq!(random_load(9, 9, 0.5, 4).unwrap(), random_load(9, 9, 0.5, 4).unwrap());
    }

    #[test]
    fn presort_hand_trace() {
        // counts (2, 0, 1), one target per column in the bottom row
        let g = grid_from(&["#..", "#.#"], &["...", "TTT"]);
        let (pre, after) = presort(&g, &CostModel::default());
        assert_eq!(pre.groups.len(), 1);
        let m = pre.groups[0].moves[0];
        assert_eq!((m.kind, m.from, m.to), (MoveKind::Horizontal, 0, 1));
        // column 1 is empty in both rows; the lower row is taken first
        assert_eq!(m.line, 0);
        assert!(after.is_occupied(0, 1));
        assert!(pre.unresolved.is_empty());

        let sufficient = grid_from(&["#.#", "###"], &["...", "TTT"]);
        assert!(presort(&sufficient, &CostModel::default()).0.groups.is_empty());
    }

    #[test]
    fn presort_shortage_reported() {
        let g = grid_from(&["...", "#.."], &["...", "TTT"]);
        let (pre, _) = presort(&g, &CostModel::default());
        assert_eq!(pre.unresolved, vec![1, 2]);
    }

    #[test]
    fn eject_counts_scans() {
        // excess (2, 0, 1)
        let g = grid_from(&["#.#", "#.#", "#T#"], &["...", "...", "TTT"]);
        let mut g = g;
        g.set_occupied(0, 1, true);
        let (scans, after) = eject(&g, &CostModel::default(), 0);
        assert_eq!(scans.len(), 2);
        for c in 0..3 {
            assert_eq!(after.column_count(c), 1);
        }
        assert!(eject(&after, &CostModel::default(), 0).0.is_empty());
    }

    #[test]
    fn column_sort_hand_trace() {
        // atoms at rows {0,1}, targets {2,3}
        let g = grid_from(&["T", "T", "#", "#"], &["T", "T", ".", "."]);
        let (scans, after) = column_sort(&g, &CostModel::default(), &FrontierScanner, 0).unwrap();
        assert!(scans.len() <= 2);
        assert_eq!(scans[0].moves[0].from, 1);
        assert_eq!(scans[0].moves[0].to, 3);
        assert!(after.targets_filled());

        let done = grid_from(&["#", "."], &["T", "."]);
        assert!(column_sort(&done, &CostModel::default(), &FrontierScanner, 0).unwrap().0.is_empty());
        let short = grid_from(&[".", "."], &["T", "."]);
        assert!(column_sort(&short, &CostModel::default(), &FrontierScanner, 0).is_err());
    }

    #[test]
    fn cost_arithmetic() {
        let c = CostModel::default();
        assert!((c.time_ms(40, 300.0 * 75.0) - (40.0 * 0.03 + 300.0)).abs() < 1e-12);
    }

    #[test]
    fn lossless_fill_and_replay() {
        let cost = CostModel::default().lossless();
        for seed in 0..20 {
            let g = random_load(16, 18, 0.55, seed).unwrap().with_centered_target(8, 8).unwrap();
            for two in [false, true] {
                let out = plan_and_simulate(&g, &cost, two, seed).unwrap();
                assert_eq!(out.filling_fraction, 1.0, "seed {seed}");
                let replayed = out.plan.replay(&g).unwrap();
                assert_eq!(replayed, out.final_occupancy);
            }
        }
    }

    #[test]
    fn event_log_format() {
        let g = grid_from(&["#..", "#.#"], &["...", "TTT"]);
        let out = plan_and_simulate(&g, &CostModel::default().lossless(), false, 0).unwrap();
        let mut buf = Vec::new();
        out.plan.write_event_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_ms,kind,col,from_row,to_row,from_col"));
        assert_eq!(lines.next(), Some("0.000000,horizontal,1,0,0,0"));
    }
}
