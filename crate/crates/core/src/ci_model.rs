//! Real-valued constructive-interference constraint systems.
//!
//! A transmit vector `x̃ ∈ ℂ^{N_t}` is handled as `x = [Re x̃; Im x̃] ∈ ℝ^{2N_t}`.
//! Every user contributes two consecutive rows (user-major) to `A x ⪰ b`:
//!
//! * M-PSK (M ≥ 4): `Ā_k = T S_k H_k`, both rows are inequalities.
//! * square QAM: `Ā_k = diag(1/Re s̃_k, 1/Im s̃_k) H_k`; a row is an
//!   inequality only when that coordinate of `s̃_k` lies on the outer edge.
//! * BPSK: a single inequality row `Re{h̃_kᵀx̃ / s̃_k} ≥ √γ_k σ_k`.
//!
//! The thresholds are `b_i = √γ_k σ_k` on both rows of user `k`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::constellation::{ConstellationSpec, Dof, ModulationKind};
use crate::error::{Error, Result};

/// Default absolute tolerance for feasibility reporting.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Complex channel `H̃` with one row `h̃_kᵀ` per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel(DMatrix<Complex64>);

impl ComplexChannel {
    pub fn new(h: DMatrix<Complex64>) -> Result<Self> {
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("channel has non-finite entries"));
        }
        Ok(Self(h))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let k = rows.len();
        let nt = rows.first().map_or(0, Vec::len);
        if k == 0 || nt == 0 || rows.iter().any(|r| r.len() != nt) {
            return Err(Error::dim("channel rows must be non-empty and equal length"));
        }
        Self::new(DMatrix::from_fn(k, nt, |i, j| rows[i][j]))
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, k: usize) -> Vec<Complex64> {
        self.0.row(k).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    /// Noiseless received signals `h̃_kᵀ x̃` for all users.
    pub fn receive(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.users())
            .map(|k| self.0.row(k).iter().zip(x).map(|(h, x)| h * x).sum())
            .collect()
    }
}

/// `H_k = [[Re h̃ᵀ, −Im h̃ᵀ], [Im h̃ᵀ, Re h̃ᵀ]]`, a 2 × 2N_t real matrix.
pub fn complex_to_real_channel(h: &[Complex64]) -> DMatrix<f64> {
    let nt = h.len();
    DMatrix::from_fn(2, 2 * nt, |r, c| {
        let z = h[c % nt];
        match (r, c < nt) {
            (0, true) => z.re,
            (0, false) => -z.im,
            (_, true) => z.im,
            (_, false) => z.re,
        }
    })
}

/// Real 2 × 2 matrix of multiplication by `1/s̃`.
pub fn symbol_rotation(s: Complex64) -> Result<Matrix2<f64>> {
    if s.norm_sqr() == 0.0 {
        return Err(Error::ZeroSymbol);
    }
    let inv = s.inv();
    Ok(Matrix2::new(inv.re, -inv.im, inv.im, inv.re))
}

/// `T = [[1, −1/tan(π/M)], [1, 1/tan(π/M)]]` for M-PSK with M ≥ 4.
pub fn psk_cone_matrix(order: usize) -> Result<Matrix2<f64>> {
    if order < 4 {
        return Err(Error::InvalidOrder {
            kind: "PSK cone",
            order,
        });
    }
    let cot = 1.0 / (std::f64::consts::PI / order as f64).tan();
    Ok(Matrix2::new(1.0, -cot, 1.0, cot))
}

/// Stacked real CI constraints `A x ⪰ b` (equality on rows flagged in `eq_mask`).
#[derive(Debug, Clone, PartialEq)]
pub struct CiSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `true` = equality row (coordinate cannot exploit CI).
    pub eq_mask: Vec<bool>,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
    modulation: String,
    rows_per_user: usize,
}

impl CiSystem {
    /// Assembles a system from raw parts, checking dimensions.
    pub fn from_parts(
        a: DMatrix<f64>,
        b: DVector<f64>,
        eq_mask: Vec<bool>,
        gamma: Vec<f64>,
        sigma: Vec<f64>,
        modulation: &str,
    ) -> Result<Self> {
        let users = gamma.len();
        if users == 0 || sigma.len() != users {
            return Err(Error::dim("gamma and sigma need one entry per user"));
        }
        if a.nrows() != b.len() || a.nrows() != eq_mask.len() {
            return Err(Error::dim(format!(
                "A has {} rows, b has {}, mask has {}",
                a.nrows(),
                b.len(),
                eq_mask.len()
            )));
        }
        if !a.nrows().is_multiple_of(users) || !a.ncols().is_multiple_of(2) {
            return Err(Error::dim("A rows must split evenly across users and columns must be even"));
        }
        let rows_per_user = a.nrows() / users;
        Ok(Self {
            a,
            b,
            eq_mask,
            gamma,
            sigma,
            modulation: modulation.to_string(),
            rows_per_user,
        })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn users(&self) -> usize {
        self.gamma.len()
    }

    pub fn antennas(&self) -> usize {
        self.a.ncols() / 2
    }

    pub fn rows_per_user(&self) -> usize {
        self.rows_per_user
    }

    pub fn modulation(&self) -> &str {
        &self.modulation
    }

    pub fn is_inequality(&self, row: usize) -> bool {
        !self.eq_mask[row]
    }

    pub fn has_equality_rows(&self) -> bool {
        self.eq_mask.iter().any(|&e| e)
    }

    /// Same constraints with every threshold multiplied by `alpha`.
    pub fn with_scaled_thresholds(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.b *= alpha;
        let a2 = alpha * alpha;
        for g in &mut out.gamma {
            *g *= a2;
        }
        out
    }

    /// `r = A x − b`.
    pub fn evaluate_constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }

    /// Largest constraint violation: `max(−r_i, 0)` on inequality rows,
    /// `|r_i|` on equality rows.
    pub fn max_infeasibility(&self, x: &DVector<f64>) -> f64 {
        let r = self.evaluate_constraints(x);
        r.iter()
            .zip(&self.eq_mask)
            .map(|(&ri, &eq)| if eq { ri.abs() } else { (-ri).max(0.0) })
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.max_infeasibility(x) <= tol
    }

    pub fn partition(&self, strategy: PartitionStrategy) -> Result<BlockPartition> {
        BlockPartition::new(self.cols(), strategy)
    }

    /// Text fixture format; see [`CiSystem::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "# cislp CI system");
        let _ = writeln!(out, "K {}", self.users());
        let _ = writeln!(out, "Nt {}", self.antennas());
        let _ = writeln!(out, "modulation {}", self.modulation);
        let _ = writeln!(out, "gamma {}", join(&mut self.gamma.iter().map(|v| format!("{v:e}"))));
        let _ = writeln!(out, "sigma {}", join(&mut self.sigma.iter().map(|v| format!("{v:e}"))));
        let _ = writeln!(out, "A {} {}", self.rows(), self.cols());
        for r in 0..self.rows() {
            let _ = writeln!(out, "{}", join(&mut self.a.row(r).iter().map(|v| format!("{v:e}"))));
        }
        let _ = writeln!(out, "b {}", join(&mut self.b.iter().map(|v| format!("{v:e}"))));
        let _ = writeln!(
            out,
            "eqMask {}",
            join(&mut self.eq_mask.iter().map(|&e| u8::from(e).to_string()))
        );
        out
    }

    /// Parses the fixture format written by [`CiSystem::to_text`]:
    ///
    /// ```text
    /// # comment
    /// K <users>
    /// Nt <antennas>
    /// modulation <name>
    /// gamma <K reals>
    /// sigma <K reals>
    /// A <rows> <cols>
    /// <cols reals>          (repeated rows times)
    /// b <rows reals>
    /// eqMask <rows 0/1 flags>
    /// ```
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("unexpected end of input, expected '{key}'"),
            })?;
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap_or_default();
            if !key.is_empty() && head != key {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected '{key}', found '{head}'"),
                });
            }
            let rest: Vec<String> = if key.is_empty() {
                line.split_whitespace().map(String::from).collect()
            } else {
                toks.map(String::from).collect()
            };
            Ok((ln, rest))
        };
        fn reals(ln: usize, toks: &[String]) -> Result<Vec<f64>> {
            toks.iter()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: ln,
                        msg: format!("bad number '{t}'"),
                    })
                })
                .collect()
        }
        fn count(ln: usize, toks: &[String], n: usize) -> Result<()> {
            if toks.len() != n {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {n} values, found {}", toks.len()),
                });
            }
            Ok(())
        }
        let (ln, k) = next("K")?;
        count(ln, &k, 1)?;
        let users = reals(ln, &k)?[0] as usize;
        let (ln, nt) = next("Nt")?;
        count(ln, &nt, 1)?;
        let antennas = reals(ln, &nt)?[0] as usize;
        let (ln, m) = next("modulation")?;
        count(ln, &m, 1)?;
        let modulation = m[0].clone();
        let (ln, g) = next("gamma")?;
        count(ln, &g, users)?;
        let gamma = reals(ln, &g)?;
        let (ln, s) = next("sigma")?;
        count(ln, &s, users)?;
        let sigma = reals(ln, &s)?;
        let (ln, dims) = next("A")?;
        count(ln, &dims, 2)?;
        let d = reals(ln, &dims)?;
        let (rows, cols) = (d[0] as usize, d[1] as usize);
        if cols != 2 * antennas {
            return Err(Error::Parse {
                line: ln,
                msg: format!("A has {cols} columns but Nt = {antennas}"),
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = next("")?;
            count(ln, &row, cols)?;
            data.extend(reals(ln, &row)?);
        }
        let a = DMatrix::from_row_slice(rows, cols, &data);
        let (ln, bt) = next("b")?;
        count(ln, &bt, rows)?;
        let b = DVector::from_vec(reals(ln, &bt)?);
        let (ln, mt) = next("eqMask")?;
        count(ln, &mt, rows)?;
        let eq_mask = mt
            .iter()
            .map(|t| match t.as_str() {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::Parse {
                    line: ln,
                    msg: format!("bad mask flag '{t}'"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(a, b, eq_mask, gamma, sigma, &modulation)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Builds the CI system for one symbol slot.
///
/// `symbols[k]` is the symbol intended for user `k`; `gamma` holds SINR
/// thresholds (PM) or SB weights, `sigma` the noise standard deviations.
pub fn build_ci_system(
    channel: &ComplexChannel,
    symbols: &[Complex64],
    spec: &ConstellationSpec,
    gamma: &[f64],
    sigma: &[f64],
) -> Result<CiSystem> {
    let users = channel.users();
    let nt = channel.antennas();
    if symbols.len() != users || gamma.len() != users || sigma.len() != users {
        return Err(Error::dim(format!(
            "{users} users but {} symbols, {} gamma, {} sigma",
            symbols.len(),
            gamma.len(),
            sigma.len()
        )));
    }
    if let Some(g) = gamma.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::param(format!("gamma must be positive, got {g}")));
    }
    if let Some(s) = sigma.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::param(format!("sigma must be positive, got {s}")));
    }
    let bpsk = spec.kind() == ModulationKind::Psk && spec.order() == 2;
    let rows_per_user = if bpsk { 1 } else { 2 };
    let cone = match spec.kind() {
        ModulationKind::Psk if !bpsk => Some(psk_cone_matrix(spec.order())?),
        _ => None,
    };

    let mut a = DMatrix::zeros(rows_per_user * users, 2 * nt);
    let mut b = DVector::zeros(rows_per_user * users);
    let mut eq_mask = vec![false; rows_per_user * users];
    for k in 0..users {
        let s = symbols[k];
        let (re_dof, im_dof) = spec.ci_dof(s)?;
        let hk = complex_to_real_channel(&channel.row(k));
        let block = match spec.kind() {
            ModulationKind::Psk => {
                let sk = symbol_rotation(s)?;
                match cone {
                    Some(t) => dyn2(&(t * sk)) * &hk,
                    None => (dyn2(&sk) * &hk).rows(0, 1).into_owned(),
                }
            }
            ModulationKind::SquareQam => {
                let d = Matrix2::new(1.0 / s.re, 0.0, 0.0, 1.0 / s.im);
                dyn2(&d) * &hk
            }
        };
        let r0 = rows_per_user * k;
        a.rows_mut(r0, rows_per_user).copy_from(&block);
        let thr = gamma[k].sqrt() * sigma[k];
        for r in 0..rows_per_user {
            b[r0 + r] = thr;
        }
        eq_mask[r0] = re_dof == Dof::Equality;
        if rows_per_user == 2 {
            eq_mask[r0 + 1] = im_dof == Dof::Equality;
        }
    }
    if users > 2 * nt {
        // over-loaded: solvable in principle, but the experiments assume K ≤ 2N_t
        eprintln!("warning: {users} users exceed 2·N_t = {}", 2 * nt);
    }
    CiSystem::from_parts(a, b, eq_mask, gamma.to_vec(), sigma.to_vec(), &spec.name())
}

fn dyn2(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// One block per real coordinate (N = 2N_t).
    PerScalar,
    /// Real and imaginary part of each antenna together (N = N_t).
    PerAntenna,
    /// N equal-width runs of consecutive coordinates.
    Contiguous(usize),
}

impl std::str::FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "scalar" | "per-scalar" => Ok(Self::PerScalar),
            "antenna" | "per-antenna" => Ok(Self::PerAntenna),
            _ => s
                .strip_prefix("contiguous:")
                .and_then(|n| n.parse().ok())
                .map(Self::Contiguous)
                .ok_or_else(|| Error::param(format!("unknown partition '{s}'"))),
        }
    }
}

impl std::fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PerScalar => write!(f, "scalar"),
            Self::PerAntenna => write!(f, "antenna"),
            Self::Contiguous(n) => write!(f, "contiguous:{n}"),
        }
    }
}

/// Column index sets `E_i` splitting `x` into blocks `x_i = E_iᵀ x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn new(cols: usize, strategy: PartitionStrategy) -> Result<Self> {
        if cols == 0 || !cols.is_multiple_of(2) {
            return Err(Error::dim(format!("cannot partition {cols} columns")));
        }
        let nt = cols / 2;
        let blocks = match strategy {
            PartitionStrategy::PerScalar => (0..cols).map(|c| vec![c]).collect(),
            PartitionStrategy::PerAntenna => (0..nt).map(|i| vec![i, i + nt]).collect(),
            PartitionStrategy::Contiguous(n) => {
                if n == 0 || !cols.is_multiple_of(n) {
                    return Err(Error::param(format!(
                        "{n} blocks do not divide {cols} columns"
                    )));
                }
                let w = cols / n;
                (0..n).map(|i| (i * w..(i + 1) * w).collect()).collect()
            }
        };
        Ok(Self { blocks })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn width(&self, i: usize) -> usize {
        self.blocks[i].len()
    }

    pub fn total_width(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// `A_i = A E_i`.
    pub fn block_matrix(&self, a: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
        a.select_columns(self.blocks[i].iter())
    }

    /// `x_i = E_iᵀ x`.
    pub fn block_vector(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        DVector::from_iterator(self.blocks[i].len(), self.blocks[i].iter().map(|&c| x[c]))
    }
}
