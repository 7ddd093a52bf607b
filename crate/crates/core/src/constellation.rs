//! Normalized PSK and square-QAM constellations.
//!
//! Point conventions are fixed so that BER numbers are reproducible:
//!
//! * M-PSK points sit at angles `π/M + 2πm/M`, so QPSK is `{(±1±j)/√2}`
//!   and coincides with the four corners of any square QAM.
//! * Square M-QAM uses the odd-integer grid `{±1, ±3, …}` on each axis,
//!   divided by `√(2(M−1)/3)` for unit average energy.
//! * Labels are reflected-Gray: `m ^ (m >> 1)` along the PSK circle, and
//!   independently per axis for QAM (in-phase bits are the high bits).

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance used to decide whether a coordinate attains the maximum amplitude.
const AMP_TOL: f64 = 1e-12;
/// Tolerance used to match a complex value against the point set.
const MEMBER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModulationKind {
    Psk,
    SquareQam,
}

impl ModulationKind {
    fn name(self) -> &'static str {
        match self {
            ModulationKind::Psk => "PSK",
            ModulationKind::SquareQam => "QAM",
        }
    }
}

/// Whether a real coordinate of a symbol can be pushed away from its
/// decision boundary (`Inequality`) or is pinned (`Equality`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dof {
    Inequality,
    Equality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSpec {
    kind: ModulationKind,
    order: usize,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    max_amp: f64,
}

fn gray(m: usize) -> u32 {
    (m ^ (m >> 1)) as u32
}

impl ConstellationSpec {
    pub fn new(kind: ModulationKind, order: usize) -> Result<Self> {
        let bad = || Error::InvalidOrder {
            kind: kind.name(),
            order,
        };
        if order < 2 || !order.is_power_of_two() {
            return Err(bad());
        }
        let (points, labels) = match kind {
            ModulationKind::Psk => {
                let m = order as f64;
                (0..order)
                    .map(|i| {
                        let phase = PI / m + 2.0 * PI * i as f64 / m;
                        (Complex64::from_polar(1.0, phase), gray(i))
                    })
                    .unzip::<_, _, Vec<_>, Vec<_>>()
            }
            ModulationKind::SquareQam => {
                // M = L², L a power of two; trailing_zeros is even iff M is a square.
                if !order.trailing_zeros().is_multiple_of(2) || order < 4 {
                    return Err(bad());
                }
                let side = 1usize << (order.trailing_zeros() / 2);
                let bits_per_axis = side.trailing_zeros();
                let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
                let level = |i: usize| (2.0 * i as f64 - side as f64 + 1.0) / scale;
                let mut points = Vec::with_capacity(order);
                let mut labels = Vec::with_capacity(order);
                for i in 0..side {
                    for q in 0..side {
                        points.push(Complex64::new(level(i), level(q)));
                        labels.push((gray(i) << bits_per_axis) | gray(q));
                    }
                }
                (points, labels)
            }
        };
        let max_amp = points
            .iter()
            .flat_map(|p| [p.re.abs(), p.im.abs()])
            .fold(0.0, f64::max);
        Ok(Self {
            kind,
            order,
            points,
            labels,
            max_amp,
        })
    }

    pub fn psk(order: usize) -> Result<Self> {
        Self::new(ModulationKind::Psk, order)
    }

    pub fn qam(order: usize) -> Result<Self> {
        Self::new(ModulationKind::SquareQam, order)
    }

    /// Parses names such as `qpsk`, `bpsk`, `8psk`, `16qam`, `psk:8`, `qam:64`.
    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let invalid = || Error::param(format!("unknown modulation '{name}'"));
        match lower.as_str() {
            "bpsk" => return Self::psk(2),
            "qpsk" => return Self::psk(4),
            _ => {}
        }
        let (num, kind) = if let Some(rest) = lower.strip_prefix("psk:") {
            (rest, ModulationKind::Psk)
        } else if let Some(rest) = lower.strip_prefix("qam:") {
            (rest, ModulationKind::SquareQam)
        } else if let Some(rest) = lower.strip_suffix("psk") {
            (rest, ModulationKind::Psk)
        } else if let Some(rest) = lower.strip_suffix("qam") {
            (rest, ModulationKind::SquareQam)
        } else {
            return Err(invalid());
        };
        let order = num.parse::<usize>().map_err(|_| invalid())?;
        Self::new(kind, order)
    }

    /// Canonical short name, the inverse of [`ConstellationSpec::from_name`].
    pub fn name(&self) -> String {
        match (self.kind, self.order) {
            (ModulationKind::Psk, 2) => "bpsk".into(),
            (ModulationKind::Psk, 4) => "qpsk".into(),
            (ModulationKind::Psk, m) => format!("{m}psk"),
            (ModulationKind::SquareQam, m) => format!("{m}qam"),
        }
    }

    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Largest |Re| or |Im| over all points.
    pub fn max_amp(&self) -> f64 {
        self.max_amp
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    pub fn index_of(&self, symbol: Complex64) -> Option<usize> {
        self.points
            .iter()
            .position(|p| (p - symbol).norm() <= MEMBER_TOL)
    }

    /// Classifies which real coordinates of `symbol` can exploit constructive
    /// interference. Every PSK coordinate can; a QAM coordinate can only when
    /// it sits on the outer edge of the grid.
    pub fn ci_dof(&self, symbol: Complex64) -> Result<(Dof, Dof)> {
        if self.index_of(symbol).is_none() {
            return Err(Error::NotAConstellationPoint(symbol));
        }
        Ok(match self.kind {
            ModulationKind::Psk => (Dof::Inequality, Dof::Inequality),
            ModulationKind::SquareQam => {
                let dof = |v: f64| {
                    if (v.abs() - self.max_amp).abs() <= AMP_TOL {
                        Dof::Inequality
                    } else {
                        Dof::Equality
                    }
                };
                (dof(symbol.re), dof(symbol.im))
            }
        })
    }

    /// Minimum-distance detection; ties go to the lowest index.
    pub fn detect(&self, received: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (received - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Number of differing label bits between two point indices.
    pub fn bit_errors(&self, sent: usize, detected: usize) -> u32 {
        (self.labels[sent] ^ self.labels[detected]).count_ones()
    }

    pub fn random_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.order)
    }

    /// CSV dump with columns `index,re,im,bits`.
    pub fn to_csv(&self) -> String {
        let width = self.bits_per_symbol() as usize;
        let mut out = String::from("index,re,im,bits\n");
        for (i, (p, l)) in self.points.iter().zip(&self.labels).enumerate() {
            let _ = writeln!(out, "{i},{:e},{:e},{:0width$b}", p.re, p.im, l);
        }
        out
    }
}

/// K users × N_s slots of constellation indices, stored slot-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolFrame {
    users: usize,
    indices: Vec<usize>,
}

impl SymbolFrame {
    pub fn draw<R: Rng + ?Sized>(
        spec: &ConstellationSpec,
        users: usize,
        slots: usize,
        rng: &mut R,
    ) -> Self {
        let indices = (0..users * slots).map(|_| spec.random_index(rng)).collect();
        Self { users, indices }
    }

    pub fn from_indices(users: usize, indices: Vec<usize>) -> Result<Self> {
        if users == 0 || !indices.len().is_multiple_of(users) {
            return Err(Error::dim("frame length is not a multiple of the user count"));
        }
        Ok(Self { users, indices })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn slots(&self) -> usize {
        self.indices.len() / self.users
    }

    /// Point indices of every user in one slot.
    pub fn slot(&self, slot: usize) -> &[usize] {
        &self.indices[slot * self.users..(slot + 1) * self.users]
    }

    pub fn symbols(&self, spec: &ConstellationSpec, slot: usize) -> Vec<Complex64> {
        self.slot(slot).iter().map(|&i| spec.point(i)).collect()
    }
}
