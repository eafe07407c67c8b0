use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Why a branch segment ended at a given row. Interior rows carry `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermCause {
    None,
    EndOfGrid,
    DeadEnd,
    NoConvergence,
    Gap,
}

impl TermCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            TermCause::None => "none",
            TermCause::EndOfGrid => "end_of_grid",
            TermCause::DeadEnd => "dead_end",
            TermCause::NoConvergence => "no_convergence",
            TermCause::Gap => "gap",
        }
    }
}

impl fmt::Display for TermCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TermCause {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "none" => TermCause::None,
            "end_of_grid" => TermCause::EndOfGrid,
            "dead_end" => TermCause::DeadEnd,
            "no_convergence" => TermCause::NoConvergence,
            "gap" => TermCause::Gap,
            other => return Err(format!("unknown termination cause '{other}'")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub abs_u0: f64,
    pub lambda: f64,
    pub branch_id: u32,
    pub fold_flag: bool,
    pub term_cause: TermCause,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCurve {
    pub eps: f64,
    pub points: Vec<CurvePoint>,
}

impl BifurcationCurve {
    pub fn new(eps: f64) -> Self {
        BifurcationCurve { eps, points: Vec::new() }
    }

    pub fn push(&mut self, alpha: f64, lambda: f64, branch_id: u32) {
        self.points.push(CurvePoint { alpha, abs_u0: -alpha, lambda, branch_id, fold_flag: false, term_cause: TermCause::None });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn folds(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(|p| p.fold_flag)
    }

    pub fn last_cause(&self) -> Option<TermCause> {
        self.points.last().map(|p| p.term_cause)
    }

    /// Flags interior points where λ, viewed as a function of the row index
    /// within one branch segment, has a local extremum.
    pub fn mark_folds_by_lambda(&mut self) {
        let n = self.points.len();
        for i in 1..n.saturating_sub(1) {
            let (a, b, c) = (self.points[i - 1], self.points[i], self.points[i + 1]);
            if a.branch_id != b.branch_id || b.branch_id != c.branch_id {
                continue;
            }
            let d1 = b.lambda - a.lambda;
            let d2 = c.lambda - b.lambda;
            if d1 * d2 < 0.0 {
                self.points[i].fold_flag = true;
            }
        }
    }
}
