use serde::{Deserialize, Serialize};

use crate::model::{PowerFlowState, ValidationReport};
use crate::sweep::FeasibilityReport;

/// Operating point with complex quantities split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub s0_re: f64,
    pub s0_im: f64,
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    pub s_re: Vec<f64>,
    pub s_im: Vec<f64>,
}

impl From<&PowerFlowState> for StateRecord {
    fn from(st: &PowerFlowState) -> Self {
        Self {
            s0_re: st.s0.re,
            s0_im: st.s0.im,
            v: st.v.clone(),
            l: st.l.clone(),
            s_re: st.s.iter().map(|s| s.re).collect(),
            s_im: st.s.iter().map(|s| s.im).collect(),
        }
    }
}

/// Outcome of one CLI command.
///
/// Any command that produces an operating point also carries the full residual set of
/// that point, so results can be re-verified without this crate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultDocument {
    pub command: String,
    pub status: String,
    /// `None` when no finite objective value exists.
    pub objective: Option<f64>,
    pub assignment: Option<Vec<f64>>,
    pub state: Option<StateRecord>,
    pub report: Option<FeasibilityReport>,
    pub validation: Option<ValidationReport>,
    pub guess_count_log10: Option<f64>,
    pub guesses_evaluated: Option<usize>,
    pub wall_time_s: f64,
    /// Command-specific extras.
    #[serde(default)]
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl ResultDocument {
    pub fn new(command: &str, status: &str) -> Self {
        Self {
            command: command.to_string(),
            status: status.to_string(),
            ..Self::default()
        }
    }

    pub fn with_state(mut self, st: &PowerFlowState, report: FeasibilityReport) -> Self {
        self.assignment = Some(st.x.clone());
        self.state = Some(StateRecord::from(st));
        self.report = Some(report);
        self
    }

    pub fn set_objective(&mut self, value: f64) {
        self.objective = value.is_finite().then_some(value);
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.details.insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("result documents serialize");
        out.push('\n');
        out
    }

    /// A few lines for a terminal.
    pub fn summary(&self) -> String {
        let mut out = format!("{}: {}", self.command, self.status);
        if let Some(v) = self.objective {
            out.push_str(&format!("\n  objective      {v:.9}"));
        }
        if let Some(x) = &self.assignment {
            let served = x.iter().filter(|&&v| v >= 0.5).count();
            out.push_str(&format!("\n  users served   {served} of {}", x.len()));
        }
        if let Some(r) = &self.report {
            out.push_str(&format!(
                "\n  feasible       {} (exactness {:.2e}, integrality {:.2e})",
                r.feasible && r.integral,
                r.exactness,
                r.integrality
            ));
        }
        if let Some(g) = self.guess_count_log10 {
            out.push_str(&format!("\n  guess count    10^{g:.1}"));
        }
        if let Some(n) = self.guesses_evaluated {
            out.push_str(&format!("\n  guesses run    {n}"));
        }
        out.push_str(&format!("\n  wall time      {:.3} s", self.wall_time_s));
        out
    }
}
