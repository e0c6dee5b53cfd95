use serde::Serialize;
use serde_json::{json, Value};
use snode_core::matcore::{CMatrix, C64};

/// Comparison a check asserts between its value and bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

impl Relation {
    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Below => value < bound,
            Relation::Above => value > bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
            Relation::Above => ">",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Equation or result label the check verifies.
    pub tag: &'static str,
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn describe(&self) -> String {
        match &self.error {
            Some(e) => format!("[{}] {}: {e}", self.tag, self.name),
            None => format!(
                "[{}] {}: {:.6e} {} {:.6e}",
                self.tag,
                self.name,
                self.value,
                self.relation.symbol(),
                self.bound
            ),
        }
    }
}

/// Collects checks; tolerances are multiplied by `scale`.
#[derive(Debug)]
pub struct Checks {
    scale: f64,
    items: Vec<Check>,
}

impl Checks {
    pub fn new(scale: f64) -> Self {
        Self {
            scale,
            items: Vec::new(),
        }
    }

    fn push(&mut self, tag: &'static str, name: &str, value: f64, relation: Relation, bound: f64) {
        self.items.push(Check {
            tag,
            name: name.to_string(),
            value,
            relation,
            bound,
            pass: relation.holds(value, bound),
            error: None,
        });
    }

    /// `value <= tol * scale`.
    pub fn at_most(&mut self, tag: &'static str, name: &str, value: f64, tol: f64) {
        self.push(tag, name, value, Relation::AtMost, tol * self.scale);
    }

    /// `value >= -tol * scale`.
    pub fn nonnegative(&mut self, tag: &'static str, name: &str, value: f64, tol: f64) {
        self.push(tag, name, value, Relation::AtLeast, -tol * self.scale);
    }

    /// Strict `value < bound`, unscaled.
    pub fn below(&mut self, tag: &'static str, name: &str, value: f64, bound: f64) {
        self.push(tag, name, value, Relation::Below, bound);
    }

    /// Strict `value > bound`, unscaled.
    pub fn above(&mut self, tag: &'static str, name: &str, value: f64, bound: f64) {
        self.push(tag, name, value, Relation::Above, bound);
    }

    /// Records a failed check for a computation that raised an error.
    pub fn failed(&mut self, tag: &'static str, name: &str, err: impl ToString) {
        self.items.push(Check {
            tag,
            name: name.to_string(),
            value: f64::NAN,
            relation: Relation::AtMost,
            bound: f64::NAN,
            pass: false,
            error: Some(err.to_string()),
        });
    }

    pub fn into_vec(self) -> Vec<Check> {
        self.items
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub input: String,
    pub grid: usize,
    pub quad: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub data: Value,
}

pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

/// Matrix as a list of rows of `[re, im]`.
pub fn matrix(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array((0..m.cols()).map(|j| complex(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn matrices(ms: &[CMatrix]) -> Value {
    Value::Array(ms.iter().map(matrix).collect())
}
