//! Parameterised program skeletons for the scripted planner.

use serde::{Deserialize, Serialize};
use std::fmt;

/// FGGM every template draws its parameters from.
pub const BOUNDED_PARAM: &str = include_str!("../../assets/bounded_param.fggm");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Family {
    Affine,
    PowerGuarded,
    Trig,
    ExpDecay,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Affine => "affine",
            Family::PowerGuarded => "power-guarded",
            Family::Trig => "trig",
            Family::ExpDecay => "exp-decay",
        })
    }
}

/// Interval a parameter is confined to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Bracket { name: name.to_string(), lo, hi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateVariant {
    pub family: Family,
    pub brackets: Vec<Bracket>,
}

fn lit(v: f64) -> String {
    format!("{v:?}")
}

impl TemplateVariant {
    pub fn new(family: Family, brackets: &[(&str, f64, f64)]) -> Self {
        TemplateVariant { family, brackets: brackets.iter().map(|&(n, l, u)| Bracket::new(n, l, u)).collect() }
    }

    fn b(&self, i: usize) -> (String, String) {
        (lit(self.brackets[i].lo), lit(self.brackets[i].hi))
    }

    /// Same family and every bracket of `self` contains the matching bracket
    /// of `other`. A counterexample against `other` is then also one against
    /// `self`.
    pub fn contains(&self, other: &TemplateVariant) -> bool {
        self.family == other.family
            && self.brackets.len() == other.brackets.len()
            && self.brackets.iter().zip(&other.brackets).all(|(a, b)| a.lo <= b.lo && b.hi <= a.hi)
    }

    pub fn label(&self) -> String {
        let bs: Vec<String> = self.brackets.iter().map(|b| format!("{}∈[{}, {}]", b.name, lit(b.lo), lit(b.hi))).collect();
        format!("{} ({})", self.family, bs.join(", "))
    }

    /// Program text for this variant.
    pub fn render(&self) -> String {
        match self.family {
            Family::Affine => {
                let ((la, ua), (lb, ub)) = (self.b(0), self.b(1));
                format!(
                    "function agent(x: real): (real) {{
  var a: real := boundedParam({la}, {ua});
  var b: real := boundedParam({lb}, {ub});
  var linear_x: real := a * x;
  var y: real := linear_x + b;
  return y;
}}
"
                )
            }
            Family::PowerGuarded => {
                let ((la, ua), (ld, ud)) = (self.b(0), self.b(1));
                format!(
                    "function agent(x: real): (real) {{
  if (x <= 0.0) {{ return 0.0; }}
  var a: real := boundedParam({la}, {ua});
  var d: real := boundedParam({ld}, {ud});
  assert x >= 0.0;
  var pow_x: real := pow(x, d);
  assert (d <= {ud}); assert (d >= {ld});
  assert (x <= 1.0) ==> (pow_x >= pow(x, {ud}));
  assert (x >= 1.0) ==> (pow_x >= pow(x, {ld}));
  assert (x >= 0.0) ==> (pow(x, 0.5) == sqrt(x));
  var y: real := a * pow_x;
  return y;
}}
"
                )
            }
            Family::Trig => {
                let ((la, ua), (lw, uw), (lb, ub)) = (self.b(0), self.b(1), self.b(2));
                format!(
                    "function agent(x: real): (real) {{
  var a: real := boundedParam({la}, {ua});
  var w: real := boundedParam({lw}, {uw});
  var b: real := boundedParam({lb}, {ub});
  var s: real := sin(w * x);
  var wave: real := a * s;
  assert -{ua} <= wave && wave <= {ua};
  var y: real := wave + b;
  return y;
}}
"
                )
            }
            Family::ExpDecay => {
                let ((la, ua), (lk, uk)) = (self.b(0), self.b(1));
                format!(
                    "function agent(x: real): (real) {{
  var a: real := boundedParam({la}, {ua});
  var k: real := boundedParam({lk}, {uk});
  var rate: real := k * x;
  assert rate >= 0.0;
  var decay: real := exp(-rate);
  assert 0.0 <= decay && decay <= 1.0;
  var y: real := a * decay;
  return y;
}}
"
                )
            }
        }
    }
}

/// The fixed enumeration order of the scripted planner.
pub fn default_variants() -> Vec<TemplateVariant> {
    vec![
        TemplateVariant::new(Family::Affine, &[("a", 0.5, 1.0), ("b", 0.25, 1.0)]),
        TemplateVariant::new(Family::Affine, &[("a", 0.0, 1.0), ("b", 0.0, 1.0)]),
        TemplateVariant::new(Family::PowerGuarded, &[("a", 1.0, 1.5), ("d", 0.5, 0.8)]),
        TemplateVariant::new(Family::PowerGuarded, &[("a", 0.5, 1.0), ("d", 1.0, 2.0)]),
        TemplateVariant::new(Family::Trig, &[("a", 0.5, 1.6), ("w", 0.5, 1.5), ("b", -0.4, 0.4)]),
        TemplateVariant::new(Family::ExpDecay, &[("a", 1.0, 3.0), ("k", 0.1, 2.0)]),
    ]
}
