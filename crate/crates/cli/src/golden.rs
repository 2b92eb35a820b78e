//! Expected values of the worked example and their comparison with a
//! freshly computed [`WorkedExample`].

use anyhow::{Context, Result};
use dqg_core::example::{Pair64, WorkedExample};
use serde::{Deserialize, Serialize};

/// The bundled expected-value table.
pub const WORKED_EXAMPLE_TOML: &str = include_str!("../data/worked_example.toml");

#[derive(Clone, Debug, Deserialize)]
pub struct Golden {
    pub sites: Vec<String>,
    pub paths: Vec<String>,
    pub z: Vec<Pair64>,
    pub factors: Vec<GoldenFactor>,
    pub amplitudes: GoldenAmplitudes,
    pub measures: GoldenMeasures,
    pub decoherence: GoldenDecoherence,
}

#[derive(Clone, Debug, Deserialize)]
pub struct GoldenFactor {
    pub parent: String,
    pub child: String,
    pub value: Pair64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct GoldenAmplitudes {
    pub paths: Vec<Pair64>,
    pub sum: Pair64,
    pub sites: Vec<Pair64>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct GoldenMeasures {
    pub paths: Vec<f64>,
    pub x6: f64,
    pub x4_x5: f64,
    pub x5_x6: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct GoldenDecoherence {
    pub paths_re: Vec<Vec<f64>>,
    pub sites_re: Vec<Vec<f64>>,
}

impl Golden {
    pub fn bundled() -> Result<Golden> {
        Golden::parse(WORKED_EXAMPLE_TOML).context("parsing the bundled worked-example table")
    }

    pub fn parse(text: &str) -> Result<Golden> {
        Ok(toml::from_str(text)?)
    }
}

/// One value that differs from its expectation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deviation {
    pub field: String,
    pub expected: String,
    pub actual: String,
    pub difference: f64,
}

#[derive(Default)]
struct Comparer {
    tol: f64,
    checked: usize,
    max_difference: f64,
    deviations: Vec<Deviation>,
}

impl Comparer {
    fn text(&mut self, field: String, expected: &str, actual: &str) {
        self.checked += 1;
        if expected != actual {
            self.deviations.push(Deviation {
                field,
                expected: expected.to_string(),
                actual: actual.to_string(),
                difference: f64::INFINITY,
            });
        }
    }

    fn complex(&mut self, field: String, expected: Pair64, actual: Pair64) {
        self.checked += 1;
        let d = (expected[0] - actual[0]).hypot(expected[1] - actual[1]);
        self.max_difference = self.max_difference.max(d);
        if d.is_nan() || d > self.tol {
            self.deviations.push(Deviation {
                field,
                expected: format!("{:?}", expected),
                actual: format!("{:?}", actual),
                difference: d,
            });
        }
    }

    fn real(&mut self, field: String, expected: f64, actual: f64) {
        self.complex(field, [expected, 0.0], [actual, 0.0]);
    }

    fn length(&mut self, field: &str, expected: usize, actual: usize) -> bool {
        if expected != actual {
            self.text(format!("{field}.len"), &expected.to_string(), &actual.to_string());
            return false;
        }
        true
    }
}

/// Outcome of comparing computed values against the table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub tolerance: f64,
    pub checked: usize,
    pub max_difference: f64,
    pub deviations: Vec<Deviation>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.deviations.is_empty()
    }
}

pub fn compare(ex: &WorkedExample, golden: &Golden, tol: f64) -> Comparison {
    let mut c = Comparer { tol, ..Default::default() };
    if c.length("sites", golden.sites.len(), ex.sites.len()) {
        for (k, (e, a)) in golden.sites.iter().zip(&ex.sites).enumerate() {
            c.text(format!("sites[{}]", k + 1), e, a);
        }
    }
    if c.length("paths", golden.paths.len(), ex.paths.len()) {
        for (k, (e, a)) in golden.paths.iter().zip(&ex.paths).enumerate() {
            c.text(format!("paths[{}]", k + 1), e, a);
        }
    }
    if c.length("z", golden.z.len(), ex.z.len()) {
        for (k, (&e, &a)) in golden.z.iter().zip(&ex.z).enumerate() {
            c.complex(format!("z[{}]", k + 1), e, a);
        }
    }
    if c.length("factors", golden.factors.len(), ex.factors.len()) {
        for (e, a) in golden.factors.iter().zip(&ex.factors) {
            let key = format!("factor({} -> {})", e.parent, e.child);
            c.text(format!("{key}.parent"), &e.parent, &a.parent);
            c.text(format!("{key}.child"), &e.child, &a.child);
            c.complex(key, e.value, a.value);
        }
    }
    if c.length("amplitudes.paths", golden.amplitudes.paths.len(), ex.amplitudes.len()) {
        for (k, (&e, &a)) in golden.amplitudes.paths.iter().zip(&ex.amplitudes).enumerate() {
            c.complex(format!("amplitudes.paths[{}]", k + 1), e, a);
        }
    }
    c.complex("amplitudes.sum".into(), golden.amplitudes.sum, ex.sum_amplitudes);
    if c.length("amplitudes.sites", golden.amplitudes.sites.len(), ex.site_amplitudes.len()) {
        for (k, (&e, &a)) in golden.amplitudes.sites.iter().zip(&ex.site_amplitudes).enumerate() {
            c.complex(format!("amplitudes.sites[{}]", k + 1), e, a);
        }
    }
    if c.length("measures.paths", golden.measures.paths.len(), ex.mu_paths.len()) {
        for (k, (&e, &a)) in golden.measures.paths.iter().zip(&ex.mu_paths).enumerate() {
            c.real(format!("measures.paths[{}]", k + 1), e, a);
        }
    }
    c.real("measures.x6".into(), golden.measures.x6, ex.mu_x6);
    c.real("measures.x4_x5".into(), golden.measures.x4_x5, ex.mu_x4_x5);
    c.real("measures.x5_x6".into(), golden.measures.x5_x6, ex.mu_x5_x6);
    for (name, expected, actual) in [
        ("decoherence.paths", &golden.decoherence.paths_re, &ex.path_decoherence),
        ("decoherence.sites", &golden.decoherence.sites_re, &ex.site_decoherence),
    ] {
        if !c.length(name, expected.len(), actual.len()) {
            continue;
        }
        for (i, (er, ar)) in expected.iter().zip(actual).enumerate() {
            if !c.length(&format!("{name}[{}]", i + 1), er.len(), ar.len()) {
                continue;
            }
            for (j, (&e, &a)) in er.iter().zip(ar).enumerate() {
                c.complex(format!("{name}[{}][{}]", i + 1, j + 1), [e, 0.0], a);
            }
        }
    }
    Comparison { tolerance: tol, checked: c.checked, max_difference: c.max_difference, deviations: c.deviations }
}
