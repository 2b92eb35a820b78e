//! The three-step worked example of the quantum-action process: partition
//! functions, transition factors, path and site amplitudes, q-measures and
//! decoherence matrices on Ω_3 and on the eight causets of size ≤ 3.

use serde::Serialize;

use crate::amplitude::{action_profile, action_table, path_amplitudes, site_amplitudes, AmplitudeError, AmplitudeProcess};
use crate::einstein::SiteDecoherence;
use crate::growth::{path_literal, Growth, PathSet, SetSpec, SiteId};
use crate::qmeasure::{Process, DEFAULT_TOL};
use crate::scalar::Complex;

/// Complex number as `[re, im]` for serialization.
pub type Pair64 = [f64; 2];

fn pair(z: Complex<f64>) -> Pair64 {
    [z.re, z.im]
}

#[derive(Clone, Debug, Serialize)]
pub struct Factor {
    pub parent: String,
    pub child: String,
    pub value: Pair64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WorkedExample {
    /// Causets `x_1 .. x_8` in canonical order.
    pub sites: Vec<String>,
    /// The six 3-paths `γ_1 .. γ_6`.
    pub paths: Vec<String>,
    /// `z(x_1), z(x_2), z(x_3)`.
    pub z: Vec<Pair64>,
    /// `ã(x,y)` for all transitions out of levels 1 and 2.
    pub factors: Vec<Factor>,
    pub amplitudes: Vec<Pair64>,
    pub sum_amplitudes: Pair64,
    pub mu_paths: Vec<f64>,
    pub mu_x6: f64,
    pub mu_x4_x5: f64,
    pub mu_x5_x6: f64,
    pub site_amplitudes: Vec<Pair64>,
    /// `D_3(γ_i, γ_j)`.
    pub path_decoherence: Vec<Vec<Pair64>>,
    /// `D(x_i, x_j)`.
    pub site_decoherence: Vec<Vec<Pair64>>,
}

/// Computes the worked example from scratch.
pub fn worked_example() -> Result<WorkedExample, AmplitudeError> {
    let g = Growth::build(4)?;
    let sites: Vec<String> = (1..=3).flat_map(|k| g.levels()[k - 1].causets.iter().map(|c| c.to_literal())).collect();
    let p3 = g.paths(3)?;
    let paths = (0..p3.len())
        .map(|p| {
            let cs: Vec<_> = p3.path(p).entries.iter().enumerate().map(|(k, &i)| g.causet(SiteId { level: k + 1, index: i }).clone()).collect();
            path_literal(&cs)
        })
        .collect();
    let z = [(1, 0), (2, 0), (2, 1)]
        .iter()
        .map(|&(level, index)| action_profile(&g, SiteId { level, index }).map(|p| pair(p.z_value())))
        .collect::<Result<_, _>>()?;
    let table = action_table::<f64>(&g, 2)?;
    let factors = table
        .to_entries(&g)
        .into_iter()
        .map(|e| Factor { parent: e.parent, child: e.child, value: [e.re, e.im] })
        .collect();
    let a3 = path_amplitudes(&g, &table, 3)?;
    let process = AmplitudeProcess::new(&g, table.clone(), "action", DEFAULT_TOL);
    let rho = process.operator(3)?;
    let tol = DEFAULT_TOL;
    let mu_paths = (0..p3.len())
        .map(|p| rho.q_measure(&PathSet::from_indices(3, p3.len(), [p]), tol))
        .collect::<Result<_, _>>()?;
    let mu_spec = |text: &str| -> Result<f64, AmplitudeError> {
        let spec = SetSpec::parse(text)?;
        let set = g.approximate(&spec, 3, Default::default())?;
        Ok(rho.q_measure(&set, tol)?)
    };
    let mu_x6 = mu_spec("site:3;0<1")?;
    let mu_x4_x5 = mu_spec("site:3;0<1,1<2+site:3;0<1,0<2")?;
    let mu_x5_x6 = mu_spec("site:3;0<1,0<2+site:3;0<1")?;
    let site_amplitudes = site_amplitudes(&g, &table, 3)?.concat().into_iter().map(pair).collect();
    let path_decoherence = (0..p3.len()).map(|i| (0..p3.len()).map(|j| pair(rho.entry(i, j))).collect()).collect();
    let sd = SiteDecoherence::from_process(&process, 3).map_err(|e| AmplitudeError::Invalid(e.to_string()))?;
    let site_decoherence = (0..sd.num_sites()).map(|i| (0..sd.num_sites()).map(|j| pair(sd.d(i, j))).collect()).collect();
    Ok(WorkedExample {
        sites,
        paths,
        z,
        factors,
        sum_amplitudes: pair(a3.sum()),
        amplitudes: a3.values.iter().copied().map(pair).collect(),
        mu_paths,
        mu_x6,
        mu_x4_x5,
        mu_x5_x6,
        site_amplitudes,
        path_decoherence,
        site_decoherence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let ex = worked_example().unwrap();
        assert_eq!(ex.paths[0], "1;|2;0<1|3;0<1,1<2");
        assert_eq!(ex.sites.len(), 8);
        assert_eq!(ex.factors.len(), 2 + 3 + 3);
        assert!((ex.mu_x5_x6 - 2.25).abs() < 1e-12);
        assert!(ex.mu_x4_x5.abs() < 1e-12);
        assert!((ex.mu_x6 - 1.0).abs() < 1e-12);
        assert!((ex.path_decoherence[0][1][0] + 0.25).abs() < 1e-12);
    }
}
