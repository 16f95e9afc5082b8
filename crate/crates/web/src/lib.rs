//! Browser bindings: every entry point takes plain numbers and strings and
//! returns a JSON string for the page to plot.

use conjset::prescribe::{
    build_prescribed_with, vanishing_function, ClosedSetDescriptor, PrescribeOptions, ScalarCurve, VanishingOptions,
};
use conjset::sds::{conjugate_instants, AnalyticId, ConjugateReport, SympDiffSystem};
use conjset::Grid;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use wasm_bindgen::prelude::*;

/// At most this many points go back to the page per curve.
const PLOT_POINTS: usize = 1024;

fn thin<T: Copy>(v: &[T]) -> Vec<T> {
    let stride = v.len().div_ceil(PLOT_POINTS).max(1);
    let mut out: Vec<T> = v.iter().step_by(stride).copied().collect();
    if !(v.len() - 1).is_multiple_of(stride) {
        out.push(v[v.len() - 1]);
    }
    out
}

fn report_json(r: &ConjugateReport) -> Value {
    let times = r.times();
    json!({
        "instants": r.instants.iter().map(|i| json!({"t": i.t, "multiplicity": i.multiplicity, "signature": i.signature})).collect::<Vec<_>>(),
        "clusters": r.clusters.iter().map(|c| [c.lo, c.hi]).collect::<Vec<_>>(),
        "times": thin(&times),
        "d": thin(&r.d_trace),
    })
}

fn grid_ok(grid: usize) -> Result<(), String> {
    if (64..=1 << 16).contains(&grid) {
        Ok(())
    } else {
        Err(format!("grid must lie between 64 and 65536, got {grid}"))
    }
}

pub fn oscillator_json(omega: f64, b: f64, grid: usize) -> Result<String, String> {
    grid_ok(grid)?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err("omega must be positive".into());
    }
    let mut params = BTreeMap::new();
    params.insert("omega".to_string(), omega);
    let grid = Grid::new(0.0, b, grid).map_err(|e| e.to_string())?;
    let sys = SympDiffSystem::from_id(1, grid, AnalyticId { id: "oscillator".into(), params }).map_err(|e| e.to_string())?;
    let r = conjugate_instants(&sys).map_err(|e| e.to_string())?;
    let expected: Vec<f64> =
        (1..).map(|k| k as f64 * std::f64::consts::PI / omega).take_while(|&t| t <= b).collect();
    let mut out = report_json(&r);
    out["expected"] = json!(expected);
    Ok(out.to_string())
}

pub fn vanishing_json(set: &str, a: f64, b: f64, grid: usize, amplitude: f64, width_steps: f64) -> Result<String, String> {
    grid_ok(grid)?;
    let set = ClosedSetDescriptor::parse(set, a, b).map_err(|e| e.to_string())?;
    let h = (b - a) / grid as f64;
    let f = vanishing_function(&set, VanishingOptions { amplitude, width: width_steps * h }).map_err(|e| e.to_string())?;
    let times: Vec<f64> = (0..=grid).map(|k| a + k as f64 * h).collect();
    let values: Vec<f64> = times.iter().map(|&t| f.value(t)).collect();
    Ok(json!({"times": thin(&times), "f": thin(&values), "intervals": set.intervals}).to_string())
}

pub fn prescribe_json(set: &str, a: f64, b: f64, grid: usize) -> Result<String, String> {
    grid_ok(grid)?;
    let set = ClosedSetDescriptor::parse(set, a, b).map_err(|e| e.to_string())?;
    let opts = PrescribeOptions { grid_n: grid, ..PrescribeOptions::default() };
    let p = build_prescribed_with(&set, &opts).map_err(|e| e.to_string())?;
    let mut out = report_json(&p.report);
    out["pass"] = json!(p.passed());
    out["max_edge_steps"] = json!(p.comparison.max_edge_steps);
    out["abstract_index"] = json!(p.index.index);
    out["intervals"] = json!(set.intervals);
    Ok(out.to_string())
}

/// Conjugate instants of `v″ = −ω² v` on `[0, b]`.
#[wasm_bindgen]
pub fn oscillator(omega: f64, b: f64, grid: usize) -> Result<String, JsError> {
    oscillator_json(omega, b, grid).map_err(|e| JsError::new(&e))
}

/// Samples of the nonnegative function vanishing exactly on the set.
#[wasm_bindgen]
pub fn vanishing(set: &str, a: f64, b: f64, grid: usize, amplitude: f64, width_steps: f64) -> Result<String, JsError> {
    vanishing_json(set, a, b, grid, amplitude, width_steps).map_err(|e| JsError::new(&e))
}

/// Full construction for the set and the detected conjugate instants.
#[wasm_bindgen]
pub fn prescribe(set: &str, a: f64, b: f64, grid: usize) -> Result<String, JsError> {
    prescribe_json(set, a, b, grid).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn oscillator_instants_are_multiples_of_pi_over_omega() {
        let v = parse(&oscillator_json(2.0, 5.0, 1024).unwrap());
        let got: Vec<f64> = v["instants"].as_array().unwrap().iter().map(|i| i["t"].as_f64().unwrap()).collect();
        let want: Vec<f64> = v["expected"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(got.len(), 3);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6);
        }
        assert!(v["d"].as_array().unwrap().len() <= PLOT_POINTS + 1);
    }

    #[test]
    fn vanishing_samples_are_zero_on_the_set() {
        let v = parse(&vanishing_json("0.5;1:1.5", 0.0, 2.0, 256, 0.5, 15.0).unwrap());
        let t = v["times"].as_array().unwrap();
        let f = v["f"].as_array().unwrap();
        for (t, f) in t.iter().zip(f) {
            let (t, f) = (t.as_f64().unwrap(), f.as_f64().unwrap());
            if (1.0..=1.5).contains(&t) || t == 0.5 {
                assert_eq!(f, 0.0);
            } else {
                assert!(f > 0.0);
            }
        }
    }

    #[test]
    fn prescribed_point_is_found() {
        let v = parse(&prescribe_json("2.0", 0.0, 3.0, 1024).unwrap());
        assert_eq!(v["pass"], true);
        assert_eq!(v["instants"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(prescribe_json("0.0", 0.0, 1.0, 1024).is_err());
        assert!(oscillator_json(-1.0, 1.0, 1024).is_err());
        assert!(vanishing_json("", 0.0, 1.0, 8, 0.5, 15.0).is_err());
    }

    #[test]
    fn thinning_keeps_the_endpoints() {
        let v: Vec<usize> = (0..=5000).collect();
        let t = thin(&v);
        assert!(t.len() <= PLOT_POINTS + 1);
        assert_eq!((t[0], *t.last().unwrap()), (0, 5000));
    }
}
