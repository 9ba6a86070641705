//! JSON schemas for states, measurements, assemblages and reports.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major arrays of
//! them. Assemblage and measurement elements are keyed `"x:a"`.

use serde_json::{json, Map, Value};

use crate::assemblage::{Assemblage, MeasurementSet};
use crate::certify::{CertificationReport, StateInput};
use crate::error::{Error, Result};
use crate::qmath::{BipartiteDims, ComplexMatrix, ComplexVector, DensityMatrix, Ket, C64};
use crate::robust::RobustnessRecord;
use crate::steerweight::SdpSolution;

/// Significant digits kept in reports.
pub const REPORT_DIGITS: usize = 12;

/// Rounds `x` to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Report formatting for a float: 12 significant digits, shortest round-trip text.
pub fn format_float(x: f64) -> String {
    let r = round_sig(x, REPORT_DIGITS);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

fn report_num(x: f64) -> Value {
    json!(round_sig(x, REPORT_DIGITS))
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub fn complex_to_json(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn complex_from_json(v: &Value) -> Result<C64> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => Err(invalid(format!("complex entries must be numbers, got {v}"))),
        },
        _ => Err(invalid(format!("complex number must be [re, im], got {v}"))),
    }
}

fn complex_list(v: &Value) -> Result<Vec<C64>> {
    v.as_array()
        .ok_or_else(|| invalid("expected an array of [re, im] pairs"))?
        .iter()
        .map(complex_from_json)
        .collect()
}

pub fn vector_to_json(v: &ComplexVector) -> Value {
    Value::Array(v.iter().map(|z| complex_to_json(*z)).collect())
}

/// Row-major array of `[re, im]`.
pub fn matrix_to_json(m: &ComplexMatrix) -> Value {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(complex_to_json(m[(i, j)]));
        }
    }
    Value::Array(out)
}

/// Reads an `n × n` row-major matrix.
pub fn matrix_from_json(v: &Value, n: usize) -> Result<ComplexMatrix> {
    let entries = complex_list(v)?;
    if entries.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
    }
    Ok(ComplexMatrix::from_row_slice(n, n, &entries))
}

fn get_count(obj: &Value, key: &str) -> Result<usize> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|n| n as usize)
        .ok_or_else(|| invalid(format!("missing or non-integer field \"{key}\"")))
}

fn element_map(
    d: usize,
    settings: usize,
    outcomes: usize,
    key: &str,
    elements: &[ComplexMatrix],
) -> Value {
    let mut map = Map::new();
    for x in 0..settings {
        for a in 0..outcomes {
            map.insert(format!("{x}:{a}"), matrix_to_json(&elements[x * outcomes + a]));
        }
    }
    let mut obj = Map::new();
    obj.insert("d".into(), json!(d));
    obj.insert("settings".into(), json!(settings));
    obj.insert("outcomes".into(), json!(outcomes));
    obj.insert(key.into(), Value::Object(map));
    Value::Object(obj)
}

fn read_elements(v: &Value, key: &str) -> Result<(usize, usize, usize, Vec<ComplexMatrix>)> {
    let d = get_count(v, "d")?;
    let settings = get_count(v, "settings")?;
    let outcomes = get_count(v, "outcomes")?;
    let map = v
        .get(key)
        .and_then(Value::as_object)
        .ok_or_else(|| invalid(format!("missing object field \"{key}\"")))?;
    if map.len() != settings * outcomes {
        return Err(invalid(format!(
            "\"{key}\" has {} entries, expected {}",
            map.len(),
            settings * outcomes
        )));
    }
    let mut out = Vec::with_capacity(settings * outcomes);
    for x in 0..settings {
        for a in 0..outcomes {
            let k = format!("{x}:{a}");
            let m = map.get(&k).ok_or_else(|| invalid(format!("missing element \"{k}\"")))?;
            out.push(matrix_from_json(m, d)?);
        }
    }
    Ok((d, settings, outcomes, out))
}

pub fn assemblage_to_json(asm: &Assemblage) -> Value {
    element_map(asm.d_b(), asm.settings(), asm.outcomes(), "sigma", asm.elements())
}

pub fn assemblage_from_json(v: &Value) -> Result<Assemblage> {
    let (d, settings, outcomes, sigma) = read_elements(v, "sigma")?;
    Assemblage::new(d, settings, outcomes, sigma)
}

pub fn measurements_to_json(meas: &MeasurementSet) -> Value {
    element_map(meas.d_a(), meas.settings(), meas.outcomes(), "projectors", meas.projectors())
}

pub fn measurements_from_json(v: &Value) -> Result<MeasurementSet> {
    let (d, settings, outcomes, projectors) = read_elements(v, "projectors")?;
    MeasurementSet::new(d, settings, outcomes, projectors)
}

pub fn ket_state_to_json(psi: &Ket, dims: BipartiteDims) -> Value {
    json!({"d_A": dims.a, "d_B": dims.b, "ket": vector_to_json(psi.amplitudes())})
}

pub fn rho_state_to_json(rho: &DensityMatrix, dims: BipartiteDims) -> Value {
    json!({"d_A": dims.a, "d_B": dims.b, "rho": matrix_to_json(rho.matrix())})
}

/// Reads `{"d_A", "d_B", "ket"}` or `{"d_A", "d_B", "rho"}`.
pub fn state_from_json(v: &Value) -> Result<(StateInput, BipartiteDims)> {
    let dims = BipartiteDims::new(get_count(v, "d_A")?, get_count(v, "d_B")?)?;
    match (v.get("ket"), v.get("rho")) {
        (Some(k), None) => {
            let amps = complex_list(k)?;
            if amps.len() != dims.joint() {
                return Err(Error::DimensionMismatch { expected: dims.joint(), got: amps.len() });
            }
            Ok((StateInput::Pure(Ket::new(ComplexVector::from_vec(amps))?), dims))
        }
        (None, Some(r)) => Ok((StateInput::Mixed(DensityMatrix::new(matrix_from_json(r, dims.joint())?)?), dims)),
        _ => Err(invalid("state needs exactly one of \"ket\" or \"rho\"")),
    }
}

pub fn parse(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| invalid(format!("malformed JSON: {e}")))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn certification_report_to_json(report: &CertificationReport) -> Value {
    let violations: Vec<Value> = report
        .subspace_violations
        .iter()
        .map(|v| {
            json!({
                "setting": v.setting,
                "pair": [v.pair.0, v.pair.1],
                "value": report_num(v.value),
                "raw_value": report_num(v.raw_value),
                "target": report_num(v.target),
                "beta": report_num(v.beta),
                "weight": report_num(v.weight),
            })
        })
        .collect();
    let fidelities: Vec<Value> = report
        .measurement_fidelities
        .iter()
        .map(|(&(x, m), &f)| json!({"setting": x, "block": m, "fidelity": report_num(f)}))
        .collect();
    let junk: Vec<Value> = report
        .junk
        .amplitudes()
        .iter()
        .map(|z| json!([round_sig(z.re, REPORT_DIGITS), round_sig(z.im, REPORT_DIGITS)]))
        .collect();
    json!({
        "passed": report.passed,
        "tol": report.tol,
        "structure_residual": report_num(report.structure_residual),
        "violation_residual": report_num(report.violation_residual),
        "sufficient_residual": report_num(report.sufficient_residual),
        "state_fidelity": report_num(report.state_fidelity),
        "subspace_violations": violations,
        "measurement_fidelities": fidelities,
        "junk": junk,
    })
}

pub fn sdp_solution_to_json(sol: &SdpSolution) -> Value {
    json!({
        "sw": report_num(sol.sw),
        "primal": report_num(sol.primal),
        "gap": report_num(sol.gap),
        "iterations": sol.iterations,
    })
}

pub const BOUNDS_CSV_HEADER: &str = "alpha,beta,local_bound,quantum_bound,bruteforce_local,numeric_quantum";

pub const ROBUST_CSV_HEADER: &str = "d,model,strength,epsilon,state_dist,state_bound,meas_dist_max,meas_bound,lemma2_max,lemma2_bound,lemma3_max,lemma3_bound,pass";

pub fn robust_csv_row(r: &RobustnessRecord) -> String {
    let nums = [
        r.strength,
        r.epsilon,
        r.state_dist_observed,
        r.state_bound,
        r.meas_dist_max(),
        r.meas_bound,
        r.lemma2_max,
        r.lemma2_bound(),
        r.lemma3_max,
        r.lemma3_bound(),
    ];
    let body: Vec<String> = nums.iter().map(|&x| format_float(x)).collect();
    format!("{},{},{},{}", r.d, r.model, body.join(","), r.passed())
}
