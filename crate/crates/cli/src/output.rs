use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use qperc::{Result, SweepCurve};

/// Provenance embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub seeds: Vec<u64>,
    pub version: String,
    /// Seconds.
    pub wall_time: f64,
}

pub struct Recorder {
    command: &'static str,
    params: Value,
    seeds: Vec<u64>,
    started: Instant,
}

impl Recorder {
    pub fn new(command: &'static str, params: impl Serialize, seeds: Vec<u64>) -> Self {
        Recorder {
            command,
            params: serde_json::to_value(params).unwrap_or(Value::Null),
            seeds,
            started: Instant::now(),
        }
    }

    pub fn finish(&self) -> RunManifest {
        RunManifest {
            command: self.command.to_string(),
            params: self.params.clone(),
            seeds: self.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Print `result` with the manifest under `"manifest"`.
    pub fn emit_json(&self, result: impl Serialize) -> Result<()> {
        let mut body = serde_json::to_value(result)?;
        let manifest = serde_json::to_value(self.finish())?;
        match body {
            Value::Object(ref mut map) => {
                map.insert("manifest".into(), manifest);
            }
            other => body = json!({ "result": other, "manifest": manifest }),
        }
        let mut text = serde_json::to_string_pretty(&body)?;
        text.push('\n');
        std::io::stdout().write_all(text.as_bytes())?;
        Ok(())
    }

    /// Curve as CSV with `#`-prefixed manifest lines; angles in units of pi/4.
    pub fn emit_csv(&self, curve: &SweepCurve, out: Option<&Path>) -> Result<()> {
        let manifest = self.finish();
        let mut text = String::new();
        text += &format!("# command: {}\n", manifest.command);
        text += &format!("# params: {}\n", manifest.params);
        text += &format!("# seeds: {:?}\n", manifest.seeds);
        text += &format!("# version: {}\n", manifest.version);
        text += &format!("# wall_time: {:.6}\n", manifest.wall_time);
        text += "theta,value,method\n";
        let method = curve.method.to_string();
        for (t, v) in curve.thetas.iter().zip(&curve.values) {
            text += &format!("{},{},{}\n", t / std::f64::consts::FRAC_PI_4, v, method);
        }
        match out {
            Some(path) => std::fs::write(path, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}
