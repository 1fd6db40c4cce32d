//! Backend specification parsing:
//! `mock:uniform` | `mock:table:<path>` | `mock:cheat:<fn>` | a service URL.
//!
//! Cheat functions accept any synthetic dataset name (evaluated on the
//! 0..199 grid coordinate) or benchmark function name. When the prompt
//! config carries an affine scale the cheat function is wrapped into scaled
//! space, emulating a model that reads the scaled prompt data.

use anyhow::{bail, Context, Result};
use llmp::backend::{CheatFunctionBackend, RemoteBackend, TableLM, UniformDigitLM};
use llmp::bbo::BenchmarkFunction;
use llmp::harness::SyntheticFunction;
use llmp::prompting::PromptConfig;
use llmp::ModelBackend;
use std::sync::Arc;

pub fn cheat_function(name: &str) -> Result<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
    if let Ok(f) = SyntheticFunction::from_name(name) {
        return Ok(Arc::new(move |x: &[f64]| f.value(x[0])));
    }
    if let Ok(f) = BenchmarkFunction::from_name(name) {
        return Ok(Arc::new(move |x: &[f64]| f.eval_unchecked(x)));
    }
    bail!("unknown cheat function {:?}", name)
}

pub fn build_backend(
    spec: &str,
    prompt: &PromptConfig,
    auth_header: &str,
) -> Result<Box<dyn ModelBackend>> {
    if spec == "mock:uniform" {
        return Ok(Box::new(UniformDigitLM::uniform()));
    }
    if let Some(path) = spec.strip_prefix("mock:table:") {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading table spec {}", path))?;
        let table = TableLM::from_json(&text)?;
        return Ok(Box::new(table));
    }
    if let Some(name) = spec.strip_prefix("mock:cheat:") {
        let f = cheat_function(name)?;
        let f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> = match prompt.scale {
            Some(transform) => Arc::new(move |x: &[f64]| transform.apply(f(x))),
            None => f,
        };
        let backend = CheatFunctionBackend::noiseless(f, prompt.pair_format, prompt.format)
            .with_label(&format!("mock:cheat:{}", name));
        return Ok(Box::new(backend));
    }
    if spec.starts_with("mock:") {
        bail!("unknown mock backend {:?}", spec);
    }
    if !spec.starts_with("http://") && !spec.starts_with("https://") {
        bail!("backend {:?} is neither a mock spec nor an http(s) URL", spec);
    }
    let mut backend = RemoteBackend::new(spec);
    if let Ok(token) = std::env::var(llmp::backend::ENV_TOKEN) {
        backend = backend.with_auth(auth_header, &format!("Bearer {}", token));
    }
    Ok(Box::new(backend))
}
