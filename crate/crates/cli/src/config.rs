//! JSON experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strongsec::channel::{names, AuxScheme, BroadcastChannel};
use strongsec::codec::{Epsilons, EstimationMode};
use strongsec::prob::{Alphabet, CondPmf, JointPmf};
use strongsec::region::RatePoint;
use strongsec::secrecy::Mode;

use crate::error::CliError;

/// Rows and tables must sum to one within this tolerance; they are then
/// renormalized.
pub const SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rates: Vec<RatePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    /// `[cover, select, decode]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secrecy: Option<SecrecySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub inputs: Vec<String>,
    pub y1: Vec<String>,
    pub y2: Vec<String>,
    /// One row per input symbol; keys are `"y1,y2"` labels.
    pub law: Vec<LawRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawRow {
    pub input: String,
    pub outputs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<String>>,
    pub v1: Vec<String>,
    pub v2: Vec<String>,
    /// Keys are `"v1,v2"`, or `"u,v1,v2"` when `u` is given.
    pub joint: BTreeMap<String, f64>,
    /// One row per `"v1,v2"` label; keys are input symbols.
    pub input_map: Vec<MapRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRow {
    pub given: String,
    pub outputs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub configs_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub v1_size: Option<usize>,
    pub v2_size: Option<usize>,
    pub restarts: Option<usize>,
    pub sweeps: Option<usize>,
    pub initial_step: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default)]
    pub mode: EstimationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecrecySpec {
    #[serde(default = "exact")]
    pub mode: Mode,
    #[serde(default)]
    pub m2: usize,
    #[serde(default)]
    pub s2: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Also report leakage averaged over the second user's codewords.
    #[serde(default)]
    pub averaged: bool,
}

impl Default for SecrecySpec {
    fn default() -> Self {
        Self { mode: Mode::Exact, m2: 0, s2: 0, samples: default_samples(), averaged: false }
    }
}

fn exact() -> Mode {
    Mode::Exact
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub grid: Vec<f64>,
    pub r1: f64,
    #[serde(default)]
    pub rco: f64,
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Blocklengths of the exhaustive output-bound check.
    pub typical_n: Option<Vec<usize>>,
    pub epsilon: Option<f64>,
    pub random_joints: Option<usize>,
    pub random_tables: Option<usize>,
    pub random_instances: Option<usize>,
    pub divergence_pairs: Option<usize>,
    /// Blocklengths of the decomposition check on the configured scheme.
    pub decomposition_n: Option<Vec<usize>>,
    pub codebooks: Option<usize>,
}

/// A validated configuration and the digest of the bytes it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub sha256: String,
    pub channel: BroadcastChannel,
    pub scheme: Option<AuxScheme>,
}

impl Loaded {
    pub fn scheme(&self) -> Result<&AuxScheme, CliError> {
        self.scheme.as_ref().ok_or_else(|| CliError::Config("this command needs a `scheme` section".into()))
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&bytes)
}

pub fn parse(bytes: &[u8]) -> Result<Loaded, CliError> {
    use sha2::{Digest, Sha256};
    let config: ExperimentConfig =
        serde_json::from_slice(bytes).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    let channel = channel_of(&config.channel)?;
    let scheme = config.scheme.as_ref().map(|s| scheme_of(s, &channel)).transpose()?;
    if let Some(e) = config.epsilons {
        Epsilons::new(e[0], e[1], e[2]).map_err(|err| CliError::Config(format!("epsilons: {err}")))?;
    }
    for (i, r) in config.rates.iter().enumerate() {
        r.validate().map_err(|e| CliError::Config(format!("rates[{i}]: {e}")))?;
    }
    Ok(Loaded { config, sha256: hex::encode(Sha256::digest(bytes)), channel, scheme })
}

fn alphabet(name: &str, field: &str, symbols: &[String]) -> Result<Alphabet, CliError> {
    if let Some(s) = symbols.iter().find(|s| s.contains(',')) {
        return Err(CliError::Config(format!("{field}: symbol `{s}` must not contain a comma")));
    }
    Alphabet::new(name, symbols.iter().cloned()).map_err(|e| CliError::Config(format!("{field}: {e}")))
}

fn index(a: &Alphabet, symbol: &str, at: &str) -> Result<usize, CliError> {
    a.index_of(symbol.trim())
        .map_err(|_| CliError::Config(format!("{at}: `{symbol}` is not a symbol of {}", a.name())))
}

fn label(axes: &[&Alphabet], key: &str, at: &str) -> Result<usize, CliError> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != axes.len() {
        let want: Vec<&str> = axes.iter().map(|a| a.name()).collect();
        return Err(CliError::Config(format!("{at}: label `{key}` must have the form {}", want.join(","))));
    }
    let mut flat = 0;
    for (a, p) in axes.iter().zip(parts) {
        flat = flat * a.size() + index(a, p, at)?;
    }
    Ok(flat)
}

/// Checks a row of probabilities and renormalizes it.
fn normalized(mut row: Vec<f64>, at: &str) -> Result<Vec<f64>, CliError> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(CliError::Config(format!("{at}: probability {p} is not a finite nonnegative number")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(CliError::Config(format!("{at}: probabilities sum to {total}, expected 1")));
    }
    row.iter_mut().for_each(|p| *p /= total);
    Ok(row)
}

fn rows_keyed<'a, R>(
    rows: &'a [R],
    given: &Alphabet,
    field: &str,
    key: impl Fn(&'a R) -> (&'a str, &'a BTreeMap<String, f64>),
    out: &[&Alphabet],
    lookup: impl Fn(&str, &str) -> Result<usize, CliError>,
) -> Result<Vec<f64>, CliError> {
    let width: usize = out.iter().map(|a| a.size()).product();
    let mut table = vec![None; given.size()];
    for (i, r) in rows.iter().enumerate() {
        let (g, probs) = key(r);
        let at = format!("{field}[{i}] (`{g}`)");
        let gi = lookup(g, &at)?;
        if table[gi].is_some() {
            return Err(CliError::Config(format!("{at}: duplicate row")));
        }
        let mut row = vec![0.0; width];
        for (k, &p) in probs {
            row[label(out, k, &at)?] += p;
        }
        table[gi] = Some(normalized(row, &at)?);
    }
    let mut flat = Vec::with_capacity(given.size() * width);
    for (gi, row) in table.into_iter().enumerate() {
        match row {
            Some(r) => flat.extend(r),
            None => return Err(CliError::Config(format!("{field}: missing row for `{}`", given.symbol(gi)))),
        }
    }
    Ok(flat)
}

pub fn channel_of(spec: &ChannelSpec) -> Result<BroadcastChannel, CliError> {
    let x = alphabet(names::X, "channel.inputs", &spec.inputs)?;
    let y1 = alphabet(names::Y1, "channel.y1", &spec.y1)?;
    let y2 = alphabet(names::Y2, "channel.y2", &spec.y2)?;
    let flat = rows_keyed(&spec.law, &x, "channel.law", |r| (r.input.as_str(), &r.outputs), &[&y1, &y2], |g, at| index(&x, g, at))?;
    BroadcastChannel::from_rows(x, y1, y2, &flat).map_err(|e| CliError::Config(format!("channel: {e}")))
}

pub fn scheme_of(spec: &SchemeSpec, ch: &BroadcastChannel) -> Result<AuxScheme, CliError> {
    let v1 = alphabet(names::V1, "scheme.v1", &spec.v1)?;
    let v2 = alphabet(names::V2, "scheme.v2", &spec.v2)?;
    let u = match &spec.u {
        Some(u) => alphabet(names::U, "scheme.u", u)?,
        None => Alphabet::indexed(names::U, 1).expect("singleton"),
    };
    let axes: Vec<&Alphabet> = if spec.u.is_some() { vec![&u, &v1, &v2] } else { vec![&v1, &v2] };
    let mut cells = vec![0.0; u.size() * v1.size() * v2.size()];
    for (k, &p) in &spec.joint {
        cells[label(&axes, k, "scheme.joint")?] += p;
    }
    let cells = normalized(cells, "scheme.joint")?;
    let vjoint = JointPmf::new(vec![u.clone(), v1.clone(), v2.clone()], cells)
        .map_err(|e| CliError::Config(format!("scheme.joint: {e}")))?;
    let pair = Alphabet::indexed("V1V2", v1.size() * v2.size()).expect("nonempty");
    let x = ch.input();
    let flat = rows_keyed(
        &spec.input_map,
        &pair,
        "scheme.input_map",
        |r| (r.given.as_str(), &r.outputs),
        &[x],
        |g, at| label(&[&v1, &v2], g, at),
    )?;
    let xmap = CondPmf::new(vec![v1, v2], vec![x.clone()], flat)
        .map_err(|e| CliError::Config(format!("scheme.input_map: {e}")))?;
    AuxScheme::new(vjoint, xmap).map_err(|e| CliError::Config(format!("scheme: {e}")))
}

#[cfg(test)]
pub fn channel_spec(ch: &BroadcastChannel) -> ChannelSpec {
    let (x, y1, y2) = (ch.input(), ch.y1(), ch.y2());
    let law = (0..x.size())
        .map(|i| LawRow {
            input: x.symbol(i).to_string(),
            outputs: (0..y1.size() * y2.size())
                .filter(|&o| ch.law().p(i, o) > 0.0)
                .map(|o| (format!("{},{}", y1.symbol(o / y2.size()), y2.symbol(o % y2.size())), ch.law().p(i, o)))
                .collect(),
        })
        .collect();
    ChannelSpec { inputs: x.symbols().to_vec(), y1: y1.symbols().to_vec(), y2: y2.symbols().to_vec(), law }
}

pub fn scheme_spec(s: &AuxScheme) -> SchemeSpec {
    let (u, v1, v2, x) = (s.u(), s.v1(), s.v2(), s.x());
    let with_u = !s.has_trivial_u();
    let mut joint = BTreeMap::new();
    for a in 0..u.size() {
        for b in 0..v1.size() {
            for c in 0..v2.size() {
                let p = s.vjoint().p(&[a, b, c]);
                if p > 0.0 {
                    let key = if with_u {
                        format!("{},{},{}", u.symbol(a), v1.symbol(b), v2.symbol(c))
                    } else {
                        format!("{},{}", v1.symbol(b), v2.symbol(c))
                    };
                    joint.insert(key, p);
                }
            }
        }
    }
    let input_map = (0..v1.size() * v2.size())
        .map(|g| MapRow {
            given: format!("{},{}", v1.symbol(g / v2.size()), v2.symbol(g % v2.size())),
            outputs: (0..x.size())
                .filter(|&o| s.xmap().p(g, o) > 0.0)
                .map(|o| (x.symbol(o).to_string(), s.xmap().p(g, o)))
                .collect(),
        })
        .collect();
    SchemeSpec {
        u: with_u.then(|| u.symbols().to_vec()),
        v1: v1.symbols().to_vec(),
        v2: v2.symbols().to_vec(),
        joint,
        input_map,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use strongsec::presets;

    fn bundled() -> Vec<u8> {
        std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/orthogonal.json")).unwrap()
    }

    #[test]
    fn bundled_config_parses() {
        let l = parse(&bundled()).unwrap();
        assert_eq!(l.channel, presets::orthogonal_clean_channel());
        assert_eq!(l.sha256.len(), 64);
    }

    #[test]
    fn specs_round_trip() {
        let ch = presets::orthogonal_noisy_channel(0.1, 0.25);
        assert_eq!(channel_of(&channel_spec(&ch)).unwrap(), ch);
        let s = presets::dsbs_scheme(0.3);
        assert_eq!(scheme_of(&scheme_spec(&s), &ch).unwrap(), s);
    }

    #[test]
    fn bad_row_is_named() {
        let mut c: ExperimentConfig = serde_json::from_slice(&bundled()).unwrap();
        c.channel.law[2].outputs.values_mut().for_each(|p| *p *= 0.9);
        let err = parse(&serde_json::to_vec(&c).unwrap()).unwrap_err().to_string();
        assert!(err.contains("channel.law[2]") && err.contains("0.9"), "{err}");
    }

    #[test]
    fn unknown_symbols_and_missing_rows() {
        let mut c: ExperimentConfig = serde_json::from_slice(&bundled()).unwrap();
        c.channel.law.pop();
        assert!(parse(&serde_json::to_vec(&c).unwrap()).unwrap_err().to_string().contains("missing row"));
        let mut c: ExperimentConfig = serde_json::from_slice(&bundled()).unwrap();
        c.channel.law[0].outputs.insert("7,0".into(), 0.0);
        assert!(parse(&serde_json::to_vec(&c).unwrap()).unwrap_err().to_string().contains("`7`"));
    }
}
